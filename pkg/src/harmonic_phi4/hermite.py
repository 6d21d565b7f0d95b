"""Eigenbasis of the harmonic oscillator H = -Lap + |x|^2 and its functional calculus.

Eigenfunctions are tensor products of normalized Hermite functions
phi_l(x) = (2^l l! sqrt(pi))^{-1/2} H_l(x) exp(-x^2/2), with H phi = lambda phi and
lambda = 2|l| + d.  Everything here is either coefficient-diagonal (semigroup,
fractional powers) or evaluates the basis on point sets (transforms, kernels).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import comb

import numpy as np

from .errors import CapacityError, DomainError, UsageError
from .fields import Field

MAX_AXIS_DEGREE = 256
MAX_MODES = 500_000


@dataclass(frozen=True)
class EigenMode:
    multi_index: tuple
    eigenvalue: float

    def __post_init__(self):
        if any(l < 0 for l in self.multi_index):
            raise DomainError("multi-index entries must be nonnegative")
        expected = 2 * sum(self.multi_index) + len(self.multi_index)
        if self.eigenvalue != expected:
            raise DomainError(f"eigenvalue {self.eigenvalue} inconsistent with {self.multi_index}")

    @classmethod
    def of(cls, multi_index):
        multi_index = tuple(int(l) for l in multi_index)
        return cls(multi_index, float(2 * sum(multi_index) + len(multi_index)))


class SpectralBasis:
    """First ``K`` eigenmodes in (eigenvalue, lexicographic multi-index) order.

    Construction is deterministic in ``(dimension, K)``, so two bases compare
    equal exactly when those agree.
    """

    def __init__(self, dimension, indices):
        indices = np.array(indices, dtype=np.int64).reshape(-1, dimension)
        indices.setflags(write=False)
        self.dimension = int(dimension)
        self.indices = indices
        ev = (2 * indices.sum(axis=1) + dimension).astype(float)
        ev.setflags(write=False)
        self.eigenvalues = ev

    @property
    def size(self):
        return self.indices.shape[0]

    K = size

    def __len__(self):
        return self.size

    def __eq__(self, other):
        return isinstance(other, SpectralBasis) and (self.dimension, self.size) == (
            other.dimension,
            other.size,
        )

    def __hash__(self):
        return hash((self.dimension, self.size))

    def __repr__(self):
        return f"SpectralBasis(d={self.dimension}, K={self.size})"

    @cached_property
    def modes(self):
        return tuple(EigenMode.of(row) for row in self.indices)

    @property
    def max_degree(self):
        """Largest per-axis Hermite degree appearing in the basis."""
        return int(self.indices.max())

    @property
    def lambda_max(self):
        return float(self.eigenvalues[-1])

    @property
    def is_tensor_complete(self):
        """True when the modes are exactly {0..m}^d for m = max_degree."""
        return self.size == (self.max_degree + 1) ** self.dimension

    def shell_complete_up_to(self, lam):
        """True when every eigenmode with eigenvalue <= ``lam`` is present."""
        return count_modes_below(self.dimension, lam) <= self.size


def shell_size(d, N):
    """Number of multi-indices in N^d with |l| = N."""
    return comb(N + d - 1, d - 1)


def count_modes_below(d, lam):
    """Number of eigenmodes of H in dimension d with eigenvalue <= lam."""
    n_max = int(np.floor((lam - d) / 2.0 + 1e-12))
    return sum(shell_size(d, N) for N in range(n_max + 1)) if n_max >= 0 else 0


def _shell(d, N):
    """All multi-indices with |l| = N, lexicographically increasing."""
    if d == 1:
        return np.array([[N]], dtype=np.int64)
    rows = []
    for first in range(N + 1):
        tail = _shell(d - 1, N - first)
        rows.append(np.column_stack([np.full(tail.shape[0], first, dtype=np.int64), tail]))
    return np.vstack(rows)


def build_basis(d, K, max_degree=MAX_AXIS_DEGREE, max_modes=MAX_MODES):
    """Return the first ``K`` eigenmodes of H in dimension ``d``.

    Raises
    ------
    CapacityError
        If ``K`` exceeds ``max_modes`` or a mode would need a per-axis degree
        above ``max_degree`` (the recurrence is only trusted up to there).
    """
    if d not in (1, 2, 3):
        raise DomainError("dimension must be 1, 2 or 3")
    if K < 1:
        raise DomainError("K must be at least 1")
    if K > max_modes:
        raise CapacityError(f"K={K} exceeds the mode limit {max_modes}")
    shells, total, N = [], 0, 0
    while total < K:
        s = _shell(d, N)
        shells.append(s)
        total += s.shape[0]
        N += 1
    indices = np.vstack(shells)[:K]
    if indices.max() > max_degree:
        raise CapacityError(f"K={K} needs per-axis degree {indices.max()} > {max_degree}")
    return SpectralBasis(d, indices)


def hermite_functions(n_max, x):
    """Normalized Hermite functions phi_0..phi_{n_max} at ``x``; shape (n_max+1, *x.shape).

    Uses the three-term recurrence on the normalized functions themselves, which
    stays in range for large degree where the raw polynomials overflow.
    """
    x = np.asarray(x, dtype=float)
    out = np.empty((n_max + 1,) + x.shape)
    out[0] = np.pi ** -0.25 * np.exp(-0.5 * x * x)
    if n_max >= 1:
        out[1] = np.sqrt(2.0) * x * out[0]
    for n in range(1, n_max):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * x * out[n] - np.sqrt(n / (n + 1.0)) * out[n - 1]
    return out


def _as_points(x, d):
    x = np.asarray(x, dtype=float)
    if d == 1 and (x.ndim == 0 or x.shape[-1] != 1):
        x = x[..., None]
    if x.shape[-1] != d:
        raise UsageError(f"points must have trailing dimension {d}, got shape {x.shape}")
    return x


def basis_values(basis, points):
    """Matrix of phi_k(points); shape (K, *points.shape[:-1])."""
    pts = _as_points(points, basis.dimension)
    m = basis.max_degree
    out = None
    for axis in range(basis.dimension):
        table = hermite_functions(m, pts[..., axis])
        vals = table[basis.indices[:, axis]]
        out = vals if out is None else out * vals
    return out


def eval_eigenfunction(mode, x):
    """phi_l(x) for one mode; ``x`` is a point (or array of points) in R^d."""
    d = len(mode.multi_index)
    pts = _as_points(x, d)
    val = 1.0
    for axis, l in enumerate(mode.multi_index):
        val = val * hermite_functions(l, pts[..., axis])[l]
    return val


@dataclass(frozen=True, eq=False)
class QuadratureGrid:
    """Tensor Gauss-Hermite rule for integrands of the form poly(x) * exp(-a|x|^2).

    ``weights`` already contain the factor exp(a|x|^2), so that
    sum(weights * f(nodes)) approximates the plain Lebesgue integral of f.
    """

    dimension: int
    order: int
    weight_exponent: float
    nodes: np.ndarray
    weights: np.ndarray

    @property
    def size(self):
        return self.weights.size

    def integrate(self, values):
        return np.asarray(values) @ self.weights


def _gh_1d(order, a):
    with np.errstate(all="ignore"):  # numpy's own weights overflow for large orders; unused
        z, _ = np.polynomial.hermite.hermgauss(order)
    # Christoffel form of w_i * exp(z_i^2); avoids underflow of the raw weights.
    lam = 1.0 / np.sum(hermite_functions(order - 1, z) ** 2, axis=0)
    return z / np.sqrt(a), lam / np.sqrt(a)


def gauss_hermite_grid(d, order, weight_exponent=1.0):
    """Tensor Gauss-Hermite grid with ``order`` nodes per axis, exact for poly(x)exp(-a|x|^2)
    of per-axis degree <= 2*order - 1."""
    if order < 1:
        raise DomainError("order must be positive")
    x, w = _gh_1d(order, float(weight_exponent))
    grids = np.meshgrid(*([x] * d), indexing="ij")
    wgrids = np.meshgrid(*([w] * d), indexing="ij")
    nodes = np.stack([g.ravel() for g in grids], axis=-1)
    weights = np.prod(np.stack([g.ravel() for g in wgrids], axis=-1), axis=-1)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureGrid(d, order, float(weight_exponent), nodes, weights)


def _check_grid(basis, grid):
    if grid.dimension != basis.dimension:
        raise UsageError("grid and basis dimensions differ")
    if grid.order < basis.max_degree + 1:
        raise UsageError(
            f"grid order {grid.order} cannot resolve per-axis degree {basis.max_degree}"
        )


def forward_transform(values, basis, grid):
    """Project grid samples onto the basis: c_k = integral of f * phi_k by quadrature.

    ``values`` may carry leading batch axes; a Field is returned for a single sample
    vector and a raw coefficient array otherwise.
    """
    _check_grid(basis, grid)
    values = np.asarray(values, dtype=float)
    if values.shape[-1] != grid.size:
        raise UsageError("values do not match the grid")
    phi = basis_values(basis, grid.nodes)
    coeffs = (values * grid.weights) @ phi.T
    return Field(basis, coeffs) if values.ndim == 1 else coeffs


def inverse_transform(field, grid):
    """Evaluate a field at the grid nodes."""
    _check_grid(field.basis, grid)
    return field.coeffs @ basis_values(field.basis, grid.nodes)


def mehler_kernel(t, x, y, d=None):
    """Closed-form kernel of exp(-tH) on R^d (vectorized over points).

    For d=1 scalars are accepted for ``x`` and ``y``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise DomainError("Mehler kernel requires t > 0")
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if d is None:
        d = 1 if x.ndim == 0 else x.shape[-1]
    x = _as_points(x, d)
    y = _as_points(y, d)
    dm = np.sum((x - y) ** 2, axis=-1)
    dp = np.sum((x + y) ** 2, axis=-1)
    th = np.tanh(t)
    return (2 * np.pi * np.sinh(2 * t)) ** (-d / 2) * np.exp(-dm / (4 * th) - th * dp / 4)


def apply_semigroup(u, t):
    """exp(-tH) u, coefficient-wise."""
    if t < 0:
        raise DomainError("semigroup time must be nonnegative")
    return Field(u.basis, np.exp(-t * u.basis.eigenvalues) * u.coeffs)


def apply_fractional_power(u, gamma):
    """H^gamma u, coefficient-wise."""
    return Field(u.basis, u.basis.eigenvalues ** gamma * u.coeffs)


def h_gamma_diag(basis, gamma, x):
    """Truncated diagonal kernel of H^gamma: sum_{k<K} lambda_k^gamma phi_k(x)^2."""
    phi = basis_values(basis, x)
    lam = basis.eigenvalues.reshape((-1,) + (1,) * (phi.ndim - 1))
    return np.sum(lam ** gamma * phi * phi, axis=0)


def _shell_sums(d, n_max, x):
    """S_N(x) = sum_{|l|=N} phi_l(x)^2 for N = 0..n_max, by convolving per-axis tables."""
    pts = _as_points(x, d)
    out = None
    for axis in range(d):
        sq = hermite_functions(n_max, pts[..., axis]) ** 2
        if out is None:
            out = sq
        else:
            # polynomial product in the degree variable, truncated at n_max
            conv = np.zeros_like(out)
            for a in range(n_max + 1):
                conv[a:] += out[a][None] * sq[: n_max + 1 - a]
            out = conv
    return out


def spectral_function(basis, j, x):
    """Psi_j(x) = sum of phi_k(x)^2 over modes with 2^{2j} <= lambda_k <= 2^{2j+2}.

    Evaluated through per-shell sums, so the cost does not grow with the number
    of modes in the band; ``basis`` only certifies the truncation.
    """
    lo, hi = 4.0 ** j, 4.0 ** (j + 1)
    if not basis.shell_complete_up_to(hi):
        raise CapacityError(f"basis {basis} does not contain every mode with eigenvalue <= {hi}")
    d = basis.dimension
    n_max = int(np.floor((hi - d) / 2))
    shells = _shell_sums(d, n_max, x)
    lam = 2 * np.arange(n_max + 1) + d
    mask = (lam >= lo) & (lam <= hi)
    return np.sum(shells[mask], axis=0)


def h_gamma_diag_shells(d, gamma, n_max, x):
    """sum over complete shells |l| <= n_max of lambda^gamma phi_l(x)^2."""
    shells = _shell_sums(d, n_max, x)
    lam = (2 * np.arange(n_max + 1) + d).astype(float)
    lam = lam.reshape((-1,) + (1,) * (shells.ndim - 1))
    return np.sum(lam ** gamma * shells, axis=0)


def gaussian_moments(t, x, d):
    """Centre, per-axis variance and total mass of w -> K_t(x, w) viewed as a Gaussian."""
    x = np.asarray(x, dtype=float)
    c2 = np.cosh(2 * t)
    th2 = np.tanh(2 * t)
    centre = x / c2
    mass = c2 ** (-d / 2) * np.exp(-np.sum(x * x, axis=-1) * th2 / 2)
    return centre, th2, mass


def heat_kernel_lp_norm(t, x, p, d=3, order=16):
    """Quadrature estimate of ||K_t(x, .)||_{L^p(R^d)}; p = inf takes the peak value.

    K_t(x, .)^p is Gaussian in the second variable, so a Gauss-Hermite rule centred
    and scaled to that Gaussian integrates it to rounding error.
    """
    if t <= 0:
        raise DomainError("t must be positive")
    x = _as_points(x, d).reshape(d)
    centre, var, _ = gaussian_moments(t, x, d)
    if np.isinf(p):
        return float(mehler_kernel(t, x, centre, d))
    z, w = _gh_1d(order, 1.0)
    s = np.sqrt(var / p)
    grids = np.meshgrid(*([z] * d), indexing="ij")
    wg = np.prod(np.meshgrid(*([w] * d), indexing="ij"), axis=0).ravel()
    pts = centre + s * np.sqrt(2.0) * np.stack([g.ravel() for g in grids], axis=-1)
    vals = mehler_kernel(t, x[None, :], pts, d) ** p
    integral = np.sum(wg * vals) * (s * np.sqrt(2.0)) ** d
    return float(integral ** (1.0 / p))


def fit_eigenvalue_growth(basis):
    """Least-squares fit of lambda_k ~ c k^{1/d}; returned for reporting only."""
    k = np.arange(1, basis.size)
    lam = basis.eigenvalues[1:]
    (c,), *_ = np.linalg.lstsq((k ** (1.0 / basis.dimension))[:, None], lam, rcond=None)
    return float(c)
