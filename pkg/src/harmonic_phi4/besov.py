"""Littlewood-Paley blocks for H and the associated Besov, Sobolev and time-Hoelder norms.

The cutoff is pinned as follows.  psi is a C-infinity step equal to 1 on [0, 3/4] and
to 0 on [4/3, inf), built from the exp(-1/s) mollifier.  Then

    chi_{-1} = psi,   chi(xi) = psi(xi/2) - psi(xi),   chi_j(xi) = chi(xi / 2^j),

so supp chi is in [3/4, 8/3] and sum_{j=-1}^{J} chi_j(xi) = psi(xi / 2^{J+1}).
The block delta_j multiplies the k-th coefficient by chi_j(sqrt(lambda_k)).
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.integrate import cumulative_trapezoid

from .errors import UsageError
from .fields import Field, FieldPath
from .hermite import basis_values, gauss_hermite_grid

PSI_LO, PSI_HI = 0.75, 4.0 / 3.0
CUTOFF_ID = "psi-step[3/4,4/3]/exp(-1/s)"


def _mollifier(s):
    s = np.asarray(s, dtype=float)
    out = np.zeros_like(s)
    pos = s > 0
    out[pos] = np.exp(-1.0 / s[pos])
    return out


def smooth_step(xi):
    """psi: 1 on [0, 3/4], 0 on [4/3, inf), smooth and monotone in between."""
    xi = np.abs(np.asarray(xi, dtype=float))
    s = (xi - PSI_LO) / (PSI_HI - PSI_LO)
    a = _mollifier(1.0 - s)
    b = _mollifier(s)
    return a / (a + b)


@dataclass(frozen=True)
class DyadicCutoff:
    """Dyadic partition of unity on [0, inf) indexed by j >= -1."""

    name: str = CUTOFF_ID

    def chi_low(self, xi):
        return smooth_step(xi)

    def chi(self, xi):
        xi = np.asarray(xi, dtype=float)
        return smooth_step(xi / 2.0) - smooth_step(xi)

    def chi_j(self, j, xi):
        if j < -1:
            raise UsageError("block index must be >= -1")
        if j == -1:
            return self.chi_low(xi)
        return self.chi(np.asarray(xi, dtype=float) / 2.0 ** j)

    def theta(self, x):
        """theta(x) = chi(sqrt|x|), so that delta_j = theta(H / 2^{2j})."""
        return self.chi(np.sqrt(np.abs(x)))


def build_cutoff():
    return DyadicCutoff()


def max_block(basis):
    """Smallest J whose blocks -1..J sum to one on every eigenvalue of ``basis``."""
    root = np.sqrt(basis.lambda_max)
    J = -1
    while PSI_LO * 2.0 ** (J + 1) < root:
        J += 1
    return J


@dataclass(frozen=True)
class NormSpec:
    sigma: float
    p: float = np.inf
    q: float = np.inf
    J: int = None

    def __post_init__(self):
        if not (1 <= self.p <= np.inf and 1 <= self.q <= np.inf):
            raise UsageError("p and q must lie in [1, inf]")

    def resolved(self, basis):
        J = max_block(basis) if self.J is None else int(self.J)
        if 4.0 ** (J + 1) < basis.lambda_max or J < max_block(basis):
            raise UsageError(f"J={J} does not cover the basis eigenvalues up to {basis.lambda_max}")
        return NormSpec(self.sigma, self.p, self.q, J)


@lru_cache(maxsize=64)
def _multipliers(basis, J):
    cut = build_cutoff()
    root = np.sqrt(basis.eigenvalues)
    out = np.stack([cut.chi_j(j, root) for j in range(-1, J + 1)])
    out.setflags(write=False)
    return out


def block_multipliers(basis, J=None, cutoff=None):
    """Array of shape (J+2, K); row j+1 holds chi_j(sqrt(lambda_k))."""
    J = max_block(basis) if J is None else J
    if cutoff is None or cutoff == DyadicCutoff():
        return _multipliers(basis, J)
    root = np.sqrt(basis.eigenvalues)
    return np.stack([cutoff.chi_j(j, root) for j in range(-1, J + 1)])


def apply_block(u, j, cutoff=None):
    cutoff = cutoff or build_cutoff()
    return Field(u.basis, cutoff.chi_j(j, np.sqrt(u.basis.eigenvalues)) * u.coeffs)


@dataclass(frozen=True, eq=False)
class NormGrid:
    """Evaluation points for spatial L^p norms; ``weights`` is None for the sup norm."""

    points: np.ndarray
    weights: np.ndarray = None


def default_norm_grid(basis, p):
    """Grid used for L^p norms of fields on ``basis``.

    For finite p the Gauss-Hermite rule has weight exp(-p|x|^2/2), matching the decay
    of |f|^p; it is exact for p = 2 and accurate otherwise.  For p = inf it is the union
    of Gauss-Hermite nodes with a uniform box covering the classically allowed region,
    so the returned maximum is a lower bound on the true sup.
    """
    return _default_norm_grid(basis, float(p))


@lru_cache(maxsize=32)
def _default_norm_grid(basis, p):
    d, m = basis.dimension, basis.max_degree
    if np.isfinite(p):
        order = max(m + 2, int(np.ceil(p * (m + 1) / 2)) + 2)
        g = gauss_hermite_grid(d, order, p / 2.0)
        return NormGrid(g.nodes, g.weights)
    gh = gauss_hermite_grid(d, min(2 * m + 2, {1: 400, 2: 80, 3: 24}[d]), 1.0).nodes
    R = np.sqrt(2.0 * m + d) + 1.5
    per_axis = min(4 * (m + 1) + 1, {1: 801, 2: 121, 3: 33}[d])
    ax = np.linspace(-R, R, per_axis)
    box = np.stack([g.ravel() for g in np.meshgrid(*([ax] * d), indexing="ij")], axis=-1)
    return NormGrid(np.vstack([gh, box]))


def lp_norm_values(values, grid, p):
    """L^p norm of sampled values along the last axis."""
    values = np.abs(np.asarray(values, dtype=float))
    if np.isinf(p):
        return values.max(axis=-1)
    if grid.weights is None:
        raise UsageError("finite p needs a weighted grid")
    return (values ** p @ grid.weights) ** (1.0 / p)


class BlockEvaluator:
    """Precomputed block-times-basis matrices for repeated norm evaluation on one grid."""

    def __init__(self, basis, spec, grid=None):
        self.basis = basis
        self.spec = spec.resolved(basis)
        self.grid = grid if grid is not None else default_norm_grid(basis, self.spec.p)
        phi = basis_values(basis, self.grid.points)
        mult = block_multipliers(basis, self.spec.J)
        # (J+2, K, P)
        self.mats = mult[:, :, None] * phi[None, :, :]
        self.weights = 2.0 ** (self.spec.sigma * np.arange(-1, self.spec.J + 1))

    def block_norms(self, coeffs):
        """||delta_j u||_p for coefficient arrays of shape (..., K); result (..., J+2)."""
        coeffs = np.asarray(coeffs, dtype=float)
        vals = np.einsum("...k,jkp->...jp", coeffs, self.mats)
        return lp_norm_values(vals, self.grid, self.spec.p)

    def norm(self, coeffs):
        b = self.block_norms(coeffs) * self.weights
        q = self.spec.q
        if np.isinf(q):
            return b.max(axis=-1)
        return (b ** q).sum(axis=-1) ** (1.0 / q)


def besov_norm(u, spec, grid=None):
    """(sum_j (2^{j sigma} ||delta_j u||_p)^q)^{1/q}, with the sup over j when q = inf."""
    return float(BlockEvaluator(u.basis, spec, grid).norm(u.coeffs))


def sobolev_norm(u, sigma, p=2.0, grid=None):
    """||H^{sigma/2} u||_p; for p = 2 this is exact from the coefficients."""
    c = u.basis.eigenvalues ** (sigma / 2.0) * u.coeffs
    if p == 2 and grid is None:
        return float(np.linalg.norm(c))
    grid = grid if grid is not None else default_norm_grid(u.basis, p)
    return float(lp_norm_values(c @ basis_values(u.basis, grid.points), grid, p))


def holder_norm(path, eta, spatial, grid=None):
    """||f(T1)|| + sup over grid pairs |v-u| >= dt of ||f(v)-f(u)|| / |v-u|^eta."""
    if len(path) < 2:
        raise UsageError("a time-Hoelder norm needs at least two time points")
    ev = BlockEvaluator(path.basis, spatial, grid)
    return float(ev.norm(path.coeffs[0]) + _holder_seminorm(path.coeffs, path.dt, eta, ev))


def _holder_seminorm(coeffs, dt, eta, ev):
    # evaluate all block values once, then scan lags; norms are linear in the values
    vals = np.einsum("mk,jkp->mjp", coeffs, ev.mats)
    best = 0.0
    for lag in range(1, coeffs.shape[0]):
        diff = vals[lag:] - vals[:-lag]
        b = lp_norm_values(diff, ev.grid, ev.spec.p) * ev.weights
        n = b.max(axis=-1) if np.isinf(ev.spec.q) else (b ** ev.spec.q).sum(axis=-1) ** (1 / ev.spec.q)
        best = max(best, float(n.max()) / (lag * dt) ** eta)
    return best


def antiderivative(path):
    """Cumulative-trapezoid f~_t = int_0^t f_s ds on the path's own grid (f~ = 0 at the first time)."""
    c = cumulative_trapezoid(path.coeffs, path.times, axis=0, initial=0.0)
    return FieldPath(path.basis, path.times, c, dict(path.meta))


def neg_holder_norm(path, lam, spatial, grid=None):
    """Norm in C^{-lam}: the C^{1-lam} norm of the running time integral."""
    if not 0 < lam < 1:
        raise UsageError("lam must lie in (0, 1)")
    if len(path) < 2:
        raise UsageError("a time-Hoelder norm needs at least two time points")
    return holder_norm(antiderivative(path), 1.0 - lam, spatial, grid)


def sup_time_norm(path, spatial, grid=None):
    """sup_t ||f_t|| in the given spatial norm (the C_T B norm)."""
    ev = BlockEvaluator(path.basis, spatial, grid)
    return float(np.max(ev.norm(path.coeffs)))
