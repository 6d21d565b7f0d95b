"""Regularized noise, exact sampling of the stochastic convolution, covariance and counterterms.

With eps_n = 2^-n, mode k of the stochastic convolution solves
d Psi_k = -lambda_k Psi_k dt + exp(-eps_n lambda_k) d beta_k with Psi_k(0) = 0.  All levels
n are driven by the same Brownian motions beta_k, so Psi^(n) = exp(-eps_n H) Z with Z the
unit-noise Ornstein-Uhlenbeck process.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.special import gamma as gamma_fn
from scipy.special import roots_genlaguerre, roots_hermitenorm, roots_legendre

from .errors import DomainError, UsageError
from .fields import FieldPath
from .hermite import basis_values, gauss_hermite_grid, gaussian_moments, mehler_kernel
from .rng import GENERATOR_ID, ou_unit_paths, split_seed

TAG_NOISE = 0


def eps(n):
    if n < 0:
        raise DomainError("regularization level must be nonnegative")
    return 2.0 ** (-n)


@dataclass(frozen=True)
class NoiseConfig:
    basis: object
    n: int
    seed: int
    dt: float
    T: float
    substeps: int = 1

    def __post_init__(self):
        if self.n < 0:
            raise DomainError("n must be nonnegative")
        if self.dt <= 0 or self.T < self.dt:
            raise DomainError("need dt > 0 and T >= dt")
        if self.substeps < 1:
            raise DomainError("substeps must be positive")

    @property
    def steps(self):
        return int(round(self.T / self.dt))

    @property
    def times(self):
        return self.dt * np.arange(self.steps + 1)


def unit_ou(basis, seed, dt, record_steps, replicas=(0,), substeps=1):
    """Unit-noise OU coefficients at the given coarse steps; shape (R, len(record_steps), K).

    The exact recursion runs on the fine step dt / substeps; a coarse step of size dt is
    ``substeps`` fine steps of the same Brownian path, so halving dt while doubling
    ``substeps`` reproduces the same trajectory at the shared times.
    """
    record = np.asarray(record_steps, dtype=np.int64)
    if record.ndim != 1 or np.any(np.diff(record) < 0) or (record.size and record[0] < 0):
        raise UsageError("record_steps must be sorted and nonnegative")
    reps = np.atleast_1d(np.asarray(replicas, dtype=np.int64))
    out = np.empty((reps.size, record.size, basis.size))
    k0, k1 = split_seed(seed)
    n_fine = int(record[-1]) * substeps if record.size else 0
    ou_unit_paths(
        k0, k1, TAG_NOISE, reps, basis.eigenvalues.astype(float), n_fine,
        dt / substeps, record * substeps, out,
    )
    return out


def sample_stoch_conv(config, replica=0, record_steps=None):
    """Psi^(n) on the config time grid (or only at ``record_steps``) for one replica."""
    steps = np.arange(config.steps + 1) if record_steps is None else np.asarray(record_steps)
    z = unit_ou(config.basis, config.seed, config.dt, steps, (replica,), config.substeps)[0]
    coeffs = z * np.exp(-eps(config.n) * config.basis.eigenvalues)
    meta = {
        "n": config.n, "seed": int(config.seed), "replica": int(replica), "dt": config.dt,
        "substeps": config.substeps, "generator": GENERATOR_ID,
    }
    times = config.dt * steps
    return FieldPath(config.basis, times, coeffs, meta)


def sample_ensemble(config, replicas, record_steps):
    """Psi^(n) coefficients for many replicas at a few steps; shape (R, S, K)."""
    z = unit_ou(config.basis, config.seed, config.dt, record_steps, replicas, config.substeps)
    return z * np.exp(-eps(config.n) * config.basis.eigenvalues)


def ou_variance(basis, n, t):
    """Var Psi_k(t) = exp(-2 eps lambda)(1 - exp(-2 lambda t)) / (2 lambda)."""
    lam = basis.eigenvalues
    return np.exp(-2 * eps(n) * lam) * -np.expm1(-2 * lam * t) / (2 * lam)


# covariance -----------------------------------------------------------------------


def _dyadic_quad(fn, lo, hi, epsabs=1e-10):
    """quad over [lo, hi] split at lo * 2^i, which tames the sigma^{-d/2} growth near lo."""
    if hi <= lo:
        return 0.0
    edges = [lo]
    while edges[-1] * 2 < hi:
        edges.append(edges[-1] * 2)
    edges.append(hi)
    tol = epsabs / len(edges)
    return sum(quad(fn, a, b, epsabs=tol, epsrel=1e-12, limit=200)[0] for a, b in zip(edges, edges[1:]))


def covariance_exact(n, t1, t2, y1, y2, d=None):
    """E[Psi_t1(y1) Psi_t2(y2)] = 1/2 int_{|t2-t1|+2eps}^{t1+t2+2eps} K_sigma(y1, y2) dsigma."""
    if t1 < 0 or t2 < 0:
        raise DomainError("times must be nonnegative")
    y1 = np.atleast_1d(np.asarray(y1, dtype=float))
    y2 = np.atleast_1d(np.asarray(y2, dtype=float))
    d = y1.size if d is None else d
    e = eps(n)
    lo, hi = abs(t2 - t1) + 2 * e, t1 + t2 + 2 * e
    return 0.5 * _dyadic_quad(lambda s: float(mehler_kernel(s, y1, y2, d)), lo, hi)


def covariance_modes(basis, n, t1, t2, y1, y2):
    """Covariance of the K-mode truncation, summed in closed form."""
    lam = basis.eigenvalues
    p1 = basis_values(basis, y1)
    p2 = basis_values(basis, y2)
    e = eps(n)
    w = np.exp(-2 * e * lam) * (np.exp(-lam * abs(t2 - t1)) - np.exp(-lam * (t1 + t2))) / (2 * lam)
    return float(np.sum(w * p1 * p2))


def coupling_variance(basis, n, m, t, x):
    """E[(Psi^(n) - Psi^(m))_t(x)^2] when both levels share their Brownian motions."""
    lam = basis.eigenvalues
    phi = basis_values(basis, x)
    diff = np.exp(-eps(n) * lam) - np.exp(-eps(m) * lam)
    return float(np.sum(diff ** 2 * phi ** 2 * -np.expm1(-2 * lam * t) / (2 * lam)))


# c1 --------------------------------------------------------------------------------


def diag_kernel_2s(sigma, x2, d):
    """K_{2 sigma}(x, x) = (2 pi sinh 4 sigma)^{-d/2} exp(-tanh(2 sigma)|x|^2)."""
    return (2 * np.pi * np.sinh(4 * sigma)) ** (-d / 2) * np.exp(-np.tanh(2 * sigma) * x2)


def compute_c1(n, t, x, d=None):
    """c1 = int_eps^{t+eps} K_{2 sigma}(x, x) dsigma by adaptive quadrature (abs tol 1e-10)."""
    if t < 0:
        raise DomainError("t must be nonnegative")
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size if d is None else d
    x2 = float(x @ x)
    e = eps(n)
    return _dyadic_quad(lambda s: float(diag_kernel_2s(s, x2, d)), e, t + e)


def compute_c1_modes(basis, n, t, x):
    """Variance of the K-mode truncation at (t, x); broadcasts over arrays of t."""
    phi2 = basis_values(basis, x) ** 2
    t = np.asarray(t, dtype=float)
    var = ou_variance(basis, n, t[..., None])
    return var @ phi2 if phi2.ndim == 1 else var @ phi2


# c2 ---------------------------------------------------------------------------------


def _geometric_pieces(lo, hi, first):
    """Edges lo, lo+first, lo+2 first, lo+4 first, ... capped at hi."""
    edges = [lo]
    width = first
    while edges[-1] + width < hi:
        edges.append(edges[-1] + width)
        if len(edges) > 2:
            width *= 2
    edges.append(hi)
    return np.array(edges)


def _gl_nodes(edges, order):
    z, w = roots_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    nodes = 0.5 * (b - a) * z + 0.5 * (a + b)
    weights = 0.5 * (b - a) * w
    return nodes.ravel(), weights.ravel()


@dataclass(frozen=True)
class C2Quadrature:
    """Node counts for the Mehler route to c2.

    ``z_order`` Gauss-Hermite nodes along the direction of x, ``r_order`` generalized
    Gauss-Laguerre nodes for the squared transverse radius, ``u_order`` and ``sigma_order``
    Gauss-Legendre nodes per geometric piece of the outer time and inner kernel integrals.
    """

    z_order: int = 48
    r_order: int = 48
    u_order: int = 16
    sigma_order: int = 10


def _w_reduction(d, q):
    """Standard-normal expectation nodes in reduced coordinates (z1, rho = |z_perp|^2)."""
    z1, wz = roots_hermitenorm(q.z_order)
    wz = wz / np.sqrt(2 * np.pi)
    if d == 1:
        return z1, np.zeros_like(z1), wz
    alpha = (d - 3) / 2.0
    xi, wr = roots_genlaguerre(q.r_order, alpha)
    wr = wr / gamma_fn(alpha + 1)
    Z1, XI = np.meshgrid(z1, xi, indexing="ij")
    W = np.outer(wz, wr)
    return Z1.ravel(), 2.0 * XI.ravel(), W.ravel()


def _kernel_r(s, a, b2, r, d):
    """K_s(x, w) written through r = |x|, a = x.w / |x| and b2 = |w|^2 (broadcasting)."""
    th = np.tanh(s)
    dm = r * r - 2 * r * a + b2
    dp = r * r + 2 * r * a + b2
    return (2 * np.pi * np.sinh(2 * s)) ** (-d / 2) * np.exp(-dm / (4 * th) - th * dp / 4)


def compute_c2(n, t, x, quad=None, d=None):
    """c2 = 2 int_0^t du int dw K_u(x, w) C_{t, t-u}(x, w)^2 with the exact Mehler kernel.

    The w-integral uses that K_u(x, .) is a Gaussian with mean x / cosh 2u and variance
    tanh 2u per axis; the remaining integrand depends on w only through x.w and |w|^2,
    which reduces the d-dimensional integral to two variables.
    """
    if t < 0:
        raise DomainError("t must be nonnegative")
    if t == 0:
        return 0.0
    q = quad or C2Quadrature()
    x = np.atleast_1d(np.asarray(x, dtype=float))
    d = x.size if d is None else d
    r = float(np.linalg.norm(x))
    e = eps(n)
    z1, rho, wz = _w_reduction(d, q)
    u_nodes, u_w = _gl_nodes(_geometric_pieces(0.0, t, 2 * e), q.u_order)
    total = 0.0
    for u, wu in zip(u_nodes, u_w):
        centre, var, mass = gaussian_moments(u, np.array([r]), 1)
        sd = np.sqrt(var)
        a = centre[0] + sd * z1  # component of w along x
        b2 = a * a + var * rho
        lo, hi = u + 2 * e, 2 * t - u + 2 * e
        s_nodes, s_w = _gl_nodes(_geometric_pieces(lo, hi, lo), q.sigma_order)
        ker = _kernel_r(s_nodes[:, None], a[None, :], b2[None, :], r, d)
        C = 0.5 * (s_w @ ker)
        mass_d = np.cosh(2 * u) ** (-d / 2) * np.exp(-r * r * np.tanh(2 * u) / 2)
        total += wu * mass_d * float(wz @ (C * C))
    return 2.0 * total


def compute_c2_modes(basis, n, times, x, u_order=16):
    """c2 for the K-mode truncation, at each time in ``times`` (vector) and one point x.

    Truncated kernels are finite sums of basis functions, so the w-integral is done
    exactly by Gauss-Hermite quadrature for weight exp(-3|w|^2/2).
    """
    times = np.atleast_1d(np.asarray(times, dtype=float))
    lam = basis.eigenvalues
    e = eps(n)
    phix = basis_values(basis, x)
    m = basis.max_degree
    grid = gauss_hermite_grid(basis.dimension, -(-(3 * m + 1) // 2), 1.5)
    phiw = basis_values(basis, grid.nodes)  # (K, P)
    damp = np.exp(-2 * e * lam) * phix / (2 * lam)
    out = np.zeros(times.size)
    for i, t in enumerate(times):
        if t <= 0:
            continue
        u, wu = _gl_nodes(_geometric_pieces(0.0, t, min(2 * e, t)), u_order)
        g = damp * (np.exp(-np.outer(u, lam)) - np.exp(-np.outer(2 * t - u, lam)))  # (U, K)
        Cw = g @ phiw
        Kw = (np.exp(-np.outer(u, lam)) * phix) @ phiw
        out[i] = 2.0 * wu @ ((Kw * Cw * Cw) @ grid.weights)
    return out


# renormalization table ---------------------------------------------------------------

METHODS = ("mehler", "modes")


@dataclass(frozen=True, eq=False)
class RenormTable:
    """c1, c2 and 3 c1 - 9 c2 on (time grid) x (spatial points)."""

    n: int
    times: np.ndarray
    points: np.ndarray
    c1: np.ndarray
    c2: np.ndarray
    method: str = "mehler"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        shape = (len(self.times), len(self.points))
        if self.c1.shape != shape or self.c2.shape != shape:
            raise UsageError("table arrays must have shape (times, points)")

    @property
    def combined(self):
        return 3.0 * self.c1 - 9.0 * self.c2

    def columns(self, points):
        """Indices of ``points`` among the tabulated points (matched to 1e-10)."""
        points = np.asarray(points, dtype=float).reshape(-1, self.points.shape[1])
        lookup = {tuple(np.round(p, 10)): i for i, p in enumerate(self.points)}
        try:
            return np.array([lookup[tuple(np.round(p, 10))] for p in points], dtype=int)
        except KeyError as exc:
            raise UsageError("point not present in the renormalization table") from exc

    def check_times(self, times):
        times = np.asarray(times, dtype=float)
        if times.shape != self.times.shape or not np.allclose(times, self.times, atol=1e-12):
            raise UsageError("time grid differs from the renormalization table")

    def at(self, points, times=None):
        """(c1, c2) restricted to ``points``; arrays of shape (times, points)."""
        if times is not None:
            self.check_times(times)
        cols = self.columns(points)
        return self.c1[:, cols], self.c2[:, cols]


def _symmetric_unique(points):
    """Counterterms depend on x only through |x| (and per-axis symmetry); deduplicate."""
    key = np.round(np.sort(np.abs(points), axis=-1), 13)
    uniq, inverse = np.unique(key, axis=0, return_inverse=True)
    return uniq, inverse.ravel()


def build_renorm_table(n, times, points, method="mehler", basis=None, quad=None, with_c2=True):
    """Tabulate c1 and c2 at every (time, point) cell.

    ``method="mehler"`` integrates the exact kernel (the untruncated counterterms);
    ``method="modes"`` uses the K-mode truncation of ``basis``, which are the exact
    expectations for fields sampled on that basis.
    """
    if method not in METHODS:
        raise UsageError(f"unknown method {method!r}")
    if method == "modes" and basis is None:
        raise UsageError("the modes method needs a basis")
    times = np.asarray(times, dtype=float)
    points = np.asarray(points, dtype=float)
    if points.ndim == 1:
        points = points[:, None]
    d = points.shape[1]
    uniq, inverse = _symmetric_unique(points)
    c1u = np.zeros((times.size, len(uniq)))
    c2u = np.zeros_like(c1u)
    for j, x in enumerate(uniq):
        if method == "modes":
            c1u[:, j] = compute_c1_modes(basis, n, times, x)
            if with_c2:
                c2u[:, j] = compute_c2_modes(basis, n, times, x)
        else:
            c1u[:, j] = [compute_c1(n, t, x, d) for t in times]
            if with_c2:
                c2u[:, j] = [compute_c2(n, t, x, quad, d) for t in times]
    meta = {"d": d, "with_c2": bool(with_c2)}
    return RenormTable(n, times, points, c1u[:, inverse], c2u[:, inverse], method, meta)
