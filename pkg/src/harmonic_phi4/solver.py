"""Direct and paracontrolled (v, w) solvers for (d_t + H) X = -X^3 + c X + xi, and their comparison.

Direct scheme (exponential Euler, exact Ornstein-Uhlenbeck increments):

    X_{m+1} = exp(-hH) X_m + h phi1(hH) P(-X_m^3 + c_m X_m) + eta_m,
    eta_m = Psi_{m+1} - exp(-hH) Psi_m.

Auxiliary system, with U = v + w and Y = U - IPsi3 (so X = Psi + Y):

    (d_t + H) v = F = -3 Y < Psi2,                          v_0 = X_0,
    (d_t + H) w = G,                                          w_0 = 0,
    G = -U^3 - 3 com - 3 w o Psi2 - 3 Y > Psi2 + tau0 + tau1 U + tau2 U^2,

where com = com1 o Psi2 + [<, o](-3Y, IPsi2, Psi2) and
com1 = exp(-tH) v_0 - 3 (I(Y < Psi2) - Y < IPsi2).  The tau's are split into ordinary
parts and the three terms driven by the resonant diagrams,

    6 Y . (Psi o IPsi3) + 9 Y . (Psi2 o IPsi2 - c2) + 3 (Psi2 o IPsi3 - 3 c2 Psi),

whose mild integrals are taken in the Young sense against the running integrals.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .diagrams import etd_weights, mild_convolve_coeffs, phi1
from .errors import ConvergenceError, UsageError
from .fields import Field, FieldPath

MODES = ("direct", "auxiliary", "both")


@dataclass(frozen=True, eq=False)
class SolveConfig:
    X0: Field
    n: int
    dt: float
    T: float
    picard_iters: int = 60
    tol: float = 1e-12
    blowup_threshold: float = np.inf
    mode: str = "both"
    young_level: int = 6

    def __post_init__(self):
        if self.dt <= 0:
            raise UsageError("dt must be positive")
        if self.picard_iters < 1:
            raise UsageError("picard_iters must be at least 1")
        if self.mode not in MODES:
            raise UsageError(f"mode must be one of {MODES}")
        if self.young_level < 0:
            raise UsageError("young_level must be nonnegative")

    @property
    def steps(self):
        return int(round(self.T / self.dt))

    @property
    def times(self):
        return self.dt * np.arange(self.steps + 1)


@dataclass
class SolutionBundle:
    X: FieldPath = None
    v: FieldPath = None
    w: FieldPath = None
    reconstructed: FieldPath = None
    residuals: np.ndarray = None
    stop_reason: str = "horizon"
    t_max: float = None
    diagnostics: dict = field(default_factory=dict)


# blow-up --------------------------------------------------------------------------


@dataclass(frozen=True)
class BlowupDecision:
    stop: bool
    index: int = None
    t_max: float = None


def blowup_monitor(proxy, times, threshold):
    """First index where ``proxy`` (one value per time) exceeds ``threshold``."""
    proxy = np.asarray(proxy, dtype=float)
    if not np.isfinite(threshold):
        bad = ~np.isfinite(proxy)
    else:
        bad = ~(proxy <= threshold)
    if not bad.any():
        return BlowupDecision(False)
    i = int(np.argmax(bad))
    return BlowupDecision(True, i, float(times[i]))


def node_sup(space, coeffs):
    """max over cubic product nodes of |X|: a lower bound for the sup norm."""
    return np.max(np.abs(space.values(coeffs, 3)), axis=-1)


# direct scheme --------------------------------------------------------------------------


def solve_direct(config, psi, table, space, cubic=1.0, renorm=True):
    """Exponential Euler for the renormalized equation driven by the sampled Psi path.

    ``cubic`` scales the -X^3 term and ``renorm=False`` drops c X; with both off the scheme
    reproduces exp(-tH) X_0 + Psi exactly.
    """
    space.check(psi, config.X0)
    basis = psi.basis
    M = len(psi)
    if not np.allclose(psi.dt, config.dt, rtol=1e-9):
        raise UsageError("Psi path time step differs from the solver step")
    decay, gain = etd_weights(basis, config.dt)
    if renorm:
        c1, c2 = table.at(space.nodes(3), psi.times)
        c = 3 * c1 - 9 * c2
    else:
        c = np.zeros((M, space.grid(3).size))
    eta = psi.coeffs[1:] - decay * psi.coeffs[:-1]
    X = np.empty((M, basis.size))
    X[0] = config.X0.coeffs
    stop, t_max, last = "horizon", None, M - 1
    for m in range(M - 1):
        vals = space.values(X[m], 3)
        if not np.max(np.abs(vals)) <= config.blowup_threshold:
            stop, t_max, last = "blowup", float(psi.times[m]), m
            break
        nonlin = space.project(-cubic * vals ** 3 + c[m] * vals, 3)
        X[m + 1] = decay * X[m] + gain * nonlin + eta[m]
        if not np.all(np.isfinite(X[m + 1])):
            stop, t_max, last = "blowup", float(psi.times[m + 1]), m
            break
    else:
        if not np.max(np.abs(space.values(X[-1], 3))) <= config.blowup_threshold:
            stop, t_max, last = "blowup", float(psi.times[-1]), M - 1
    path = FieldPath(basis, psi.times[: last + 1], X[: last + 1], {"n": config.n, "scheme": "etd1"})
    return SolutionBundle(X=path, stop_reason=stop, t_max=t_max)


# auxiliary system --------------------------------------------------------------------------


def phi2_linear(z):
    """int_0^1 exp(-(1-theta) z) theta dtheta = (z - 1 + exp(-z)) / z^2."""
    z = np.asarray(z, dtype=float)
    out = np.full_like(z, 0.5)
    big = np.abs(z) > 1e-4
    out[big] = (z[big] + np.expm1(-z[big])) / z[big] ** 2
    small = ~big
    out[small] = 0.5 - z[small] / 6 + z[small] ** 2 / 24
    return out


def young_step_weights(basis, h, level):
    """Weights (D0, D1) of the per-step Riemann sum with 2^level sub-intervals.

    On a step the integrand u is linear and the running integral of the driver is linear,
    so sum_i exp(-(h - theta_i h) H)(u(theta_i) . dF_i) equals D0 * P(u_m dF) + D1 * P(u_{m+1} dF)
    with dF the increment over the whole step.
    """
    n = 2 ** level
    theta = np.arange(n) / n
    lam = basis.eigenvalues
    decay = np.exp(-np.outer(h * (1 - theta), lam))  # (n, K)
    D0 = ((1 - theta) @ decay) / n
    D1 = (theta @ decay) / n
    return D0, D1


def young_path_integral(u, dF, basis, h, level, space):
    """Running Young mild integral over all steps; u (M, K) or None for u = 1, dF (M-1, K).

    Returns the (M, K) path of int_0^{t_m} exp(-(t_m - r)H)(u_r dF_r).
    """
    D0, D1 = young_step_weights(basis, h, level)
    decay = np.exp(-h * basis.eigenvalues)
    if u is None:
        contrib = (D0 + D1) * dF
    else:
        p0 = space.product(u[:-1], dF)
        p1 = space.product(u[1:], dF)
        contrib = D0 * p0 + D1 * p1
    out = np.zeros((dF.shape[0] + 1, basis.size))
    for m in range(dF.shape[0]):
        out[m + 1] = decay * out[m] + contrib[m]
    return out


def ordinary_path_integral(u, f, basis, h, space):
    """Exponential quadrature of the linear interpolant of u . f (the smooth-driver reference)."""
    g = f if u is None else space.product(u, f)
    z = h * basis.eigenvalues
    a1 = h * (phi1(z) - phi2_linear(z))
    a2 = h * phi2_linear(z)
    decay = np.exp(-z)
    out = np.zeros_like(g)
    for m in range(g.shape[0] - 1):
        out[m + 1] = decay * out[m] + a1 * g[m] + a2 * g[m + 1]
    return out


@dataclass(frozen=True, eq=False)
class _Terms:
    """Sweep-independent pieces of G built from the drivers."""

    tau0: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    young_const: np.ndarray  # running Young integral of the u = 1 term


def _ordinary_taus(Z, space):
    P = lambda *c: space.product(*c)  # noqa: E731
    pair = space.pair
    psi, i3 = Z.psi.coeffs, Z.ipsi3.coeffs
    i3sq = P(i3, i3)
    comm = pair("res", pair("lo", i3, i3), psi) - space.project(
        space.values(i3, 3) * space.pair_values("res", i3, psi, 3), 3
    )
    tau0 = P(i3, i3, i3) - 3 * (
        pair("hi", psi, i3sq) + pair("lo", psi, i3sq) + pair("res", psi, pair("res", i3, i3)) + 2 * comm
    )
    tau1 = 6 * (pair("hi", i3, psi) + pair("lo", i3, psi)) - 3 * i3sq
    tau2 = -3 * psi + 3 * i3
    return tau0, tau1, tau2


def _increments(path):
    return np.diff(path.coeffs, axis=0)


def _g_ordinary(U, Y, w, com1, Z, terms, space):
    P = space.product
    pair = space.pair
    psi2, ipsi2 = Z.psi2.coeffs, Z.ipsi2.coeffs
    com2 = -3 * (
        pair("res", pair("lo", Y, ipsi2), psi2)
        - space.project(space.values(Y, 3) * space.pair_values("res", ipsi2, psi2, 3), 3)
    )
    com = pair("res", com1, psi2) + com2
    return (
        -P(U, U, U)
        - 3 * com
        - 3 * pair("res", w, psi2)
        - 3 * pair("hi", Y, psi2)
        + terms.tau0
        + P(terms.tau1, U)
        + P(terms.tau2, U, U)
    )


def solve_auxiliary(v0, w0, Z, config, space, young="young"):
    """Picard iteration of the mild (v, w) system on the whole time grid.

    ``young`` selects how the three resonant-driver terms are integrated: "young" (dyadic
    Riemann sums against the running integrals, level ``config.young_level`` per step) or
    "ordinary" (exponential quadrature of the linearly interpolated integrand).
    """
    space.check(v0, w0, Z.psi)
    basis = Z.basis
    h = Z.psi.dt
    if not np.isclose(h, config.dt, rtol=1e-9):
        raise UsageError("driver time step differs from the solver step")
    M = len(Z.psi)
    lam = basis.eigenvalues
    free = np.exp(-np.outer(Z.times, lam))
    v_free, w_free = free * v0.coeffs, free * w0.coeffs
    tau0, tau1, tau2 = _ordinary_taus(Z, space)
    i3 = Z.ipsi3.coeffs
    if young == "young":
        L = config.young_level
        const = young_path_integral(None, _increments(Z.anti_psi2_ipsi3), basis, h, L, space)
        d_a, d_b = _increments(Z.anti_psi_ipsi3), _increments(Z.anti_psi2_ipsi2)
        young_y = lambda Y: young_path_integral(Y, 6 * d_a + 9 * d_b, basis, h, L, space)  # noqa: E731
    elif young == "ordinary":
        const = ordinary_path_integral(None, Z.psi2_ipsi3.coeffs, basis, h, space)
        f_ab = 6 * Z.psi_ipsi3.coeffs + 9 * Z.psi2_ipsi2.coeffs
        young_y = lambda Y: ordinary_path_integral(Y, f_ab, basis, h, space)  # noqa: E731
    else:
        raise UsageError("young must be 'young' or 'ordinary'")
    terms = _Terms(tau0, tau1, tau2, 3 * const)

    v, w = v_free.copy(), w_free.copy()
    history = []
    grow = 0
    for sweep in range(config.picard_iters):
        U = v + w
        Y = U - i3
        F = -3 * space.pair("lo", Y, Z.psi2.coeffs)
        J = mild_convolve_coeffs(F, basis, h)
        com1 = v_free + J + 3 * space.pair("lo", Y, Z.ipsi2.coeffs)
        G = _g_ordinary(U, Y, w, com1, Z, terms, space)
        v_new = v_free + J
        w_new = w_free + mild_convolve_coeffs(G, basis, h) + terms.young_const + young_y(Y)
        if not (np.all(np.isfinite(v_new)) and np.all(np.isfinite(w_new))):
            raise ConvergenceError("Picard iterate is not finite", {"sweep": sweep, "history": history})
        diff = float(max(np.abs(v_new - v).max(), np.abs(w_new - w).max()))
        history.append(diff)
        v, w = v_new, w_new
        if diff < config.tol:
            break
        grow = grow + 1 if len(history) > 1 and diff > history[-2] else 0
        if grow >= 3:
            raise ConvergenceError(
                "Picard differences grew in three consecutive sweeps",
                {"sweep": sweep, "history": history},
            )
    meta = {"n": Z.n, "young": young, "young_level": config.young_level}
    vp = FieldPath(basis, Z.times, v, meta)
    wp = FieldPath(basis, Z.times, w, meta)
    rec = FieldPath(basis, Z.times, Z.psi.coeffs - i3 + v + w, meta)
    return SolutionBundle(
        v=vp, w=wp, reconstructed=rec,
        diagnostics={"sweeps": len(history), "sweep_differences": history, "converged": history[-1] < config.tol},
    )


def contraction_rate(history):
    """Geometric-mean ratio of successive Picard differences."""
    h = np.asarray(history, dtype=float)
    h = h[h > 0]
    if h.size < 3:
        return float("nan")
    return float(np.exp(np.mean(np.diff(np.log(h[: max(3, h.size - 2)])))))


# comparison ----------------------------------------------------------------------------


def weighted_norm(coeffs, basis, power=-0.25):
    """sqrt(sum lambda_k^{2 power} c_k^2): the H^{2 power} norm (default H^{-1/2})."""
    return np.sqrt(np.sum((basis.eigenvalues ** power * np.asarray(coeffs)) ** 2, axis=-1))


@dataclass(frozen=True)
class ResidualReport:
    per_step: np.ndarray
    max_residual: float
    initial: float


def reconstruct_and_compare(bundle):
    """Residual between Psi - IPsi3 + v + w and the direct solution, per time step."""
    if bundle.X is None or bundle.reconstructed is None:
        raise UsageError("the bundle needs both the direct and the auxiliary solution")
    M = min(len(bundle.X), len(bundle.reconstructed))
    diff = bundle.reconstructed.coeffs[:M] - bundle.X.coeffs[:M]
    res = weighted_norm(diff, bundle.X.basis)
    bundle.residuals = res
    return ResidualReport(res, float(res.max()), float(res[0]))


def fitted_order(residuals, ratio=2.0):
    """Observed order from residuals at successively refined steps (refinement ``ratio``)."""
    r = np.asarray(residuals, dtype=float)
    if r.size < 2 or np.any(r <= 0):
        return float("nan")
    k = np.arange(r.size)
    return float(-np.polyfit(k * np.log(ratio), np.log(r), 1)[0])
