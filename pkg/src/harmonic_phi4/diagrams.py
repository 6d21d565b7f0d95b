"""Wick powers, time-convolved diagrams, renormalized resonant diagrams and the driver tuple.

Pointwise operations (Wick powers, counterterm subtraction) are carried out at the nodes
of the product space for the relevant arity and then projected.  Counterterms come from a
``RenormTable`` whose points include those nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields

import numpy as np
from numpy.polynomial.hermite_e import hermeval

from .besov import BlockEvaluator, NormSpec, antiderivative, holder_norm, sup_time_norm
from .errors import UsageError
from .fields import FieldPath
from .hermite import basis_values


def _check_level(path, table):
    n = path.meta.get("n")
    if n is not None and n != table.n:
        raise UsageError(f"path level n={n} differs from table level n={table.n}")
    table.check_times(path.times)


def wick_square(psi, table, space):
    """Psi^2 - c1, formed at the pair nodes and projected."""
    space.check(psi)
    _check_level(psi, table)
    c1, _ = table.at(space.nodes(2))
    vals = space.values(psi.coeffs, 2)
    return FieldPath(psi.basis, psi.times, space.project(vals * vals - c1, 2), dict(psi.meta))


def wick_cube(psi, table, space):
    """Psi^3 - 3 c1 Psi, formed at the cubic nodes and projected."""
    space.check(psi)
    _check_level(psi, table)
    c1, _ = table.at(space.nodes(3))
    vals = space.values(psi.coeffs, 3)
    return FieldPath(psi.basis, psi.times, space.project(vals ** 3 - 3 * c1 * vals, 3), dict(psi.meta))


def phi1(z):
    """(1 - exp(-z)) / z, with phi1(0) = 1."""
    z = np.asarray(z, dtype=float)
    out = np.ones_like(z)
    nz = z != 0
    out[nz] = -np.expm1(-z[nz]) / z[nz]
    return out


def etd_weights(basis, h):
    """(exp(-hH), h phi1(hH)) as coefficient vectors."""
    lam = basis.eigenvalues
    return np.exp(-h * lam), h * phi1(h * lam)


def mild_convolve_coeffs(coeffs, basis, h, init=None):
    """ETD1 recursion I_{m+1} = exp(-hH) I_m + h phi1(hH) f_m on an (M, K) array."""
    decay, gain = etd_weights(basis, h)
    out = np.empty_like(coeffs, dtype=float)
    out[0] = 0.0 if init is None else init
    for m in range(coeffs.shape[0] - 1):
        out[m + 1] = decay * out[m] + gain * coeffs[m]
    return out


def mild_convolve(path):
    """I f_t = int_0^t exp(-(t-s)H) f_s ds by the exponential Euler recursion."""
    if len(path) < 2:
        return FieldPath(path.basis, path.times, np.zeros_like(path.coeffs), dict(path.meta))
    return FieldPath(
        path.basis, path.times, mild_convolve_coeffs(path.coeffs, path.basis, path.dt), dict(path.meta)
    )


@dataclass(frozen=True, eq=False)
class DriverSet:
    """The six drivers plus IPsi2 and the running integrals of the three resonant ones."""

    psi: FieldPath
    psi2: FieldPath
    ipsi3: FieldPath
    ipsi2: FieldPath
    psi_ipsi3: FieldPath
    psi2_ipsi2: FieldPath
    psi2_ipsi3: FieldPath
    n: int
    anti_psi_ipsi3: FieldPath = None
    anti_psi2_ipsi2: FieldPath = None
    anti_psi2_ipsi3: FieldPath = None
    meta: dict = field(default_factory=dict)

    PATHS = ("psi", "psi2", "ipsi3", "ipsi2", "psi_ipsi3", "psi2_ipsi2", "psi2_ipsi3")

    def __post_init__(self):
        ref = self.psi
        for name in self.PATHS:
            p = getattr(self, name)
            if p.basis != ref.basis or p.coeffs.shape != ref.coeffs.shape:
                raise UsageError(f"driver {name} does not share the basis and time grid")
        for name, src in (
            ("anti_psi_ipsi3", "psi_ipsi3"),
            ("anti_psi2_ipsi2", "psi2_ipsi2"),
            ("anti_psi2_ipsi3", "psi2_ipsi3"),
        ):
            if getattr(self, name) is None:
                object.__setattr__(self, name, antiderivative(getattr(self, src)))

    @property
    def basis(self):
        return self.psi.basis

    @property
    def times(self):
        return self.psi.times

    def __sub__(self, other):
        kw = {name: getattr(self, name) - getattr(other, name) for name in self.PATHS}
        anti = {
            f.name: getattr(self, f.name) - getattr(other, f.name)
            for f in fields(self) if f.name.startswith("anti_")
        }
        return DriverSet(**kw, **anti, n=self.n, meta={"difference": (self.n, other.n)})

    @classmethod
    def zeros(cls, basis, times, n=0):
        z = FieldPath.zeros(basis, times)
        return cls(*(z,) * 7, n=n)


def build_driver_set(psi, table, space, cubic=True):
    """Assemble the driver tuple from a sampled Psi path.

    ``cubic=False`` replaces the Wick cube by zero (so IPsi3 and Psi o IPsi3 vanish);
    it isolates the quadratic part of the tuple.
    """
    space.check(psi)
    _check_level(psi, table)
    psi2 = wick_square(psi, table, space)
    psi3 = wick_cube(psi, table, space) if cubic else FieldPath.zeros(psi.basis, psi.times)
    ipsi3 = mild_convolve(psi3)
    ipsi2 = mild_convolve(psi2)
    _, c2 = table.at(space.nodes(2))
    res = lambda a, b: space.pair("res", a.coeffs, b.coeffs)  # noqa: E731
    psi_ipsi3 = res(psi, ipsi3)
    psi2_ipsi2 = res(psi2, ipsi2) - space.project(c2, 2)
    psi2_ipsi3 = res(psi2, ipsi3) - space.project(3 * c2 * space.values(psi.coeffs, 2), 2)
    wrap = lambda c: FieldPath(psi.basis, psi.times, c)  # noqa: E731
    meta = {"n": table.n, "renorm_method": table.method, "product_rule": space.rule}
    return DriverSet(
        psi, psi2, ipsi3, ipsi2, wrap(psi_ipsi3), wrap(psi2_ipsi2), wrap(psi2_ipsi3), table.n, meta=meta
    )


# norms -------------------------------------------------------------------------------

COMPONENTS = ("psi", "psi2", "ipsi3", "psi_ipsi3", "psi2_ipsi2", "psi2_ipsi3")


def driver_norms(Z, eps=0.05, grid=None):
    """Per-component norms of the driver tuple in the spaces of its convergence statement.

    Spatial norms are B^sigma_{inf,inf}; the three resonant drivers are measured through
    the Hoelder norms of their running integrals (the C^{-lam} convention).
    """
    spec = lambda s: NormSpec(s, np.inf, np.inf)  # noqa: E731
    return {
        "psi": sup_time_norm(Z.psi, spec(-0.5 - eps), grid),
        "psi2": sup_time_norm(Z.psi2, spec(-1 - eps), grid),
        "ipsi3": sup_time_norm(Z.ipsi3, spec(0.5 - eps), grid)
        + holder_norm(Z.ipsi3, 0.25 - eps, spec(eps), grid),
        "psi_ipsi3": holder_norm(Z.anti_psi_ipsi3, 1 - eps / 2, spec(-eps / 2), grid),
        "psi2_ipsi2": holder_norm(Z.anti_psi2_ipsi2, 1 - eps, spec(-eps / 2), grid),
        "psi2_ipsi3": holder_norm(Z.anti_psi2_ipsi3, 0.75 - eps, spec(-0.25 - 2 * eps), grid),
    }


def driver_total_norm(norms):
    return float(sum(norms[c] for c in COMPONENTS))


# pointwise evaluation and moment identities -----------------------------------------------


def point_values(basis, coeffs, points):
    """Values at ``points`` of coefficient arrays (..., K) -> (..., P)."""
    return np.asarray(coeffs) @ basis_values(basis, np.asarray(points).reshape(-1, basis.dimension))


def wick_hermite_residual(g, v, power):
    """|(g^p - Wick correction) - v^{p/2} He_p(g / sqrt v)| for p in {2, 3}."""
    if power not in (2, 3):
        raise UsageError("only powers 2 and 3 are supported")
    g = np.asarray(g, dtype=float)
    v = np.asarray(v, dtype=float)
    coef = np.zeros(power + 1)
    coef[power] = 1.0
    herm = v ** (power / 2) * hermeval(g / np.sqrt(v), coef)
    direct = g * g - v if power == 2 else g ** 3 - 3 * v * g
    return np.abs(direct - herm)


def z_score(samples, target):
    """(mean - target) / standard error over the leading axis."""
    samples = np.asarray(samples, dtype=float)
    m = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    return (m - target) / se, m, se


# convergence study ---------------------------------------------------------------------------


@dataclass
class DriverStudyReport:
    levels: list
    median: dict  # component -> list over consecutive level pairs
    per_replica: np.ndarray  # (R, pairs, components)
    eps: float

    def decreasing(self, component):
        vals = self.median[component]
        return all(b < a for a, b in zip(vals, vals[1:]))

    def fitted_kappa(self, component="psi"):
        """kappa in median ~ 2^{-kappa n / 2}, from the consecutive-level medians."""
        vals = np.asarray(self.median[component])
        ns = np.asarray(self.levels[:-1], dtype=float)
        if vals.size < 2 or np.any(vals <= 0):
            return float("nan")
        slope = np.polyfit(ns, np.log2(vals), 1)[0]
        return float(-2 * slope)


def driver_convergence_study(
    basis, levels, seed, replicas, dt, T, space, tables, eps=0.05, grid=None
):
    """Norms of Z^(n) - Z^(n') for consecutive levels on common Brownian motions.

    ``tables`` maps each level to its RenormTable (on the space nodes and time grid).
    """
    from .noise import NoiseConfig, sample_stoch_conv

    levels = list(levels)
    per = np.zeros((len(replicas), max(len(levels) - 1, 0), len(COMPONENTS)))
    for ir, rep in enumerate(replicas):
        Zs = []
        for n in levels:
            psi = sample_stoch_conv(NoiseConfig(basis, n, seed, dt, T), replica=rep)
            Zs.append(build_driver_set(psi, tables[n], space))
        for i in range(len(levels) - 1):
            norms = driver_norms(Zs[i + 1] - Zs[i], eps, grid)
            per[ir, i] = [norms[c] for c in COMPONENTS]
    med = np.median(per, axis=0) if len(replicas) else per.sum(axis=0)
    median = {c: [float(v) for v in med[:, j]] for j, c in enumerate(COMPONENTS)}
    return DriverStudyReport(levels, median, per, eps)


def spatial_evaluator(basis, sigma, grid=None):
    """Reusable B^sigma_{inf,inf} evaluator (handy for repeated norm calls in studies)."""
    return BlockEvaluator(basis, NormSpec(sigma, np.inf, np.inf), grid)


def table_for_space(space, n, times, method="modes", with_c2=True, quad=None):
    """RenormTable covering the pair and cubic nodes of ``space``."""
    from .noise import build_renorm_table

    pts = np.vstack([space.nodes(2), space.nodes(3)])
    pts = np.unique(np.round(pts, 12), axis=0)
    basis = space.basis if method == "modes" else None
    return build_renorm_table(n, times, pts, method=method, basis=basis, quad=quad, with_c2=with_c2)
