"""Batch studies: each takes a RunConfig and returns tables, checks and a result summary.

Every study is deterministic given its configuration: random test points come from a
numpy Generator seeded by the run seed, and noise from the counter-based streams.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .besov import CUTOFF_ID, NormSpec, sup_time_norm
from .diagrams import (
    COMPONENTS, build_driver_set, driver_convergence_study, mild_convolve, point_values,
    table_for_space, wick_cube, wick_hermite_residual,
)
from .errors import UsageError
from .fields import Field
from .hermite import basis_values, build_basis
from .io import write_csv, write_driver_set, write_json, write_path
from .noise import (
    NoiseConfig, compute_c1, compute_c1_modes, compute_c2, covariance_exact, sample_ensemble,
    sample_stoch_conv,
)
from .paracalc import ProductSpace
from .rng import GENERATOR_ID
from .solver import (
    SolveConfig, fitted_order, ordinary_path_integral, reconstruct_and_compare, solve_auxiliary,
    solve_direct, young_path_integral,
)

OPS = {
    "<": lambda v, b: v < b,
    "<=": lambda v, b: v <= b,
    ">": lambda v, b: v > b,
    ">=": lambda v, b: v >= b,
    "in": lambda v, b: b[0] <= v <= b[1],
}


@dataclass
class Check:
    """One recorded assertion: ``value op bound``."""

    name: str
    value: float
    op: str
    bound: object
    doc: str = ""

    @property
    def passed(self):
        return evaluate(self.value, self.op, self.bound)

    def to_dict(self):
        return {"name": self.name, "value": self.value, "op": self.op, "bound": self.bound,
                "passed": self.passed, "doc": self.doc}


def evaluate(value, op, bound):
    if op not in OPS:
        raise UsageError(f"unknown comparison {op!r}")
    if value is None or (isinstance(value, float) and math.isnan(value)):
        return False
    return bool(OPS[op](value, bound))


@dataclass
class StudyResult:
    study: str
    tables: dict = field(default_factory=dict)  # file stem -> (header, rows)
    checks: list = field(default_factory=list)
    results: dict = field(default_factory=dict)
    writers: list = field(default_factory=list)  # callables out_dir -> list of written paths

    @property
    def passed(self):
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c.name for c in self.checks if not c.passed]


def write_outputs(result, cfg, out_dir):
    """CSV tables, optional binary paths and summary.json into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for stem, (header, rows) in result.tables.items():
        files.append(write_csv(out / f"{stem}.csv", header, rows).name)
    for writer in result.writers:
        files.extend(str(Path(p).relative_to(out)) for p in writer(out))
    summary = {
        "study": result.study,
        "config": cfg.echo(),
        "checks": [c.to_dict() for c in result.checks],
        "all_passed": result.passed,
        "results": result.results,
        "files": sorted(files),
        "generator": GENERATOR_ID,
        "cutoff": CUTOFF_ID,
        "version": __version__,
    }
    write_json(out / "summary.json", summary)
    return out / "summary.json"


def _space(cfg, basis, prefer_collocation=False):
    rule = cfg["product_rule"]
    if rule == "auto":
        rule = "collocation" if prefer_collocation and basis.is_tensor_complete else "dealiased"
    return ProductSpace(basis, rule)


def _slope(ns, values):
    return float(np.polyfit(np.asarray(ns, float), np.log2(np.asarray(values, float)), 1)[0])


# renorm-study ---------------------------------------------------------------------------


def renorm_study(cfg):
    """c1 (and c2) from the exact kernel at time t and distances x, for each level n."""
    d, t = cfg["dimension"], cfg["t"]
    ns, xs = cfg.levels, cfg["x"]
    rows = []
    c1 = np.zeros((len(ns), len(xs)))
    c2 = np.full_like(c1, np.nan)
    for i, n in enumerate(ns):
        for j, r in enumerate(xs):
            x = np.zeros(d)
            x[0] = r
            c1[i, j] = compute_c1(n, t, x, d)
            if cfg["c2"]:
                c2[i, j] = compute_c2(n, t, x, None, d)
            rows.append([n, r, c1[i, j], c2[i, j], 3 * c1[i, j] - 9 * c2[i, j]])
    res = StudyResult("renorm-study", {"renorm": (["n", "x", "c1", "c2", "combined"], rows)})
    n_arr = np.asarray(ns, float)
    x_arr = np.asarray(xs, float)
    scale = 2.0 ** (n_arr[:, None] / 2)
    lower = (c1 / (scale * np.exp(-4 * x_arr ** 2 / 2.0 ** n_arr[:, None]))).min()
    upper = (c1 / (scale * np.exp(-2 * x_arr ** 2 / 2.0 ** n_arr[:, None]))).max()
    res.results.update({"envelope_lower": float(lower), "envelope_upper": float(upper)})
    res.checks.append(Check("c1_positive", float(c1.min()), ">", 0.0, "c1 > 0 at every cell"))
    if len(ns) >= 2:
        j0 = int(np.argmin(np.abs(x_arr)))
        slope = _slope(ns, c1[:, j0])
        res.results["c1_log2_slope"] = slope
        res.results["c1_log2_increments"] = np.diff(np.log2(c1[:, j0])).tolist()
        res.checks.append(Check("c1_slope", slope, "in", [cfg["slope_min"], cfg["slope_max"]],
                                f"least-squares slope of log2 c1 vs n at x={xs[j0]}"))
        res.checks.append(Check("c1_envelope_ratio", float(upper / lower), "<", math.inf,
                                "upper/lower fitted envelope constants are finite"))
    if cfg["c2"]:
        res.checks.append(Check("c2_nonnegative", float(np.nanmin(c2)), ">=", 0.0, "c2 >= 0 everywhere"))
        if len(ns) >= 2:
            j0 = int(np.argmin(np.abs(x_arr)))
            per_n = c2[:, j0] / np.maximum(n_arr, 1)
            ratio = float(per_n.max() / per_n.min()) if per_n.min() > 0 else math.inf
            res.results["c2_over_n"] = per_n.tolist()
            res.checks.append(Check("c2_over_n_ratio", ratio, "<", cfg["c2_ratio_max"],
                                    "max/min of c2/n over the levels"))
    return res


# covariance-check and wick-moments ------------------------------------------------------


def _test_points(cfg, rng, count):
    """(t1, t2, y1, y2) with step indices, |t2 - t1| >= 2 dt, t1, t2 >= 2 dt."""
    dt, d = cfg["dt"], cfg["dimension"]
    steps = int(round(cfg["T"] / dt))
    if steps < 4:
        raise UsageError("the horizon must hold at least four steps")
    out = []
    while len(out) < count:
        s1, s2 = rng.integers(2, steps + 1, size=2)
        if abs(int(s2) - int(s1)) < 2:
            continue
        y1 = rng.uniform(-cfg["spread"], cfg["spread"], d)
        y2 = rng.uniform(-cfg["spread"], cfg["spread"], d)
        out.append((int(s1), int(s2), y1, y2))
    return out


def _ensemble_point_values(cfg, basis, n, steps, points):
    """Psi values at (step, point) pairs for every replica; shape (R, len(pairs)).

    ``steps`` and ``points`` are parallel sequences.
    """
    record = np.unique(np.asarray(steps))
    pos = {s: i for i, s in enumerate(record)}
    phi = np.stack([basis_values(basis, p) for p in points], axis=0)  # (P, K)
    idx = np.array([pos[s] for s in steps])
    noise = NoiseConfig(basis, n, cfg["seed"], cfg["dt"], cfg["T"])
    R, chunk = cfg["replicas"], cfg["chunk"]
    out = np.empty((R, len(points)))
    for start in range(0, R, chunk):
        reps = np.arange(start, min(R, start + chunk))
        coeffs = sample_ensemble(noise, reps, record)  # (r, S, K)
        out[start:start + reps.size] = np.einsum("rpk,pk->rp", coeffs[:, idx, :], phi)
    return out


def _point_label(prefix, y):
    return [prefix] if len(y) == 1 else [f"{prefix}_{i}" for i in range(len(y))]


def _zstat(samples, target):
    m = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / np.sqrt(samples.shape[0])
    return m, se, (m - target) / se


def _moment_setup(cfg):
    if len(cfg.levels) != 1:
        raise UsageError("this study takes a single level n")
    n = cfg.levels[0]
    basis = build_basis(cfg["dimension"], cfg["K"])
    rng = np.random.default_rng(cfg["seed"])
    pts = _test_points(cfg, rng, cfg["points"])
    steps = [p[0] for p in pts] + [p[1] for p in pts]
    where = [p[2] for p in pts] + [p[3] for p in pts]
    vals = _ensemble_point_values(cfg, basis, n, steps, where)
    P = len(pts)
    exact = np.array([covariance_exact(n, s1 * cfg["dt"], s2 * cfg["dt"], y1, y2) for s1, s2, y1, y2 in pts])
    return n, basis, pts, vals[:, :P], vals[:, P:], exact


def _point_columns(cfg, pts):
    d = cfg["dimension"]
    header = ["t1", "t2"] + _point_label("y1", range(d)) + _point_label("y2", range(d))
    rows = [[s1 * cfg["dt"], s2 * cfg["dt"], *y1, *y2] for s1, s2, y1, y2 in pts]
    return header, rows


def covariance_check(cfg):
    """Monte Carlo E[Psi_t1(y1) Psi_t2(y2)] against the exact kernel integral."""
    n, basis, pts, a, b, exact = _moment_setup(cfg)
    mean, se, z = _zstat(a * b, exact)
    header, rows = _point_columns(cfg, pts)
    rows = [r + [exact[i], mean[i], se[i], z[i]] for i, r in enumerate(rows)]
    res = StudyResult("covariance-check", {"covariance": (header + ["exact", "mc_mean", "mc_se", "z"], rows)})
    inside = int(np.sum(np.abs(z) <= cfg["z_max"]))
    need = math.ceil(cfg["z_fraction"] * len(pts))
    res.results.update({"max_abs_z": float(np.abs(z).max()), "within": inside, "points": len(pts)})
    res.checks.append(Check("covariance_z", inside, ">=", need,
                            f"points with |z| <= {cfg['z_max']} (of {len(pts)})"))
    return res


def wick_moments(cfg):
    """Second moments of the Wick square and cube against 2 C^2 and 6 C^3, plus the Hermite identity."""
    n, basis, pts, a, b, exact = _moment_setup(cfg)
    dt = cfg["dt"]
    va = np.array([compute_c1_modes(basis, n, s1 * dt, y1) for s1, _, y1, _ in pts])
    vb = np.array([compute_c1_modes(basis, n, s2 * dt, y2) for _, s2, _, y2 in pts])
    sq_a, sq_b = a * a - va, b * b - vb
    cu_a, cu_b = a ** 3 - 3 * va * a, b ** 3 - 3 * vb * b
    m2, se2, z2 = _zstat(sq_a * sq_b, 2 * exact ** 2)
    m3, se3, z3 = _zstat(cu_a * cu_b, 6 * exact ** 3)
    mw, sew, zw = _zstat(sq_a, 0.0)
    header, rows = _point_columns(cfg, pts)
    rows = [
        r + [exact[i], 2 * exact[i] ** 2, m2[i], se2[i], z2[i], 6 * exact[i] ** 3, m3[i], se3[i], z3[i], mw[i], zw[i]]
        for i, r in enumerate(rows)
    ]
    cols = ["cov", "target2", "mc2", "se2", "z2", "target3", "mc3", "se3", "z3", "wick_mean", "wick_mean_z"]
    res = StudyResult("wick-moments", {"wick": (header + cols, rows)})
    need = math.ceil(cfg["wick_fraction"] * len(pts))
    zmax = cfg["wick_z_max"]
    res.checks.append(Check("wick_square_z", int(np.sum(np.abs(z2) <= zmax)), ">=", need,
                            f"points with |z| <= {zmax} for E[Psi2 Psi2] = 2 C^2"))
    res.checks.append(Check("wick_cube_z", int(np.sum(np.abs(z3) <= zmax)), ">=", need,
                            f"points with |z| <= {zmax} for E[Psi3 Psi3] = 6 C^3"))
    res.checks.append(Check("wick_mean_z", int(np.sum(np.abs(zw) <= cfg["z_max"])), ">=",
                            math.ceil(cfg["z_fraction"] * len(pts)), "Wick square ensemble mean is centred"))
    herm = hermite_identity(cfg, basis, n)
    res.results.update({
        "max_abs_z2": float(np.abs(z2).max()), "max_abs_z3": float(np.abs(z3).max()),
        "hermite_max_residual": herm,
    })
    res.checks.append(Check("hermite_identity", herm, "<", cfg["hermite_tol"],
                            "Wick powers equal v^{p/2} He_p(g / sqrt v) pathwise"))
    return res


def hermite_identity(cfg, basis, n):
    """Max residual of the Hermite form of the Wick square and cube at random (replica, t, x)."""
    rng = np.random.default_rng([cfg["seed"], 11])
    steps = int(round(cfg["T"] / cfg["dt"]))
    count = cfg["hermite_points"]
    reps = rng.integers(0, cfg["replicas"], count)
    st = rng.integers(1, steps + 1, count)
    xs = rng.uniform(-cfg["spread"], cfg["spread"], (count, basis.dimension))
    noise = NoiseConfig(basis, n, cfg["seed"], cfg["dt"], cfg["T"])
    worst = 0.0
    for r, s, x in zip(reps, st, xs):
        c = sample_ensemble(noise, [int(r)], [int(s)])[0, 0]
        g = float(point_values(basis, c, x)[0])
        v = float(compute_c1_modes(basis, n, s * cfg["dt"], x))
        worst = max(worst, float(wick_hermite_residual(g, v, 2)), float(wick_hermite_residual(g, v, 3)))
    return worst


# driver-study --------------------------------------------------------------------------


def driver_study(cfg):
    """Norms of consecutive-level driver differences on common Brownian streams."""
    basis = build_basis(cfg["dimension"], cfg["K"])
    space = _space(cfg, basis)
    levels = cfg.levels
    noise = NoiseConfig(basis, levels[0], cfg["seed"], cfg["dt"], cfg["T"])
    tables = {n: table_for_space(space, n, noise.times) for n in levels}
    reps = list(range(cfg["replicas"]))
    rep = driver_convergence_study(basis, levels, cfg["seed"], reps, cfg["dt"], cfg["T"], space, tables, cfg["eps"])
    rows = []
    for i in range(len(levels) - 1):
        rows.append([levels[i], levels[i + 1]] + [rep.median[c][i] for c in COMPONENTS])
    res = StudyResult("driver-study", {"driver_medians": (["n", "n_next"] + list(COMPONENTS), rows)})
    for comp in ("psi", "psi2", "ipsi3"):
        med = rep.median[comp]
        ratio = max(b / a for a, b in zip(med, med[1:])) if len(med) > 1 else 0.0
        res.checks.append(Check(f"decreasing_{comp}", float(ratio), "<", 1.0,
                                f"largest ratio of consecutive medians for {comp}"))
    res.results["median"] = rep.median
    res.results["kappa_psi"] = rep.fitted_kappa("psi")
    res.results["eps"] = cfg["eps"]
    res.results["product_rule"] = space.rule
    gap_rows = c2_gap(cfg, basis, space, tables, levels[-1])
    res.tables["c2_gap"] = (["t", "x_index", "mean", "se", "z"], gap_rows)
    res.results["c2_gap_max_abs_z"] = float(max(abs(r[4]) for r in gap_rows))
    if cfg["write_paths"]:
        n = levels[-1]
        psi = sample_stoch_conv(NoiseConfig(basis, n, cfg["seed"], cfg["dt"], cfg["T"]), replica=0)
        Z = build_driver_set(psi, tables[n], space)
        res.writers.append(lambda out: [write_driver_set(out / f"drivers_n{n}", Z, cfg.echo())])
    return res


def c2_gap(cfg, basis, space, tables, n, samples=4):
    """Ensemble mean of Psi2 o IPsi2 - c2 at a few (t, x): the deterministic resonance gap."""
    noise = NoiseConfig(basis, n, cfg["seed"], cfg["dt"], cfg["T"])
    M = noise.steps
    idx = sorted({M // 4, M // 2, M})
    xs = np.linspace(-1.0, 1.0, samples).reshape(-1, 1) * np.ones((1, basis.dimension))
    vals = []
    for r in range(cfg["replicas"]):
        psi = sample_stoch_conv(noise, replica=r)
        Z = build_driver_set(psi, tables[n], space)
        vals.append(point_values(basis, Z.psi2_ipsi2.coeffs[idx], xs))
    vals = np.asarray(vals)  # (R, T, X)
    R = vals.shape[0]
    mean = vals.mean(axis=0)
    se = vals.std(axis=0, ddof=1) / np.sqrt(R) if R > 1 else np.full_like(mean, np.nan)
    rows = []
    for a, m in enumerate(idx):
        for b in range(samples):
            z = mean[a, b] / se[a, b] if se[a, b] > 0 else float("nan")
            rows.append([m * cfg["dt"], b, mean[a, b], se[a, b], z])
    return rows


# solve, reconcile, converge ----------------------------------------------------------------


def _initial(cfg, basis):
    c = np.zeros(basis.size)
    c[0] = cfg["x0"]
    return Field(basis, c)


def _solve_config(cfg, basis, n, dt):
    return SolveConfig(
        _initial(cfg, basis), n, dt, cfg["T"], picard_iters=cfg["picard_iters"], tol=cfg["tol"],
        blowup_threshold=cfg["blowup_threshold"], mode=cfg["mode"], young_level=cfg["young_level"],
    )


def _solve_pair(cfg, basis, space, n, dt, replica, substeps=1, table=None, young="young"):
    scfg = _solve_config(cfg, basis, n, dt)
    table = table or table_for_space(space, n, scfg.times)
    psi = sample_stoch_conv(NoiseConfig(basis, n, cfg["seed"], dt, cfg["T"], substeps), replica=replica)
    bundle = solve_direct(scfg, psi, table, space) if scfg.mode in ("direct", "both") else None
    Z = aux = None
    if scfg.mode in ("auxiliary", "both"):
        Z = build_driver_set(psi, table, space)
        aux = solve_auxiliary(scfg.X0, Field.zeros(basis), Z, scfg, space, young=young)
    return scfg, psi, Z, bundle, aux


def solve_study(cfg):
    """One noise realization through the direct and/or auxiliary solver."""
    if len(cfg.levels) != 1:
        raise UsageError("solve takes a single level n")
    n = cfg.levels[0]
    basis = build_basis(cfg["dimension"], cfg["K"])
    space = _space(cfg, basis, prefer_collocation=True)
    scfg, psi, Z, bundle, aux = _solve_pair(cfg, basis, space, n, cfg["dt"], cfg["replica"])
    res = StudyResult("solve")
    res.results.update({"product_rule": space.rule, "n": n})
    cols, header = [], ["t"]
    if bundle is not None:
        res.results.update({"stop_reason": bundle.stop_reason, "t_max": bundle.t_max})
        header.append("X_weighted_norm")
    if aux is not None:
        res.results.update({
            "picard_sweeps": aux.diagnostics["sweeps"],
            "picard_differences": aux.diagnostics["sweep_differences"],
        })
        res.checks.append(Check("picard_converged", aux.diagnostics["sweep_differences"][-1], "<=",
                                cfg["picard_max"], "final Picard sweep difference"))
    from .solver import weighted_norm

    if bundle is not None and aux is not None:
        bundle.v, bundle.w, bundle.reconstructed = aux.v, aux.w, aux.reconstructed
        rep = reconstruct_and_compare(bundle)
        res.results.update({"max_residual": rep.max_residual, "initial_residual": rep.initial})
        res.checks.append(Check("reconstruction_residual", rep.max_residual, "<=", cfg["residual_max"],
                                "max_t weighted norm of (Psi - IPsi3 + v + w) - X"))
        header.append("residual")
    times = (bundle.X if bundle is not None else aux.v).times
    for m, t in enumerate(times):
        row = [t]
        if bundle is not None:
            row.append(float(weighted_norm(bundle.X.coeffs[m], basis)))
        if bundle is not None and aux is not None:
            row.append(float(bundle.residuals[m]))
        cols.append(row)
    res.tables["solution"] = (header, cols)
    if cfg["write_paths"]:
        def writer(out):
            files = []
            if bundle is not None:
                files.append(write_path(out / "X.bin", bundle.X, seed=cfg["seed"]))
            if aux is not None:
                for name in ("v", "w", "reconstructed"):
                    files.append(write_path(out / f"{name}.bin", getattr(aux, name), seed=cfg["seed"]))
                files.append(write_driver_set(out / "drivers", Z, cfg.echo()))
            return files
        res.writers.append(writer)
    return res


def reconcile_study(cfg):
    """Residual between the two formulations under dt-halving, per noise realization."""
    if len(cfg.levels) != 1:
        raise UsageError("reconcile takes a single level n")
    if cfg["mode"] != "both":
        raise UsageError("reconcile needs mode = both")
    n = cfg.levels[0]
    basis = build_basis(cfg["dimension"], cfg["K"])
    space = _space(cfg, basis, prefer_collocation=True)
    H = cfg["halvings"]
    dts = [cfg["dt"] / 2 ** i for i in range(H + 1)]
    tables = {}
    resid = np.zeros((cfg["replicas"], H + 1))
    gaps = np.zeros(cfg["replicas"])
    for r in range(cfg["replicas"]):
        for i, dt in enumerate(dts):
            if dt not in tables:
                tables[dt] = table_for_space(space, n, _solve_config(cfg, basis, n, dt).times)
            scfg, psi, Z, bundle, aux = _solve_pair(cfg, basis, space, n, dt, r, 2 ** (H - i), tables[dt])
            bundle.v, bundle.w, bundle.reconstructed = aux.v, aux.w, aux.reconstructed
            resid[r, i] = reconstruct_and_compare(bundle).max_residual
            if i == 0:
                gaps[r] = young_gap(aux, Z, scfg, space)
    orders = np.array([fitted_order(row) for row in resid])
    rows = [[r] + list(resid[r]) + [orders[r], gaps[r]] for r in range(cfg["replicas"])]
    header = ["replica"] + [f"residual_dt{i}" for i in range(H + 1)] + ["order", "young_gap"]
    res = StudyResult("reconcile", {"reconcile": (header, rows)})
    need = math.ceil(cfg["order_fraction"] * cfg["replicas"])
    res.checks.append(Check("order", int(np.sum(orders >= cfg["order_min"])), ">=", need,
                            f"realizations with fitted order >= {cfg['order_min']}"))
    res.checks.append(Check("young_gap", float(gaps.max()), "<", cfg["young_gap_max"],
                            "Young vs ordinary relative gap of int e^{-(t-r)H} U_r d(Psi o IPsi3)~_r"))
    res.results.update({"dts": dts, "orders": orders.tolist(), "product_rule": space.rule})
    return res


def young_gap(aux, Z, scfg, space):
    """Relative gap between Young and ordinary evaluation of the U d(Psi o IPsi3)~ mild integral."""
    U = aux.v.coeffs + aux.w.coeffs
    h = Z.psi.dt
    dF = np.diff(Z.anti_psi_ipsi3.coeffs, axis=0)
    y = young_path_integral(U, dF, Z.basis, h, scfg.young_level, space)
    o = ordinary_path_integral(U, Z.psi_ipsi3.coeffs, Z.basis, h, space)
    scale = np.abs(o).max()
    return float(np.abs(y - o).max() / scale) if scale > 0 else 0.0


def converge_study(cfg):
    """Direct solutions across levels on common streams: Cauchy differences and regularity gain."""
    basis = build_basis(cfg["dimension"], cfg["K"])
    space = _space(cfg, basis)
    levels = cfg.levels
    eta = cfg["eps"]
    spec_low = NormSpec(-0.5 - eta)
    spec_half = NormSpec(0.5)
    times = _solve_config(cfg, basis, levels[0], cfg["dt"]).times
    tables = {n: table_for_space(space, n, times) for n in levels}
    R = cfg["replicas"]
    diffs = np.zeros((R, len(levels) - 1))
    remainder = np.zeros((R, len(levels)))
    raw_half = np.zeros_like(remainder)
    raw_low = np.zeros_like(remainder)
    stops = []
    for r in range(R):
        Xs = []
        for i, n in enumerate(levels):
            scfg = _solve_config(cfg, basis, n, cfg["dt"])
            psi = sample_stoch_conv(NoiseConfig(basis, n, cfg["seed"], cfg["dt"], cfg["T"]), replica=r)
            b = solve_direct(scfg, psi, tables[n], space)
            stops.append(b.stop_reason)
            if b.stop_reason != "horizon":
                raise UsageError(f"direct solve stopped early ({b.stop_reason}) at n={n}, replica {r}")
            ipsi3 = mild_convolve(wick_cube(psi, tables[n], space))
            rem = b.X - psi + ipsi3
            remainder[r, i] = sup_time_norm(rem, spec_half)
            raw_half[r, i] = sup_time_norm(b.X, spec_half)
            raw_low[r, i] = sup_time_norm(b.X, NormSpec(-0.5))
            Xs.append(b.X)
        for i in range(len(levels) - 1):
            diffs[r, i] = sup_time_norm(Xs[i + 1] - Xs[i], spec_low)
    med = np.median(diffs, axis=0)
    rows = [[levels[i], levels[i + 1], med[i]] for i in range(len(levels) - 1)]
    reg_rows = [
        [n, float(np.median(remainder[:, i])), float(np.median(raw_half[:, i])), float(np.median(raw_low[:, i]))]
        for i, n in enumerate(levels)
    ]
    res = StudyResult("converge", {
        "cauchy": (["n", "n_next", "median_sup_norm"], rows),
        "regularity": (["n", "remainder_half", "X_half", "X_minus_half"], reg_rows),
    })
    ratio = float(max(b / a for a, b in zip(med, med[1:]))) if med.size > 1 else 0.0
    res.checks.append(Check("decreasing_X", ratio, "<", 1.0,
                            f"largest ratio of consecutive medians of sup_t B^(-1/2-{eta}) differences"))
    res.results.update({"median": med.tolist(), "eta": eta, "product_rule": space.rule})
    return res


STUDY_FUNCS = {
    "renorm-study": renorm_study,
    "covariance-check": covariance_check,
    "wick-moments": wick_moments,
    "driver-study": driver_study,
    "solve": solve_study,
    "reconcile": reconcile_study,
    "converge": converge_study,
}


def run_study(cfg):
    return STUDY_FUNCS[cfg.study](cfg)
