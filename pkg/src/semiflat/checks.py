"""The quantitative checks behind ``verify-all`` and the acceptance tests.

Each check returns a :class:`Check` carrying its measured value, the tolerance
it was tested against and the verdict.
"""

from __future__ import annotations

import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from semiflat import blaschke as bl
from semiflat import developing as dv
from semiflat import greens
from semiflat import titeica as ti
from semiflat.cubic_diff import RationalCubicDifferential
from semiflat.geometry import ChartAtlas, LogPolarGrid, model_residual_zero
from semiflat.mesh import build_mesh

SIX_POLES = {"numerator": [[1.0, 0.0]],
             "denominator": [[-1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]}


@dataclass
class Check:
    name: str
    passed: bool
    value: object
    tolerance: object
    detail: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: value={_short(self.value)} tol={_short(self.tolerance)}"

    def to_dict(self) -> dict:
        return {"name": self.name, "passed": bool(self.passed), "value": self.value,
                "tolerance": self.tolerance, "detail": self.detail}


def _short(v) -> str:
    if isinstance(v, float):
        return f"{v:.3e}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


# pipeline pieces -----------------------------------------------------------

@dataclass(eq=False)
class SolvedCase:
    U: RationalCubicDifferential
    mesh: object
    prob: ti.MeshProblem
    pair: ti.BarrierPair
    sol: ti.Solution
    seconds: float


def solve_case(U: RationalCubicDifferential, n_theta: int = 128, t_min: float = -65536.0,
               config: ti.SolverConfig | None = None) -> SolvedCase:
    t0 = time.perf_counter()
    mesh = build_mesh(ChartAtlas.build(U), n_theta=n_theta, t_min=t_min)
    prob = ti.MeshProblem(mesh)
    pair = ti.barriers(prob)
    sol = ti.solve(mesh, config, pair=pair)
    return SolvedCase(U, mesh, prob, pair, sol, time.perf_counter() - t0)


def analyze_poles(sol: ti.Solution, poles=None, y_ladder=(6.0, 8.0, 10.0),
                  thresholds: dv.Thresholds | None = None, workers: int = 4) -> list[dict]:
    """analyze_pole on every (or the selected) pole cylinder, concurrently."""
    th = thresholds or dv.Thresholds.calibrate(dv.flat_noise())
    idx = range(len(sol.mesh.cylinders)) if poles is None else poles

    def one(j):
        rec = dv.analyze_pole(dv.LogChartField.from_solution(sol, j), y_ladder, thresholds=th)
        return {"pole": j, **rec}

    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(one, idx))


# criteria -----------------------------------------------------------------

def model_identity(n_thetas=(256, 512, 1024), r=(0.05, 0.5), min_order: float = 1.9) -> Check:
    errs, hs = [], []
    for n in n_thetas:
        g = LogPolarGrid.annulus(r[0], r[1], n)
        errs.append(float(np.max(np.abs(model_residual_zero(g)[1:-1, 1:-1]))))
        hs.append(g.spacing)
    orders = [float(np.log(errs[k] / errs[k + 1]) / np.log(hs[k] / hs[k + 1])) for k in range(len(errs) - 1)]
    consts = [e / h**2 for e, h in zip(errs, hs)]
    return Check("model identity order", min(orders) >= min_order, min(orders), min_order,
                 {"errors": errs, "spacing": hs, "orders": orders, "C": max(consts)})


def barrier_certificates(case: SolvedCase) -> Check:
    p = case.pair
    sandwich = min(min(s["lower_margin"], s["upper_margin"]) for s in case.sol.stages)
    ok = p.lower_margin > 0 and p.upper_margin < 0 and sandwich >= -1e-12
    return Check("barrier certificates", ok, [p.lower_margin, p.upper_margin, sandwich], [0.0, 0.0, 0.0],
                 {"beta": p.beta, "c": p.c, "dip": p.dip})


def solver_convergence(case: SolvedCase, tol: float = 1e-8, budget: float = 300.0) -> Check:
    sol = case.sol
    mono = max(s["monotonicity"] for s in sol.stages)
    mono_tol = 10 * sol.config.tol
    ok = sol.residual < tol and mono <= mono_tol and case.seconds < budget
    return Check("solver convergence", ok, [sol.residual, mono], [tol, mono_tol],
                 {"stages": [dict(s) for s in sol.stages], "nodes": case.mesh.n,
                  "seconds": case.seconds, "budget_seconds": budget})


def puncture_asymptotics(case: SolvedCase, bound: float = 0.05) -> Check:
    b = ti.blowup_check(case.sol)
    su, sz = np.array(b["sup_u"]), np.array(b["sup_zuz"])
    dec = bool(np.all(np.diff(su, axis=1) < 0) and np.all(np.diff(sz, axis=1) < 0))
    last = float(max(su[:, -1].max(), sz[:, -1].max()))
    return Check("puncture asymptotics", dec and last < bound, last, bound,
                 {"radii": b["radii"], "sup_u": b["sup_u"], "sup_zuz": b["sup_zuz"], "decreasing": dec})


def metric_asymptotics(case: SolvedCase, window=(0.95, 1.05), r: float = 1e-3) -> Check:
    ratios = ti.metric_ratio(case.sol, r)
    lo, hi = min(a for a, _ in ratios), max(b for _, b in ratios)
    return Check("metric asymptotics", window[0] <= lo and hi <= window[1], [lo, hi], list(window),
                 {"per_pole": ratios, "radius": r})


def determinant_integral(records: list[dict], extra: float = 0.0, tol: float = 1e-6) -> Check:
    drift = max([r["det_drift"] for r in records] + [extra])
    return Check("determinant first integral", drift < tol, drift, tol)


def _ladder_ok(rec: dict, tol: float) -> tuple[bool, list, list]:
    ev = [max(abs(complex(*e) - 1) for e in step["eigenvalues"]) for step in rec["ladder"]]
    dev = [step["frame_deviation"] for step in rec["ladder"]]
    ok = max(ev) <= tol and all(b < a for a, b in zip(dev, dev[1:])) and rec["class"] == dv.PARABOLIC_FIXED
    return ok, ev, dev


def flat_control() -> dv.HolonomyClass:
    fld = dv.FlatField()
    start = dv.frame_at(fld, 1.0 + 0j)
    end = dv.transport(start, dv.Circle(0j, 1.0), fld).final
    P = end.frame_matrix() @ np.linalg.inv(start.frame_matrix())
    m = dv.AffineMap2(P, end.alpha - P @ start.alpha)
    return dv.classify(m, thresholds=dv.Thresholds.calibrate(dv.flat_noise()))


def synthetic_classification(seed: int = 0, trials: int = 20) -> dict:
    """Class representatives under random affine conjugation plus flat-loop noise, classified blind."""
    rng = np.random.default_rng(seed)
    noise = dv.flat_noise()
    th = dv.Thresholds.calibrate(noise)
    hits, total = 0, 0
    for tag in (dv.IDENTITY, dv.PURE_TRANSLATION, dv.PARABOLIC_FIXED, dv.PARABOLIC_FREE):
        rep = dv.representative(tag)
        for _ in range(trials):
            g = rng.normal(size=(2, 2))
            while abs(np.linalg.det(g)) < 0.2 or np.linalg.cond(g) > 20:
                g = rng.normal(size=(2, 2))
            m = rep.conjugate(dv.AffineMap2(g, rng.normal(size=2)))
            m = dv.AffineMap2(m.linear + noise * rng.normal(size=(2, 2)), m.translation + noise * rng.normal(size=2))
            hits += dv.classify(m, thresholds=th).tag == tag
            total += 1
    return {"seed": seed, "correct": hits, "total": total}



def holonomy_check(records: list[dict], tol: float = 1e-2, name: str = "holonomy", seed: int = 0) -> Check:
    per, ok = [], True
    for rec in records:
        good, ev, dev = _ladder_ok(rec, tol)
        ok &= good
        per.append({"pole": rec.get("pole"), "class": rec["class"], "eigen_deviation": ev, "frame_deviation": dev})
    control = flat_control().tag
    synth = synthetic_classification(seed)
    ok &= control == dv.IDENTITY and synth["correct"] == synth["total"]
    worst = max(max(p["eigen_deviation"]) for p in per)
    return Check(name, bool(ok), worst, tol, {"poles": per, "flat_control": control, "synthetic": synth})


def winding_check(records: list[dict], name: str = "winding number") -> Check:
    ws = [[w["winding"] for w in rec["windings"]] for rec in records]
    ok = all(len(w) >= 2 and all(x == 1 for x in w) for w in ws)
    return Check(name, ok, ws, 1)


def decay_check(records: list[dict], tol: float = 0.1) -> Check:
    slopes = [rec["decay_slope"] for rec in records]
    dev = max(abs(s + 1) for s in slopes)
    return Check("decay law", dev <= tol, slopes, [-1 - tol, -1 + tol])


def blaschke_round_trip(tol: float = 1e-10, records: list[dict] | None = None) -> Check:
    pair = bl.model_fg(bl.ModelData.sample(order=12))
    th = np.linspace(0, 2 * np.pi, 17)[:-1]
    z = np.concatenate([r * np.exp(1j * th) for r in (1e-3, 1e-5, 1e-8)])
    target = np.abs(np.log(np.abs(z) ** 2)) - 4 * np.pi
    metric = float(np.max(np.abs(bl.metric_from_fg(pair, z) / target - 1)))
    cubic = float(np.max(np.abs(bl.cubic_from_fg(pair, z) * z - 1)))
    if records is None:
        records = [dv.analyze_pole(dv.LogChartField.blaschke(), (8.0, 10.0, 12.0), decay=(8.0, 13.0))]
    hol = holonomy_check(records, name="blaschke holonomy")
    wnd = winding_check(records, name="blaschke winding")
    ok = metric < tol and cubic < tol and hol.passed and wnd.passed
    return Check("blaschke round trip", ok, [metric, cubic], [tol, tol],
                 {"holonomy": hol.to_dict(), "winding": wnd.to_dict()})


def mirror_check() -> Check:
    pair = bl.model_fg(bl.ModelData.sample(j_tail=(0.3 + 0.1j,), order=10))
    z = np.array([1e-6, 2e-6j, -1.5e-6 + 5e-7j])
    m1, m2 = bl.metric_from_fg(pair, z), bl.metric_from_fg(bl.mirror(pair), z)
    c1, c2 = bl.cubic_from_fg(pair, z), bl.cubic_from_fg(bl.mirror(pair), z)
    twice = bl.mirror(bl.mirror(pair))
    metric_same = bool(np.array_equal(m1, m2))
    cubic_neg = bool(np.array_equal(c2, -c1))
    inv = bool(np.array_equal(twice.F.c, pair.F.c) and np.array_equal(twice.G.c, pair.G.c))
    return Check("mirror", metric_same and cubic_neg and inv, [metric_same, cubic_neg, inv], "exact")


def monge_ampere(case: SolvedCase | None, tol: float = 1e-3, n=(81, 81)) -> Check:
    model = dv.monge_ampere_check(dv.LogChartField.blaschke(), (0.0, 1.0), (8.0, 9.0), n)
    vals = {"blaschke": model["max_residual"]}
    if case is not None:
        fld = dv.LogChartField.from_solution(case.sol, 0)
        vals["solution"] = dv.monge_ampere_check(fld, (0.0, 1.0), (5.0, 6.0), n)["max_residual"]
    worst = max(vals.values())
    return Check("monge-ampere", worst < tol, worst, tol, vals)


def appendix_suite(meshes=None, tol: float = 1e-6, stable: float = 0.1) -> Check:
    rs = np.linspace(0.2, 2.0, 5)
    rhos = [0.1, 0.5, 1.5, 3.0]
    inner = 0.0
    for r in rs:
        for rho in rhos:
            if abs(r - rho) < 1e-9:
                continue
            q, exact = greens.inner_integral(r, rho)
            inner = max(inner, abs(q - exact))
    gp = 0.0
    for r in np.linspace(0.05, 0.9, 20):
        q, exact = greens.g_prime(r)
        gp = max(gp, abs(q - exact))
    bounds = []
    if meshes is None:
        U = RationalCubicDifferential.from_pairs(SIX_POLES["numerator"], SIX_POLES["denominator"])
        atlas = ChartAtlas.build(U)
        meshes = [build_mesh(atlas, n_theta=n, t_min=-16.0) for n in (32, 64)]
    for mesh in meshes:
        bounds.append(greens.barrier_potential(mesh).report["bound"])
    spread = abs(bounds[-1] - bounds[-2]) / max(bounds)
    ok = inner < tol and gp < tol and spread < stable
    return Check("appendix suite", ok, [inner, gp, spread], [tol, tol, stable], {"asymptote_bounds": bounds})


def bryant(case: SolvedCase, tol: float = 1e-3) -> Check:
    b = ti.bryant_check(case.sol)
    return Check("bryant curvature", b["max_deviation"] < tol, b["max_deviation"], tol,
                 {"cylinder": b["cylinder"], "patch": b.get("patch")})
