"""Command line entry point: ``semiflat <subcommand> [--config ...]``."""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import platform
import sys
from pathlib import Path

import numpy as np

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

import semiflat
from semiflat import blaschke as bl
from semiflat import checks as C
from semiflat import developing as dv
from semiflat import export
from semiflat import kernels
from semiflat import titeica as ti
from semiflat.cubic_diff import CubicDifferentialError, RationalCubicDifferential
from semiflat.geometry import ChartAtlas
from semiflat.mesh import build_mesh

SUBCOMMANDS = ("validate", "solve", "holonomy", "winding", "mirror", "greens-check", "verify-all")

DEFAULTS_TOML = """\
# semiflat run configuration; every key is optional
seed = 0                       # synthetic classification trials

[cubic]
# U = numerator / denominator dz^3, coefficients as [re, im] in ascending degree
numerator = [[1.0, 0.0]]
denominator = [[-1.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]
# alternatively a divisor: poles = [[re, im], ...], zeros = [...], scale = [re, im]

[solver]
n_theta = 128                  # angular nodes per pole cylinder (--grid)
t_min = -65536.0               # deepest excision, t = log|w|
tol = 1e-10                    # Newton residual, native area scaling (--tol)
residual_max = 1e-8
runtime_budget = 300.0

[transport]
field = "solution"             # "solution", "model" (u = 0) or "blaschke"
y_ladder = [6.0, 8.0, 10.0]
blaschke_ladder = [8.0, 10.0, 12.0]
eigen_tol = 1e-2
det_tol = 1e-6
slope_tol = 0.1
workers = 4

[blaschke]
j_tail = []                    # j = 4 i sqrt(pi) * branch + j_tail, as [re, im] pairs
k0 = [0.0, 0.0]
order = 12
branch = 1

[greens]
n_theta = [32, 64]
t_min = -16.0
"""


class ConfigError(ValueError):
    pass


# configuration -------------------------------------------------------------

def defaults() -> dict:
    return tomllib.loads(DEFAULTS_TOML)


def _merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = v
    return out


def load_config(path=None, grid=None, tol=None, out=None) -> dict:
    cfg = defaults()
    if path is not None:
        try:
            with open(path, "rb") as fh:
                user = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if "cubic" in user and {"poles", "zeros"} & set(user["cubic"]):
            cfg["cubic"] = {}
        cfg = _merge(cfg, user)
    if grid is not None:
        cfg["solver"]["n_theta"] = grid
    if tol is not None:
        cfg["solver"]["tol"] = tol
    if out is not None:
        cfg["out"] = str(out)
    cfg.setdefault("out", "semiflat-out")
    _validate(cfg)
    return cfg


def _validate(cfg: dict):
    s, t = cfg["solver"], cfg["transport"]
    for key in ("tol", "residual_max", "runtime_budget"):
        if not s[key] > 0:
            raise ConfigError(f"solver.{key} must be positive")
    for key in ("eigen_tol", "det_tol", "slope_tol"):
        if not t[key] > 0:
            raise ConfigError(f"transport.{key} must be positive")
    if int(s["n_theta"]) < 8:
        raise ConfigError("solver.n_theta must be at least 8")
    if t["field"] not in ("solution", "model", "blaschke"):
        raise ConfigError(f"unknown transport.field {t['field']!r}")


def _c(pair) -> complex:
    return complex(pair[0], pair[1]) if isinstance(pair, (list, tuple)) else complex(pair)


def cubic_from_config(cfg: dict) -> RationalCubicDifferential:
    c = cfg["cubic"]
    if "poles" in c:
        zeros = [_c(q) for q in c.get("zeros", [])]
        return RationalCubicDifferential.from_divisor([_c(p) for p in c["poles"]], zeros,
                                                      _c(c.get("scale", [1.0, 0.0])))
    if "numerator" in c and "denominator" in c:
        return RationalCubicDifferential.from_pairs(c["numerator"], c["denominator"])
    raise ConfigError("[cubic] needs numerator/denominator or poles/zeros")


def config_hash(cfg: dict) -> str:
    canon = {k: v for k, v in cfg.items() if k != "out"}
    return hashlib.sha256(json.dumps(canon, sort_keys=True).encode()).hexdigest()


def provenance(cfg: dict) -> dict:
    import scipy
    return {"config_hash": config_hash(cfg),
            "versions": {"semiflat": semiflat.__version__, "numpy": np.__version__,
                         "scipy": scipy.__version__, "python": platform.python_version()},
            "kernel_backend": kernels.BACKEND}


# JSON ------------------------------------------------------------------------

def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return _jsonable(x.tolist())
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (np.floating, float)):
        v = float(x)
        return v if np.isfinite(v) else str(v)
    if isinstance(x, complex):
        return [x.real, x.imag]
    return x


def strip_timing(report):
    """Report without wall-clock entries (the keys named ``seconds``)."""
    if isinstance(report, dict):
        return {k: strip_timing(v) for k, v in report.items() if k != "seconds"}
    if isinstance(report, list):
        return [strip_timing(v) for v in report]
    return report


def write_report(out: Path, report: dict) -> Path:
    out.mkdir(parents=True, exist_ok=True)
    path = out / "report.json"
    path.write_text(json.dumps(_jsonable(report), indent=2, sort_keys=True) + "\n")
    return path


# subcommands -------------------------------------------------------------------

class Run:
    def __init__(self, cfg: dict, pole=None):
        self.cfg = cfg
        self.out = Path(cfg["out"])
        self.pole = pole
        self.checks: list[C.Check] = []
        self.diagnostics: list[C.Check] = []
        self.data: dict = {}
        self._case = None

    # shared pieces
    @property
    def U(self) -> RationalCubicDifferential:
        U = cubic_from_config(self.cfg)
        U.validate_divisor()
        return U

    def case(self) -> C.SolvedCase:
        if self._case is None:
            s = self.cfg["solver"]
            sc = ti.SolverConfig(tol=float(s["tol"]))
            self._case = C.solve_case(self.U, int(s["n_theta"]), float(s["t_min"]), sc)
        return self._case

    def poles(self, n: int) -> list[int]:
        if self.pole is None:
            return list(range(n))
        if not 0 <= self.pole < n:
            raise ConfigError(f"--pole {self.pole} out of range (0..{n - 1})")
        return [self.pole]

    def pole_records(self) -> list[dict]:
        t = self.cfg["transport"]
        if t["field"] == "model":
            return [{"pole": 0, **dv.analyze_pole(dv.LogChartField.model(), tuple(t["y_ladder"]))}]
        if t["field"] == "blaschke":
            ladder = tuple(t["blaschke_ladder"])
            return [{"pole": 0, **dv.analyze_pole(dv.LogChartField.blaschke(), ladder,
                                                  decay=(ladder[0], ladder[-1] + 1))}]
        case = self.case()
        return C.analyze_poles(case.sol, self.poles(len(case.mesh.cylinders)), tuple(t["y_ladder"]),
                               workers=int(t["workers"]))

    def write_curves(self, records: list[dict]):
        for rec in records:
            name = f"pole{rec['pole']}_developed"
            pts = np.asarray(rec["curve"])
            export.write_curve_csv(self.out / "fields" / f"{name}.csv", pts)
            export.curves_svg(self.out / "plots" / f"{name}.svg", {f"pole {rec['pole']}": pts},
                              title=f"developed loop, pole {rec['pole']}", marker=rec["dev_infinity"])

    def write_solution_fields(self, case: C.SolvedCase):
        mesh, sol = case.mesh, case.sol
        export.write_mesh_field(self.out / "fields" / "u.csv", mesh, sol.u)
        export.write_mesh_field(self.out / "fields" / "u_model_relative.csv", mesh, ti.model_deviation(sol))
        near = (mesh.kind == -1) | (mesh.t > -8.0)
        export.heatmap_svg(self.out / "plots" / "u.svg", mesh.z[near], sol.u[near], title="u")

    # commands
    def validate(self):
        U = self.U
        counts = U.validate_divisor()
        atlas = ChartAtlas.build(U)
        # the charts are only used out to the outer edge of the blend annulus
        errs = [c.pullback_error(atlas.outer_zeta_radius(j, 2 * atlas.blend_radius))
                for j, c in enumerate(atlas.charts)]
        self.data["divisor"] = {**counts,
                                "poles": [[p.location, p.residue] for p in U.find_poles()],
                                "zeros": [[z, m] for z, m in U.find_zeros()]}
        self.checks.append(C.Check("canonical charts", max(errs) < 1e-8, max(errs), 1e-8,
                                   {"per_pole": errs}))

    def solve(self):
        case = self.case()
        s = self.cfg["solver"]
        self.checks += [C.barrier_certificates(case),
                        C.solver_convergence(case, float(s["residual_max"]), float(s["runtime_budget"]))]
        self.diagnostics += [C.puncture_asymptotics(case), C.metric_asymptotics(case), C.bryant(case)]
        self.data["stages"] = case.sol.stages
        self.write_solution_fields(case)

    def holonomy(self):
        t = self.cfg["transport"]
        recs = self.pole_records()
        self.checks += [C.determinant_integral(recs, tol=float(t["det_tol"])),
                        C.holonomy_check(recs, float(t["eigen_tol"]), seed=int(self.cfg["seed"])),
                        C.winding_check(recs)]
        if t["field"] != "blaschke":
            self.checks.append(C.decay_check(recs, float(t["slope_tol"])))
        self.data["poles"] = recs
        self.write_curves(recs)

    def winding(self):
        recs = self.pole_records()
        self.checks.append(C.winding_check(recs))
        self.data["poles"] = [{"pole": r["pole"], "windings": r["windings"], "fixed_point": r["fixed_point"]}
                              for r in recs]
        self.write_curves(recs)

    def mirror(self):
        b = self.cfg["blaschke"]
        data = bl.ModelData.sample([_c(x) for x in b["j_tail"]], _c(b["k0"]), int(b["order"]), int(b["branch"]))
        pair = bl.model_fg(data)
        self.checks += [C.blaschke_round_trip(), C.mirror_check()]
        self.data["model"] = {"data": data.to_dict(), "pair": pair.to_dict(),
                              "leading_constants": bl.leading_constants(data)}
        r = np.geomspace(1e-8, 1e-3, 24)
        th = 2 * np.pi * np.arange(48) / 48
        z = (r[:, None] * np.exp(1j * th)[None, :]).ravel()
        for name, p in (("metric", pair), ("metric_mirror", bl.mirror(pair))):
            export.write_field_csv(self.out / "fields" / f"blaschke_{name}.csv", ["pole0"] * len(z), z,
                                   bl.metric_from_fg(p, z))
        rec = C.blaschke_round_trip().detail
        self.data["transport"] = rec

    def greens_check(self):
        g = self.cfg["greens"]
        atlas = ChartAtlas.build(self.U)
        meshes = [build_mesh(atlas, n_theta=int(n), t_min=float(g["t_min"])) for n in g["n_theta"]]
        self.checks.append(C.appendix_suite(meshes))

    def verify_all(self):
        case = self.case()
        s, t = self.cfg["solver"], self.cfg["transport"]
        recs = C.analyze_poles(case.sol, self.poles(len(case.mesh.cylinders)), tuple(t["y_ladder"]),
                               workers=int(t["workers"]))
        self.checks += [
            C.model_identity(),
            C.barrier_certificates(case),
            C.solver_convergence(case, float(s["residual_max"]), float(s["runtime_budget"])),
            C.puncture_asymptotics(case),
            C.metric_asymptotics(case),
            C.determinant_integral(recs, tol=float(t["det_tol"])),
            C.holonomy_check(recs, float(t["eigen_tol"]), seed=int(self.cfg["seed"])),
            C.winding_check(recs),
            C.decay_check(recs, float(t["slope_tol"])),
            C.blaschke_round_trip(),
            C.mirror_check(),
            C.monge_ampere(case),
            C.appendix_suite(),
            C.bryant(case),
        ]
        self.data["poles"] = recs
        self.write_solution_fields(case)
        self.write_curves(recs)

    def report(self, command: str) -> dict:
        return {"subcommand": command, "provenance": provenance(self.cfg), "config": self.cfg,
                "checks": [c.to_dict() for c in self.checks],
                "diagnostics": [c.to_dict() for c in self.diagnostics],
                "passed": all(c.passed for c in self.checks), **self.data}


def run(command: str, cfg: dict, pole=None) -> tuple[dict, Run]:
    if command not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {command!r}")
    r = Run(cfg, pole)
    getattr(r, command.replace("-", "_"))()
    return r.report(command), r


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML configuration file")
    common.add_argument("--out", type=Path, help="output directory (default semiflat-out)")
    common.add_argument("--grid", type=int, help="angular nodes per pole cylinder")
    common.add_argument("--tol", type=float, help="Newton residual tolerance")
    common.add_argument("--pole", type=int, help="analyse only this pole index")
    p = argparse.ArgumentParser(prog="semiflat", parents=[common],
                                description="Singular semi-flat Calabi-Yau metrics on the 2-sphere.")
    p.add_argument("--print-defaults", action="store_true", help="print the default configuration and exit")
    sub = p.add_subparsers(dest="command")
    for name in SUBCOMMANDS:
        sub.add_parser(name, parents=[common])
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.print_defaults:
        sys.stdout.write(DEFAULTS_TOML)
        return 0
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        cfg = load_config(args.config, args.grid, args.tol, args.out)
        report, r = run(args.command, cfg, args.pole)
    except (ConfigError, CubicDifferentialError, ti.BarrierFailure, ti.NewtonDivergence,
            ti.MonotonicityViolation, dv.NotUnipotent, dv.NoConvergence, dv.StepUnderflow,
            bl.ConstraintViolated, bl.MetricDegenerate) as exc:
        print(f"semiflat {args.command}: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    path = write_report(r.out, report)
    for c in r.checks:
        print(c.line())
    for c in r.diagnostics:
        print("info  " + c.line())
    print(f"report: {path}")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
