"""Command-line front end.

    pbflow prandtl   boundary layers of both walls (leading and first order)
    pbflow expand    composite approximations and their NS residuals
    pbflow solve     Newton solves seeded by the composite, one per sweep eps
    pbflow verify    eps sweep metrics, fitted slopes, pass/fail per criterion
    pbflow pb-check  Prandtl-Batchelor diagnostic on closed forms and solved states
    pbflow sweep     the delta family at fixed eps

Exit codes: 0 success, 1 a criterion was missed, 2 invalid configuration or
usage, 3 a solver or stage failed (including partial sweep failures).
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import artifacts as art
from . import composite as cp
from . import ns_solver as ns
from . import verify as vf
from .config import SCHEMA_VERSION, ConfigError, RunConfig
from .spectral import RadialGrid

log = logging.getLogger("pbflow")

EXIT_OK, EXIT_CRITERION, EXIT_CONFIG, EXIT_FAILURE = 0, 1, 2, 3

# config sections each stage depends on (anything else does not invalidate its cache)
_BASE = ("geometry", "boundary", "family", "numerics", "deterministic")
_STAGE_SECTIONS = {
    "prandtl": _BASE,
    "expand": _BASE + (("sweep", "epsilons"), ("sweep", "residual_epsilons")),
    "solve": _BASE + (("sweep", "epsilons"),),
}


class StageFailure(RuntimeError):
    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def _fmt(x, deterministic: bool):
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.12g}" if deterministic else repr(float(x))
    return "" if x is None else str(x)


def write_csv(path: Path, rows: list, columns: list, deterministic: bool = True) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row.get(c), deterministic) for c in columns])
    return path


def write_json(path: Path, data: dict) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2, sort_keys=True, default=float) + "\n")
    return path


def write_svg(path: Path, x, series: dict, xlabel: str, ylabel: str, loglog: bool = True) -> Path:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(5, 4))
    for label, y in series.items():
        ax.plot(x, y, "o-", label=label)
    if loglog:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.legend()
    fig.tight_layout()
    # a fixed hash salt keeps the SVG ids stable between runs
    matplotlib.rcParams["svg.hashsalt"] = "pbflow"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def _eps_tag(eps: float) -> str:
    return f"{eps:.6g}".replace(".", "p")


class Pipeline:
    def __init__(self, cfg: RunConfig, out_dir: Path | None = None, force: bool = False):
        self.cfg = cfg
        self.out = Path(out_dir or cfg["output"]["dir"])
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest = art.Manifest(self.out)
        self.force = force
        self.det = bool(cfg["deterministic"])
        self.workers = int(cfg["output"]["workers"])
        self._expansions = {}

    # -- helpers ---------------------------------------------------------------------------
    def key(self, stage: str, salt: str = "") -> str:
        return self.cfg.hash(_STAGE_SECTIONS.get(stage), salt)

    def cached(self, stage: str, salt: str = ""):
        if self.force:
            return None
        rec = self.manifest.lookup(stage, self.key(stage, salt))
        if rec is not None:
            log.info("%s: cache hit (%s)", stage, rec["config_hash"])
        return rec

    def expansion(self, delta: float | None = None, eta: float | None = None) -> cp.Expansion:
        k = (delta, eta)
        if k not in self._expansions:
            try:
                self._expansions[k] = self.cfg.problem(delta, eta).expansion()
            except Exception as exc:
                raise StageFailure("prandtl", f"{type(exc).__name__}: {exc}") from exc
        return self._expansions[k]

    def epsilons(self, key: str = "epsilons") -> list:
        return sorted({float(e) for e in self.cfg["sweep"][key]}, reverse=True)

    # -- stages ----------------------------------------------------------------------------
    def prandtl(self) -> dict:
        rec = self.cached("prandtl")
        if rec:
            return rec
        t = time.perf_counter()
        exp = self.expansion()
        path = art.save_layers(self.out / "prandtl" / f"layers-{self.key('prandtl')}.npz", exp,
                               config_hash=self.key("prandtl"))
        info = {s: {"U_wall": exp.leading[s].U_wall, "iterations": exp.vonmises[s].iterations,
                    "max_ratio": max(exp.vonmises[s].ratios, default=0.0),
                    "A_inf": exp.layer1[s].A_inf if s in exp.layer1 else None,
                    "bw_variation": exp.vonmises[s].circulation_variation()} for s in cp.SIDES}
        info["diagnostics"] = dict(exp.diagnostics)
        return self.manifest.record("prandtl", self.key("prandtl"), [path], time.perf_counter() - t, info)

    def expand(self) -> dict:
        rec = self.cached("expand")
        if rec:
            return rec
        t = time.perf_counter()
        exp = self.expansion()
        K = self.cfg["numerics"]["K"]
        files, rows = [], []
        for eps in sorted(set(self.epsilons()) | set(self.epsilons("residual_epsilons")), reverse=True):
            try:
                comp = cp.assemble(K, eps, exp)
            except Exception as exc:
                raise StageFailure("expand", f"eps={eps}: {exc}") from exc
            files.append(art.save_composite(self.out / "expand" / f"composite-{_eps_tag(eps)}.npz", comp))
            row = cp.residual(comp).as_dict()
            row["max_h"] = float(np.abs(comp.h).max())
            rows.append(row)
        cols = ["epsilon", "K", "l2_u", "l2_v", "linf_u", "linf_v", "l2_du_theta", "max_divergence", "max_h"]
        files.append(write_csv(self.out / "expand" / "composite_residual.csv", rows, cols, self.det))
        info = {"diagnostics": dict(exp.diagnostics)}
        return self.manifest.record("expand", self.key("expand"), files, time.perf_counter() - t, info)

    def solve(self, continuation: bool = False) -> dict:
        """Solve at every sweep eps and return {eps: (state, iterations, residual)}."""
        salt = "continuation" if continuation else ""
        rec = self.cached("solve", salt)
        if rec is None:
            rec = self._solve(continuation, self.key("solve", salt))
        states = {}
        for rel in rec["files"]:
            if rel.endswith(".npz"):
                meta, _ = art.load_npz(self.out / rel)
                states[meta["epsilon"]] = (art.load_state(self.out / rel), meta["iterations"],
                                           meta["newton_residual"])
        return states

    def _solve(self, continuation: bool, key: str) -> dict:
        t = time.perf_counter()
        problem = self.cfg.problem()
        exp = self.expansion()
        eps_list = self.epsilons()
        results, failures = {}, {}
        if continuation:
            try:
                sts, reps = ns.continuation(eps_list, problem.delta, problem.bd,
                                            lambda e, d: problem.seed(exp, e), tol=problem.tol,
                                            max_iter=problem.max_iter, line_search=problem.line_search)
            except ns.ContinuationError as exc:
                sts, reps = exc.states, exc.reports
                failures[exc.epsilon] = str(exc)
            results = {s.epsilon: (s, r) for s, r in zip(sts, reps)}
        else:
            shared = exp if self.workers <= 1 else None
            results, failures = vf._run_points(vf.solve_point, lambda e: (problem, e, shared),
                                               eps_list, self.workers)
        if failures:
            raise StageFailure("solve", "; ".join(f"eps={e}: {m}" for e, m in sorted(failures.items())))
        files, rows = [], []
        for eps in sorted(results, reverse=True):
            st, rep = results[eps]
            files.append(art.save_state(self.out / "solve" / f"ns-{_eps_tag(eps)}.npz", st,
                                        iterations=rep.iterations, newton_residual=rep.final_residual,
                                        history=rep.history))
            rows.append({"epsilon": eps, "iterations": rep.iterations, "residual": rep.final_residual,
                         "seed": rep.path[0]["seed"] if rep.path else "composite"})
        files.append(write_csv(self.out / "solve" / "newton.csv", rows,
                               ["epsilon", "iterations", "residual", "seed"], self.det))
        return self.manifest.record("solve", key, files, time.perf_counter() - t)

    def verify(self, plots: bool = False) -> dict:
        t = time.perf_counter()
        exp = self.expansion()
        states = self.solve()
        points = [vf.point_metrics(st, exp, it, res) for eps, (st, it, res) in
                  sorted(states.items(), reverse=True)]
        rep = vf.SweepReport("epsilon", [p["epsilon"] for p in points], points)
        criteria = vf.theorem_criteria(rep)
        res_rep = vf.composite_sweep(self.cfg.problem(), self.epsilons("residual_epsilons"), K=1)
        criteria.append(vf.residual_criterion(res_rep))
        invariants = {f"ns eps={e}": vf.structural_invariants(st, exp.bd) for e, (st, _, _) in states.items()}
        for e in self.epsilons("residual_epsilons"):
            comp = cp.assemble(self.cfg["numerics"]["K"], e, exp)
            invariants[f"composite eps={e}"] = vf.structural_invariants(comp.as_state(), exp.bd)
        criteria += vf.invariant_criteria(invariants)
        solv = max(exp.diagnostics.values(), default=0.0)
        criteria.append(vf.Criterion("solvability", solv, "< 1e-7", solv < 1e-7))
        cols = ["epsilon", "delta", "sup_u_error", "sup_v", "sup_v_over_eps", "vorticity_error",
                "pb_variation", "newton_iterations", "newton_residual"]
        files = [write_csv(self.out / "verify" / "theorem.csv", rep.rows(), cols, self.det),
                 write_csv(self.out / "verify" / "composite_residual.csv", res_rep.rows(),
                           ["epsilon", "K", "l2_u", "l2_v", "linf_u", "max_divergence", "max_h"], self.det)]
        summary = {
            "schema_version": SCHEMA_VERSION,
            "config_hash": self.cfg.hash(),
            "fits": {"theorem_error": rep.fits["sup_u_error"].as_dict() if "sup_u_error" in rep.fits else None,
                     "composite_residual": res_rep.fits["l2_u"].as_dict()},
            "criteria": [c.as_dict() for c in criteria],
            "invariants": invariants,
            "solvability": dict(exp.diagnostics),
            "passed": all(c.passed for c in criteria),
        }
        files.append(write_json(self.out / "verify" / "summary.json", summary))
        if plots:
            x = rep.column("epsilon")
            files.append(write_svg(self.out / "verify" / "theorem.svg", x,
                                   {"sup |u - leading composite|": rep.column("sup_u_error"),
                                    "sup |v|": rep.column("sup_v"),
                                    "interior vorticity error": rep.column("vorticity_error")},
                                   "epsilon", "error"))
            files.append(write_svg(self.out / "verify" / "composite_residual.svg", res_rep.column("epsilon"),
                                   {"||R_u||_2 (K=1)": res_rep.column("l2_u")}, "epsilon", "residual"))
        self.manifest.record("verify", self.cfg.hash(), files, time.perf_counter() - t,
                             {"passed": summary["passed"]})
        return summary

    def pb_check(self) -> dict:
        t = time.perf_counter()
        rg = RadialGrid(self.cfg["geometry"]["r0"], self.cfg["numerics"]["n_r"])
        r = rg.nodes
        rows = [
            {"case": "c ln r + b", "epsilon": None,
             "variation": vf.pb_diagnostic(-0.7 * np.log(r) + 2.0, np.ones_like(r), rg)},
            {"case": "r^2", "epsilon": None, "variation": vf.pb_diagnostic(r ** 2, np.ones_like(r), rg)},
        ]
        exp = self.expansion()
        for eps, (st, _, _) in sorted(self.solve().items(), reverse=True):
            rows.append({"case": "ns interior", "epsilon": eps,
                         "variation": vf.state_pb_variation(st, exp.profile)})
        ns_var = [row["variation"] for row in rows[2:]]
        criteria = [
            vf.Criterion("pb_log_profile", rows[0]["variation"], "< 1e-10", rows[0]["variation"] < 1e-10),
            vf.Criterion("pb_quadratic_profile", rows[1]["variation"], "> 0.5", rows[1]["variation"] > 0.5),
            vf.Criterion("pb_ns_decreasing", ns_var[-1] if ns_var else float("nan"),
                         "strictly decreasing as eps decreases", vf.strictly_decreasing(ns_var)),
        ]
        summary = {"schema_version": SCHEMA_VERSION, "config_hash": self.cfg.hash(),
                   "criteria": [c.as_dict() for c in criteria], "passed": all(c.passed for c in criteria)}
        files = [write_csv(self.out / "pb" / "pb.csv", rows, ["case", "epsilon", "variation"], self.det),
                 write_json(self.out / "pb" / "summary.json", summary)]
        self.manifest.record("pb-check", self.cfg.hash(), files, time.perf_counter() - t)
        return summary

    def sweep(self, plots: bool = False) -> dict:
        t = time.perf_counter()
        sw = self.cfg["sweep"]
        problem = self.cfg.problem(eta=sw["family_eta"])
        n = self.cfg["numerics"]
        rep = vf.family_report(sw["deltas"], sw["family_epsilon"], problem.bd, problem.c_t,
                               workers=self.workers, n_theta=n["n_theta"], n_r=n["n_r"], K=n["K"],
                               tol=n["newton_tol"], max_iter=n["newton_max_iter"], gamma=n["gamma"],
                               n_layer=n["n_layer"])
        criteria = vf.family_criteria(rep)
        files = [
            write_csv(self.out / "sweep" / "family.csv", rep.rows(),
                      ["delta", "epsilon", "mean_vorticity", "vorticity_error", "newton_iterations",
                       "newton_residual"], self.det),
            write_csv(self.out / "sweep" / "family_pairs.csv", rep.extra["pairs"],
                      ["delta_i", "delta_j", "measured", "target", "relative_error"], self.det),
        ]
        summary = {"schema_version": SCHEMA_VERSION, "config_hash": self.cfg.hash(),
                   "epsilon": sw["family_epsilon"], "eta": sw["family_eta"],
                   "failures": {str(k): v for k, v in rep.failures.items()},
                   "criteria": [c.as_dict() for c in criteria], "passed": all(c.passed for c in criteria)}
        files.append(write_json(self.out / "sweep" / "summary.json", summary))
        if plots and rep.points:
            files.append(write_svg(self.out / "sweep" / "family.svg", rep.column("delta"),
                                   {"interior mean vorticity": rep.column("mean_vorticity")},
                                   "delta", "vorticity", loglog=False))
        self.manifest.record("sweep", self.cfg.hash(), files, time.perf_counter() - t)
        if rep.failures:
            raise StageFailure("sweep", "; ".join(f"delta={d}: {m}" for d, m in sorted(rep.failures.items())))
        return summary


def _overrides(args) -> dict:
    """Config overrides from command-line flags."""
    over = {}
    num = {k: v for k, v in (("newton_tol", args.tol), ("newton_max_iter", args.max_iter),
                             ("n_r", args.n_r), ("n_theta", args.n_theta)) if v is not None}
    if args.line_search:
        num["line_search"] = True
    if num:
        over["numerics"] = num
    if args.eta is not None:
        over["boundary"] = {"eta": args.eta}
    if args.deterministic is not None:
        over["deterministic"] = args.deterministic
    out = {}
    if args.plots:
        out["plots"] = True
    if args.workers is not None:
        out["workers"] = args.workers
    if out:
        over["output"] = out
    return over


def _load_config(args) -> RunConfig:
    return RunConfig.load(args.config, _overrides(args))


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="pbflow", description=__doc__.split("\n\n")[0])
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("-c", "--config", help="YAML or JSON run configuration")
    common.add_argument("-o", "--out", help="output directory (default: output.dir of the config)")
    det = common.add_mutually_exclusive_group()
    det.add_argument("--deterministic", dest="deterministic", action="store_true", default=None,
                     help="fixed-precision CSV output (the default)")
    det.add_argument("--no-deterministic", dest="deterministic", action="store_false")
    common.add_argument("--force", action="store_true", help="ignore cached stage results")
    common.add_argument("--plots", action="store_true", help="also write SVG line charts")
    common.add_argument("--workers", type=int, help="worker processes for sweeps")
    common.add_argument("--eta", type=float, help="override boundary.eta")
    common.add_argument("--tol", type=float, help="Newton tolerance")
    common.add_argument("--max-iter", type=int, help="Newton iteration cap")
    common.add_argument("--n-r", type=int, help="radial Chebyshev points")
    common.add_argument("--n-theta", type=int, help="angular Fourier points")
    common.add_argument("--line-search", action="store_true", help="damp Newton by step halving")
    common.add_argument("-v", "--verbose", action="count", default=0)
    sub = p.add_subparsers(dest="command", required=True)
    for name, helptext in (("prandtl", "boundary layers of both walls"),
                           ("expand", "composite approximations and residuals"),
                           ("solve", "Newton solves over the eps sweep"),
                           ("verify", "metrics and pass/fail per criterion"),
                           ("pb-check", "Prandtl-Batchelor diagnostic"),
                           ("sweep", "delta family at fixed eps")):
        sp = sub.add_parser(name, parents=[common], help=helptext)
        if name == "solve":
            sp.add_argument("--continuation", action="store_true",
                            help="warm-start each eps from the previous solution when that is better")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _load_config(args)
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    pipe = Pipeline(cfg, args.out, force=args.force)
    plots = bool(cfg["output"]["plots"])
    try:
        if args.command == "prandtl":
            rec = pipe.prandtl()
            print(json.dumps({"stage": "prandtl", "config_hash": rec["config_hash"], "files": rec["files"]},
                             indent=2))
            return EXIT_OK
        if args.command == "expand":
            rec = pipe.expand()
            print((pipe.out / "expand" / "composite_residual.csv").read_text(), end="")
            return EXIT_OK
        if args.command == "solve":
            states = pipe.solve(continuation=args.continuation)
            for eps, (_, it, res) in sorted(states.items(), reverse=True):
                print(f"eps={eps:g} iterations={it} residual={res:.3e}")
            return EXIT_OK
        summary = {"verify": pipe.verify, "pb-check": pipe.pb_check, "sweep": pipe.sweep}[args.command](
            **({"plots": plots} if args.command in ("verify", "sweep") else {}))
    except StageFailure as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    except Exception as exc:  # noqa: BLE001 - any solver error is a hard failure of the stage
        print(f"error: [{args.command}] {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAILURE
    for c in summary["criteria"]:
        print(f"{'PASS' if c['passed'] else 'FAIL'} {c['name']}: {c['measured']:.4g} ({c['threshold']})")
    return EXIT_OK if summary["passed"] else EXIT_CRITERION


if __name__ == "__main__":
    sys.exit(main())
