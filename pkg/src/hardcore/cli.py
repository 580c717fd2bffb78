"""Command line interface: ``hardcore <command> [options]``.

Every command writes one JSON document (``schema: 1``) to stdout or to
``--output``.  Exit status is 0 on success, 2 for invalid input and 3
when a computation fails.

Configurations (``--from``/``--to``) may be ``e``, ``o``, ``empty``,
``s<k>`` (K-partite component ``k``), a hex bit-vector such as ``0x5a``,
or ``@path`` naming an ASCII-art file (top row first, ``#`` occupied,
``.`` empty).  ``--to`` accepts a comma-separated list.

CSV columns:
  simulate --csv   replica, steps, capped
  exponent --csv   beta, mean, log_mean_over_beta, capped
  mixing --csv     beta, t_mix, t_mix_is_lower_bound, spectral_gap
"""
from __future__ import annotations

import argparse
import datetime
import json
import math
import sys
from dataclasses import dataclass

import numpy as np

from .errors import ComputationError, ValidationError
from .exact import fit_log_slope, mean_hitting_exact, spectral_gap, tv_mixing_time, write_rows_csv
from .grid import GridSpec, build_grid, chessboard, count_states, from_ascii, from_hex, gamma_formula
from .kpartite import KPartiteSpec, build_kpartite, limit_law, predicted_mean
from .sim import HittingRun, SimConfig, estimate_exponent, ks_exp1, sample_hitting
from .states import as_landscape, enumerate_states, save_state_space

SCHEMA = 1
EXIT_VALIDATION = 2
EXIT_COMPUTATION = 3


@dataclass
class Model:
    """The graph named on the command line and how to resolve configuration names."""

    kind: str
    spec: object
    graph: object
    grid: object = None

    @property
    def description(self) -> dict:
        if self.kind == "grid":
            return {"grid": str(self.spec), "label": self.spec.label}
        return {"kpartite": list(self.spec.sizes)}

    def config(self, text: str) -> int:
        text = text.strip()
        if text in ("e", "o"):
            if self.grid is None:
                raise ValidationError(f"configuration {text!r} needs a grid")
            return chessboard(self.grid, "even" if text == "e" else "odd")
        if text == "empty":
            return 0
        if text.startswith("s") and text[1:].isdigit():
            if self.kind != "kpartite":
                raise ValidationError(f"configuration {text!r} needs a K-partite graph")
            return self.spec.sigma(int(text[1:]))
        if text.startswith("@"):
            if self.grid is None:
                raise ValidationError("ASCII configurations need a grid")
            try:
                with open(text[1:]) as fh:
                    return from_ascii(fh.read(), self.grid)
            except OSError as exc:
                raise ValidationError(f"cannot read {text[1:]}: {exc}") from None
        if text.lower().startswith("0x"):
            value = from_hex(text)
            if not self.graph.is_independent(value) or value >> self.graph.vertex_count:
                raise ValidationError(f"configuration {text} is not admissible")
            return value
        raise ValidationError(f"unknown configuration {text!r}")

    def configs(self, text: str) -> list[int]:
        return [self.config(t) for t in text.split(",") if t.strip()]

    def default_pair(self) -> tuple[str, str]:
        return ("e", "o") if self.kind == "grid" else ("s1", "s2")

    def state_count(self):
        return count_states(self.spec) if self.kind == "grid" else self.spec.state_count


def _model(args) -> Model:
    if args.grid and args.kpartite:
        raise ValidationError("give either --grid or --kpartite, not both")
    if args.grid:
        spec = GridSpec.parse(args.grid)
        grid = build_grid(spec)
        return Model("grid", spec, grid.graph, grid)
    if args.kpartite:
        spec = KPartiteSpec.parse(args.kpartite)
        return Model("kpartite", spec, build_kpartite(spec))
    raise ValidationError("a model is required: --grid KIND:KxL or --kpartite L1,L2,...")


def _landscape(model: Model, cap: int):
    space = enumerate_states(model.graph, cap=cap)
    return space, as_landscape(space)


def _pair(model: Model, args):
    x_text, a_text = model.default_pair()
    x = model.config(args.source or x_text)
    a = model.configs(args.target or a_text)
    if not a:
        raise ValidationError("target set is empty")
    if x in a:
        raise ValidationError("the starting configuration belongs to the target set")
    return x, a


def parse_betas(text: str) -> list[float]:
    """``"2..5"`` (integer range, inclusive) or ``"4,6,8"``."""
    try:
        if ".." in text:
            lo, hi = text.split("..")
            lo, hi = int(lo), int(hi)
            if hi < lo:
                raise ValueError
            betas = [float(b) for b in range(lo, hi + 1)]
        else:
            betas = [float(b) for b in text.split(",") if b.strip()]
    except ValueError:
        raise ValidationError(f"cannot parse beta list {text!r}; use e.g. '2..5' or '4,6,8'") from None
    if not betas or any(not b > 0 for b in betas):
        raise ValidationError("beta values must be positive")
    return betas


def _resolve_seed(seed):
    if seed is not None:
        return int(seed)
    return int(np.random.SeedSequence().entropy % 2 ** 63)


# ------------------------------------------------------------ commands


def cmd_enumerate(args) -> dict:
    model = _model(args)
    space, _ = _landscape(model, args.cap)
    if args.states_out:
        save_state_space(space, args.states_out)
    counts = space.counts_by_energy()
    return {
        "model": model.description,
        "sites": model.graph.vertex_count,
        "states": len(space),
        "counts_by_energy": {str(k): v for k, v in sorted(counts.items())},
        "states_file": args.states_out,
    }


def cmd_landscape(args) -> dict:
    model = _model(args)
    x, a = _pair(model, args)
    space, land = _landscape(model, args.cap)
    report = land.exponent_report(land.index_of(x), [land.index_of(t) for t in a])
    out = {"model": model.description, "states": len(space), "report": report.to_json(land.labels)}
    gamma = report.communication_height - report.energy_x
    out["barrier"] = int(gamma)
    if args.tree:
        with open(args.tree, "w") as fh:
            fh.write(land.cycle_tree().to_edge_list())
        out["tree_file"] = args.tree
    return out


def cmd_verify(args) -> dict:
    from .theorems import verify_grid_theorems

    model = _model(args)
    if model.kind != "grid":
        raise ValidationError("verify needs --grid")
    report = verify_grid_theorems(model.spec, budget=args.budget)
    if not args.quiet:
        print(report.to_text(), file=sys.stderr)
    return {"model": model.description, "formula": gamma_formula(model.spec), "verification": report.to_json()}


def _simulate(model: Model, x, a, beta, args, seed) -> HittingRun:
    sim = SimConfig(beta, seed, max_steps=args.max_steps, replicas=args.replicas)
    if args.method == "rejection_free":
        _, land = _landscape(model, args.cap)
        return sample_hitting(land, land.index_of(x), [land.index_of(t) for t in a], sim,
                              "rejection_free", workers=args.workers)
    return sample_hitting(model.graph, x, a, sim, "baseline", workers=args.workers)


def cmd_simulate(args) -> dict:
    model = _model(args)
    x, a = _pair(model, args)
    seed = _resolve_seed(args.seed)
    run = _simulate(model, x, a, args.beta, args, seed)
    out = {"model": model.description, "from": hex(x), "to": [hex(t) for t in a], "run": run.summary()}
    if args.csv:
        run.write_csv(args.csv)
        out["csv_file"] = args.csv
    if args.ks:
        free = run.uncapped_steps()
        ks = ks_exp1(free, alpha=args.alpha)
        out["ks"] = {"statistic": ks.statistic, "critical_value": ks.critical_value,
                     "alpha": ks.alpha, "p_value": ks.p_value, "n": ks.n, "passed": ks.passed,
                     "uses_uncapped_only": run.biased}
    if model.kind == "kpartite":
        k1, k2 = _sigma_indices(model, x, a)
        if k1 is not None:
            out["prediction"] = {"mean": predicted_mean(model.spec, k1, k2, args.beta),
                                 "limit_law": limit_law(model.spec, k1, k2).to_json()}
    return out


def _sigma_indices(model: Model, x, a):
    sigmas = {model.spec.sigma(k): k for k in range(1, model.spec.K + 1)}
    if x in sigmas and len(a) == 1 and a[0] in sigmas:
        return sigmas[x], sigmas[a[0]]
    return None, None


def cmd_exponent(args) -> dict:
    model = _model(args)
    x, a = _pair(model, args)
    betas = parse_betas(args.betas)
    rows, points = [], []
    out = {"model": model.description, "from": hex(x), "to": [hex(t) for t in a],
           "method": "exact" if args.exact else args.method}
    if args.exact:
        _, land = _landscape(model, args.cap)
        xi, ai = land.index_of(x), [land.index_of(t) for t in a]
        for b in betas:
            m = mean_hitting_exact(land, xi, ai, b)
            points.append((b, m))
            rows.append([b, m, math.log(m) / b, 0])
        fit = fit_log_slope([p[0] for p in points], [p[1] for p in points])
    else:
        seed = _resolve_seed(args.seed)
        out["seed"] = seed
        for b in betas:
            run = _simulate(model, x, a, b, args, seed)
            if run.biased and not args.allow_capped:
                raise ValidationError(f"{run.capped_count} replicas at beta={b} reached the step cap; "
                                      "raise --max-steps or pass --allow-capped")
            points.append((b, run))
            rows.append([b, run.mean(), math.log(run.mean()) / b, run.capped_count])
        fit = estimate_exponent(points, allow_capped=args.allow_capped)
    out["points"] = [{"beta": r[0], "mean": r[1], "log_mean_over_beta": r[2], "capped": r[3]} for r in rows]
    out["slope"] = fit.slope
    out["intercept"] = fit.intercept
    out["slope_stderr"] = fit.stderr
    if model.kind == "grid":
        out["formula"] = gamma_formula(model.spec)
    if args.csv:
        write_rows_csv(args.csv, ["beta", "mean", "log_mean_over_beta", "capped"], rows)
        out["csv_file"] = args.csv
    return out


def cmd_mixing(args) -> dict:
    model = _model(args)
    betas = parse_betas(args.betas)
    _, land = _landscape(model, args.cap)
    rows = []
    for b in betas:
        mix = tv_mixing_time(land, b, eps=args.eps)
        gap = spectral_gap(land, b)
        rows.append([b, mix.steps, int(mix.is_lower_bound), gap])
    out = {
        "model": model.description,
        "eps": args.eps,
        "points": [{"beta": r[0], "t_mix": r[1], "t_mix_is_lower_bound": bool(r[2]), "spectral_gap": r[3],
                    "log_t_mix_over_beta": math.log(r[1]) / r[0], "neg_log_gap_over_beta": -math.log(r[3]) / r[0]}
                   for r in rows],
    }
    if len(set(betas)) >= 2:
        out["t_mix_slope"] = fit_log_slope(betas, [r[1] for r in rows]).slope
        out["gap_slope"] = -fit_log_slope(betas, [r[3] for r in rows]).slope
    if model.kind == "grid":
        out["formula"] = gamma_formula(model.spec)
    if args.csv:
        write_rows_csv(args.csv, ["beta", "t_mix", "t_mix_is_lower_bound", "spectral_gap"], rows)
        out["csv_file"] = args.csv
    return out


# ------------------------------------------------------------- parser


def _add_model(p):
    p.add_argument("--grid", help="lattice such as open:3x4, toroidal:4x4, cylindrical:4x2")
    p.add_argument("--kpartite", help="complete K-partite component sizes, e.g. 2,2,1")
    p.add_argument("--cap", type=int, default=36, help="largest number of sites to enumerate (default 36)")
    p.add_argument("-o", "--output", help="write the JSON report here instead of stdout")


def _add_pair(p):
    p.add_argument("--from", dest="source", help="start configuration (default e, or s1 for K-partite)")
    p.add_argument("--to", dest="target", help="target configurations, comma separated (default o, or s2)")


def _add_sim(p):
    p.add_argument("--replicas", type=int, default=1000)
    p.add_argument("--seed", type=int, help="64-bit seed; generated and recorded when omitted")
    p.add_argument("--max-steps", type=int, default=10 ** 12, help="per-replica step cap")
    p.add_argument("--method", choices=["baseline", "rejection_free"], default="rejection_free")
    p.add_argument("--workers", type=int, default=1, help="processes; results do not depend on it")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="hardcore", description=__doc__,
                                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("enumerate", help="list admissible configurations")
    _add_model(p)
    p.add_argument("--states-out", help="write the full state space as JSON")
    p.set_defaults(func=cmd_enumerate)

    p = sub.add_parser("landscape", help="barrier exponents and assumption verdicts for a pair")
    _add_model(p)
    _add_pair(p)
    p.add_argument("--tree", help="write the cycle tree as a DOT edge list")
    p.set_defaults(func=cmd_landscape)

    p = sub.add_parser("verify", help="exhaustive check of the grid barrier results")
    _add_model(p)
    p.add_argument("--budget", type=int, default=500_000, help="largest state space to analyse")
    p.add_argument("--quiet", action="store_true", help="omit the text table on stderr")
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("simulate", help="Monte Carlo hitting times at one beta")
    _add_model(p)
    _add_pair(p)
    _add_sim(p)
    p.add_argument("--beta", type=float, required=True)
    p.add_argument("--ks", action="store_true", help="KS test of mean-scaled times against Exp(1)")
    p.add_argument("--alpha", type=float, default=0.01)
    p.add_argument("--csv", help="per-replica CSV output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("exponent", help="slope of log mean hitting time against beta")
    _add_model(p)
    _add_pair(p)
    _add_sim(p)
    p.add_argument("--betas", required=True, help="e.g. 4,6,8 or 2..5")
    p.add_argument("--exact", action="store_true", help="solve for exact means instead of simulating")
    p.add_argument("--allow-capped", action="store_true", help="accept runs with capped replicas")
    p.add_argument("--csv", help="per-beta CSV output")
    p.set_defaults(func=cmd_exponent)

    p = sub.add_parser("mixing", help="exact mixing times and spectral gaps")
    _add_model(p)
    p.add_argument("--betas", required=True)
    p.add_argument("--eps", type=float, default=0.25)
    p.add_argument("--csv")
    p.set_defaults(func=cmd_mixing)
    return parser


def _emit(payload: dict, command: str, path) -> None:
    doc = {"schema": SCHEMA, "command": command,
           "timestamp": datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")}
    doc.update(payload)
    text = json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"
    if path:
        with open(path, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _json_default(value):
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.floating):
        return float(value)
    if isinstance(value, (set, frozenset)):
        return sorted(value)
    raise TypeError(f"cannot serialize {type(value).__name__}")


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        payload = args.func(args)
        if getattr(args, "seed", None) is None and "run" in payload:
            payload["seed_generated"] = True
        _emit(payload, args.command, args.output)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ComputationError as exc:
        print(f"computation failed: {exc}", file=sys.stderr)
        return EXIT_COMPUTATION
    return 0


if __name__ == "__main__":
    sys.exit(main())
