"""Command-line front end.

Subcommands::

    costbic enumerate --data D.csv --costs C.csv [--mode cost-benefit] [--method laplace]
    costbic search    --data D.csv --costs C.csv [--sampler mc3] [--iters N] [--seed S]
    costbic score     --data D.csv --costs C.csv --model "X1+X3"
    costbic simulate  --n 300 --beta -0.3,0.9,0 --out sim.csv

Reports go to ``--out`` (or stdout) as JSON or long-format CSV
(``section,row,field,value``); both carry the same numbers at full precision.
Exit codes: 0 success, 1 usage, 2 data validation, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import logging
import math
import platform
import sys
import warnings
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__
from .dataset import Dataset, DatasetError, SyntheticSpec, load_dataset, synthesize, write_dataset
from .diagnostics import EXACT_LOO_MAX_N, cv_log_score_exact, cv_log_score_mcmc, posterior_deviance
from .evidence import NotConvergedError, Scorer
from .model_space import ModelIndicator, dimension, parse_notation, total_cost
from .oracle import PosteriorTable, enumerate_posterior, marginal_inclusion_from_table
from .priors import CostPriorSpec
from .samplers import SamplerConfig, SamplerError, sample_coefficients, two_stage_search

log = logging.getLogger(__name__)

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3


class UsageError(Exception):
    pass


# -- report -------------------------------------------------------------------

@dataclass
class RunReport:
    """Everything a run produced, in a form that serializes deterministically."""

    command: str
    config: dict
    models: list[dict] = field(default_factory=list)
    marginals: list[dict] = field(default_factory=list)
    diagnostics: list[dict] = field(default_factory=list)
    search: dict = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        out = {"command": self.command, "config": self.config, "models": self.models,
               "marginals": self.marginals, "diagnostics": self.diagnostics}
        if self.search:
            out["search"] = self.search
        out["warnings"] = [{"message": w} for w in self.warnings]
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["section", "row", "field", "value"])
        w.writerows(flatten_report(self.to_dict()))
        return buf.getvalue()

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_csv()


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


def _flatten(prefix: str, value, out: list):
    if isinstance(value, dict):
        for k, v in value.items():
            _flatten(f"{prefix}.{k}" if prefix else str(k), v, out)
    elif isinstance(value, list):
        for i, v in enumerate(value):
            _flatten(f"{prefix}.{i}" if prefix else str(i), v, out)
    else:
        out.append((prefix, value))


def flatten_report(report: dict) -> list[tuple[str, int, str, str]]:
    """``(section, row, field, value)`` rows; list sections get one row per entry."""
    rows = []
    for section, body in report.items():
        if isinstance(body, list):
            for i, entry in enumerate(body):
                leaves: list = []
                _flatten("", entry, leaves)
                rows.extend((section, i, k, format_value(v)) for k, v in leaves)
        elif isinstance(body, dict):
            leaves = []
            _flatten("", body, leaves)
            rows.extend((section, 0, k, format_value(v)) for k, v in leaves)
        else:
            rows.append((section, 0, "value", format_value(body)))
    return rows


# -- helpers ------------------------------------------------------------------

def _sha256(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _versions() -> dict:
    import scipy

    return {"costbic": __version__, "numpy": np.__version__, "scipy": scipy.__version__,
            "python": platform.python_version()}


def _data_config(args) -> dict:
    return {"data": args.data, "costs": args.costs, "data_sha256": _sha256(args.data),
            "costs_sha256": _sha256(args.costs)}


def _load(args) -> tuple[Dataset, CostPriorSpec]:
    try:
        d = load_dataset(args.data, args.costs)
    except OSError as exc:
        raise DatasetError(str(exc)) from exc
    spec = CostPriorSpec.from_dataset(d, mode=args.mode.replace("-", "_"))
    return d, spec


def _model_rows(entries, names, top_k) -> list[dict]:
    """``entries``: (model, score, prob, cost, excluded) sorted best first."""
    entries = list(entries)[:top_k]
    if not entries:
        return []
    best = entries[0][1]
    rows = []
    for rank, (g, sc, prob, cost, excluded) in enumerate(entries, start=1):
        lpo = math.inf if excluded else 0.5 * (sc - best)  # log PO of the best model over this one
        rows.append({
            "rank": rank,
            "model": g.notation(names),
            "indices": list(g.indices),
            "dim": dimension(g),
            "cost": float(cost),
            "score": float(sc),
            "prob": float(prob),
            "log_po_best": float(lpo),
            "po_best": float(math.exp(lpo)) if lpo < 709 else math.inf,
        })
    return rows


def _diagnostic_row(g: ModelIndicator, d: Dataset, spec: CostPriorSpec, args, warn: list) -> dict:
    samples = sample_coefficients(g, d, args.draws, burn_in=args.diag_burnin, seed=args.seed)
    dev = posterior_deviance(g, d, samples=samples)
    ls = cv_log_score_mcmc(g, d, samples=samples)
    if ls.n_floored:
        warn.append(f"{g.notation(d.names)}: {ls.n_floored} predictive densities floored at 1e-300")
    if ls.unreliable:
        warn.append(f"{g.notation(d.names)}: LS_CV (posterior draws) is unreliable")
    exact = cv_log_score_exact(g, d) if d.n <= EXACT_LOO_MAX_N and not args.no_exact_loo else None
    return {
        "model": g.notation(d.names),
        "dim": dimension(g),
        "cost": total_cost(g, spec.costs),
        "deviance_min": dev.minimum,
        "deviance_median": dev.median,
        "deviance_mean": dev.mean,
        "deviance_max": dev.maximum,
        "deviance_mle": dev.mle_deviance,
        "ls_cv_mcmc": ls.value,
        "ls_cv_mcmc_se": ls.jackknife_se,
        "ls_cv_exact": exact,
        "n_floored": ls.n_floored,
        "unreliable": ls.unreliable,
        "draws": dev.size,
        "acceptance_rate": dev.settings["acceptance_rate"],
    }


def _excluded_warnings(table: PosteriorTable, names) -> list[str]:
    return [f"excluded model {r.model.notation(names)}" for r in table.rows if r.excluded]


def _diag_config(args) -> dict:
    return {"models": args.diagnostics, "draws": args.draws, "burn_in": args.diag_burnin,
            "exact_loo": not args.no_exact_loo}


# -- commands -----------------------------------------------------------------

def cmd_enumerate(args) -> RunReport:
    d, spec = _load(args)
    table = enumerate_posterior(d, spec, args.method)
    config = {**_data_config(args), "mode": args.mode, "method": args.method, "top_k": args.top_k,
              "seed": args.seed, "diagnostics": _diag_config(args), "prior": spec.to_dict(),
              "versions": _versions()}
    report = RunReport("enumerate", config)
    report.models = _model_rows(
        ((r.model, r.score, r.probability, r.cost, r.excluded) for r in table.rows), d.names, args.top_k)
    marg = marginal_inclusion_from_table(table)
    report.marginals = [{"variable": name, "index": j, "cost": float(c), "prob": float(m)}
                        for j, (name, c, m) in enumerate(zip(d.names, d.costs, marg), start=1)]
    report.warnings = _excluded_warnings(table, d.names)
    for r in table.rows[:args.diagnostics]:
        if not r.excluded:
            report.diagnostics.append(_diagnostic_row(r.model, d, spec, args, report.warnings))
    return report


def _write_side_files(out: Path, result) -> list[str]:
    stem = out.with_suffix("")
    files = {
        f"{stem}_stage1_visits.csv": result.stage1.visits_csv(),
        f"{stem}_stage1_marginals.csv": result.stage1.marginals_csv(),
    }
    for c in range(len(result.stage1.histories)):
        files[f"{stem}_stage1_trace_chain{c}.csv"] = result.stage1.trace_csv(c)
    if isinstance(result.stage2, PosteriorTable):
        files[f"{stem}_stage2_table.csv"] = result.stage2.to_csv()
    else:
        files[f"{stem}_stage2_visits.csv"] = result.stage2.visits_csv()
        files[f"{stem}_stage2_marginals.csv"] = result.stage2.marginals_csv()
    for path, text in files.items():
        Path(path).write_text(text, encoding="utf-8")
    return sorted(Path(p).name for p in files)


def cmd_search(args) -> RunReport:
    d, spec = _load(args)
    if args.sampler == "mc3":
        method = "mc3_laplace" if args.method == "laplace" else "mc3_bic"
    else:
        if args.method != "laplace":
            raise UsageError("rjmcmc targets the Laplace posterior; use --method laplace")
        method = "rjmcmc"
    cfg = SamplerConfig(method=method, iterations=args.iters, burn_in=args.burnin, seed=args.seed,
                        start=args.start, scan=args.scan, chains=args.chains)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        result = two_stage_search(d, spec, cfg, threshold=args.threshold)
    config = {**_data_config(args), "mode": args.mode, "method": args.method, "sampler": cfg.to_dict(),
              "threshold": args.threshold, "top_k": args.top_k, "seed": args.seed,
              "diagnostics": _diag_config(args), "prior": spec.to_dict(), "versions": _versions()}
    report = RunReport("search", config)
    report.warnings = [str(w.message) for w in caught]

    scorer = Scorer(d, spec)
    evidence = "bic" if method == "mc3_bic" else "laplace"
    if isinstance(result.stage2, PosteriorTable):
        entries = [(result.lift(r.model), r.score, r.probability, r.cost, r.excluded) for r in result.stage2.rows]
        report.warnings += _excluded_warnings(result.stage2, result.reduced_data.names)
    else:
        freq = sorted(result.stage2.frequencies().items(), key=lambda kv: (-kv[1], kv[0]))
        entries = []
        for code, f in freq:
            g = result.lift(code)
            s = scorer.score(g, evidence)
            entries.append((g, s.score, f, s.cost, s.excluded))
    report.models = _model_rows(entries, d.names, args.top_k)

    final = result.stage2_marginals()
    report.marginals = [
        {"variable": name, "index": j, "cost": float(c), "stage1_prob": float(m1),
         "retained": j in result.reduced, "prob": float(m2)}
        for j, (name, c, m1, m2) in enumerate(zip(d.names, d.costs, result.stage1_marginals, final), start=1)
    ]
    report.search = {
        "reduced": list(result.reduced),
        "stage1_acceptance": [float(a) for a in result.stage1.acceptance],
        "stage1_birth_death_acceptance": [float(a) for a in result.stage1.birth_death_acceptance],
        "stage1_chain_seeds": list(result.stage1.chain_seeds),
        "stage1_kept": result.stage1.n_kept,
        "stage2": "enumeration" if isinstance(result.stage2, PosteriorTable) else method,
    }
    if args.out:
        report.search["files"] = _write_side_files(Path(args.out), result)
    for row in entries[:args.diagnostics]:
        if not row[4]:
            report.diagnostics.append(_diagnostic_row(row[0], d, spec, args, report.warnings))
    return report


def cmd_score(args) -> RunReport:
    d, spec = _load(args)
    try:
        g = parse_notation(args.model, d.names)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    s = Scorer(d, spec).score(g, args.method)
    config = {**_data_config(args), "mode": args.mode, "method": args.method, "model": args.model,
              "seed": args.seed, "diagnostics": _diag_config(args), "prior": spec.to_dict(),
              "versions": _versions()}
    report = RunReport("score", config)
    report.models = _model_rows([(g, s.score, math.nan, s.cost, s.excluded)], d.names, 1)
    report.models[0]["loglik"] = s.loglik
    report.models[0]["log_prior"] = s.log_prior
    if s.excluded:
        raise np.linalg.LinAlgError(f"model {args.model!r} cannot be scored: {s.reason}")
    report.diagnostics.append(_diagnostic_row(g, d, spec, args, report.warnings))
    return report


def _floats(text: str, what: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise UsageError(f"{what} must be a comma-separated list of numbers, got {text!r}") from None


def _pairs(text: str) -> dict:
    out = {}
    for item in filter(None, (t.strip() for t in text.split(","))):
        try:
            ab, r = item.split(":")
            a, b = ab.split("-")
            out[(int(a), int(b))] = float(r)
        except ValueError:
            raise UsageError(f"correlation entries look like '1-4:0.5', got {item!r}") from None
    return out


def cmd_simulate(args) -> RunReport:
    if args.config:
        try:
            sim = SyntheticSpec.from_file(args.config)
        except (OSError, KeyError, json.JSONDecodeError) as exc:
            raise DatasetError(f"cannot read synthetic config {args.config}: {exc}") from exc
    else:
        if args.n is None or args.beta is None:
            raise UsageError("simulate needs --config or both --n and --beta")
        sim = SyntheticSpec(
            n=args.n,
            beta=_floats(args.beta, "--beta"),
            costs=_floats(args.sim_costs, "--costs") if args.sim_costs else None,
            correlation=_pairs(args.corr) if args.corr else None,
            seed=args.seed,
            names=args.names.split(",") if args.names else None,
        )
    d = synthesize(sim)
    out = Path(args.out)
    costs_out = Path(args.costs_out) if args.costs_out else out.with_name(out.stem + "_costs.csv")
    write_dataset(d, out, costs_out)
    R = np.corrcoef(d.X[:, 1:], rowvar=False) if d.p > 1 else np.ones((d.p, d.p))
    report = RunReport("simulate", {"spec": sim.to_dict(), "data": str(out), "costs": str(costs_out),
                                    "versions": _versions()})
    report.search = {"n": d.n, "p": d.p, "events": int(d.y.sum()),
                     "data_sha256": _sha256(out), "costs_sha256": _sha256(costs_out)}
    report.marginals = [{"variable": name, "index": j, "cost": float(c)}
                        for j, (name, c) in enumerate(zip(d.names, d.costs), start=1)]
    if isinstance(sim.correlation, dict):
        report.diagnostics = [{"pair": f"{a}-{b}", "target": r, "realized": float(R[a - 1, b - 1])}
                              for (a, b), r in sorted(sim.correlation.items())]
    return report


# -- argument parsing -----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return v


def _common(sp, data=True):
    if data:
        sp.add_argument("--data", required=True, help="CSV with the 0/1 response first, then predictors")
        sp.add_argument("--costs", required=True, help="CSV of variable,cost rows")
        sp.add_argument("--mode", choices=["cost-benefit", "benefit-only"], default="cost-benefit")
        sp.add_argument("--method", choices=["laplace", "bic"], default="laplace")
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--format", choices=["json", "csv"], default="json")
    sp.add_argument("--out", help="report path (default: stdout)")


def _diag_flags(sp, default_models):
    sp.add_argument("--diagnostics", type=int, default=default_models, metavar="K",
                    help="run fit diagnostics on the top K models")
    sp.add_argument("--draws", type=_positive, default=10_000, help="within-model posterior draws")
    sp.add_argument("--diag-burnin", type=int, default=2_000)
    sp.add_argument("--no-exact-loo", action="store_true", help="skip the leave-one-out refits")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="costbic", description="Cost-aware Bayesian variable selection for logistic regression.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    sp = sub.add_parser("enumerate", help="exact posterior over all 2^p models (p <= 20)")
    _common(sp)
    sp.add_argument("--top-k", type=_positive, default=10)
    _diag_flags(sp, 1)
    sp.set_defaults(func=cmd_enumerate)

    sp = sub.add_parser("search", help="two-stage MCMC search")
    _common(sp)
    sp.add_argument("--sampler", choices=["mc3", "rjmcmc"], default="mc3")
    sp.add_argument("--iters", type=_positive, help="iterations including burn-in")
    sp.add_argument("--burnin", type=int)
    sp.add_argument("--chains", type=_positive, default=1)
    sp.add_argument("--threshold", type=float, default=0.3)
    sp.add_argument("--start", choices=["null", "full"], default="null")
    sp.add_argument("--scan", choices=["systematic", "random"], default="systematic")
    sp.add_argument("--top-k", type=_positive, default=10)
    _diag_flags(sp, 1)
    sp.set_defaults(func=cmd_search)

    sp = sub.add_parser("score", help="score and diagnose one model")
    _common(sp)
    sp.add_argument("--model", required=True, help='model notation, e.g. "X1+X3" or "1" for intercept only')
    _diag_flags(sp, 1)
    sp.set_defaults(func=cmd_score)

    sp = sub.add_parser("simulate", help="write a synthetic dataset and cost file")
    _common(sp, data=False)
    sp.add_argument("--config", help="JSON synthetic spec (overrides the flags below)")
    sp.add_argument("--n", type=_positive)
    sp.add_argument("--beta", help="intercept first, comma separated")
    sp.add_argument("--corr", help="pairwise correlations, e.g. 1-4:0.5,2-5:0.3")
    sp.add_argument("--costs", dest="sim_costs", help="per-predictor costs, comma separated")
    sp.add_argument("--names", help="comma-separated predictor names")
    sp.add_argument("--costs-out", help="cost file path (default: <out stem>_costs.csv)")
    sp.set_defaults(func=cmd_simulate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command == "simulate" and not args.out:
            parser.error("simulate requires --out")
        if args.command == "search" and not 0 < args.threshold < 1:
            parser.error("--threshold must lie in (0, 1)")
    except SystemExit as exc:
        # argparse exits directly; hand the code back so in-process callers keep control.
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(message)s")
    try:
        report = args.func(args)
    except UsageError as exc:
        print(f"costbic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DatasetError as exc:
        print(f"costbic: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (np.linalg.LinAlgError, NotConvergedError, SamplerError, FloatingPointError) as exc:
        print(f"costbic: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"costbic: error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    text = report.render(args.format)
    if args.out and args.command != "simulate":
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
