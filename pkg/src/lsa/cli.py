"""Command-line entry point: ``lsa generate | train | eval | report | repro | algebra``.

Exit codes: 0 success, 1 usage or parse error, 2 invariant failure, 3 I/O error.

Output layout under the output directory (``LSA_OUT`` overrides the config)::

    config.json
    level{L}/dataset/{manifest.json, injectivity.json, frames/...}
    level{L}/probe_{loss}.json  level{L}/loss_{loss}.csv
    level{L}/report_{loss}.json level{L}/report_{loss}.csv
    summary_{loss}.json  report.csv  compounding.json
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

import numpy as np
import yaml

from . import barrington as bp
from . import groups
from .config import LOSS_KINDS, ExperimentConfig
from .embed import ENCODER_KINDS, DivergenceError, ProbeParams, write_curve
from .evalrec import ConfigError, EvalReport, compare_levels, compounding_sim
from .pipeline import evaluate_split, prepare_encoder, train_on_dataset
from .scene import Dataset, rotation_generators

EXIT_OK, EXIT_USAGE, EXIT_INVARIANT, EXIT_IO = 0, 1, 2, 3
COMPOUNDING_EPS = 0.01


class InvariantFailure(RuntimeError):
    pass


class _ArgParser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _dump(obj) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"


# ---------------------------------------------------------------------------
# paths


def level_dir(root: Path, level: int) -> Path:
    return Path(root) / f"level{level}"


def dataset_dir(root: Path, level: int) -> Path:
    return level_dir(root, level) / "dataset"


def probe_path(root: Path, level: int, loss_kind: str) -> Path:
    return level_dir(root, level) / f"probe_{loss_kind}.json"


def curve_path(root: Path, level: int, loss_kind: str) -> Path:
    return level_dir(root, level) / f"loss_{loss_kind}.csv"


def report_path(root: Path, level: int, loss_kind: str, suffix: str = "json") -> Path:
    return level_dir(root, level) / f"report_{loss_kind}.{suffix}"


def _load_dataset(root: Path, level: int) -> Dataset:
    path = dataset_dir(root, level)
    if not (path / "manifest.json").exists():
        raise FileNotFoundError(f"no dataset for level {level} at {path}; run 'lsa generate' first")
    return Dataset.load(path)


def _metadata(cfg: ExperimentConfig, loss_kind: str) -> dict:
    return {"seed": cfg.seed, "train": cfg.train_config(loss_kind).to_dict()}


# ---------------------------------------------------------------------------
# pipeline commands


def cmd_generate(cfg: ExperimentConfig, workers: int = 1, strict: bool = False, out=None) -> int:
    out = out or sys.stdout
    root = cfg.output_root()
    root.mkdir(parents=True, exist_ok=True)
    (root / "config.json").write_text(cfg.dumps())
    failed = []
    for level in cfg.levels:
        ds = Dataset.generate(cfg.dataset_config(level), workers)
        ds.write(dataset_dir(root, level))
        inj = ds.injectivity
        status = "passed" if inj["passed"] else f"FAILED ({len(inj['violations'])} violations)"
        print(
            f"level {level}: {len(ds.train)} train / {len(ds.test)} test trajectories, "
            f"injectivity {status}, min distance {inj['min_distance']:.1f}",
            file=out,
        )
        if not inj["passed"]:
            failed.append(level)
    if failed and strict:
        print(f"injectivity violated at levels {failed}", file=sys.stderr)
        return EXIT_INVARIANT
    return EXIT_OK


def cmd_train(cfg: ExperimentConfig, out=None) -> int:
    out = out or sys.stdout
    root = cfg.output_root()
    for level in cfg.levels:
        ds = _load_dataset(root, level)
        encoder = prepare_encoder(ds, cfg.encoder_spec())
        for loss_kind in cfg.losses:
            params, curve = train_on_dataset(ds, encoder, cfg.train_config(loss_kind))
            params.save(probe_path(root, level, loss_kind))
            write_curve(curve_path(root, level, loss_kind), curve)
            print(f"level {level} {loss_kind}: {len(curve)} epochs, final loss {curve[-1]:.6g}", file=out)
    return EXIT_OK


def cmd_eval(cfg: ExperimentConfig, out=None) -> int:
    out = out or sys.stdout
    root = cfg.output_root()
    for level in cfg.levels:
        ds = _load_dataset(root, level)
        encoder = prepare_encoder(ds, cfg.encoder_spec())
        for loss_kind in cfg.losses:
            path = probe_path(root, level, loss_kind)
            if not path.exists():
                raise FileNotFoundError(f"no trained probe at {path}; run 'lsa train' first")
            probe = ProbeParams.load(path)
            report = evaluate_split(ds, probe, encoder, loss_kind, _metadata(cfg, loss_kind))
            report.save(report_path(root, level, loss_kind))
            report_path(root, level, loss_kind, "csv").write_text(report.to_csv())
            print(
                f"level {level} {loss_kind}: AUC {report.auc():.6g}, "
                f"ratio@N=20 {_fmt(report.step(20).ratio) if report.per_step[-1].n >= 20 else 'n/a'}, "
                f"collapse step {report.collapse_step}",
                file=out,
            )
    return EXIT_OK


def _fmt(v) -> str:
    return "n/a" if v is None else f"{v:.4g}"


def cmd_report(cfg: ExperimentConfig, strict: bool = False, out=None) -> int:
    out = out or sys.stdout
    root = cfg.output_root()
    rows = ["level,loss,N,mean_loss,baseline,ratio"]
    code = EXIT_OK
    for loss_kind in cfg.losses:
        reports = {}
        for level in cfg.levels:
            path = report_path(root, level, loss_kind)
            if not path.exists():
                raise FileNotFoundError(f"no report at {path}; run 'lsa eval' first")
            reports[level] = EvalReport.load(path)
            rows += reports[level].to_csv().splitlines()[1:]
        summary = compare_levels(reports)
        (root / f"summary_{loss_kind}.json").write_text(_dump(summary))
        aucs = ", ".join(f"{k}={v:.6g}" for k, v in summary["auc"].items())
        print(f"{loss_kind}: AUC {aucs}; ordering {' > '.join(summary['ordering'])}", file=out)
        if strict and 1 in reports and 3 in reports and not reports[3].auc() > reports[1].auc():
            print(f"{loss_kind}: expected L3 AUC above L1 AUC", file=sys.stderr)
            code = EXIT_INVARIANT
    (root / "report.csv").write_text("\n".join(rows) + "\n")

    sim = compounding_sim(COMPOUNDING_EPS, 20, rotation_generators(), seed=cfg.seed)
    (root / "compounding.json").write_text(
        _dump({
            "epsilon": sim.epsilon,
            "noise": sim.noise,
            "trials": sim.trials,
            "mean": sim.mean.tolist(),
            "std": sim.std.tolist(),
            "closed_form": sim.closed_form().tolist(),
        })
    )
    print(f"compounding (eps={sim.epsilon}): mean drift at N=20 {sim.mean[-1]:.4g}, "
          f"(1+eps)^20-1 = {sim.closed_form()[-1]:.4g}", file=out)
    return code


def cmd_repro(cfg: ExperimentConfig, workers: int = 1, strict: bool = False, out=None) -> int:
    out = out or sys.stdout
    code = cmd_generate(cfg, workers, strict, out)
    if code != EXIT_OK:
        return code
    cmd_train(cfg, out)
    cmd_eval(cfg, out)
    return cmd_report(cfg, strict, out)


# ---------------------------------------------------------------------------
# algebra


def _group_from_args(items: list[str]) -> groups.GroupSpec:
    if items[0].lstrip().startswith("("):
        return groups.spec_from_cycles(items)
    if len(items) != 1:
        raise ValueError("give either one preset name or one cycle string per generator")
    try:
        return groups.preset(items[0])
    except KeyError as exc:
        raise ValueError(exc.args[0]) from None


def _element_text(g) -> str:
    if isinstance(g, groups.Permutation):
        return g.cycle_string()
    return np.array2string(np.round(g.entries, 9) + 0.0, precision=6, suppress_small=True)


def _element_json(g):
    if isinstance(g, groups.Permutation):
        return {"cycles": g.cycle_string(), "images": list(g.images)}
    return {"matrix": np.round(g.entries, 12).tolist()}


def algebra_derived_series(items: list[str]) -> tuple[list[str], dict]:
    spec = groups.permutation_spec_of(_group_from_args(items))
    cls = groups.derived_series(spec)
    lines = [
        f"group: {' '.join(items)} ({len(spec.generators)} generators on {spec.degree} points)",
        f"derived series orders: {', '.join(map(str, cls.series_orders))}",
        f"class: {cls.level.value}",
    ]
    return lines, {"orders": list(cls.series_orders), "class": cls.level.value}


def algebra_word_eval(group: str, word: str) -> tuple[list[str], dict]:
    spec = _group_from_args([group])
    parsed = groups.parse_word(word, spec)
    g = groups.word_evaluate(spec, parsed)
    ident = groups.is_identity(g)
    lines = [f"word length: {len(parsed)}", f"element: {_element_text(g)}", f"identity: {str(ident).lower()}"]
    return lines, {"length": len(parsed), "element": _element_json(g), "identity": ident}


def algebra_barrington(formula: str, sigma: str) -> tuple[list[str], dict]:
    f = bp.parse_formula(formula)
    program = bp.compile_formula(f, groups.parse_cycles(sigma, 5))
    check = bp.truth_table_report(f, program)
    lines = [
        f"formula: {bp.to_text(f)}",
        f"depth: {bp.depth(f)}",
        f"length: {len(program)}",
        f"accept cycle: {program.accept_cycle.cycle_string()}",
        f"truth table: {'verified' if check['verified'] else 'MISMATCH'} over {check['assignments']} assignments",
    ]
    data = {"formula": bp.to_text(f), "depth": bp.depth(f), "program": program.to_json(), "truth_table": check}
    return lines, data


def cmd_algebra(args, out=None) -> int:
    out = out or sys.stdout
    if args.op == "derived-series":
        lines, data = algebra_derived_series(args.group)
    elif args.op == "word-eval":
        lines, data = algebra_word_eval(args.group, args.word)
    else:
        lines, data = algebra_barrington(args.formula, args.sigma)
    print("\n".join(lines), file=out)
    print(_dump(data), end="", file=out)
    if args.op == "barrington" and not data["truth_table"]["verified"]:
        return EXIT_INVARIANT
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument handling


def build_parser() -> argparse.ArgumentParser:
    parser = _ArgParser(prog="lsa", description="Latent space algebra benchmark and group tools.")
    sub = parser.add_subparsers(dest="command", required=True)

    common = _ArgParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML or JSON experiment config")
    common.add_argument("--seed", type=int, help="override the global seed for every RNG stream")
    common.add_argument("--level", type=int, choices=(1, 2, 3), help="restrict to one level")
    common.add_argument("--loss", choices=LOSS_KINDS, help="restrict to one loss kind")
    common.add_argument("--encoder", choices=ENCODER_KINDS, help="encoder kind")
    common.add_argument("--workers", type=int, default=os.cpu_count() or 1, help="render threads")
    common.add_argument("--strict", action="store_true", help="exit 2 on invariant violations")

    sub.add_parser("generate", parents=[common], help="render datasets and check injectivity")
    sub.add_parser("train", parents=[common], help="fit probes on the atomic split")
    sub.add_parser("eval", parents=[common], help="recursive evaluation on the test split")
    sub.add_parser("report", parents=[common], help="compare levels and write summaries")
    sub.add_parser("repro", parents=[common], help="generate, train, eval and report")

    alg = sub.add_parser("algebra", help="group and branching-program computations")
    ops = alg.add_subparsers(dest="op", required=True)
    ds = ops.add_parser("derived-series", help="derived series and solvability class")
    ds.add_argument("group", nargs="+", help="preset (S4, A5, Z5, icosahedral) or cycle strings")
    we = ops.add_parser("word-eval", help="evaluate a word over a preset group")
    we.add_argument("group")
    we.add_argument("word", help="e.g. 'g0 g1^-1 g0'")
    br = ops.add_parser("barrington", help="compile a formula to a width-5 program")
    br.add_argument("formula", help="e.g. '((x0 & !x1) | x2)'")
    br.add_argument("--sigma", default="(0 1 2 3 4)", help="accepting 5-cycle")
    return parser


def config_from_args(args) -> ExperimentConfig:
    cfg = ExperimentConfig.load(args.config) if args.config else ExperimentConfig()
    if args.seed is not None:
        cfg = cfg.with_seed(args.seed)
    d = cfg.to_dict()
    if args.level is not None:
        d["levels"] = [args.level]
    if args.loss is not None:
        d["losses"] = [args.loss]
    if args.encoder is not None:
        d["encoder"] = {"kind": args.encoder, "d_model": None, "seed": d["encoder"].get("seed", 0)}
    return ExperimentConfig.from_dict(d)


def run(argv=None, out=None) -> int:
    out = out or sys.stdout
    args = build_parser().parse_args(argv)
    try:
        if args.command == "algebra":
            return cmd_algebra(args, out)
        cfg = config_from_args(args)
        if args.workers < 1:
            raise ValueError("--workers must be at least 1")
        if args.command == "generate":
            return cmd_generate(cfg, args.workers, args.strict, out)
        if args.command == "train":
            return cmd_train(cfg, out)
        if args.command == "eval":
            return cmd_eval(cfg, out)
        if args.command == "report":
            return cmd_report(cfg, args.strict, out)
        return cmd_repro(cfg, args.workers, args.strict, out)
    except groups.ParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (bp.CompilationInvariantError, DivergenceError, InvariantFailure) as exc:
        print(f"invariant failure: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ValueError, TypeError, ConfigError, yaml.YAMLError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None) -> None:
    sys.exit(run(argv))


if __name__ == "__main__":
    main()
