"""Command-line front door.

`simulate` runs any scenario config; `fit`, `cross`, `pool`, and `sweep-dims`
pin the scenario for the common cases.  `evaluate` scores a stored embedding
or pair-score table against answer files.  `emit-plots` turns a result
document into per-panel tables and PNG figures.  `serve` starts the
data-collection HTTP service.

Output defaults to a timestamped directory under $TRIPLAB_OUT_ROOT (or
./runs); `--out` pins the directory instead.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
import time
from pathlib import Path

from ..core import AnswerSet, ItemSet, merge_answer_sets, read_answer_set
from ..embedding import read_embedding
from ..errors import ConfigError, ParseError
from ..evaluation import evaluate, report_row, write_reports, REPORT_HEADER
from ..ranking import read_scores
from .config import ExperimentSpec
from .figures import render_figures
from .plotdata import write_tables
from .runner import run_experiment

OUT_ROOT_ENV = "TRIPLAB_OUT_ROOT"

_PINNED_SCENARIO = {
    "simulate": None,
    "fit": "single_fit",
    "cross": "cross_subject",
    "pool": "pooling",
    "sweep-dims": "dimension_sweep",
}


def _add_run_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="experiment config (JSON)")
    p.add_argument("--seed", type=int, default=None, help="override the master seed")
    p.add_argument("--out", default=None, help="output directory (default: timestamped)")
    p.add_argument(
        "--workers",
        type=int,
        default=os.cpu_count() or 1,
        help="worker processes for independent runs",
    )
    p.add_argument("--figures", action="store_true", help="also render PNG figures")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="triplab", description="triplet comparison experiments and data collection"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, pinned in _PINNED_SCENARIO.items():
        help_text = (
            "run an experiment config" if pinned is None else f"run a {pinned} experiment"
        )
        _add_run_flags(sub.add_parser(name, help=help_text))

    p = sub.add_parser("evaluate", help="score a stored predictor against answer files")
    p.add_argument("--config", default=None, help="JSON with answers/embedding/scores paths")
    p.add_argument("--answers", action="append", default=None, help="answer file (repeatable)")
    p.add_argument("--embedding", default=None, help="embedding export to evaluate")
    p.add_argument("--scores", default=None, help="pair-score export to evaluate")
    p.add_argument("--out", default=None, help="write the report as delimited text")

    p = sub.add_parser("emit-plots", help="emit plot tables and figures for a result")
    p.add_argument("--config", required=True, help="results.json or a run directory")
    p.add_argument("--out", default=None, help="output directory (default: beside the results)")

    p = sub.add_parser("serve", help="start the study data-collection service")
    p.add_argument("--root", required=True, help="storage root directory")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command in _PINNED_SCENARIO:
            return _cmd_run(args, _PINNED_SCENARIO[args.command])
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        if args.command == "emit-plots":
            return _cmd_emit_plots(args)
        return _cmd_serve(args)
    except (ConfigError, ParseError, FileNotFoundError, ValueError) as ex:
        print(f"error: {ex}", file=sys.stderr)
        return 2


def _load_json_object(path: str) -> dict:
    try:
        obj = json.loads(Path(path).read_text())
    except json.JSONDecodeError as ex:
        raise ConfigError(f"{path} is not valid JSON: {ex}") from ex
    if not isinstance(obj, dict):
        raise ConfigError(f"{path} must hold a JSON object")
    return obj


def _resolve_out(flag: str | None, config_out: str | None, scenario: str) -> Path:
    if flag:
        return Path(flag)
    if config_out:
        return Path(config_out)
    root = Path(os.environ.get(OUT_ROOT_ENV, "runs"))
    stamp = time.strftime("%Y%m%d-%H%M%S")
    out = root / f"{scenario}-{stamp}"
    k = 1
    while out.exists():
        out = root / f"{scenario}-{stamp}-{k}"
        k += 1
    return out


def _cmd_run(args, pinned: str | None) -> int:
    obj = _load_json_object(args.config)
    if pinned is not None:
        named = obj.get("scenario")
        if named is not None and named != pinned:
            raise ConfigError(
                f"config names scenario {named!r} but this subcommand runs {pinned!r}"
            )
        obj["scenario"] = pinned
    if args.seed is not None:
        obj["seed"] = args.seed
    out_dir = _resolve_out(args.out, obj.get("out"), obj.get("scenario", "run"))
    obj["out"] = str(out_dir)
    spec = ExperimentSpec.from_dict(obj)

    document = run_experiment(spec, out_dir, workers=args.workers)
    if args.figures:
        render_figures(document, out_dir / "figures")

    for err in document["errors"]:
        print(f"run {err['run']} failed: {err['error']}", file=sys.stderr)
    _print_panels(document)
    print(f"results: {out_dir}")
    if document["errors"] and not document["raw"]:
        return 1
    return 0


def _print_panels(document: dict) -> None:
    for name, panel in document["panels"].items():
        for series, curve in panel["series"].items():
            cells = " ".join(
                f"{x}:{m:.3f}" for x, m in zip(panel["x"], curve["mean"])
            )
            print(f"{name} {series} {cells}")


def _read_answers_merged(paths: list[str]) -> AnswerSet:
    sets = [read_answer_set(p) for p in paths]
    n = max(s.items.n for s in sets)
    sets = [AnswerSet(ItemSet(n), s.records, s.provenance) for s in sets]
    return merge_answer_sets(sets, provenance="+".join(paths))


def _cmd_evaluate(args) -> int:
    obj = _load_json_object(args.config) if args.config else {}
    unknown = set(obj) - {"answers", "embedding", "scores", "out"}
    if unknown:
        raise ConfigError(f"unknown key(s) in evaluate config: {', '.join(sorted(unknown))}")
    answers = args.answers or obj.get("answers") or []
    embedding_path = args.embedding or obj.get("embedding")
    scores_path = args.scores or obj.get("scores")
    out = args.out or obj.get("out")
    if not answers:
        raise ConfigError("evaluate needs at least one answer file")
    if (embedding_path is None) == (scores_path is None):
        raise ConfigError("evaluate needs exactly one of --embedding / --scores")

    test = _read_answers_merged(list(answers))
    if embedding_path is not None:
        predictor = read_embedding(embedding_path)
        label = Path(embedding_path).name
    else:
        predictor = read_scores(scores_path)
        label = Path(scores_path).name
    report = evaluate(predictor, test)
    print("label," + ",".join(REPORT_HEADER))
    print(f"{label},{report_row(report)}")
    if out:
        write_reports(out, [(label, report)])
    return 0


def _cmd_emit_plots(args) -> int:
    src = Path(args.config)
    if src.is_dir():
        src = src / "results.json"
    try:
        document = json.loads(src.read_text())
    except json.JSONDecodeError as ex:
        raise ConfigError(f"{src} is not a result document: {ex}") from ex
    out = Path(args.out) if args.out else src.parent
    tables = write_tables(document, out / "tables")
    figures = render_figures(document, out / "figures")
    for path in tables + figures:
        print(path)
    return 0


def _cmd_serve(args) -> int:
    import uvicorn

    from ..service.api import create_app
    from ..service.service import StudyService

    app = create_app(StudyService(args.root))
    uvicorn.run(app, host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
