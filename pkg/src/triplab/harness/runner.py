"""Scenario execution: seeded runs, raw rows, aggregate panels, manifest.

Every run's randomness derives from (master seed, run index) alone, so a
re-run of the same spec reproduces every output file bit-exactly.  One
failed run is recorded under "errors" without disturbing the others.
"""

from __future__ import annotations

import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np
import scipy

from .. import __version__
from ..core import AnswerSet, merge_answer_sets, read_answer_set
from ..embedding import embed, export_embedding
from ..evaluation import (
    cross_subject,
    dimension_sweep,
    exhaustive_or_sampled_truth_accuracy,
    holdout_split,
    pooling_curve,
)
from ..oracle import NoisyOracle, VectorDataset, ingest_vectors, sample_unit_cube
from ..ranking import build_graph, rank_centrality, rank_counting, rank_serial
from ..rng import derive_seed
from ..sampling import majority_vote, sample_landmark, sample_random, sample_repeated, select_landmarks
from .config import ExperimentSpec
from .plotdata import write_tables

_RANKERS = {
    "counting": rank_counting,
    "rank_centrality": rank_centrality,
    "serial_rank": rank_serial,
}


def run_experiment(
    spec: ExperimentSpec,
    out_dir: str | Path | None = None,
    workers: int = 1,
) -> dict:
    """Execute a scenario; write manifest, raw rows, aggregates, and tables."""
    results = _execute(spec, workers)
    document = {
        "scenario": spec.scenario,
        "spec": spec.to_dict(),
        "raw": results["rows"],
        "errors": results["errors"],
        "panels": _SCENARIO_PANELS[spec.scenario](spec, results["rows"]),
    }
    if out_dir is not None:
        out_dir = Path(out_dir)
        out_dir.mkdir(parents=True, exist_ok=True)
        _write_manifest(spec, out_dir)
        _write_raw(document, out_dir / "raw.csv")
        (out_dir / "results.json").write_text(
            json.dumps(document, indent=2, sort_keys=True) + "\n"
        )
        write_tables(document, out_dir / "tables")
    return document


def _execute(spec: ExperimentSpec, workers: int) -> dict:
    rows: list[dict] = []
    errors: list[dict] = []
    if workers > 1 and spec.runs > 1:
        spec_dict = spec.to_dict()
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(_run_job, [(spec_dict, r) for r in range(spec.runs)]))
    else:
        outcomes = [_run_one_safe(spec, r) for r in range(spec.runs)]
    for run, run_rows, error in sorted(outcomes, key=lambda t: t[0]):
        rows.extend(run_rows)
        if error is not None:
            errors.append({"run": run, "error": error})
    return {"rows": rows, "errors": errors}


def _run_job(arg: tuple[dict, int]):
    spec_dict, run = arg
    return _run_one_safe(ExperimentSpec.from_dict(spec_dict), run)


def _run_one_safe(spec: ExperimentSpec, run: int):
    try:
        return run, _SCENARIO_RUNNERS[spec.scenario](spec, run), None
    except Exception as ex:  # per-run isolation: record, keep other runs alive
        return run, [], f"{type(ex).__name__}: {ex}"


def _write_manifest(spec: ExperimentSpec, out_dir: Path) -> None:
    manifest = {
        "spec": spec.to_dict(),
        "run_seeds": [derive_seed(spec.seed, "run", r) for r in range(spec.runs)],
        "versions": {
            "python": sys.version.split()[0],
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "triplab": __version__,
        },
    }
    (out_dir / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")


def _write_raw(document: dict, path: Path) -> None:
    rows = document["raw"]
    if not rows:
        path.write_text("")
        return
    columns = list(rows[0])
    with path.open("w") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_cell(row.get(c, "")) for c in columns) + "\n")


def _cell(value) -> str:
    if isinstance(value, float):
        return repr(float(value))  # collapse numpy scalars to the plain repr
    return str(value)


# ---------------------------------------------------------------------------
# Per-scenario data plumbing
# ---------------------------------------------------------------------------

def _dataset(spec: ExperimentSpec, run: int, n: int) -> VectorDataset:
    if spec.data.kind == "unit_cube":
        return sample_unit_cube(n, spec.data.d, derive_seed(spec.seed, "run", run, "data", n))
    if spec.data.kind == "vectors":
        return ingest_vectors(spec.data.path)
    raise ValueError(f"scenario {spec.scenario} needs coordinate data, not answer files")


def _n_values(spec: ExperimentSpec) -> tuple[int, ...]:
    if spec.data.kind == "unit_cube":
        return spec.data.n
    if spec.data.kind == "vectors":
        return (ingest_vectors(spec.data.path).n,)
    raise ValueError("answer-file data carries no item grid")


def _oracle(spec: ExperimentSpec, ds: VectorDataset, run: int, p: float) -> NoisyOracle:
    return NoisyOracle(ds, p, derive_seed(spec.seed, "run", run, "oracle", repr(p)))


def _answer_sessions(spec: ExperimentSpec) -> list[AnswerSet]:
    return [read_answer_set(path) for path in spec.data.answer_paths]


def _fit_and_score(spec, ds, ans, method, seed) -> dict:
    if method in _RANKERS:
        table = _RANKERS[method](build_graph(ans))
        report = exhaustive_or_sampled_truth_accuracy(table, ds, seed=seed)
    else:
        e = embed(ans, method, spec.embed, seed)
        report = exhaustive_or_sampled_truth_accuracy(e, ds, seed=seed)
    return {
        "method": method,
        "accuracy": report.accuracy,
        "n_test": report.n_test,
        "stderr": report.stderr,
        "flags": "|".join(report.flags),
    }


# ---------------------------------------------------------------------------
# Scenarios
# ---------------------------------------------------------------------------

def _run_methods_vs_n(spec: ExperimentSpec, run: int) -> list[dict]:
    rows = []
    p = spec.noise_p[0]
    for n in _n_values(spec):
        m = spec.budget.for_n(n)
        ds = _dataset(spec, run, n)
        oracle = _oracle(spec, ds, run, p)
        triplets = sample_random(ds.items, m, derive_seed(spec.seed, "run", run, "sample", n))
        ans = oracle.answer_set(triplets, provenance=f"random(m={m})")
        for method in spec.embedding_methods + spec.ranking_methods:
            seed = derive_seed(spec.seed, "run", run, "fit", n, method)
            rows.append({"run": run, "n": n, "m": m, "p": p, **_fit_and_score(spec, ds, ans, method, seed)})
    return rows


def _run_repeated_vs_random(spec: ExperimentSpec, run: int) -> list[dict]:
    rows = []
    n = _n_values(spec)[0]
    base_m = spec.params["base_m"]
    ds = _dataset(spec, run, n)
    method = (spec.embedding_methods or ("SOE",))[0]
    for p in spec.noise_p:
        oracle = _oracle(spec, ds, run, p)
        for l in spec.params["l_values"]:
            total = base_m * l
            sample_seed = derive_seed(spec.seed, "run", run, "sample", repr(p), l)
            fit_seed = derive_seed(spec.seed, "run", run, "fit", repr(p), l)
            arms = {
                "random": oracle.answer_set(
                    sample_random(ds.items, total, sample_seed), provenance="random"
                ),
                "repeated": majority_vote(
                    oracle.answer_set(
                        sample_repeated(ds.items, total, l, sample_seed), provenance="repeated"
                    ),
                    on_tie="drop",  # chance redraws of one question can merge groups
                ),
            }
            for arm, ans in arms.items():
                score = _fit_and_score(spec, ds, ans, method, derive_seed(fit_seed, arm))
                rows.append({"run": run, "n": n, "p": p, "l": l, "arm": arm,
                             "m_total": total, **score})
    return rows


def _run_landmark_vs_random(spec: ExperimentSpec, run: int) -> list[dict]:
    rows = []
    n = _n_values(spec)[0]
    ds = _dataset(spec, run, n)
    method = (spec.embedding_methods or ("SOE",))[0]
    for p in spec.noise_p:
        oracle = _oracle(spec, ds, run, p)
        for k in spec.params["k_values"]:
            m = math.comb(k, 2) * (n - 2)
            sample_seed = derive_seed(spec.seed, "run", run, "sample", repr(p), k)
            fit_seed = derive_seed(spec.seed, "run", run, "fit", repr(p), k)
            landmarks = select_landmarks(ds.items, k, sample_seed)
            arms = {
                "random": oracle.answer_set(
                    sample_random(ds.items, m, sample_seed), provenance="random"
                ),
                "landmark": oracle.answer_set(
                    sample_landmark(ds.items, landmarks, sample_seed),
                    provenance=f"landmark(k={k})",
                ),
            }
            for arm, ans in arms.items():
                score = _fit_and_score(spec, ds, ans, method, derive_seed(fit_seed, arm))
                rows.append({"run": run, "n": n, "p": p, "k": k, "arm": arm,
                             "m_total": m, **score})
    return rows


def _run_dimension_sweep(spec: ExperimentSpec, run: int) -> list[dict]:
    n = _n_values(spec)[0]
    p = spec.noise_p[0]
    ds = _dataset(spec, run, n)
    m = spec.budget.for_n(n)
    oracle = _oracle(spec, ds, run, p)
    ans = oracle.answer_set(
        sample_random(ds.items, m, derive_seed(spec.seed, "run", run, "sample"))
    )
    train, test = holdout_split(
        ans,
        spec.params["train_size"],
        spec.params["test_size"],
        derive_seed(spec.seed, "run", run, "split"),
    )
    grid = dimension_sweep(
        train,
        test,
        list(spec.params["dims"]),
        list(spec.embedding_methods),
        spec.embed,
        derive_seed(spec.seed, "run", run, "fit"),
    )
    return [
        {"run": run, "n": n, "p": p, "d": d, "method": method,
         "accuracy": r.accuracy, "n_test": r.n_test, "stderr": r.stderr}
        for (d, method), r in grid.items()
    ]


def _run_cross_subject(spec: ExperimentSpec, run: int) -> list[dict]:
    p = spec.noise_p[0]
    method = (spec.embedding_methods or ("SOE",))[0]
    if spec.data.kind == "answers":
        sessions = _answer_sessions(spec)
    else:
        n = _n_values(spec)[0]
        ds = _dataset(spec, run, n)
        m = spec.budget.for_n(n)
        sessions = []
        for s in range(spec.params["n_subjects"]):
            oracle = NoisyOracle(ds, p, derive_seed(spec.seed, "run", run, "subject", s))
            triplets = sample_random(ds.items, m, derive_seed(spec.seed, "run", run, "sample", s))
            sessions.append(oracle.answer_set(triplets, provenance=f"subject{s}"))
    matrix = cross_subject(
        sessions,
        sessions,
        method=method,
        cfg=spec.embed,
        train_size=spec.params["train_size"],
        test_size=spec.params["test_size"],
        seed=derive_seed(spec.seed, "run", run, "cross"),
    )
    rows = []
    for i, row_label in enumerate(matrix.row_labels):
        for j, col_label in enumerate(matrix.col_labels):
            r = matrix.reports[i][j]
            rows.append({"run": run, "source": row_label, "target": col_label,
                         "accuracy": r.accuracy, "n_test": r.n_test, "stderr": r.stderr})
    return rows


def _run_pooling(spec: ExperimentSpec, run: int) -> list[dict]:
    p = spec.noise_p[0]
    method = (spec.embedding_methods or ("SOE",))[0]
    if spec.data.kind == "answers":
        sessions = _answer_sessions(spec)
    else:
        n = _n_values(spec)[0]
        ds = _dataset(spec, run, n)
        m = spec.budget.for_n(n)
        oracle = _oracle(spec, ds, run, p)
        sessions = [
            oracle.answer_set(
                sample_random(ds.items, m, derive_seed(spec.seed, "run", run, "session", s)),
                provenance=f"session{s}",
            )
            for s in range(spec.params["n_sessions"])
        ]
    curve = pooling_curve(
        sessions,
        trials=spec.params["trials"],
        method=method,
        cfg=spec.embed,
        seed=derive_seed(spec.seed, "run", run, "pool"),
    )
    rows = []
    for t in range(curve.per_trial.shape[0]):
        for idx, size in enumerate(curve.pool_sizes):
            rows.append({"run": run, "trial": t, "pool_size": size,
                         "accuracy": float(curve.per_trial[t, idx])})
    return rows


def _run_single_fit(spec: ExperimentSpec, run: int) -> list[dict]:
    rows = []
    if spec.data.kind == "answers":
        ans = merge_answer_sets(_answer_sessions(spec))
        ds = None
    else:
        n = _n_values(spec)[0]
        ds = _dataset(spec, run, n)
        m = spec.budget.for_n(n)
        oracle = _oracle(spec, ds, run, spec.noise_p[0])
        ans = oracle.answer_set(
            sample_random(ds.items, m, derive_seed(spec.seed, "run", run, "sample"))
        )
    for method in spec.embedding_methods:
        seed = derive_seed(spec.seed, "run", run, "fit", method)
        e = embed(ans, method, spec.embed, seed)
        row = {"run": run, "method": method, "final_loss": e.final_loss,
               "iterations": e.iterations_used, "n_records": len(ans)}
        if ds is not None:
            report = exhaustive_or_sampled_truth_accuracy(e, ds, seed=seed)
            row.update(accuracy=report.accuracy, n_test=report.n_test, stderr=report.stderr)
        if spec.out and spec.params["export_embedding"]:
            out = Path(spec.out)
            out.mkdir(parents=True, exist_ok=True)
            export_embedding(out / f"embedding-{method}-run{run}.csv", e)
        rows.append(row)
    return rows


_SCENARIO_RUNNERS = {
    "methods_vs_n": _run_methods_vs_n,
    "repeated_vs_random": _run_repeated_vs_random,
    "landmark_vs_random": _run_landmark_vs_random,
    "dimension_sweep": _run_dimension_sweep,
    "cross_subject": _run_cross_subject,
    "pooling": _run_pooling,
    "single_fit": _run_single_fit,
}


# ---------------------------------------------------------------------------
# Aggregation into plot panels
# ---------------------------------------------------------------------------

def _aggregate(rows, x_key, series_key, x_values, series_names, value_key="accuracy"):
    """Mean and sample sd of value_key grouped by (x, series)."""
    series = {}
    for name in series_names:
        means, sds = [], []
        for x in x_values:
            vals = [r[value_key] for r in rows if r[x_key] == x and r[series_key] == name]
            if vals:
                means.append(float(np.mean(vals)))
                sds.append(float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0)
            else:
                means.append(float("nan"))
                sds.append(float("nan"))
        series[str(name)] = {"mean": means, "sd": sds}
    return series


def _panels_methods_vs_n(spec, rows):
    x = sorted({r["n"] for r in rows})
    names = [m for m in spec.embedding_methods + spec.ranking_methods]
    return {
        "accuracy_vs_n": {
            "x_label": "n",
            "x": x,
            "series": _aggregate(rows, "n", "method", x, names),
        }
    }


def _panels_repeated_vs_random(spec, rows):
    panels = {}
    x = list(spec.noise_p)
    for l in spec.params["l_values"]:
        sub = [r for r in rows if r["l"] == l]
        panels[f"accuracy_vs_noise_l{l}"] = {
            "x_label": "noise_p",
            "x": x,
            "series": _aggregate(sub, "p", "arm", x, ["random", "repeated"]),
        }
    return panels


def _panels_landmark_vs_random(spec, rows):
    panels = {}
    x = list(spec.params["k_values"])
    for p in spec.noise_p:
        sub = [r for r in rows if r["p"] == p]
        panels[f"accuracy_vs_k_p{p:g}"] = {
            "x_label": "k",
            "x": x,
            "series": _aggregate(sub, "k", "arm", x, ["random", "landmark"]),
        }
    return panels


def _panels_dimension_sweep(spec, rows):
    x = list(spec.params["dims"])
    return {
        "accuracy_vs_d": {
            "x_label": "d",
            "x": x,
            "series": _aggregate(rows, "d", "method", x, list(spec.embedding_methods)),
        }
    }


def _panels_cross_subject(spec, rows):
    sources = sorted({r["source"] for r in rows})
    targets = sorted({r["target"] for r in rows})
    return {
        "transfer": {
            "x_label": "source",
            "x": sources,
            "series": _aggregate(rows, "source", "target", sources, targets),
        }
    }


def _panels_pooling(spec, rows):
    x = sorted({r["pool_size"] for r in rows})
    series = {}
    means, sds = [], []
    for size in x:
        vals = [r["accuracy"] for r in rows if r["pool_size"] == size]
        means.append(float(np.mean(vals)))
        sds.append(float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0)
    series["pooled"] = {"mean": means, "sd": sds}
    return {"accuracy_vs_pool_size": {"x_label": "pool_size", "x": x, "series": series}}


def _panels_single_fit(spec, rows):
    x = list(spec.embedding_methods)
    have_acc = [r for r in rows if "accuracy" in r]
    series = {}
    if have_acc:
        means, sds = [], []
        for method in x:
            vals = [r["accuracy"] for r in have_acc if r["method"] == method]
            means.append(float(np.mean(vals)) if vals else float("nan"))
            sds.append(float(np.std(vals, ddof=1)) if len(vals) > 1 else 0.0)
        series["truth"] = {"mean": means, "sd": sds}
    return {"accuracy_by_method": {"x_label": "method", "x": x, "series": series}}


_SCENARIO_PANELS = {
    "methods_vs_n": _panels_methods_vs_n,
    "repeated_vs_random": _panels_repeated_vs_random,
    "landmark_vs_random": _panels_landmark_vs_random,
    "dimension_sweep": _panels_dimension_sweep,
    "cross_subject": _panels_cross_subject,
    "pooling": _panels_pooling,
    "single_fit": _panels_single_fit,
}
