"""Persistence and reporting: record files, CSV summaries, figures.

Each attacked image persists as three files in the output directory:

* ``<name>.record.json`` — everything deterministic: config, mode, detector
  id, outcome numbers, the full evaluation log. Same seed, same bytes.
* ``<name>.adv.png``     — the emitted adversarial image (8-bit).
* ``<name>.meta.json``   — volatile context (wall-clock ms), kept out of the
  deterministic record on purpose.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
from pathlib import Path

import matplotlib

matplotlib.use("Agg")  # file rendering only; never needs a display
import matplotlib.pyplot as plt
import numpy as np

from .harness import EvalRecord, RunRecord
from .imageops import load_image, save_image, to_uint8
from .params import ParamBounds, ParamSpec, PostProcParams
from .pso import AttackOutcome, PsoConfig
from .robustness import RobustnessReport

logger = logging.getLogger(__name__)


def _bounds_to_jsonable(bounds: ParamBounds | None):
    if bounds is None:
        return None
    return {
        name: {"lo": spec.lo, "hi": spec.hi, "kind": spec.kind}
        for name, spec in zip(
            ("alpha", "beta", "phi", "sigma", "lam_x", "lam_y", "theta", "gamma"),
            bounds.as_tuple(),
        )
    }


def _bounds_from_jsonable(d) -> ParamBounds | None:
    if d is None:
        return None
    return ParamBounds(**{name: ParamSpec(**spec) for name, spec in d.items()})


def _record_to_jsonable(rec: RunRecord) -> dict:
    cfg = dataclasses.asdict(rec.config)
    cfg["bounds"] = _bounds_to_jsonable(rec.config.bounds)
    out = rec.outcome
    return {
        "name": rec.name,
        "detector_id": rec.detector_id,
        "mode": rec.mode,
        "config": cfg,
        "outcome": {
            "success": out.success,
            "selected_params": dataclasses.asdict(out.selected_params),
            "final_fitness": out.final_fitness,
            "ssim_to_original": out.ssim_to_original,
            "queries_used": out.queries_used,
            "iterations_run": out.iterations_run,
            "fitness_trace": [[k, f] for k, f in out.fitness_trace],
        },
        "evaluations": [
            [e.iteration, e.particle, list(e.params.as_array()), e.fitness]
            for e in rec.evaluations
        ],
    }


def save_record(rec: RunRecord, out_dir) -> dict:
    """Write the three files for one record; returns their paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = {
        "record": out_dir / f"{rec.name}.record.json",
        "image": out_dir / f"{rec.name}.adv.png",
        "meta": out_dir / f"{rec.name}.meta.json",
    }
    with open(paths["record"], "w") as f:
        json.dump(_record_to_jsonable(rec), f, sort_keys=True, separators=(",", ":"))
    save_image(rec.outcome.adversarial_image, paths["image"])
    with open(paths["meta"], "w") as f:
        json.dump({"wall_ms": rec.wall_ms}, f, sort_keys=True)
    return paths


def save_records(records, out_dir) -> None:
    for rec in records:
        save_record(rec, out_dir)


def load_record(out_dir, name: str) -> RunRecord:
    out_dir = Path(out_dir)
    with open(out_dir / f"{name}.record.json") as f:
        d = json.load(f)
    cfg_d = d["config"]
    cfg_d["bounds"] = _bounds_from_jsonable(cfg_d["bounds"])
    cfg = PsoConfig(**cfg_d)
    o = d["outcome"]
    image = load_image(out_dir / f"{name}.adv.png")
    outcome = AttackOutcome(
        success=o["success"],
        selected_params=PostProcParams(**o["selected_params"]),
        adversarial_image=image,
        final_fitness=o["final_fitness"],
        ssim_to_original=o["ssim_to_original"],
        queries_used=o["queries_used"],
        iterations_run=o["iterations_run"],
        fitness_trace=[(k, f) for k, f in o["fitness_trace"]],
    )
    evals = [
        EvalRecord(it, pi, PostProcParams.from_array(arr), fit)
        for it, pi, arr, fit in d["evaluations"]
    ]
    meta_path = out_dir / f"{name}.meta.json"
    wall_ms = 0.0
    if meta_path.exists():
        with open(meta_path) as f:
            wall_ms = float(json.load(f).get("wall_ms", 0.0))
    return RunRecord(d["name"], d["detector_id"], d["mode"], cfg, outcome, evals, wall_ms)


def load_records(out_dir) -> list:
    """All records in a directory, sorted by name."""
    out_dir = Path(out_dir)
    names = sorted(p.name[: -len(".record.json")] for p in out_dir.glob("*.record.json"))
    return [load_record(out_dir, n) for n in names]


def records_equal(a: RunRecord, b: RunRecord) -> bool:
    """Field-for-field equality; images compared after 8-bit quantization
    (the persisted form)."""
    return a == b and np.array_equal(
        to_uint8(a.outcome.adversarial_image), to_uint8(b.outcome.adversarial_image)
    )


# --- delimited summaries ------------------------------------------------------

SUMMARY_COLUMNS = (
    "image", "mode", "success", "queries_used", "iterations_run",
    "final_fitness", "ssim_to_original", "detector",
)


def write_summary_csv(records, path) -> None:
    """One row per record; just the header when there are no records."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(SUMMARY_COLUMNS)
        for r in records:
            o = r.outcome
            w.writerow([
                r.name, r.mode, int(o.success), o.queries_used, o.iterations_run,
                repr(o.final_fitness), repr(o.ssim_to_original), r.detector_id,
            ])


def write_robustness_csv(reports, path) -> None:
    """Long-format grid: one (transform, level) row per cell plus an AVG row
    per transform."""
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(["transform", "level", "asr", "n_images"])
        for rep in reports:
            for level in rep.levels:
                v = rep.asr[level]
                w.writerow([rep.transform, repr(float(level)),
                            "" if v is None else repr(v), rep.n_images])
            w.writerow([rep.transform, "AVG",
                        "" if rep.avg is None else repr(rep.avg), rep.n_images])


# --- figures -------------------------------------------------------------------


def fig_fitness_traces(records, path) -> None:
    """Best-so-far fake probability per round, one line per image."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for r in records:
        ks = [k for k, _ in r.outcome.fitness_trace]
        fs = [f for _, f in r.outcome.fitness_trace]
        ax.plot(ks, fs, color="tab:blue", alpha=0.25, linewidth=1)
    ax.axhline(0.5, color="tab:red", linestyle="--", linewidth=1, label="decision boundary")
    ax.set_xlabel("round")
    ax.set_ylabel("best fake probability")
    ax.set_title("search progress")
    ax.legend(loc="upper right")
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fig_query_histogram(records, path) -> None:
    """Distribution of queries spent, split by outcome."""
    ok = [r.outcome.queries_used for r in records if r.outcome.success]
    ko = [r.outcome.queries_used for r in records if not r.outcome.success]
    fig, ax = plt.subplots(figsize=(6, 4))
    bins = 20
    ax.hist([ok, ko], bins=bins, stacked=True, color=["tab:green", "tab:gray"],
            label=["success", "failure"])
    ax.set_xlabel("oracle queries")
    ax.set_ylabel("images")
    ax.set_title("query cost")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fig_ssim_scatter(records, path) -> None:
    """Perceptual cost against query cost."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for success, color in ((True, "tab:green"), (False, "tab:gray")):
        xs = [r.outcome.queries_used for r in records if r.outcome.success == success]
        ys = [r.outcome.ssim_to_original for r in records if r.outcome.success == success]
        if xs:
            ax.scatter(xs, ys, s=18, color=color, label="success" if success else "failure")
    ax.set_xlabel("oracle queries")
    ax.set_ylabel("SSIM to original")
    ax.set_title("similarity vs query cost")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def fig_robustness(reports, path) -> None:
    """Success rate across each transform's level grid."""
    fig, ax = plt.subplots(figsize=(6, 4))
    for rep in reports:
        xs = range(len(rep.levels))
        ys = [rep.asr[lv] if rep.asr[lv] is not None else np.nan for lv in rep.levels]
        ax.plot(xs, ys, marker="o", label=rep.transform)
    if reports:
        n = max(len(rep.levels) for rep in reports)
        ax.set_xticks(range(n))
        labels = []
        for i in range(n):
            labels.append("/".join(
                f"{rep.levels[i]:g}" for rep in reports if i < len(rep.levels)
            ))
        ax.set_xticklabels(labels, rotation=30, ha="right", fontsize=8)
    ax.set_ylim(-0.05, 1.05)
    ax.set_xlabel("level (per transform)")
    ax.set_ylabel("attack success rate")
    ax.set_title("robustness to benign edits")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def render_report(records, out_dir, reports=()) -> list:
    """Write the CSV summary and figures for a set of records (and optional
    robustness reports); returns the created paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    created = []
    summary = out_dir / "summary.csv"
    write_summary_csv(records, summary)
    created.append(summary)
    if records:
        for fn, name in (
            (fig_fitness_traces, "fitness_traces.png"),
            (fig_query_histogram, "query_histogram.png"),
            (fig_ssim_scatter, "ssim_scatter.png"),
        ):
            p = out_dir / name
            fn(records, p)
            created.append(p)
    if reports:
        p = out_dir / "robustness.csv"
        write_robustness_csv(reports, p)
        created.append(p)
        fp = out_dir / "robustness.png"
        fig_robustness(reports, fp)
        created.append(fp)
    logger.info("report written to %s (%d files)", out_dir, len(created))
    return created
