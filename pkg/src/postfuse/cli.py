"""Command-line interface.

Subcommands:

* ``attack``     — attack every PNG in an input file/directory, persisting a
  record trio per image into the output directory.
* ``robustness`` — re-score persisted adversarial images under benign edits
  over a level grid, writing a CSV grid and a figure.
* ``report``     — render the CSV summary and figures for saved records.

Exit codes: 0 all good, 2 partial (some inputs skipped or some cells
invalid), 3 oracle transport/protocol failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .harness import attack_batch, parse_mode
from .oracle import oracle_from_id
from .params import CONTINUOUS, INTEGER, ODD_INTEGER, ParamBounds, ParamSpec
from .pso import PsoConfig
from .reporting import (
    fig_robustness,
    load_records,
    render_report,
    save_record,
    write_robustness_csv,
)
from .robustness import DEFAULT_LEVELS, RobustnessSpec, TRANSFORMS, evaluate_robustness

logger = logging.getLogger(__name__)

_PSO_KEYS = ("particles", "iterations", "w_min", "w_max", "c_p", "c_total",
             "epsilon", "seed", "budget")
_BOUND_KINDS = {
    "alpha": ODD_INTEGER, "beta": CONTINUOUS, "phi": INTEGER, "sigma": CONTINUOUS,
    "lam_x": INTEGER, "lam_y": INTEGER, "theta": CONTINUOUS, "gamma": INTEGER,
}
# Spot-centre bounds are intersected with the image at run time, so "anywhere"
# is expressed as a huge interval.
_WHOLE_IMAGE = ParamSpec(0, 2**31 - 1, INTEGER)


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    with open(path, "rb") as f:
        return tomllib.load(f)


def _bounds_from_config(section: dict) -> ParamBounds | None:
    """[bounds] table: per-dimension two-element [lo, hi] overrides; spot
    centre defaults to the whole image."""
    if not section:
        return None
    base = {
        "alpha": ParamSpec(1, 13, ODD_INTEGER),
        "beta": ParamSpec(0.5, 5.0),
        "phi": ParamSpec(10, 100, INTEGER),
        "sigma": ParamSpec(1e-4, (5.0 / 255.0) ** 2),
        "lam_x": _WHOLE_IMAGE,
        "lam_y": _WHOLE_IMAGE,
        "theta": ParamSpec(0.2, 1.8),
        "gamma": ParamSpec(30, 100, INTEGER),
    }
    for name, pair in section.items():
        if name not in _BOUND_KINDS:
            raise ValueError(f"unknown bounds key {name!r}")
        lo, hi = pair
        base[name] = ParamSpec(lo, hi, _BOUND_KINDS[name])
    return ParamBounds(**base)


def _build_pso_config(args, config: dict) -> PsoConfig:
    values = dict(config.get("pso", {}))
    for key in _PSO_KEYS:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    unknown = set(values) - set(_PSO_KEYS)
    if unknown:
        raise ValueError(f"unknown [pso] config keys: {sorted(unknown)}")
    values["bounds"] = _bounds_from_config(config.get("bounds", {}))
    return PsoConfig(**values)


def _collect_inputs(input_path: Path) -> list:
    if input_path.is_dir():
        return [(p.stem, p) for p in sorted(input_path.glob("*.png"))]
    return [(input_path.stem, input_path)]


def _cmd_attack(args) -> int:
    config = _load_config(args.config)
    cfg = _build_pso_config(args, config)
    parse_mode(args.mode)  # fail fast on bad mode strings
    oracle_id = args.oracle or config.get("oracle", {}).get("id", "synthetic:composite")
    token = args.token or config.get("oracle", {}).get("token")
    oracle = oracle_from_id(oracle_id, token=token)
    inputs = _collect_inputs(Path(args.input))
    if not inputs:
        print(f"no .png inputs under {args.input}", file=sys.stderr)
        return 2
    out = Path(args.out)
    result = attack_batch(
        inputs, oracle, cfg, mode=args.mode, on_record=lambda rec: save_record(rec, out)
    )
    successes = sum(1 for r in result.records if r.outcome.success)
    print(
        f"attacked {len(result.records)}/{len(inputs)} images, "
        f"{successes} adversarial, output in {out}"
    )
    if result.skipped:
        print(f"skipped unreadable inputs: {', '.join(result.skipped)}", file=sys.stderr)
    if result.aborted:
        print(f"batch aborted by oracle failure: {result.aborted}", file=sys.stderr)
        return 3
    return 2 if result.skipped else 0


def _parse_levels(text: str | None):
    if text is None:
        return None
    return tuple(float(x) for x in text.split(","))


def _cmd_robustness(args) -> int:
    records = load_records(args.records)
    if not records:
        print(f"no records found in {args.records}", file=sys.stderr)
        return 2
    detector_ids = {r.detector_id for r in records}
    oracle_id = args.oracle or records[0].detector_id
    if args.oracle is None and len(detector_ids) > 1:
        logger.warning("records span multiple detectors %s; using %s", detector_ids, oracle_id)
    if not oracle_id:
        print("records carry no detector id; pass --oracle", file=sys.stderr)
        return 3
    oracle = oracle_from_id(oracle_id, token=args.token)
    transforms = list(TRANSFORMS) if args.transform == "all" else [args.transform]
    levels = _parse_levels(args.levels)
    if levels is not None and len(transforms) != 1:
        print("--levels requires a single --transform", file=sys.stderr)
        return 2
    reports = []
    for t in transforms:
        spec = RobustnessSpec(t, levels if levels is not None else DEFAULT_LEVELS[t])
        reports.append(
            evaluate_robustness(
                records, oracle, spec, seed=args.seed, successful_only=args.successful_only
            )
        )
    out = Path(args.out if args.out else args.records)
    out.mkdir(parents=True, exist_ok=True)
    write_robustness_csv(reports, out / "robustness.csv")
    fig_robustness(reports, out / "robustness.png")
    invalid = 0
    for rep in reports:
        cols = "  ".join(
            f"{lv:g}:{rep.asr[lv]:.3f}" if rep.asr[lv] is not None else f"{lv:g}:n/a"
            for lv in rep.levels
        )
        avg = f"{rep.avg:.3f}" if rep.avg is not None else "n/a"
        print(f"{rep.transform:>15}  {cols}  AVG:{avg}")
        invalid += sum(1 for c in rep.cells if c.error is not None)
    print(f"grid written to {out / 'robustness.csv'}")
    if invalid:
        print(f"{invalid} cells failed to score", file=sys.stderr)
        return 2
    return 0


def _cmd_report(args) -> int:
    records = load_records(args.records)
    created = render_report(records, args.out)
    print(f"{len(records)} records; wrote {', '.join(str(p) for p in created)}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="postfuse",
        description="Query-limited black-box attacks on image-forensics "
        "detectors via swarm-optimized post-processing fusion.",
    )
    ap.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = ap.add_subparsers(dest="command", required=True)

    a = sub.add_parser("attack", help="attack PNGs and persist run records")
    a.add_argument("--input", required=True, help="PNG file or directory of PNGs")
    a.add_argument("--out", required=True, help="output directory for records")
    a.add_argument("--oracle", help="oracle id, e.g. synthetic:composite or remote:http://…")
    a.add_argument("--token", help="bearer token for remote oracles")
    a.add_argument("--mode", default="full",
                   help="full | random | only:<OP> | without:<OP> (OP: GB JPEG GN LS)")
    a.add_argument("--config", help="TOML config with [pso]/[bounds]/[oracle] tables")
    a.add_argument("--particles", type=int)
    a.add_argument("--iterations", type=int)
    a.add_argument("--budget", type=int)
    a.add_argument("--seed", type=int)
    a.set_defaults(fn=_cmd_attack)

    r = sub.add_parser("robustness", help="re-score saved adversarial images under edits")
    r.add_argument("--records", required=True, help="directory of saved run records")
    r.add_argument("--transform", default="all", choices=list(TRANSFORMS) + ["all"])
    r.add_argument("--levels", help="comma-separated levels (single transform only)")
    r.add_argument("--oracle", help="override the detector id stored in the records")
    r.add_argument("--token", help="bearer token for remote oracles")
    r.add_argument("--successful-only", action="store_true",
                   help="evaluate only records whose attack succeeded")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--out", help="output directory (default: the records directory)")
    r.set_defaults(fn=_cmd_robustness)

    p = sub.add_parser("report", help="render CSV summary and figures for saved records")
    p.add_argument("--records", required=True, help="directory of saved run records")
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(fn=_cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.fn(args)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
