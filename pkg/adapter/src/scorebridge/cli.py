"""Command line: ``scorebridge serve --config <file>``."""

from __future__ import annotations

import argparse
import logging
import sys

from .config import AdapterConfig, apply_env_overrides, load_config
from .service import build_app


def _run_server(cfg: AdapterConfig) -> None:
    import uvicorn

    uvicorn.run(build_app(cfg), host=cfg.host, port=cfg.port, log_level="info")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="scorebridge",
        description="Serve a user-supplied image-forensics model behind the "
        "fake-probability wire protocol.",
    )
    sub = ap.add_subparsers(dest="command", required=True)
    s = sub.add_parser("serve", help="run the scoring service")
    s.add_argument("--config", required=True, help="TOML config file")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = apply_env_overrides(load_config(args.config))
        _run_server(cfg)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
