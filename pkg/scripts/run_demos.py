#!/usr/bin/env python3
"""Run the shipped demo pipelines and print a certification summary."""

import sys
from pathlib import Path

REPO = Path(__file__).resolve().parent.parent
sys.path.insert(0, str(REPO / "src"))

from mspc.cli import cmd_pipeline, load_config  # noqa: E402


def main() -> int:
    failures = 0
    for name in ("scalar", "two_state", "four_state"):
        cfg = load_config(REPO / "configs" / f"{name}.json")
        out_dir = REPO / "out" / name
        report, ok = cmd_pipeline(cfg, out_dir)
        cert = report.get("certification", {})
        print(
            f"{name:12s} passed={ok} "
            f"worst_upper99={cert.get('worst_upper99_parametric', float('nan')):.5f} "
            f"budget={cert.get('budget', float('nan')):.3f} "
            f"robust_cost={report.get('robust_solution', {}).get('objective', float('nan')):.4f}"
        )
        failures += 0 if ok else 1
    return failures


if __name__ == "__main__":
    raise SystemExit(main())
