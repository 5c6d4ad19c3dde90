"""Run every config in configs/ and flatten each report to CSV.

    python scripts/run_all.py [--threads N] [--out-dir results]
"""

import argparse
import sys
from pathlib import Path

from qkpse.cli import main

ROOT = Path(__file__).resolve().parents[1]


def run(threads: int, out_dir: Path) -> int:
    out_dir.mkdir(parents=True, exist_ok=True)
    worst = 0
    for cfg in sorted((ROOT / "configs").glob("*.ini")):
        report = out_dir / f"{cfg.stem}.jsonl"
        code = main(["run", str(cfg), "--threads", str(threads), "--out", str(report)])
        if code == 0:
            code = main(["plot", str(report), "--out", str(out_dir / f"{cfg.stem}.csv")])
        worst = max(worst, code)
    return worst


if __name__ == "__main__":
    ap = argparse.ArgumentParser()
    ap.add_argument("--threads", type=int, default=1)
    ap.add_argument("--out-dir", type=Path, default=ROOT / "results")
    args = ap.parse_args()
    sys.exit(run(args.threads, args.out_dir))
