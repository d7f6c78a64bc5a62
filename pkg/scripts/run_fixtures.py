"""Run every CLI command against every fixture and print one summary line each.

Commands whose required sections are absent from a scenario exit with code 2;
those pairs are listed as skipped unless --all is given.
"""
from __future__ import annotations

import argparse
import time
from pathlib import Path

from derivedint.cli import COMMANDS, run

ROOT = Path(__file__).resolve().parent.parent


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--fixtures", default=str(ROOT / "fixtures"))
    ap.add_argument("--all", action="store_true", help="also show usage errors")
    args = ap.parse_args()
    for path in sorted(Path(args.fixtures).glob("*.scn")):
        for command in sorted(COMMANDS):
            start = time.perf_counter()
            rep, code, diag = run(command, str(path))
            took = time.perf_counter() - start
            if rep is None:
                if args.all:
                    print(f"{path.stem:22} {command:14} exit 2  {diag}")
                continue
            verdict = rep.verdicts[-1] if rep.verdicts else ""
            print(f"{path.stem:22} {command:14} exit {code}  {took:6.2f}s  {rep.status:5} {verdict}")


if __name__ == "__main__":
    main()
