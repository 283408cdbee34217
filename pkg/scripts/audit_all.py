"""Audit every shipped example and print a one-line verdict per scenario.

    python3 scripts/audit_all.py [--json out.json] [--grid-resolution 16]
"""

import argparse
import time

from vqi.cli import dumps, example_files, load_scenario, report_to_dict
from vqi.audit import full_audit


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--json", help="write all reports to this file")
    ap.add_argument("--grid-resolution", type=int, default=0)
    args = ap.parse_args()

    reports = {}
    for kind, path in example_files().items():
        sf = load_scenario(path)
        t0 = time.perf_counter()
        rep = full_audit(sf.spec, sf.family, grid_resolution=args.grid_resolution)
        dt = time.perf_counter() - t0
        c1, c2, c3 = rep.condition_i, rep.condition_ii, rep.condition_iii
        fid = "-" if c3.min_fidelity is None else f"{c3.min_fidelity:.6f}"
        print(
            f"{kind:<22}{rep.verdict:<14}samples={rep.samples:<4}"
            f"(i) d={c1.max_distance:.2e}  (ii) MI={c2.profile.mutual_information_bits:.4f}/{c2.bound_bits:g}  "
            f"(iii) Fmin={fid}  [{dt:.2f}s]"
        )
        reports[kind] = report_to_dict(rep)
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            fh.write(dumps(reports) + "\n")


if __name__ == "__main__":
    main()
