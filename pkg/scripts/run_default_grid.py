"""Calibrate, run and report the synthetic grid, then print the B/T = 0.25 slice.

    python scripts/run_default_grid.py --out results [--config my.ini] [--jobs 4]
"""

import argparse
import time
from pathlib import Path

from corrsched import experiment as ex
from corrsched import metrics as met
from corrsched.config import load_config


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    cfg = load_config(args.config)
    t0 = time.perf_counter()
    ex.cmd_calibrate(cfg, args.out)
    res = ex.cmd_run(cfg, args.out, args.jobs)
    ex.cmd_report(cfg, args.out)
    print(f"{res.n_cells} cells, {len(res.failed)} failed, {time.perf_counter() - t0:.0f}s")

    cells = ex.read_cells(args.out)
    rows, _ = met.aggregate(cells)
    frac = cfg.summary_fraction
    print(f"\nB/T = {frac:.2f}       periodic NEPE     adaptive NEPE      delta     win(pathwise, pooled)")
    for r in rows:
        if abs(r.budget_fraction - frac) > 1e-9:
            continue
        (p, ps), (a, as_) = r.stats["periodic"]["nepe"], r.stats["adaptive"]["nepe"]
        win, wse = met.pooled_win_rates(cells, r.domain)["pathwise_win"]
        print(f"{r.domain:14s} {p:.3f} +- {ps:.3f}   {a:.3f} +- {as_:.3f}   {r.delta_nepe:+.3f}   "
              f"{win:.3f} +- {wse:.3f}")


if __name__ == "__main__":
    main()
