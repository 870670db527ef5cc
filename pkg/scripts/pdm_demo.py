"""pdm-lite end to end: calibrate, run, report, draw the scene for the first evaluation seed.

    python scripts/pdm_demo.py --out results [--config scripts/small.ini]
"""

import argparse
from pathlib import Path

from corrsched import experiment as ex
from corrsched.config import load_config


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--config", type=Path)
    ap.add_argument("--out", type=Path, default=Path("results"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()
    cfg = load_config(args.config)
    res = ex.cmd_pdm(cfg, args.out, args.jobs)
    pout = args.out / "pdm"
    print(f"{res.n_cells} cells, {len(res.failed)} failed")
    print((pout / "pdm_summary.csv").read_text())
    for seed in cfg.pdm_scene_seeds:
        print(f"scene: {pout / f'pdm_scene_{seed}.svg'}")


if __name__ == "__main__":
    main()
