"""Parity decay recipe: simulate, filter and fit, then summarize the result.

    python scripts/parity_decay.py [--config configs/decay.cfg] [--out DIR]
"""

import argparse
from pathlib import Path

import numpy as np

from paritytrack.config import load_config
from paritytrack.csvio import read_csv
from paritytrack.pipeline import run_pipeline

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "decay.cfg")
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    cfg = load_config(args.config)
    paths = run_pipeline(cfg, stages="simulate,filter,analyze", out_dir=args.out)

    _, header, rows = read_csv(paths["decay"])
    data = np.array([[float(x) for x in r] for _, r in rows])
    print(f"{'alpha':>8} {'saturation':>11} {'max |z|':>8}")
    for a in np.unique(data[:, 0]):
        d = data[data[:, 0] == a]
        z = np.abs(d[:, 2] - d[:, 4]) / np.where(d[:, 3] > 0, d[:, 3], np.inf)
        print(f"{a:8.4f} {d[-50:, 2].mean():11.4f} {z.max():8.2f}")

    _, header, rows = read_csv(paths["fit"])
    fit = dict(zip(header, rows[0][1]))
    print(f"fitted tau   {float(fit['tau_fit_us']):.2f} +/- {float(fit['tau_sigma_us']):.2f} us")
    print(f"demolition   tau_tot {float(fit['demolition_tau_tot_us']):.2f} us")
    print(f"outputs in   {paths['decay'].parent}")


if __name__ == "__main__":
    main()
