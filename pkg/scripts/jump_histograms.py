"""Jump-count histograms for a large ensemble, computed in memory.

    python scripts/jump_histograms.py [--config configs/jumps.cfg] [--n-traj N] [--out DIR]

Writes histogram_{all,even,odd}.csv and prints the even-count mass for each
post-selection on the detected initial parity.
"""

import argparse
from pathlib import Path

import numpy as np

from paritytrack.config import load_config
from paritytrack.csvio import write_csv
from paritytrack.jumps import histogram_from_counts, schmitt_batch
from paritytrack.quantum_filter import run_filter_batch
from paritytrack.trajectory import simulate_ensemble, stack

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "jumps.cfg")
    ap.add_argument("--n-traj", type=int)
    ap.add_argument("--out", type=Path)
    args = ap.parse_args()

    cfg = load_config(args.config)
    sim = cfg.sims[0]
    n = args.n_traj or cfg.n_traj
    recs = [r for r in simulate_ensemble(sim, cfg.readout, n, cfg.base_seed) if not r.overflow]
    est = run_filter_batch(stack(recs, "outcomes"), sim, cfg.readout, cfg.filter)
    initial, _, counts = schmitt_batch(est, cfg.schmitt)
    decided = initial != 0

    out = args.out or cfg.out_dir
    out.mkdir(parents=True, exist_ok=True)
    print(f"records {len(recs)} (overflowed {n - len(recs)}, undecided {int((~decided).sum())})")
    minlength = int(counts.max()) + 1
    for name, sel in (("all", decided), ("even", initial == 1), ("odd", initial == -1)):
        h = histogram_from_counts(counts[sel], minlength)
        rows = [(k, int(c), float(f)) for k, (c, f) in enumerate(zip(h.counts, h.frequencies))]
        write_csv(out / f"histogram_{name}.csv", ("n_jumps", "count", "frequency"), rows, {"base_seed": cfg.base_seed})
        print(f"{name:>5}: n={h.n_reports:6d}  even-count mass {h.even_mass:.4f}")
    print(f"outputs in {out}")


if __name__ == "__main__":
    main()
