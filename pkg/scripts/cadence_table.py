"""Measurement-cadence trade-off and its dependence on the ancilla lifetime.

    python scripts/cadence_table.py [--config configs/cadence.cfg]
"""

import argparse
from pathlib import Path

from paritytrack.cadence import cadence_table, improvement_factor, p_c_from_t1
from paritytrack.config import load_config

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config", type=Path, default=ROOT / "configs" / "cadence.cfg")
    args = ap.parse_args()

    p = load_config(args.config).cadence
    tab = cadence_table(p)
    print(f"P_C {p.P_C:.4f}  bare lifetime {tab['bare_lifetime_us']:.2f} us")
    print(f"optimal spacing {tab['optimal_spacing_us']:.3f} us  lifetime {tab['lifetime_us']:.2f} us")
    print(f"improvement factor {improvement_factor(p.P_C):.3f}")
    print(f"\n{'T1_us':>6} {'P_C':>7} {'factor':>7} {'lifetime_us':>12}")
    for t1 in (4.0, 8.0, 16.0, 32.0):
        pc = p_c_from_t1(p.tau_M, t1)
        f = improvement_factor(pc)
        print(f"{t1:6.1f} {pc:7.4f} {f:7.3f} {tab['bare_lifetime_us'] * f:12.2f}")


if __name__ == "__main__":
    main()
