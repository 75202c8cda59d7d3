#!/usr/bin/env python3
"""Sweep the first party's measurement phases and write mu(delta) to CSV.

Rotating party 0's setting pair by delta in the equatorial plane gives
mu(delta) = 4|cos(delta)|: continuous, maximal exactly at the canonical
sigma_y / sigma_x settings. The CSV is plot-ready (phase, four terms, mu).
"""

import argparse
import math

from etbell.states import ghz_state, mermin3, rotated_settings


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--points", type=int, default=64)
    parser.add_argument("--out", type=str, default="mermin_phase_sweep.csv")
    args = parser.parse_args()

    state = ghz_state(3)
    with open(args.out, "w") as fh:
        fh.write("phase,term1,term2,term3,term4,mu\n")
        for k in range(args.points):
            delta = 2.0 * math.pi * k / args.points
            flat = [obs for pair in rotated_settings((delta, 0.0, 0.0)) for obs in pair]
            result = mermin3(state, *flat)
            row = [repr(float(v)) for v in (delta, *result.terms, result.mu)]
            fh.write(",".join(row) + "\n")
    print(f"wrote {args.points} rows to {args.out}")


if __name__ == "__main__":
    main()
