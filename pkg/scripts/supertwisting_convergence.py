"""Convergence of the super-twisting system from several initial states.

For each ``x0`` prints the time after which ``|x| <= 1e-6`` for good, the
number of surface crossings and the number of segments per mode.

    python3 scripts/supertwisting_convergence.py [--k1 1.5] [--k2 1.1] [--t-end 10]
"""

import argparse
from collections import Counter

import numpy as np

from genfilippov import ScenarioConfig, make_supertwisting, solve

STARTS = [(0.1, 0.0), (1.0, 0.0), (-1.0, 0.5), (0.0, 1.0), (2.0, -2.0)]


def settle_time(t, x, radius=1e-6):
    outside = np.nonzero(np.linalg.norm(x, axis=1) > radius)[0]
    if outside.size and outside[-1] == t.size - 1:
        return float("nan")
    return float(t[outside[-1] + 1]) if outside.size else float(t[0])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--k1", type=float, default=1.5)
    ap.add_argument("--k2", type=float, default=1.1)
    ap.add_argument("--t-end", type=float, default=10.0)
    args = ap.parse_args()
    sys_ = make_supertwisting(args.k1, args.k2)
    print("x0,settle_time,crossings,segments")
    for x0 in STARTS:
        traj, _ = solve(sys_, ScenarioConfig("supertwisting", x0, t_end=args.t_end, k1=args.k1, k2=args.k2))
        t, x, _ = traj.samples()
        s = np.sign(x[:, 0])
        s = s[s != 0]
        crossings = int(np.count_nonzero(s[1:] != s[:-1]))
        modes = ";".join(f"{m}={n}" for m, n in Counter(traj.modes).items())
        print(f"\"{x0[0]:g},{x0[1]:g}\",{settle_time(t, x):.6g},{crossings},{modes}")


if __name__ == "__main__":
    main()
