"""Unimodal limit branch: fixed point, critical value and continued low-period orbits."""

import argparse
import math

from ailimit.continuation import FullParams, Scheme, continue_in_epsilon
from ailimit.hyperbolicity import certify
from ailimit.relation import Branch, forward_branch, slope
from ailimit.symbolic import unimodal_coeffs, unimodal_itinerary_orbit, unimodal_periodic_orbit


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--cbar", type=float, default=0.9)
    ap.add_argument("--epsilon", type=float, default=0.02)
    ap.add_argument("--delta", type=float, default=0.3)
    ap.add_argument("itineraries", nargs="*", default=["LR", "LRR", "LLR"])
    args = ap.parse_args()

    k = unimodal_coeffs(args.cbar)
    u = unimodal_periodic_orbit(args.cbar, 1, 0.9).values[0]
    print(f"fixed point {u:.15g}, |Df| = {abs(slope(k, u, u).value):.12g}")
    crit = forward_branch(k, Branch.PLUS, 0.5 / args.cbar)
    print(f"critical value {crit:.6g} (closed form {1 / (2 * math.sqrt(args.cbar * (1 - args.cbar))):.6g}), "
          f"1/cbar = {1 / args.cbar:.6g}")
    e = FullParams(args.epsilon, k.alpha1, k.sigma1, 0.0, k.a, k.c, Scheme(delta=args.delta))
    for it in args.itineraries:
        s = unimodal_itinerary_orbit(args.cbar, it)
        sol = continue_in_epsilon(s, e)
        vals = ", ".join(f"{v:.6f}" for v in s.values)
        print(f"{it}: [{vals}] {certify(s).kind.value}, residual at eps={args.epsilon}: {sol.residual:.1e}")


if __name__ == "__main__":
    main()
