"""Build a random long-period AI state and continue it; reports timing and conjugacy error."""

import argparse
import time

import numpy as np

from ailimit.continuation import FullParams, Scheme, continue_in_epsilon, verify_conjugacy
from ailimit.relation import Branch, RelationCoeffs
from ailimit.symbolic import SymbolWord, TrappingSet, ai_fixed_point


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--period", type=int, default=250)
    ap.add_argument("--seed", type=int, default=250)
    ap.add_argument("--epsilon", type=float, default=0.01)
    ap.add_argument("--delta", type=float, default=0.3)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    word = SymbolWord(tuple(Branch.PLUS if b else Branch.MINUS for b in rng.integers(0, 2, args.period)))
    t0 = time.perf_counter()
    state = ai_fixed_point(RelationCoeffs(-1.0, 0.0, 0.9, 0.1), word, TrappingSet.interval(-1.3, 1.3))
    e = FullParams(args.epsilon, -1.0, 0.0, 0.0, 0.9, 0.1, Scheme(delta=args.delta))
    sol = continue_in_epsilon(state, e)
    dev = verify_conjugacy(state, e)
    print(f"period {args.period}: contraction {state.contraction_factor:.3g}, "
          f"residual {sol.residual:.2e}, conjugacy {dev:.2e}, {time.perf_counter() - t0:.2f} s")


if __name__ == "__main__":
    main()
