"""Period-2 scan of the degenerate family: no genuine period-2 orbits survive for eps > 0."""

import numpy as np

from ailimit.continuation import FullParams, Scheme, count_small_period
from ailimit.hyperbolicity import certify
from ailimit.relation import RelationCoeffs
from ailimit.symbolic import AIState


def main():
    k = RelationCoeffs(-1.0, 0.0, 0.0, 0.0)
    for s in (0.5, 2.0, 3.0):
        c = certify(AIState.from_values(k, [s, 1 / s]))
        print(f"state ({s}, {1 / s:.4g}): {c.kind.value}, product {np.exp(c.log_product):.15g}")
    print("epsilon,n_period1,n_period2_true")
    for eps in np.round(np.arange(1, 10) * 0.1, 12):
        n1, n2 = count_small_period(FullParams(float(eps), -1.0, 0.0, 0.0, 0.0, 0.0, Scheme(delta=1.0)))
        print(f"{eps:.1f},{n1},{n2}")


if __name__ == "__main__":
    main()
