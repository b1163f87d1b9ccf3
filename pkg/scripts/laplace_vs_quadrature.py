"""Laplace log marginal likelihood against tensor-grid quadrature.

    python3 scripts/laplace_vs_quadrature.py --problems 10
"""

import argparse

import numpy as np

from costbic import evidence
from costbic.dataset import SyntheticSpec, synthesize
from costbic.model_space import ModelIndicator
from costbic.oracle import quadrature_log_marginal


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--problems", type=int, default=10)
    ap.add_argument("--seed", type=int, default=3)
    args = ap.parse_args()

    rng = np.random.default_rng(args.seed)
    print(f"{'n':>5} {'dim':>3} {'laplace':>12} {'quadrature':>12} {'diff':>8}")
    for k in range(args.problems):
        n = (100, 500)[k % 2]
        d = synthesize(SyntheticSpec(n=n, beta=[rng.uniform(-1, 1), rng.uniform(-1.5, 1.5)], seed=100 + k))
        for g in (ModelIndicator.null(1), ModelIndicator.full(1)):
            lap = evidence.laplace_log_marginal(g, d)
            quad = quadrature_log_marginal(g, d).value
            print(f"{n:5d} {g.size + 1:3d} {lap:12.4f} {quad:12.4f} {lap - quad:8.4f}")


if __name__ == "__main__":
    main()
