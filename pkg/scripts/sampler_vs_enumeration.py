"""Total-variation distance between sampler visit frequencies and exact enumeration.

    python3 scripts/sampler_vs_enumeration.py --iters 5000 20000 50000
"""

import argparse

import numpy as np

from costbic import CostPriorSpec, synthesize
from costbic.benchmarks import sampler_problem
from costbic.oracle import enumerate_posterior, marginal_inclusion_from_table
from costbic.samplers import EVIDENCE_METHOD, SamplerConfig, run_sampler


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--methods", nargs="+", default=["mc3_laplace", "mc3_bic", "rjmcmc"])
    ap.add_argument("--iters", nargs="+", type=int, default=[5_000, 20_000, 50_000])
    ap.add_argument("--seed", type=int, default=5)
    args = ap.parse_args()

    d = synthesize(sampler_problem())
    spec = CostPriorSpec.from_dataset(d)
    print(f"{'method':<12} {'iters':>7} {'TV':>7} {'max|marg err|':>14} {'accept':>7}")
    for method in args.methods:
        table = enumerate_posterior(d, spec, EVIDENCE_METHOD[method])
        exact = table.probabilities()
        exact_marg = marginal_inclusion_from_table(table)
        for iters in args.iters:
            out = run_sampler(d, spec, SamplerConfig(method=method, iterations=iters, burn_in=iters // 10,
                                                     seed=args.seed))
            freq = out.frequencies()
            tv = 0.5 * sum(abs(freq.get(k, 0.0) - exact.get(k, 0.0)) for k in set(freq) | set(exact))
            err = np.max(np.abs(out.marginal_inclusion() - exact_marg))
            print(f"{method:<12} {iters:7d} {tv:7.4f} {err:14.4f} {out.acceptance_rate:7.3f}")


if __name__ == "__main__":
    main()
