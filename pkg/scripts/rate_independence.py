"""Median progress rates of log f_mu for the (1+4)-HE-ES and the (1+1)-ES across conditionings.

    python scripts/rate_independence.py --seeds 50 --budget 6000
"""

import argparse

from hees.diagnostics import log_progress_rate
from hees.harness import lower_median, parse_config, run_experiment


def median_rate(text, parallel):
    traces = run_experiment(parse_config(text), parallel=parallel)
    return lower_median([log_progress_rate(tr, (len(tr) // 2, len(tr))) for tr in traces])


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--d", type=int, default=10)
    ap.add_argument("--seeds", type=int, default=50)
    ap.add_argument("--budget", type=int, default=6000)
    ap.add_argument("--parallel", type=int, default=1)
    ap.add_argument("--conditions", default="1e2,1e4,1e6")
    args = ap.parse_args()

    base = f"d={args.d}\nbudget={args.budget}\nseeds=1..{args.seeds}\nrecorder=progress\nproblem_seed=5\n"
    print(f"{'algorithm':<15}{'problem':<22}{'median rate':>14}{'vs sphere':>12}")
    for algo in ("one_plus_four", "one_plus_one"):
        ref = median_rate(f"algorithm={algo}\nproblem=sphere\n" + base, args.parallel)
        print(f"{algo:<15}{'sphere':<22}{ref:>14.5g}{1.0:>12.3f}")
        for kappa in args.conditions.split(","):
            rate = median_rate(
                f"algorithm={algo}\nproblem=ellipsoid\nrotated=true\ncondition={kappa}\n" + base, args.parallel
            )
            print(f"{algo:<15}{'ellipsoid k=' + kappa:<22}{rate:>14.5g}{rate / ref:>12.3f}")


if __name__ == "__main__":
    main()
