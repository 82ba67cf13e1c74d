"""Covering success frequency as the quantizer rates cross the analytic bound."""

from mdlab.codes import build_shared_inner_pair
from mdlab.experiments import ExperimentConfig, covering_mc, pattern_pmf

WEIGHTS = {"point": 0.1, "u_fixed": 0.15, "v_fixed": 0.15, "sum_fixed": 0.3, "free": 0.3}


def main(n: int = 256, trials: int = 40) -> None:
    law = pattern_pmf(WEIGHTS)
    cfg = ExperimentConfig(n=n, trials=trials, seed=0)
    print("extra rows  min slack  success")
    for extra in (2, 4, 8, 16):
        pair = build_shared_inner_pair(2, n, 100, extra, extra, 1)
        report = covering_mc(pair, law, cfg)
        print(f"{extra:>10}  {report.stats['min_bound_slack']:>9.3f}  {report.stats['success_frequency']:.2f}")


if __name__ == "__main__":
    main()
