"""Train all four schemes on paired seeds and write training curves.

Outputs under the run directory:
  compare_summary.csv  one row per (scheme, seed): evaluated sum-rate and per-user rates
  compare_curves.csv   per batch: env steps and seed-mean training sum-rate per scheme
"""
import numpy as np

from _common import parser, resolve
from starppo.harness import SCHEME_ORDER, compare, read_csv, run_dir, write_csv


def main():
    cfg = resolve(parser(__doc__).parse_args())
    results = compare(cfg)
    curves = {}
    for scheme in SCHEME_ORDER:
        per_seed = [read_csv(run_dir(cfg, scheme, s) / "metrics.csv") for s in cfg.seeds]
        curves[scheme.value] = np.mean([[r["mean_sum_rate"] for r in m] for m in per_seed], axis=0)
        steps = [r["env_steps"] for r in per_seed[0]]
    rows = [{"batch": b, "env_steps": steps[b], **{k: float(v[b]) for k, v in curves.items()}}
            for b in range(len(steps))]
    write_csv(cfg.out_dir / "compare_curves.csv", rows)

    base = np.mean([r.mean_sum_rate for r in results["fixed_position_and_orientation"]])
    for scheme, recs in results.items():
        mean = np.mean([r.mean_sum_rate for r in recs])
        print(f"{scheme:32s} {mean:14.3f} bit/s  ({100 * (mean / base - 1):+.3f}% vs fixed pose)")


if __name__ == "__main__":
    main()
