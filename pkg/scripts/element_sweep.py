"""Deployment scheme trained at several element counts.

Writes sweep_summary.csv (one row per N and seed) and sweep_means.csv with the
seed mean and standard error per N.
"""
import numpy as np

from _common import parser, resolve
from starppo.harness import sweep_elements, write_csv


def main():
    p = parser(__doc__)
    p.add_argument("--elements", type=lambda s: [int(v) for v in s.split(",")])
    args = p.parse_args()
    cfg = resolve(args)
    records = sweep_elements(cfg, args.elements)
    rows = []
    for n in sorted({r.n_elements for r in records}):
        vals = np.array([r.mean_sum_rate for r in records if r.n_elements == n])
        se = vals.std(ddof=1) / np.sqrt(len(vals)) if len(vals) > 1 else float("nan")
        rows.append({"n_elements": n, "mean_sum_rate": vals.mean(), "stderr": se, "seeds": len(vals)})
        print(f"N={n:3d}  {vals.mean():14.3f} +- {se:.3f} bit/s")
    write_csv(cfg.out_dir / "sweep_means.csv", rows)


if __name__ == "__main__":
    main()
