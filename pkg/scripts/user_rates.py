"""Per-user rate traces of a trained Deployment agent over evaluation episodes.

Trains one seed (or reuses --checkpoint) and writes user_rates.csv with one
row per time slot: episode, t, reward, rate_user<k>, RIS position and orientation.
"""
from pathlib import Path

from _common import parser, resolve
from starppo.env import Scheme
from starppo.harness import evaluate, run_dir, run_scheme


def main():
    p = parser(__doc__)
    p.add_argument("--checkpoint", type=Path)
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--eval-seed", type=int, default=0)
    args = p.parse_args()
    cfg = resolve(args)
    ckpt = args.checkpoint
    if ckpt is None:
        cfg = cfg.replace(seeds=cfg.seeds[:1])
        run_scheme(cfg, Scheme.DEPLOYMENT)
        ckpt = run_dir(cfg, Scheme.DEPLOYMENT, cfg.seeds[0]) / "final.npz"
    out = cfg.out_dir / "user_rates.csv"
    rows = evaluate(ckpt, args.episodes, args.eval_seed, out)
    print(f"wrote {len(rows)} rows to {out}")


if __name__ == "__main__":
    main()
