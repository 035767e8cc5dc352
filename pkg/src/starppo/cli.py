"""Command line entry point: ``starppo {train,evaluate,sweep,compare}``."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .config import PROFILES, ConfigError, dump_config, load_config
from .env import Scheme
from .harness import compare, evaluate, run_scheme, sweep_elements
from .nn import CheckpointError
from .ppo import TrainingDiverged


def _int_list(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _resolve(args):
    cfg = load_config(args.config) if args.config else PROFILES[args.profile]()
    if getattr(args, "seed", None) is not None:
        cfg = cfg.replace(seeds=[args.seed])
    if getattr(args, "seeds", None):
        cfg = cfg.replace(seeds=_int_list(args.seeds))
    if getattr(args, "out", None):
        cfg = cfg.replace(out_dir=Path(args.out))
    if getattr(args, "total_steps", None):
        cfg = cfg.replace(hyper=dataclasses.replace(cfg.hyper, total_steps=args.total_steps))
    cfg.out_dir.mkdir(parents=True, exist_ok=True)
    dump_config(cfg, cfg.out_dir / "resolved_config.yaml")
    return cfg


def _print_records(records) -> None:
    for r in records:
        print(f"{r.scheme:32s} N={r.n_elements:<3d} seed={r.seed:<3d} "
              f"eval sum-rate={r.mean_sum_rate:12.3f} bit/s  "
              f"train(last 10%)={r.train_sum_rate:12.3f} bit/s")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="starppo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    def common(sp):
        sp.add_argument("--config", type=Path, help="YAML experiment config")
        sp.add_argument("--profile", choices=sorted(PROFILES), default="reduced",
                        help="defaults used when --config is absent")
        sp.add_argument("--out", type=Path)
        sp.add_argument("--total-steps", type=int)

    t = sub.add_parser("train", help="train one scheme for one seed")
    common(t)
    t.add_argument("--scheme", choices=[s.value for s in Scheme], default=Scheme.DEPLOYMENT.value)
    t.add_argument("--seed", type=int, default=0)

    e = sub.add_parser("evaluate", help="deterministic rollouts of a checkpoint")
    e.add_argument("--checkpoint", type=Path, required=True)
    e.add_argument("--episodes", type=int, default=5)
    e.add_argument("--seed", type=int, default=0)
    e.add_argument("--out", type=Path, help="CSV path (default: eval_rates.csv beside the checkpoint)")

    s = sub.add_parser("sweep", help="train over several RIS element counts")
    common(s)
    s.add_argument("--elements", type=_int_list, default=None, help="e.g. 9,16,25")
    s.add_argument("--seeds", help="comma separated seeds")

    c = sub.add_parser("compare", help="train all four schemes on paired seeds")
    common(c)
    c.add_argument("--seeds", help="comma separated seeds")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(message)s")
    try:
        if args.cmd == "train":
            cfg = _resolve(args)
            _print_records(run_scheme(cfg, Scheme(args.scheme)))
        elif args.cmd == "evaluate":
            out = args.out or args.checkpoint.with_name("eval_rates.csv")
            rows = evaluate(args.checkpoint, args.episodes, args.seed, out)
            print(f"wrote {len(rows)} rows to {out}")
        elif args.cmd == "sweep":
            cfg = _resolve(args)
            _print_records(sweep_elements(cfg, args.elements))
        elif args.cmd == "compare":
            cfg = _resolve(args)
            results = compare(cfg)
            _print_records([r for recs in results.values() for r in recs])
    except (ConfigError, CheckpointError, TrainingDiverged, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
