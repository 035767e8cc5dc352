"""Shared argument handling for the experiment scripts."""
import argparse
import dataclasses
import logging
from pathlib import Path

from starppo.config import PROFILES, load_config


def parser(description: str) -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(description=description)
    p.add_argument("--config", type=Path, help="YAML config (default: reduced profile)")
    p.add_argument("--out", type=Path)
    p.add_argument("--total-steps", type=int, help="override for quick smoke runs")
    p.add_argument("--seeds", type=lambda s: [int(v) for v in s.split(",")])
    return p


def resolve(args):
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    cfg = load_config(args.config) if args.config else PROFILES["reduced"]()
    if args.out:
        cfg = cfg.replace(out_dir=args.out)
    if args.seeds:
        cfg = cfg.replace(seeds=args.seeds)
    if args.total_steps:
        cfg = cfg.replace(hyper=dataclasses.replace(cfg.hyper, total_steps=args.total_steps))
    return cfg
