"""One-hidden-layer tanh MLP with hand-written backprop, Adam, and checkpoint I/O."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CHECKPOINT_MAGIC = "starppo-checkpoint"
CHECKPOINT_VERSION = 1
HIDDEN = 64


class CheckpointError(RuntimeError):
    pass


@dataclass
class MlpParams:
    w1: np.ndarray
    b1: np.ndarray
    w2: np.ndarray
    b2: np.ndarray
    out_tanh: bool = False

    @property
    def n_in(self) -> int:
        return self.w1.shape[0]

    @property
    def n_out(self) -> int:
        return self.w2.shape[1]

    def tensors(self) -> dict[str, np.ndarray]:
        return {"w1": self.w1, "b1": self.b1, "w2": self.w2, "b2": self.b2}

    def with_tensors(self, t: dict[str, np.ndarray]) -> "MlpParams":
        return MlpParams(t["w1"], t["b1"], t["w2"], t["b2"], self.out_tanh)

    def copy(self) -> "MlpParams":
        return self.with_tensors({k: v.copy() for k, v in self.tensors().items()})


def _orthogonal(rng: np.random.Generator, n_in: int, n_out: int, gain: float) -> np.ndarray:
    a = rng.standard_normal((max(n_in, n_out), min(n_in, n_out)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))
    if n_in < n_out:
        q = q.T
    return gain * q[:n_in, :n_out]


def init_mlp(n_in: int, n_out: int, rng: np.random.Generator, hidden: int = HIDDEN,
             out_gain: float = 1.0, out_tanh: bool = False) -> MlpParams:
    return MlpParams(
        w1=_orthogonal(rng, n_in, hidden, np.sqrt(2.0)),
        b1=np.zeros(hidden),
        w2=_orthogonal(rng, hidden, n_out, out_gain),
        b2=np.zeros(n_out),
        out_tanh=out_tanh,
    )


def forward(p: MlpParams, x: np.ndarray):
    """Returns (output, cache). Accepts a single vector or a (B, n_in) batch."""
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != p.n_in:
        raise ValueError(f"input width {x.shape[-1]} != {p.n_in}")
    h = np.tanh(x @ p.w1 + p.b1)
    y = h @ p.w2 + p.b2
    if p.out_tanh:
        y = np.tanh(y)
    return y, (x, h, y)


def backward(p: MlpParams, cache, upstream: np.ndarray) -> dict[str, np.ndarray]:
    """Gradient of sum(upstream * output) w.r.t. each parameter."""
    x, h, y = cache
    g = np.asarray(upstream, dtype=float)
    if p.out_tanh:
        g = g * (1.0 - y * y)
    x2, h2, g2 = np.atleast_2d(x), np.atleast_2d(h), np.atleast_2d(g)
    dh = (g2 @ p.w2.T) * (1.0 - h2 * h2)
    return {
        "w1": x2.T @ dh,
        "b1": dh.sum(axis=0),
        "w2": h2.T @ g2,
        "b2": g2.sum(axis=0),
    }


@dataclass
class AdamState:
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)
    step: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, params: dict[str, np.ndarray], **kw) -> "AdamState":
        return cls({k: np.zeros_like(v) for k, v in params.items()},
                   {k: np.zeros_like(v) for k, v in params.items()}, **kw)


def adam_update(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                s: AdamState, lr: float):
    step = s.step + 1
    c1 = 1.0 - s.beta1 ** step
    c2 = 1.0 - s.beta2 ** step
    new_p, new_m, new_v = {}, {}, {}
    for k, p in params.items():
        g = grads[k]
        m = s.beta1 * s.m[k] + (1.0 - s.beta1) * g
        v = s.beta2 * s.v[k] + (1.0 - s.beta2) * g * g
        new_m[k], new_v[k] = m, v
        if lr == 0.0:
            new_p[k] = p
        else:
            new_p[k] = p - lr * (m / c1) / (np.sqrt(v / c2) + s.eps)
    return new_p, AdamState(new_m, new_v, step, s.beta1, s.beta2, s.eps)


# -- checkpoints ------------------------------------------------------------

def save_checkpoint(path, groups: dict[str, dict[str, np.ndarray]], meta: dict) -> None:
    """Write named groups of arrays plus a JSON metadata blob to one .npz file."""
    arrays = {}
    for gname, tensors in groups.items():
        for name, arr in tensors.items():
            arrays[f"{gname}/{name}"] = np.asarray(arr)
    header = {"magic": CHECKPOINT_MAGIC, "version": CHECKPOINT_VERSION, "meta": meta}
    arrays["__header__"] = np.array(json.dumps(header))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> tuple[dict[str, dict[str, np.ndarray]], dict]:
    try:
        with np.load(path, allow_pickle=False) as data:
            if "__header__" not in data.files:
                raise CheckpointError(f"{path}: not a starppo checkpoint")
            header = json.loads(str(data["__header__"]))
            groups: dict[str, dict[str, np.ndarray]] = {}
            for key in data.files:
                if key == "__header__":
                    continue
                gname, name = key.split("/", 1)
                groups.setdefault(gname, {})[name] = data[key]
    except (OSError, ValueError) as exc:
        raise CheckpointError(f"{path}: cannot read checkpoint ({exc})") from exc
    if header.get("magic") != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic {header.get('magic')!r}")
    if header.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(
            f"{path}: checkpoint version {header.get('version')} "
            f"!= supported {CHECKPOINT_VERSION}")
    return groups, header["meta"]
