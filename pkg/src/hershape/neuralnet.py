"""Small fully connected networks with hand-written backprop, Adam and Polyak averaging.

Everything is float64.  Layers map ``sizes[i] -> sizes[i + 1]`` with weight
matrices of shape ``(out, in)``; hidden layers use ReLU and the output layer
is either ``tanh`` (actors) or ``linear`` (critics).  Inputs may be a single
vector or a 2-D batch with one sample per row.
"""

from __future__ import annotations

import copy
import os
from dataclasses import dataclass

import numpy as np

OUTPUT_ACTIVATIONS = ("tanh", "linear")
CHECKPOINT_MAGIC = "HB-CKPT v1"
CHECKPOINT_NETS = ("actor", "critic", "target_actor", "target_critic")


class DivergenceError(FloatingPointError):
    """Raised when a loss or gradient stops being finite."""


class CheckpointError(ValueError):
    pass


@dataclass
class Mlp:
    layer_sizes: list[int]
    output_activation: str
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    @property
    def n_params(self) -> int:
        return sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in checkpoint order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def copy(self) -> Mlp:
        return copy.deepcopy(self)

    def same_architecture(self, other: Mlp) -> bool:
        return list(self.layer_sizes) == list(other.layer_sizes) and self.output_activation == other.output_activation

    def __call__(self, x):
        return mlp_forward(self, x)


@dataclass
class Gradients:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    input: np.ndarray

    def params(self) -> list[np.ndarray]:
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out


@dataclass
class AdamState:
    m: list[np.ndarray]
    v: list[np.ndarray]
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0

    @classmethod
    def for_net(cls, net: Mlp, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> AdamState:
        params = net.params()
        return cls([np.zeros_like(p) for p in params], [np.zeros_like(p) for p in params], lr, beta1, beta2, eps)

    def reset(self):
        for a in self.m + self.v:
            a.fill(0.0)
        self.step = 0


def mlp_init(layer_sizes, output_activation="linear", seed=0) -> Mlp:
    """Uniform ``[-1/sqrt(fan_in), 1/sqrt(fan_in)]`` weights and zero biases."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"need at least two positive layer sizes, got {list(layer_sizes)}")
    if output_activation not in OUTPUT_ACTIVATIONS:
        raise ValueError(f"output_activation must be one of {OUTPUT_ACTIVATIONS}")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Mlp(sizes, output_activation, weights, biases)


def _check_input(net: Mlp, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim not in (1, 2) or x.shape[-1] != net.layer_sizes[0]:
        raise ValueError(f"input has shape {x.shape}, network expects {net.layer_sizes[0]} features")
    return x


def _forward_cache(net: Mlp, x: np.ndarray):
    """Return the output and the list of layer inputs needed by backprop."""
    acts = [x]
    h = x
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        z = h @ w.T + b
        if i < last:
            h = np.maximum(z, 0.0)
            acts.append(h)
        elif net.output_activation == "tanh":
            h = np.tanh(z)
        else:
            h = z
    return h, acts


def mlp_forward(net: Mlp, x) -> np.ndarray:
    x = _check_input(net, x)
    return _forward_cache(net, x)[0]


def mlp_backward(net: Mlp, x, upstream, cache=None) -> Gradients:
    """Reverse-mode derivatives of ``sum(output * upstream)``.

    For a batch the parameter gradients are summed over rows and the input
    gradient keeps one row per sample.  ``cache`` is the ``(output, acts)``
    pair from a previous :func:`forward_with_cache` call on the same input.
    """
    x = _check_input(net, x)
    out, acts = cache if cache is not None else _forward_cache(net, x)
    g = np.asarray(upstream, dtype=np.float64)
    if g.shape != out.shape:
        raise ValueError(f"upstream gradient shape {g.shape} does not match output shape {out.shape}")
    if net.output_activation == "tanh":
        g = g * (1.0 - out * out)
    batched = x.ndim == 2
    gw = [None] * len(net.weights)
    gb = [None] * len(net.biases)
    for i in range(len(net.weights) - 1, -1, -1):
        a = acts[i]
        if batched:
            gw[i] = g.T @ a
            gb[i] = g.sum(axis=0)
        else:
            gw[i] = np.outer(g, a)
            gb[i] = g.copy()
        g = g @ net.weights[i]
        if i > 0:
            g = g * (acts[i] > 0.0)
    return Gradients(gw, gb, g)


def forward_with_cache(net: Mlp, x):
    x = _check_input(net, x)
    return _forward_cache(net, x)


def adam_step(net: Mlp, grads: Gradients, state: AdamState):
    """One bias-corrected Adam descent step, applied in place; returns ``(net, state)``."""
    params = net.params()
    gparams = grads.params()
    if len(params) != len(gparams) or any(p.shape != g.shape for p, g in zip(params, gparams)):
        raise ValueError("gradient shapes do not match network parameters")
    if not all(np.all(np.isfinite(g)) for g in gparams):
        raise DivergenceError("non-finite gradient")
    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    corr1 = 1.0 - b1**t
    corr2 = 1.0 - b2**t
    for p, g, m, v in zip(params, gparams, state.m, state.v):
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * (g * g)
        p -= state.lr * (m / corr1) / (np.sqrt(v / corr2) + state.eps)
    return net, state


def polyak_update(target: Mlp, online: Mlp, tau: float) -> Mlp:
    """``target <- (1 - tau) * target + tau * online`` in place."""
    if not target.same_architecture(online):
        raise ValueError("polyak_update needs identical architectures")
    if not 0.0 <= tau <= 1.0:
        raise ValueError(f"tau must lie in [0, 1], got {tau}")
    for pt, po in zip(target.params(), online.params()):
        if tau == 1.0:
            pt[...] = po
        else:
            pt *= 1.0 - tau
            pt += tau * po
    return target


# -- checkpoint file --------------------------------------------------------


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def save_checkpoint(path, nets: dict[str, Mlp]) -> str:
    """Write the four DDPG networks as ``HB-CKPT v1`` text.

    Each net is a header line followed by one number per line: for every
    layer its weights (row-major) then its biases.
    """
    missing = [n for n in CHECKPOINT_NETS if n not in nets]
    if missing:
        raise ValueError(f"checkpoint needs networks {missing}")
    lines = [CHECKPOINT_MAGIC]
    for name in CHECKPOINT_NETS:
        net = nets[name]
        sizes = " ".join(str(s) for s in net.layer_sizes)
        lines.append(f"net {name} {sizes} {net.output_activation}")
        for p in net.params():
            lines.extend(_fmt(v) for v in p.ravel())
    path = os.fspath(path)
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as f:
        f.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
    return path


def load_checkpoint(path) -> dict[str, Mlp]:
    with open(path, encoding="utf-8") as f:
        lines = f.read().splitlines()
    if not lines or lines[0].strip() != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: not an {CHECKPOINT_MAGIC} file")
    nets = {}
    i = 1
    while i < len(lines):
        header = lines[i].split()
        if not header:
            i += 1
            continue
        if header[0] != "net" or len(header) < 5:
            raise CheckpointError(f"{path}:{i + 1}: expected a 'net' header line")
        name, act = header[1], header[-1]
        try:
            sizes = [int(s) for s in header[2:-1]]
            net = mlp_init(sizes, act, seed=0)
        except ValueError as exc:
            raise CheckpointError(f"{path}:{i + 1}: {exc}") from None
        i += 1
        for p in net.params():
            chunk = lines[i : i + p.size]
            if len(chunk) != p.size:
                raise CheckpointError(f"{path}: truncated parameters for net {name!r}")
            try:
                p.ravel()[:] = [float(v) for v in chunk]
            except ValueError:
                raise CheckpointError(f"{path}: bad number in net {name!r}") from None
            i += p.size
        nets[name] = net
    missing = [n for n in CHECKPOINT_NETS if n not in nets]
    if missing:
        raise CheckpointError(f"{path}: missing networks {missing}")
    return nets
