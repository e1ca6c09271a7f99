"""Dense three-layer network, MSE loss, analytic gradients, Adam.

One fixed architecture covers every network in the system:

    head(W3 . relu(W2 . relu(W1 . x + b1) + b2) + b3)

with a softmax head for allocation outputs (strictly positive, sums to 1)
and a linear head for critic values and unconstrained actor means. All
math is float64; training is bitwise deterministic given seed, data and
hyperparameters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

PARAM_FIELDS = ("W1", "b1", "W2", "b2", "W3", "b3")
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class Mlp3:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray
    head: str = "softmax"

    def __post_init__(self):
        if self.head not in ("softmax", "linear"):
            raise ValueError(f"unknown head {self.head!r}")
        h1, d = self.W1.shape
        h2 = self.W2.shape[0]
        k = self.W3.shape[0]
        expected = {"b1": (h1,), "W2": (h2, h1), "b2": (h2,), "W3": (k, h2), "b3": (k,)}
        for name, shape in expected.items():
            if getattr(self, name).shape != shape:
                raise ValueError(f"{name} shape {getattr(self, name).shape} != {shape}")
        for name in PARAM_FIELDS:
            if not np.all(np.isfinite(getattr(self, name))):
                # FloatingPointError so training loops treat it as divergence
                raise FloatingPointError(f"{name} contains non-finite values")

    @property
    def in_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def out_dim(self) -> int:
        return self.W3.shape[0]

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}


@dataclass(frozen=True)
class NetGrads:
    """Gradient with the same parameter structure as :class:`Mlp3`."""

    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    W3: np.ndarray
    b3: np.ndarray

    def params(self) -> dict[str, np.ndarray]:
        return {name: getattr(self, name) for name in PARAM_FIELDS}

    def norm(self) -> float:
        return float(np.sqrt(sum(np.sum(g * g) for g in self.params().values())))


@dataclass(frozen=True)
class TrainBatch:
    """Inputs X [B x d] and simplex target rows w* [B x k]."""

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        if self.inputs.ndim != 2 or self.targets.ndim != 2:
            raise ValueError("inputs and targets must be 2-D")
        if self.inputs.shape[0] != self.targets.shape[0]:
            raise ValueError("batch sizes differ")
        if np.any(self.targets < -1e-9):
            raise ValueError("targets must be nonnegative")
        sums = self.targets.sum(axis=1)
        if np.any(np.abs(sums - 1.0) > 1e-6):
            raise ValueError("every target row must sum to 1")


def init_mlp3(
    in_dim: int,
    out_dim: int,
    hidden1: int = 64,
    hidden2: int = 64,
    seed: int = 0,
    head: str = "softmax",
) -> Mlp3:
    """Seeded uniform init scaled by 1/sqrt(fan_in) per layer."""
    rng = np.random.default_rng(seed)

    def layer(fan_in, fan_out):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform(-bound, bound, (fan_out, fan_in))
        b = rng.uniform(-bound, bound, fan_out)
        return w, b

    w1, b1 = layer(in_dim, hidden1)
    w2, b2 = layer(hidden1, hidden2)
    w3, b3 = layer(hidden2, out_dim)
    return Mlp3(w1, b1, w2, b2, w3, b3, head=head)


def softmax(z: np.ndarray) -> np.ndarray:
    """Row-wise stable softmax (max-subtraction)."""
    shifted = z - np.max(z, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def forward(net: Mlp3, x: np.ndarray) -> np.ndarray:
    """Network output for a single vector [d] or a batch [B x d]."""
    out, _ = forward_cached(net, x)
    return out


def forward_cached(net: Mlp3, x: np.ndarray):
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = x[None, :] if single else x
    if X.shape[1] != net.in_dim:
        raise ValueError(f"input dim {X.shape[1]} != network dim {net.in_dim}")
    z1 = X @ net.W1.T + net.b1
    a1 = np.maximum(z1, 0.0)
    z2 = a1 @ net.W2.T + net.b2
    a2 = np.maximum(z2, 0.0)
    z3 = a2 @ net.W3.T + net.b3
    out = softmax(z3) if net.head == "softmax" else z3
    cache = (X, z1, a1, z2, a2, out)
    return (out[0] if single else out), cache


def mse_loss(pred: np.ndarray, target: np.ndarray) -> float:
    """Mean over the batch of squared Euclidean distances."""
    pred = np.atleast_2d(np.asarray(pred, dtype=float))
    target = np.atleast_2d(np.asarray(target, dtype=float))
    if pred.shape != target.shape:
        raise ValueError(f"shape mismatch {pred.shape} vs {target.shape}")
    diff = pred - target
    return float(np.mean(np.sum(diff * diff, axis=1)))


def backprop_output_grad(net: Mlp3, cache, dout: np.ndarray) -> tuple[NetGrads, np.ndarray]:
    """Push dL/d(output) back through the net.

    Returns parameter gradients and dL/d(input); ReLU uses subgradient 0 at
    the kink. For the softmax head ``dout`` is the gradient w.r.t. the
    softmax output, mapped through the softmax Jacobian.
    """
    X, z1, a1, z2, a2, out = cache
    if net.head == "softmax":
        gy = out * dout
        dz3 = gy - out * gy.sum(axis=1, keepdims=True)
    else:
        dz3 = dout
    dW3 = dz3.T @ a2
    db3 = dz3.sum(axis=0)
    da2 = dz3 @ net.W3
    dz2 = da2 * (z2 > 0.0)
    dW2 = dz2.T @ a1
    db2 = dz2.sum(axis=0)
    da1 = dz2 @ net.W2
    dz1 = da1 * (z1 > 0.0)
    dW1 = dz1.T @ X
    db1 = dz1.sum(axis=0)
    dx = dz1 @ net.W1
    return NetGrads(dW1, db1, dW2, db2, dW3, db3), dx


def backward(net: Mlp3, batch: TrainBatch) -> NetGrads:
    """Exact analytic gradient of mse_loss(forward(X), targets)."""
    out, cache = forward_cached(net, batch.inputs)
    dout = 2.0 * (out - batch.targets) / batch.inputs.shape[0]
    grads, _ = backprop_output_grad(net, cache, dout)
    return grads


@dataclass
class OptimState:
    """Adam accumulators; moments mirror the parameter shapes."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def for_net(cls, net: Mlp3, lr: float = 1e-3, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        m = {name: np.zeros_like(p) for name, p in net.params().items()}
        v = {name: np.zeros_like(p) for name, p in net.params().items()}
        return cls(lr=lr, beta1=beta1, beta2=beta2, eps=eps, step=0, m=m, v=v)


def optim_step(net: Mlp3, grads: NetGrads, state: OptimState) -> tuple[Mlp3, OptimState]:
    """One bias-corrected Adam update; returns new net and state."""
    for name, g in grads.params().items():
        if not np.all(np.isfinite(g)):
            raise FloatingPointError(f"non-finite gradient in {name}; training aborted")
    t = state.step + 1
    new_params = {}
    new_m, new_v = {}, {}
    for name, p in net.params().items():
        g = getattr(grads, name)
        m = state.beta1 * state.m[name] + (1 - state.beta1) * g
        v = state.beta2 * state.v[name] + (1 - state.beta2) * g * g
        m_hat = m / (1 - state.beta1**t)
        v_hat = v / (1 - state.beta2**t)
        new_params[name] = p - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        new_m[name], new_v[name] = m, v
    new_net = Mlp3(head=net.head, **new_params)
    new_state = OptimState(
        lr=state.lr, beta1=state.beta1, beta2=state.beta2, eps=state.eps, step=t, m=new_m, v=new_v
    )
    return new_net, new_state


def save_checkpoint(net: Mlp3, path, extra: dict | None = None) -> None:
    """Versioned JSON checkpoint; float repr round-trips bit-exactly."""
    payload = {
        "format_version": CHECKPOINT_VERSION,
        "head": net.head,
        "params": {
            name: {"shape": list(p.shape), "data": p.reshape(-1).tolist()}
            for name, p in net.params().items()
        },
    }
    if extra:
        payload["extra"] = extra
    with open(path, "w") as fh:
        json.dump(payload, fh, sort_keys=True)


def load_checkpoint(path) -> tuple[Mlp3, dict]:
    with open(path) as fh:
        payload = json.load(fh)
    version = payload.get("format_version")
    if version != CHECKPOINT_VERSION:
        raise ValueError(f"unsupported checkpoint version {version}")
    params = {}
    for name in PARAM_FIELDS:
        entry = payload["params"][name]
        params[name] = np.array(entry["data"], dtype=np.float64).reshape(entry["shape"])
    return Mlp3(head=payload["head"], **params), payload.get("extra", {})
