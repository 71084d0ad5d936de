"""Residual 1D convolutional filter with an output-consistency normalizer.

The network is ``K(x) = (x + S(x)) / c`` with ``c = mean(1 + S(1))``.  ``S`` is a stack
of same-length convolutions (replicate padding) with leaky-ReLU activations.  By default
the stack is bias-free and odd-symmetrised, ``S(x) = (g(x) - g(-x)) / 2``, which makes it
positively homogeneous and odd; together with ``c`` this gives ``mean(K(c 1)) = c`` for
every real ``c``.
"""
from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

MODEL_MAGIC = b"HFNN"
MODEL_VERSION = 1
WINDOW_LENGTH = 36


class DegenerateNormalizerError(ValueError):
    pass


class ModelFormatError(ValueError):
    """Unreadable, truncated or wrong-version model file."""


class ModelShapeError(ValueError):
    """Stored layer shapes disagree with the expected architecture."""


class TrainingDiverged(RuntimeError):
    def __init__(self, msg: str, history: list):
        super().__init__(msg)
        self.history = history


@dataclass(frozen=True)
class ArchitectureConfig:
    n_hidden_layers: int = 5
    kernel_size: int = 7
    hidden_channels: int = 128
    leaky_slope: float = 0.1
    input_length: int = WINDOW_LENGTH
    residual: bool = True
    use_bias: bool = False
    odd_symmetric: bool = True

    def __post_init__(self):
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError("kernel size must be odd and positive")
        if self.n_hidden_layers < 0 or self.hidden_channels < 1 or self.input_length < 1:
            raise ValueError("invalid architecture sizes")

    def layer_shapes(self) -> list[tuple[int, int, int]]:
        C, k = self.hidden_channels, self.kernel_size
        return [(C, 1, k)] + [(C, C, k)] * self.n_hidden_layers + [(1, C, k)]

    @classmethod
    def preset(cls, name: str) -> "ArchitectureConfig":
        if name == "paper":
            return cls()
        if name == "desk":
            return cls(n_hidden_layers=3, hidden_channels=32)
        raise ValueError(f"unknown preset {name!r}")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 200
    max_epochs: int = 2000
    seed: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    patience: int = 200
    divergence: float = 1e6

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.batch_size < 1 or self.max_epochs < 1:
            raise ValueError("batch size and epoch budget must be at least 1")

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(asdict(self), sort_keys=True).encode()).hexdigest()


@dataclass
class ConvFilterParams:
    arch: ArchitectureConfig
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    seed: int | None = None
    train_digest: str = ""

    def __post_init__(self):
        shapes = self.arch.layer_shapes()
        if len(self.weights) != len(shapes) or len(self.biases) != len(shapes):
            raise ModelShapeError(f"expected {len(shapes)} layers, got {len(self.weights)}")
        for i, (w, b, s) in enumerate(zip(self.weights, self.biases, shapes)):
            if w.shape != s or b.shape != (s[0],):
                raise ModelShapeError(f"layer {i}: expected weight {s}, got {w.shape}")
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {i}: non-finite parameters")

    def arrays(self) -> list[np.ndarray]:
        return [*self.weights, *self.biases]

    def with_arrays(self, arrays) -> "ConvFilterParams":
        n = len(self.weights)
        return ConvFilterParams(self.arch, list(arrays[:n]), list(arrays[n:]), self.seed,
                                self.train_digest)

    def copy(self) -> "ConvFilterParams":
        return self.with_arrays([a.copy() for a in self.arrays()])


def init_params(arch: ArchitectureConfig, seed: int = 0, scale: float = 1.0) -> ConvFilterParams:
    """Uniform fan-in initialisation, ``U(-s, s)`` with ``s = scale / sqrt(in_ch * k)``."""
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for shape in arch.layer_shapes():
        bound = scale / np.sqrt(shape[1] * shape[2])
        weights.append(rng.uniform(-bound, bound, size=shape))
        b = rng.uniform(-bound, bound, size=shape[0]) if arch.use_bias else np.zeros(shape[0])
        biases.append(b)
    return ConvFilterParams(arch, weights, biases, seed)


def zero_params(arch: ArchitectureConfig) -> ConvFilterParams:
    shapes = arch.layer_shapes()
    return ConvFilterParams(arch, [np.zeros(s) for s in shapes], [np.zeros(s[0]) for s in shapes])


# ---- convolution stack, activations laid out as (batch, length, channels)

def _im2col(a: np.ndarray, k: int) -> np.ndarray:
    pad = k // 2
    ap = np.pad(a, ((0, 0), (pad, pad), (0, 0)), mode="edge")
    cols = sliding_window_view(ap, k, axis=1)  # (B, L, C, k)
    return cols.reshape(a.shape[0], a.shape[1], -1)


def _col2im(dcols: np.ndarray, L: int, C: int, k: int) -> np.ndarray:
    pad = k // 2
    B = dcols.shape[0]
    dc = dcols.reshape(B, L, C, k)
    dap = np.zeros((B, L + 2 * pad, C))
    for t in range(k):
        dap[:, t:t + L] += dc[..., t]
    da = dap[:, pad:pad + L].copy()
    da[:, 0] += dap[:, :pad].sum(axis=1)
    da[:, -1] += dap[:, pad + L:].sum(axis=1)
    return da


def _stack_forward(params: ConvFilterParams, x: np.ndarray, keep: bool = False):
    arch = params.arch
    a = x[:, :, None]
    cache = []
    n = len(params.weights)
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        cols = _im2col(a, arch.kernel_size)
        z = cols @ w.reshape(w.shape[0], -1).T
        if arch.use_bias:
            z = z + b
        if keep:
            cache.append((cols, z))
        a = z if i == n - 1 else np.where(z > 0, z, arch.leaky_slope * z)
    return a[:, :, 0], cache


def _stack_backward(params: ConvFilterParams, cache, grad_out: np.ndarray):
    arch = params.arch
    n = len(params.weights)
    gw, gb = [None] * n, [None] * n
    da = grad_out[:, :, None]
    for i in range(n - 1, -1, -1):
        w = params.weights[i]
        cols, z = cache[i]
        dz = da if i == n - 1 else da * np.where(z > 0, 1.0, arch.leaky_slope)
        flat = dz.reshape(-1, w.shape[0])
        gw[i] = (flat.T @ cols.reshape(-1, cols.shape[-1])).reshape(w.shape)
        gb[i] = flat.sum(axis=0) if arch.use_bias else np.zeros(w.shape[0])
        if i > 0:
            da = _col2im(dz @ w.reshape(w.shape[0], -1), z.shape[1], w.shape[1], arch.kernel_size)
    return gw, gb


def _stacked_inputs(params: ConvFilterParams, X: np.ndarray) -> np.ndarray:
    ones = np.ones((1, X.shape[1]))
    if params.arch.odd_symmetric:
        return np.concatenate([X, -X, ones, -ones])
    return np.concatenate([X, ones])


def _split_stack(params: ConvFilterParams, G: np.ndarray, B: int):
    if params.arch.odd_symmetric:
        return 0.5 * (G[:B] - G[B:2 * B]), 0.5 * (G[2 * B] - G[2 * B + 1])
    return G[:B], G[B]


def _as_batch(window) -> tuple[np.ndarray, bool]:
    X = np.asarray(window, dtype=float)
    single = X.ndim == 1
    return (X[None] if single else X), single


def _normalizer(params: ConvFilterParams, s_one: np.ndarray) -> float:
    c = float(np.mean(s_one + 1.0)) if params.arch.residual else float(np.mean(s_one))
    if abs(c) < 1e-8:
        raise DegenerateNormalizerError(f"normalizing constant {c:.3e} is degenerate")
    return c


def forward(params: ConvFilterParams, window) -> np.ndarray:
    """Filtered window(s); accepts one window or a ``(batch, length)`` array."""
    X, single = _as_batch(window)
    if X.shape[1] != params.arch.input_length:
        raise ValueError(f"window length {X.shape[1]} != {params.arch.input_length}")
    G, _ = _stack_forward(params, _stacked_inputs(params, X))
    S, s_one = _split_stack(params, G, len(X))
    raw = X + S if params.arch.residual else S
    out = raw / _normalizer(params, s_one)
    return out[0] if single else out


def loss_and_grad(params: ConvFilterParams, window, target, weight: float = 0.5):
    """``weight * sum((forward - target)^2)`` and its gradients (weights, biases)."""
    X, _ = _as_batch(window)
    T, _ = _as_batch(target)
    B = len(X)
    G, cache = _stack_forward(params, _stacked_inputs(params, X), keep=True)
    S, s_one = _split_stack(params, G, B)
    raw = X + S if params.arch.residual else S
    c = _normalizer(params, s_one)
    err = raw / c - T
    loss = weight * float(np.sum(err * err))
    e = 2.0 * weight * err
    d_raw = e / c
    d_c = -float(np.sum(e * raw)) / (c * c)
    d_sone = np.full(X.shape[1], d_c / X.shape[1])
    if params.arch.odd_symmetric:
        dG = np.concatenate([0.5 * d_raw, -0.5 * d_raw, 0.5 * d_sone[None], -0.5 * d_sone[None]])
    else:
        dG = np.concatenate([d_raw, d_sone[None]])
    gw, gb = _stack_backward(params, cache, dG)
    return loss, gw, gb


def backward(params: ConvFilterParams, window, target):
    """Gradients of ``1/2 ||forward(window) - target||^2`` as (weight grads, bias grads)."""
    _, gw, gb = loss_and_grad(params, window, target, 0.5)
    return gw, gb


def mse(params: ConvFilterParams, X: np.ndarray, T: np.ndarray) -> float:
    return float(np.mean((forward(params, X) - T) ** 2))


class Adam:
    def __init__(self, arrays, tc: TrainConfig):
        self.tc = tc
        self.m = [np.zeros_like(a) for a in arrays]
        self.v = [np.zeros_like(a) for a in arrays]
        self.t = 0

    def step(self, arrays, grads):
        tc = self.tc
        self.t += 1
        c1 = 1.0 - tc.beta1 ** self.t
        c2 = 1.0 - tc.beta2 ** self.t
        for a, g, m, v in zip(arrays, grads, self.m, self.v):
            m *= tc.beta1
            m += (1.0 - tc.beta1) * g
            v *= tc.beta2
            v += (1.0 - tc.beta2) * g * g
            a -= tc.learning_rate * (m / c1) / (np.sqrt(v / c2) + tc.eps)


@dataclass
class TrainResult:
    params: ConvFilterParams
    history: list[tuple[int, float, float]] = field(default_factory=list)
    best_epoch: int = 0

    def history_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("epoch,train_mse,val_mse\n")
            for ep, tr, va in self.history:
                fh.write(f"{ep},{tr:.17g},{va:.17g}\n")


def train(train_set, validation_set, tc: TrainConfig, arch: ArchitectureConfig | None = None,
          init: ConvFilterParams | None = None, log=None) -> TrainResult:
    """Adam on the mean squared error; keeps the parameters with the lowest validation MSE.

    ``train_set``/``validation_set`` are ``(inputs, targets)`` pairs of ``(n, length)`` arrays.
    """
    Xtr, Ttr = (np.asarray(a, dtype=float) for a in train_set)
    Xva, Tva = (np.asarray(a, dtype=float) for a in validation_set)
    if len(Xtr) == 0 or len(Xva) == 0:
        raise ValueError("training and validation sets must be nonempty")
    if init is None:
        init = init_params(arch or ArchitectureConfig.preset("desk"), tc.seed)
    params = init.copy()
    params.seed, params.train_digest = tc.seed, tc.digest()
    arrays = params.arrays()
    opt = Adam(arrays, tc)
    rng = np.random.default_rng(tc.seed)
    history: list[tuple[int, float, float]] = []
    best, best_val, best_epoch = None, np.inf, 0
    n, L = Xtr.shape
    for epoch in range(1, tc.max_epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, tc.batch_size):
            idx = order[start:start + tc.batch_size]
            loss, gw, gb = loss_and_grad(params, Xtr[idx], Ttr[idx], 1.0 / (len(idx) * L))
            total += loss * len(idx)
            opt.step(arrays, gw + gb)
        train_mse = total / n
        val_mse = mse(params, Xva, Tva)
        history.append((epoch, train_mse, val_mse))
        if log is not None:
            log(epoch, train_mse, val_mse)
        if not np.isfinite(train_mse) or train_mse > tc.divergence:
            raise TrainingDiverged(f"training diverged at epoch {epoch}", history)
        if val_mse < best_val:
            best_val, best_epoch = val_mse, epoch
            best = [a.copy() for a in arrays]
        elif epoch - best_epoch >= tc.patience:
            break
    return TrainResult(params.with_arrays(best), history, best_epoch)


# ---- persistence

_HEAD = struct.Struct("<4sHI")


def save_model(params: ConvFilterParams, path) -> None:
    header = json.dumps({"architecture": asdict(params.arch), "seed": params.seed,
                         "train_config_digest": params.train_digest,
                         "layers": [list(w.shape) for w in params.weights]},
                        sort_keys=True).encode()
    body = b"".join(a.astype("<f8").tobytes() for a in params.arrays())
    Path(path).write_bytes(_HEAD.pack(MODEL_MAGIC, MODEL_VERSION, len(header)) + header + body)


def load_model(path, expected: ArchitectureConfig | None = None) -> ConvFilterParams:
    data = Path(path).read_bytes()
    if len(data) < _HEAD.size:
        raise ModelFormatError(f"{path}: corrupt model file (too short)")
    magic, version, hlen = _HEAD.unpack_from(data)
    if magic != MODEL_MAGIC:
        raise ModelFormatError(f"{path}: not a model file")
    if version != MODEL_VERSION:
        raise ModelFormatError(f"{path}: unsupported model version {version}")
    try:
        meta = json.loads(data[_HEAD.size:_HEAD.size + hlen])
        arch = ArchitectureConfig(**meta["architecture"])
    except (ValueError, KeyError, TypeError) as exc:
        raise ModelFormatError(f"{path}: corrupt model header ({exc})") from None
    shapes = [tuple(s) for s in meta["layers"]]
    if expected is not None:
        want = expected.layer_shapes()
        for i in range(max(len(want), len(shapes))):
            got = shapes[i] if i < len(shapes) else None
            exp = want[i] if i < len(want) else None
            if got != exp:
                raise ModelShapeError(f"layer {i}: expected weight shape {exp}, file has {got}")
    sizes = [int(np.prod(s)) for s in shapes] + [s[0] for s in shapes]
    offset = _HEAD.size + hlen
    if len(data) != offset + 8 * sum(sizes):
        raise ModelFormatError(f"{path}: corrupt model file (expected {offset + 8 * sum(sizes)} "
                               f"bytes, found {len(data)})")
    flat = np.frombuffer(data, dtype="<f8", offset=offset).astype(float)
    arrays, pos = [], 0
    for s in shapes + [(s[0],) for s in shapes]:
        k = int(np.prod(s))
        arrays.append(flat[pos:pos + k].reshape(s).copy())
        pos += k
    n = len(shapes)
    return ConvFilterParams(arch, arrays[:n], arrays[n:], meta.get("seed"),
                            meta.get("train_config_digest", ""))
