"""HSC-AttentionNet in plain numpy.

A record of D' selected features is read as a length-D' sequence with one
channel. The stack is

    causal conv (+ReLU) x L_c  ->  LSTM over the D' steps
    ->  additive attention pooling  ->  per-disease sigmoid head

Forward and backward passes are written by hand and vectorized over the
batch axis. Training is plain mini-batch SGD on mean binary cross-entropy.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view
from scipy.special import expit

from .errors import EmptyTable, ShapeMismatch, StaleTrace

__all__ = [
    "NetConfig",
    "NetParams",
    "ForwardTrace",
    "init_params",
    "forward",
    "loss",
    "loss_grad",
    "backward",
    "input_gradient",
    "sgd_step",
    "train",
    "predict_proba",
]

GATES = ("i", "f", "o", "g")


@dataclass
class NetConfig:
    """Architecture and training hyperparameters.

    ``learning_rate``, ``batch_size`` and ``epochs`` are the step size,
    mini-batch size and number of passes of the SGD loop.
    """

    input_len: int
    conv_layers: int = 2
    channels: int = 4
    kernel: int = 3
    hidden: int = 16
    attention_dim: int = 8
    outputs: int = 1
    learning_rate: float = 0.05
    batch_size: int = 16
    epochs: int = 200
    seed: int = 0
    clip_eps: float = 1e-7

    def __post_init__(self):
        positive = ("input_len", "conv_layers", "channels", "kernel", "hidden",
                    "attention_dim", "outputs", "batch_size")
        for name in positive:
            if int(getattr(self, name)) < 1:
                raise ValueError(f"NetConfig.{name} must be >= 1")
        if self.epochs < 0:
            raise ValueError("NetConfig.epochs must be >= 0")
        if not self.learning_rate > 0:
            raise ValueError("NetConfig.learning_rate must be > 0")
        if not 0 < self.clip_eps < 0.5:
            raise ValueError("NetConfig.clip_eps must lie in (0, 0.5)")

    def to_dict(self) -> dict:
        return asdict(self)

    def replace(self, **changes) -> "NetConfig":
        return NetConfig(**{**asdict(self), **changes})


def param_shapes(config: NetConfig) -> dict[str, tuple[int, ...]]:
    C, H, A, K = config.channels, config.hidden, config.attention_dim, config.outputs
    shapes = {}
    for layer in range(config.conv_layers):
        c_in = 1 if layer == 0 else C
        shapes[f"conv{layer}_W"] = (C, c_in, config.kernel)
        shapes[f"conv{layer}_b"] = (C,)
    for g in GATES:
        shapes[f"W_{g}"] = (H, C)
    for g in GATES:
        shapes[f"U_{g}"] = (H, H)
    for g in GATES:
        shapes[f"b_{g}"] = (H,)
    shapes["W_a"] = (A, H)
    shapes["v_a"] = (A,)
    shapes["W_h"] = (K, H)
    shapes["b_h"] = (K,)
    return shapes


@dataclass(eq=False)
class NetParams:
    """Named trainable arrays, in a fixed order. Also used for gradients."""

    arrays: dict[str, np.ndarray] = field(default_factory=dict)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]

    def __iter__(self):
        return iter(self.arrays)

    def items(self):
        return self.arrays.items()

    def copy(self) -> "NetParams":
        return NetParams({k: v.copy() for k, v in self.arrays.items()})

    def check_shapes(self, config: NetConfig) -> None:
        expected = param_shapes(config)
        got = {k: v.shape for k, v in self.arrays.items()}
        if got != expected:
            raise ShapeMismatch(f"parameters {got} do not match config {expected}")

    def equal(self, other: "NetParams") -> bool:
        return self.arrays.keys() == other.arrays.keys() and all(
            np.array_equal(v, other.arrays[k]) for k, v in self.arrays.items()
        )


def init_params(config: NetConfig, rng=None, scale: float | None = None) -> NetParams:
    """Draw initial parameters in ``param_shapes`` order.

    By default weights are Glorot-uniform and biases zero. With ``scale``
    every array, biases included, is Uniform(-scale, scale).
    """
    rng = np.random.default_rng(config.seed if rng is None else rng)
    arrays = {}
    for name, shape in param_shapes(config).items():
        if scale is not None:
            arrays[name] = rng.uniform(-scale, scale, size=shape)
        elif name == "v_a":
            limit = np.sqrt(6.0 / (shape[0] + 1))
            arrays[name] = rng.uniform(-limit, limit, size=shape)
        elif len(shape) == 1:
            arrays[name] = np.zeros(shape)
        else:
            receptive = shape[2] if len(shape) == 3 else 1
            fan_in, fan_out = shape[1] * receptive, shape[0] * receptive
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            arrays[name] = rng.uniform(-limit, limit, size=shape)
    return NetParams(arrays)


@dataclass(eq=False)
class ForwardTrace:
    """Activations cached by :func:`forward` for :func:`backward`."""

    params: NetParams
    config: NetConfig
    x: np.ndarray                 # (B, T)
    conv_windows: list            # per layer (B, T, C_in, k)
    conv_pre: list                # per layer (B, T, C)
    u: np.ndarray                 # LSTM input (B, T, C)
    gates: np.ndarray             # (B, T, 4H) post-activation i, f, o, g
    c: np.ndarray                 # (B, T+1, H); c[:, 0] = 0
    h: np.ndarray                 # (B, T+1, H); h[:, 0] = 0
    s: np.ndarray                 # tanh(W_a h_t), (B, T, A)
    e: np.ndarray                 # attention logits (B, T)
    alpha: np.ndarray             # attention weights (B, T)
    z: np.ndarray                 # pooled state (B, H)
    yhat: np.ndarray              # (B, K)
    single: bool = False


def _stack_gates(params: NetParams):
    W = np.concatenate([params[f"W_{g}"] for g in GATES], axis=0)
    U = np.concatenate([params[f"U_{g}"] for g in GATES], axis=0)
    b = np.concatenate([params[f"b_{g}"] for g in GATES])
    return W, U, b


def _as_batch(x, config: NetConfig):
    X = np.asarray(x, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != config.input_len:
        raise ShapeMismatch(f"input of shape {np.shape(x)} for input_len {config.input_len}")
    return X, single


def softmax(e: np.ndarray, axis: int = -1) -> np.ndarray:
    e = e - e.max(axis=axis, keepdims=True)
    w = np.exp(e)
    return w / w.sum(axis=axis, keepdims=True)


def forward(x, params: NetParams, config: NetConfig):
    """Risk probabilities for one record ``(D',)`` or a batch ``(B, D')``.

    Returns ``(yhat, trace)`` with ``yhat`` of shape ``(K,)`` or ``(B, K)``.
    """
    X, single = _as_batch(x, config)
    B, T = X.shape
    k = config.kernel
    H = config.hidden

    inp = X[:, :, None]
    windows, pres = [], []
    for layer in range(config.conv_layers):
        W = params[f"conv{layer}_W"]
        padded = np.pad(inp, ((0, 0), (k - 1, 0), (0, 0)))
        win = sliding_window_view(padded, k, axis=1)  # (B, T, C_in, k)
        pre = win.reshape(B * T, -1) @ W.reshape(W.shape[0], -1).T
        pre = pre.reshape(B, T, -1) + params[f"conv{layer}_b"]
        windows.append(win)
        pres.append(pre)
        inp = np.maximum(pre, 0.0)
    u = inp

    Wg, Ug, bg = _stack_gates(params)
    xw = u @ Wg.T + bg  # (B, T, 4H)
    gates = np.empty((B, T, 4 * H))
    c = np.zeros((B, T + 1, H))
    h = np.zeros((B, T + 1, H))
    for t in range(T):
        a = xw[:, t] + h[:, t] @ Ug.T
        ifo = expit(a[:, : 3 * H])
        g = np.tanh(a[:, 3 * H:])
        gates[:, t, : 3 * H] = ifo
        gates[:, t, 3 * H:] = g
        c[:, t + 1] = ifo[:, H: 2 * H] * c[:, t] + ifo[:, :H] * g
        h[:, t + 1] = ifo[:, 2 * H: 3 * H] * np.tanh(c[:, t + 1])

    hs = h[:, 1:]
    s = np.tanh(hs @ params["W_a"].T)
    e = s @ params["v_a"]
    alpha = softmax(e, axis=1)
    z = np.einsum("bt,bth->bh", alpha, hs)
    yhat = expit(z @ params["W_h"].T + params["b_h"])

    trace = ForwardTrace(params, config, X, windows, pres, u, gates, c, h, s, e, alpha, z, yhat, single)
    return (yhat[0] if single else yhat), trace


def _clip(yhat, eps):
    return np.clip(yhat, eps, 1.0 - eps)


def loss(yhat, y, clip_eps: float = 1e-7) -> float:
    """Binary cross-entropy averaged over every batch row and output head."""
    P = np.asarray(yhat, dtype=np.float64)
    Y = np.asarray(y, dtype=np.float64)
    if P.shape != Y.shape:
        raise ShapeMismatch(f"predictions {P.shape} vs labels {Y.shape}")
    P = _clip(P, clip_eps)
    return float(-np.mean(Y * np.log(P) + (1.0 - Y) * np.log1p(-P)))


def loss_grad(yhat, y) -> np.ndarray:
    """Elementwise dL/dyhat of one cross-entropy term, before averaging."""
    P = np.asarray(yhat, dtype=np.float64)
    Y = np.asarray(y, dtype=np.float64)
    return (P - Y) / (P * (1.0 - P))


def _backprop(trace: ForwardTrace, d_logits: np.ndarray, params: NetParams):
    """Reverse pass from head logits; returns (gradients, d_input)."""
    cfg = trace.config
    B, T = trace.x.shape
    H = cfg.hidden
    k = cfg.kernel
    grads = {}

    hs = trace.h[:, 1:]
    grads["W_h"] = d_logits.T @ trace.z
    grads["b_h"] = d_logits.sum(axis=0)
    dz = d_logits @ params["W_h"]

    alpha, s = trace.alpha, trace.s
    d_alpha = np.einsum("bth,bh->bt", hs, dz)
    dh_seq = alpha[:, :, None] * dz[:, None, :]
    de = alpha * (d_alpha - np.sum(alpha * d_alpha, axis=1, keepdims=True))
    grads["v_a"] = np.einsum("bt,bta->a", de, s)
    d_sa = de[:, :, None] * params["v_a"] * (1.0 - s * s)
    grads["W_a"] = np.einsum("bta,bth->ah", d_sa, hs)
    dh_seq = dh_seq + d_sa @ params["W_a"]

    Wg, Ug, _ = _stack_gates(params)
    gates, c = trace.gates, trace.c
    d_a = np.empty((B, T, 4 * H))
    dh_next = np.zeros((B, H))
    dc_next = np.zeros((B, H))
    for t in range(T - 1, -1, -1):
        i = gates[:, t, :H]
        f = gates[:, t, H: 2 * H]
        o = gates[:, t, 2 * H: 3 * H]
        g = gates[:, t, 3 * H:]
        tc = np.tanh(c[:, t + 1])
        dh = dh_seq[:, t] + dh_next
        dc = dh * o * (1.0 - tc * tc) + dc_next
        d_a[:, t, :H] = dc * g * i * (1.0 - i)
        d_a[:, t, H: 2 * H] = dc * c[:, t] * f * (1.0 - f)
        d_a[:, t, 2 * H: 3 * H] = dh * tc * o * (1.0 - o)
        d_a[:, t, 3 * H:] = dc * i * (1.0 - g * g)
        dc_next = dc * f
        dh_next = d_a[:, t] @ Ug
    dW = np.einsum("bta,btc->ac", d_a, trace.u)
    dU = np.einsum("bta,bth->ah", d_a, trace.h[:, :-1])
    db = d_a.sum(axis=(0, 1))
    for n, gname in enumerate(GATES):
        sl = slice(n * H, (n + 1) * H)
        grads[f"W_{gname}"] = dW[sl]
        grads[f"U_{gname}"] = dU[sl]
        grads[f"b_{gname}"] = db[sl]
    d_inp = d_a @ Wg  # (B, T, C)

    for layer in range(cfg.conv_layers - 1, -1, -1):
        W = params[f"conv{layer}_W"]
        win = trace.conv_windows[layer]
        d_pre = d_inp * (trace.conv_pre[layer] > 0.0)
        c_out, c_in, _ = W.shape
        flat_win = win.reshape(B * T, c_in * k)
        flat_d = d_pre.reshape(B * T, c_out)
        grads[f"conv{layer}_W"] = (flat_d.T @ flat_win).reshape(W.shape)
        grads[f"conv{layer}_b"] = flat_d.sum(axis=0)
        d_win = (flat_d @ W.reshape(c_out, -1)).reshape(B, T, c_in, k)
        d_pad = np.zeros((B, T + k - 1, c_in))
        for j in range(k):
            d_pad[:, j: j + T] += d_win[..., j]
        d_inp = d_pad[:, k - 1:]

    ordered = {name: grads[name] for name in params.arrays}
    return NetParams(ordered), d_inp[:, :, 0]


def backward(trace: ForwardTrace, y, params: NetParams) -> NetParams:
    """Gradients of :func:`loss` with respect to every parameter array.

    The sigmoid and cross-entropy derivatives are fused into
    ``(yhat - y) / (B * K)`` at the head logits, which equals the chain rule
    through ``loss_grad`` wherever the probability clamp is inactive.
    """
    if trace.params is not params:
        raise StaleTrace("trace was produced with a different parameter set")
    Y = np.asarray(y, dtype=np.float64)
    if Y.ndim == 1:
        Y = Y[None, :]
    if Y.shape != trace.yhat.shape:
        raise ShapeMismatch(f"labels {Y.shape} vs predictions {trace.yhat.shape}")
    d_logits = (trace.yhat - Y) / Y.size
    grads, _ = _backprop(trace, d_logits, params)
    return grads


def input_gradient(x, params: NetParams, config: NetConfig) -> np.ndarray:
    """d yhat_k / d x_d for every row and head, shape ``(B, K, D')``."""
    yhat, trace = forward(np.atleast_2d(x), params, config)
    out = np.empty((yhat.shape[0], config.outputs, config.input_len))
    for k in range(config.outputs):
        d_logits = np.zeros_like(yhat)
        d_logits[:, k] = yhat[:, k] * (1.0 - yhat[:, k])
        _, dx = _backprop(trace, d_logits, params)
        out[:, k] = dx
    return out


def sgd_step(params: NetParams, grads: NetParams, lr: float) -> NetParams:
    if params.arrays.keys() != grads.arrays.keys():
        raise ShapeMismatch("gradient names differ from parameter names")
    out = {}
    for name, p in params.items():
        g = grads[name]
        if g.shape != p.shape:
            raise ShapeMismatch(f"{name}: gradient {g.shape} vs parameter {p.shape}")
        out[name] = p - lr * g
    return NetParams(out)


def _check_table(table, config: NetConfig):
    if table.n_rows == 0:
        raise EmptyTable("cannot train on an empty table")
    if table.n_features != config.input_len:
        raise ShapeMismatch(f"table has {table.n_features} features, network expects {config.input_len}")
    if table.n_labels != config.outputs:
        raise ShapeMismatch(f"table has {table.n_labels} labels, network has {config.outputs} heads")


def train(table, config: NetConfig, callback=None):
    """Mini-batch SGD; returns ``(params, per_epoch_mean_loss)``.

    One generator seeded from ``config.seed`` draws the initial parameters
    and then one shuffle per epoch. The short remainder batch is kept;
    ``batch_size > N`` means full-batch steps.
    """
    if getattr(table, "n_rows", 1) == 0:
        raise EmptyTable("cannot train on an empty table")
    _check_table(table, config)
    rng = np.random.default_rng(config.seed)
    params = init_params(config, rng)
    X, Y = table.features, table.labels
    N = X.shape[0]
    B = min(config.batch_size, N)
    curve = []
    for epoch in range(config.epochs):
        order = rng.permutation(N)
        total = 0.0
        for start in range(0, N, B):
            rows = order[start: start + B]
            yb = Y[rows]
            yhat, trace = forward(X[rows], params, config)
            total += loss(yhat, yb, config.clip_eps) * rows.size
            params = sgd_step(params, backward(trace, yb, params), config.learning_rate)
        curve.append(total / N)
        if callback is not None:
            callback(epoch, curve[-1], params)
    return params, curve


def predict_proba(table, params: NetParams, config: NetConfig, chunk: int = 4096) -> np.ndarray:
    X = getattr(table, "features", table)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != config.input_len:
        raise ShapeMismatch(f"input of shape {X.shape} for input_len {config.input_len}")
    params.check_shapes(config)
    out = np.empty((X.shape[0], config.outputs))
    for start in range(0, X.shape[0], chunk):
        out[start: start + chunk], _ = forward(X[start: start + chunk], params, config)
    return out
