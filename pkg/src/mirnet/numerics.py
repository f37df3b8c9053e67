"""Dense float64 tensors with reverse-mode automatic differentiation.

Only the operator set the mixture-identity model needs is implemented:
1-D and 2-D convolution, affine maps, pointwise nonlinearities, mean
pooling, row gathers, and softmax cross-entropy, plus a central-difference
gradient checker.  All payloads are numpy float64 arrays.

Backward closures return per-parent gradients; `backward` schedules them in
reverse topological order and accumulates into the `.grad` buffer of leaf
tensors.  Calling `backward` twice without resetting adds the gradients up.
Forward ops are pure, so distinct graphs can be evaluated from multiple
threads; the grad-recording switch is thread-local.
"""

from __future__ import annotations

import math
import threading
from contextlib import contextmanager

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

_state = threading.local()


def _recording() -> bool:
    return getattr(_state, "recording", True)


@contextmanager
def no_grad():
    """Disable tape recording inside the block (forward-only evaluation)."""
    prev = _recording()
    _state.recording = False
    try:
        yield
    finally:
        _state.recording = prev


class Tensor:
    """A float64 array plus the bookkeeping needed for reverse-mode autodiff."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = requires_grad
        # Leaves that want gradients get a persistent, pre-zeroed buffer.
        self.grad = np.zeros_like(self.data) if requires_grad else None
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    def item(self) -> float:
        if self.data.size != 1:
            raise ValueError(f"item() requires a scalar, got shape {self.data.shape}")
        return float(self.data.reshape(()))

    def accumulate_grad(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad[...] = 0.0

    def __add__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"


def _node(out: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    """Wrap an op result, recording the edge only when a parent needs grads."""
    t = Tensor(out)
    if _recording() and any(p.requires_grad for p in parents):
        t.requires_grad = True
        t.grad = None  # intermediate grads live in the backward table
        t._parents = parents
        t._backward = backward
    return t


class Parameter:
    """A named trainable leaf tensor with an always-allocated gradient buffer."""

    __slots__ = ("name", "tensor")

    def __init__(self, name: str, value):
        self.name = name
        self.tensor = Tensor(np.array(value, dtype=np.float64), requires_grad=True)

    @property
    def value(self) -> np.ndarray:
        return self.tensor.data

    @property
    def grad(self) -> np.ndarray:
        return self.tensor.grad

    def zero_grad(self) -> None:
        self.tensor.zero_grad()

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.value.shape})"


class ParameterStore:
    """Ordered registry of uniquely named parameters."""

    def __init__(self):
        self._params: dict[str, Parameter] = {}

    def add(self, name: str, value) -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter name: {name!r}")
        p = Parameter(name, value)
        self._params[name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        try:
            return self._params[name]
        except KeyError:
            raise KeyError(f"unknown parameter: {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grad(self) -> None:
        for p in self._params.values():
            p.zero_grad()

    def total_parameters(self) -> int:
        return sum(p.value.size for p in self._params.values())

    def copy_values(self) -> dict[str, np.ndarray]:
        return {name: p.value.copy() for name, p in self._params.items()}

    def load_values(self, values: dict[str, np.ndarray]) -> None:
        """Overwrite every parameter in place; names and shapes must match exactly."""
        missing = [n for n in self._params if n not in values]
        extra = [n for n in values if n not in self._params]
        if missing or extra:
            raise ValueError(
                f"parameter name mismatch: missing={missing!r} unexpected={extra!r}"
            )
        for name, p in self._params.items():
            arr = np.asarray(values[name], dtype=np.float64)
            if arr.shape != p.value.shape:
                raise ValueError(
                    f"shape mismatch for {name!r}: stored {arr.shape}, "
                    f"model expects {p.value.shape}"
                )
            p.tensor.data[...] = arr


class Graph:
    """Reverse-topological schedule of the recorded ops reachable from a root."""

    def __init__(self, nodes: list[Tensor]):
        self._nodes = nodes  # topological order, root last

    def __len__(self):
        return len(self._nodes)

    @classmethod
    def trace(cls, root: Tensor) -> "Graph":
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(root, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad:
                    stack.append((p, False))
        return cls(order)

    def run_backward(self) -> None:
        root = self._nodes[-1]
        table: dict[int, np.ndarray] = {id(root): np.ones_like(root.data)}
        for node in reversed(self._nodes):
            g = table.pop(id(node), None)
            if g is None:
                continue
            if node._backward is None:
                # Leaf: accumulate into the persistent buffer.
                if node.requires_grad:
                    node.accumulate_grad(g)
                continue
            for parent, pg in zip(node._parents, node._backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if parent._backward is None:
                    parent.accumulate_grad(pg)
                elif key in table:
                    table[key] += pg
                else:
                    table[key] = pg.copy() if isinstance(pg, np.ndarray) else pg


def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(leaf) into every reachable grad-bearing leaf."""
    if loss.data.size != 1:
        raise ValueError(
            f"backward requires a scalar loss, got shape {loss.data.shape}"
        )
    if not loss.requires_grad:
        return
    Graph.trace(loss).run_backward()


# ---------------------------------------------------------------------------
# ops


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    extra = g.ndim - len(shape)
    if extra:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data + b.data

    def bwd(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _node(out, (a, b), bwd)


def add_n(tensors) -> Tensor:
    """Sum of same-shaped tensors as a single node."""
    ts = [_as_tensor(t) for t in tensors]
    if not ts:
        raise ValueError("add_n needs at least one tensor")
    shape = ts[0].data.shape
    for t in ts[1:]:
        if t.data.shape != shape:
            raise ValueError(f"add_n shape mismatch: {shape} vs {t.data.shape}")
    out = ts[0].data.copy()
    for t in ts[1:]:
        out += t.data

    def bwd(g):
        return tuple(g for _ in ts)

    return _node(out, tuple(ts), bwd)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)
    out = a.data * b.data

    def bwd(g):
        return (
            _unbroadcast(g * b.data, a.data.shape),
            _unbroadcast(g * a.data, b.data.shape),
        )

    return _node(out, (a, b), bwd)


def scale(x, c: float) -> Tensor:
    """Multiply by a python constant (no gradient for the constant)."""
    x = _as_tensor(x)
    c = float(c)

    def bwd(g):
        return (g * c,)

    return _node(x.data * c, (x,), bwd)


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """y = x @ w + b over the last axis of x; w is [in, out], b is [out]."""
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if w.data.ndim != 2:
        raise ValueError(f"affine weight must be 2-D, got shape {w.data.shape}")
    c_in, c_out = w.data.shape
    if x.data.ndim < 1 or x.data.shape[-1] != c_in:
        raise ValueError(
            f"affine input last axis is {x.data.shape}, weight expects {c_in}"
        )
    if b.data.shape != (c_out,):
        raise ValueError(f"affine bias shape {b.data.shape}, expected ({c_out},)")
    out = x.data @ w.data + b.data

    def bwd(g):
        x2 = x.data.reshape(-1, c_in)
        g2 = g.reshape(-1, c_out)
        return g @ w.data.T, x2.T @ g2, g2.sum(axis=0)

    return _node(out, (x, w, b), bwd)


def conv1d(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """Same-padded stride-1 1-D convolution over [channels, frames].

    Weight is [out, in, K] with odd K; the frame count is preserved exactly.
    """
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 2:
        raise ValueError(f"conv1d input must be [channels, frames], got {x.data.shape}")
    if w.data.ndim != 3:
        raise ValueError(f"conv1d weight must be [out, in, K], got {w.data.shape}")
    c_in, t = x.data.shape
    c_out, c_in_w, k = w.data.shape
    if c_in_w != c_in:
        raise ValueError(
            f"conv1d weight expects {c_in_w} input channels, input has {c_in}"
        )
    if k % 2 == 0:
        raise ValueError(f"conv1d kernel must be odd for same padding, got {k}")
    if b.data.shape != (c_out,):
        raise ValueError(f"conv1d bias shape {b.data.shape}, expected ({c_out},)")
    pad = (k - 1) // 2
    xp = np.zeros((c_in, t + k - 1), dtype=np.float64)
    xp[:, pad : pad + t] = x.data
    # cols[c*k + j, t0] = xp[c, t0 + j]
    cols = sliding_window_view(xp, k, axis=1)  # [C_in, T, K]
    cols = np.ascontiguousarray(cols.transpose(0, 2, 1)).reshape(c_in * k, t)
    w2 = w.data.reshape(c_out, c_in * k)
    out = w2 @ cols + b.data[:, None]

    def bwd(g):
        gw = (g @ cols.T).reshape(c_out, c_in, k)
        gb = g.sum(axis=1)
        gcols = (w2.T @ g).reshape(c_in, k, t)
        gxp = np.zeros_like(xp)
        for j in range(k):
            gxp[:, j : j + t] += gcols[:, j, :]
        return gxp[:, pad : pad + t], gw, gb

    return _node(out, (x, w, b), bwd)


def conv2d(x: Tensor, w: Tensor, b: Tensor, stride: int = 1) -> Tensor:
    """2-D convolution over [channels, height, width] with k//2 zero padding.

    Output extent per axis is floor((n + 2*(k//2) - k) / stride) + 1, which for
    odd k reduces to ceil(n / stride).
    """
    x, w, b = _as_tensor(x), _as_tensor(w), _as_tensor(b)
    if x.data.ndim != 3:
        raise ValueError(f"conv2d input must be [C, H, W], got {x.data.shape}")
    if w.data.ndim != 4:
        raise ValueError(f"conv2d weight must be [out, in, kh, kw], got {w.data.shape}")
    c_in, h, wd = x.data.shape
    c_out, c_in_w, kh, kw = w.data.shape
    if c_in_w != c_in:
        raise ValueError(
            f"conv2d weight expects {c_in_w} input channels, input has {c_in}"
        )
    if kh % 2 == 0 or kw % 2 == 0:
        raise ValueError(f"conv2d kernels must be odd, got {kh}x{kw}")
    if b.data.shape != (c_out,):
        raise ValueError(f"conv2d bias shape {b.data.shape}, expected ({c_out},)")
    if stride < 1:
        raise ValueError(f"conv2d stride must be >= 1, got {stride}")
    ph, pw = kh // 2, kw // 2
    s = int(stride)
    xp = np.zeros((c_in, h + 2 * ph, wd + 2 * pw), dtype=np.float64)
    xp[:, ph : ph + h, pw : pw + wd] = x.data
    oh = (h + 2 * ph - kh) // s + 1
    ow = (wd + 2 * pw - kw) // s + 1
    win = sliding_window_view(xp, (kh, kw), axis=(1, 2))[:, ::s, ::s]  # [C,OH,OW,kh,kw]
    cols = np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2)).reshape(
        c_in * kh * kw, oh * ow
    )
    w2 = w.data.reshape(c_out, c_in * kh * kw)
    out = (w2 @ cols).reshape(c_out, oh, ow) + b.data[:, None, None]

    def bwd(g):
        g2 = g.reshape(c_out, oh * ow)
        gw = (g2 @ cols.T).reshape(c_out, c_in, kh, kw)
        gb = g2.sum(axis=1)
        gcols = (w2.T @ g2).reshape(c_in, kh, kw, oh, ow)
        gxp = np.zeros_like(xp)
        for i in range(kh):
            for j in range(kw):
                gxp[:, i : i + s * oh : s, j : j + s * ow : s] += gcols[:, i, j]
        return gxp[:, ph : ph + h, pw : pw + wd], gw, gb

    return _node(out, (x, w, b), bwd)


def leaky_relu(x: Tensor, alpha: float = 0.2) -> Tensor:
    x = _as_tensor(x)
    slope = np.where(x.data >= 0.0, 1.0, float(alpha))
    out = x.data * slope

    def bwd(g):
        return (g * slope,)

    return _node(out, (x,), bwd)


def sigmoid(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    d = x.data
    out = np.empty_like(d)
    pos = d >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ez = np.exp(d[~pos])
    out[~pos] = ez / (1.0 + ez)
    # keep the open interval even where float64 would round to 0 or 1
    np.clip(out, np.nextafter(0.0, 1.0), np.nextafter(1.0, 0.0), out=out)

    def bwd(g):
        return (g * out * (1.0 - out),)

    return _node(out, (x,), bwd)


def tanh(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    out = np.tanh(x.data)

    def bwd(g):
        return (g * (1.0 - out * out),)

    return _node(out, (x,), bwd)


def total(x: Tensor) -> Tensor:
    """Sum of all elements, as a 0-d scalar node."""
    x = _as_tensor(x)
    out = np.asarray(x.data.sum(), dtype=np.float64)

    def bwd(g):
        return (np.broadcast_to(g, x.data.shape),)

    return _node(out, (x,), bwd)


def mean_axis(x: Tensor, axis: int) -> Tensor:
    x = _as_tensor(x)
    if x.data.ndim == 0:
        raise ValueError("mean_axis requires at least one axis")
    n = x.data.shape[axis]
    if n == 0:
        raise ValueError(f"mean over empty axis {axis} of shape {x.data.shape}")
    out = x.data.mean(axis=axis)

    def bwd(g):
        return (np.broadcast_to(np.expand_dims(g, axis), x.data.shape) / n,)

    return _node(out, (x,), bwd)


def mean_over_time(x: Tensor) -> Tensor:
    """Average a [channels, frames] tensor over frames."""
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError(f"mean_over_time expects [C, T], got shape {x.data.shape}")
    return mean_axis(x, 1)


def cross_entropy(logits: Tensor, label: int) -> Tensor:
    """-log softmax(logits)[label], computed with max subtraction."""
    logits = _as_tensor(logits)
    if logits.data.ndim != 1:
        raise ValueError(f"cross_entropy expects a 1-D logit vector, got {logits.data.shape}")
    n = logits.data.shape[0]
    label = int(label)
    if not 0 <= label < n:
        raise ValueError(f"label {label} out of range for {n} classes")
    z = logits.data - logits.data.max()
    ez = np.exp(z)
    denom = ez.sum()
    out = np.asarray(math.log(denom) - z[label], dtype=np.float64)

    def bwd(g):
        p = ez / denom
        p[label] -= 1.0
        return (float(g) * p,)

    return _node(out, (logits,), bwd)


def transpose2d(x: Tensor) -> Tensor:
    x = _as_tensor(x)
    if x.data.ndim != 2:
        raise ValueError(f"transpose2d expects a matrix, got shape {x.data.shape}")
    out = np.ascontiguousarray(x.data.T)

    def bwd(g):
        return (g.T,)

    return _node(out, (x,), bwd)


def reshape(x: Tensor, shape) -> Tensor:
    x = _as_tensor(x)
    out = x.data.reshape(shape)

    def bwd(g):
        return (g.reshape(x.data.shape),)

    return _node(out, (x,), bwd)


def gather_rows(x: Tensor, index) -> Tensor:
    """Select rows by integer index along axis 0 (duplicates accumulate)."""
    x = _as_tensor(x)
    idx = np.asarray(index, dtype=np.intp)
    if idx.ndim != 1:
        raise ValueError(f"gather_rows index must be 1-D, got shape {idx.shape}")
    if x.data.ndim < 1:
        raise ValueError("gather_rows input must have a leading axis")
    out = x.data[idx].copy()

    def bwd(g):
        gx = np.zeros_like(x.data)
        np.add.at(gx, idx, g)
        return (gx,)

    return _node(out, (x,), bwd)


# ---------------------------------------------------------------------------
# gradient checking


def grad_check(fn, point, step: float = 1e-5, max_coords: int | None = None,
               rng: np.random.Generator | None = None,
               skip_nonsmooth: bool = False) -> float:
    """Compare analytic and central-difference gradients of a scalar function.

    `fn` maps a Tensor to a scalar Tensor.  Returns the maximum relative error
    |analytic - numeric| / max(1, |analytic|, |numeric|) over the checked
    coordinates.  When `max_coords` is given, that many coordinates are sampled
    without replacement using `rng`.

    With `skip_nonsmooth`, each probed coordinate is also differenced at half
    the step; if the two estimates disagree the function is locally kinked at
    this scale (a leaky_relu zero crossing or a hard-min switch) and the
    finite-difference reference is invalid there, so the coordinate is skipped.
    A wrong analytic gradient gives mutually consistent numeric estimates, so
    it is still reported.
    """
    base = np.array(point.data if isinstance(point, Tensor) else point,
                    dtype=np.float64)
    x = Tensor(base.copy(), requires_grad=True)
    loss = fn(x)
    if loss.data.size != 1:
        raise ValueError(f"grad_check function must return a scalar, got {loss.data.shape}")
    if not np.isfinite(loss.data):
        raise ValueError("grad_check function returned a non-finite value")
    backward(loss)
    analytic = x.grad.reshape(-1).copy()

    n = base.size
    if max_coords is not None and max_coords < n:
        if rng is None:
            rng = np.random.default_rng(0)
        coords = np.sort(rng.choice(n, size=max_coords, replace=False))
    else:
        coords = np.arange(n)

    flat = x.data.reshape(-1)

    def central(i: int, h: float) -> float:
        orig = flat[i]
        flat[i] = orig + h
        f_plus = fn(x).item()
        flat[i] = orig - h
        f_minus = fn(x).item()
        flat[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise ValueError(f"non-finite evaluation while probing coordinate {i}")
        return (f_plus - f_minus) / (2.0 * h)

    worst = 0.0
    with no_grad():
        for i in coords:
            numeric = central(i, step)
            if skip_nonsmooth:
                half = central(i, step / 2.0)
                drift = abs(numeric - half) / max(1.0, abs(numeric), abs(half))
                if drift > 1e-6:
                    continue
            a = analytic[i]
            err = abs(a - numeric) / max(1.0, abs(a), abs(numeric))
            if err > worst:
                worst = err
    return worst
