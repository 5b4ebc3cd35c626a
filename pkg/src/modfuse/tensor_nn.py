"""Dense 2-D tensors with reverse-mode gradients, layers, loss, and Adam.

Everything is float64: this artifact trades throughput for tight,
checkable numerics (central-difference gradient checks at 1e-4).
Tensors are immutable once built; backward() walks the graph once from a
scalar loss and accumulates into .grad of every requires_grad tensor.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyInputError,
    NumericError,
    ParameterError,
    PoisonedGradientError,
    ProbeError,
    ShapeError,
)


class Tensor2:
    """A 2-D float64 array plus an optional gradient buffer.

    Graph nodes record (parent, vjp) pairs; vjp maps the node's output
    gradient to the parent's gradient contribution.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ShapeError(f"Tensor2 is strictly 2-D, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise NumericError("tensor holds non-finite values")
        self.data = arr
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        if self.data.shape != (1, 1):
            raise ShapeError(f"item() needs a 1x1 tensor, got {self.data.shape}")
        return float(self.data[0, 0])

    def backward(self):
        """Reverse-mode sweep from a scalar output."""
        if self.data.shape != (1, 1):
            raise ShapeError("backward() starts from a 1x1 scalar")
        order = []
        seen = set()
        stack = [(self, False)]
        while stack:
            node, done = stack.pop()
            if done:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for parent, _ in node._parents:
                if parent.requires_grad and id(parent) not in seen:
                    stack.append((parent, False))
        self.grad = np.ones((1, 1))
        for node in reversed(order):
            g = node.grad
            if g is None:
                continue
            for parent, vjp in node._parents:
                if not parent.requires_grad:
                    continue
                contrib = vjp(g)
                if parent.grad is None:
                    parent.grad = contrib.copy()
                else:
                    parent.grad += contrib

    def __repr__(self):
        tag = ", grad" if self.requires_grad else ""
        return f"Tensor2({self.data.shape[0]}x{self.data.shape[1]}{tag})"


def _node(data: np.ndarray, parents) -> Tensor2:
    live = tuple((p, vjp) for p, vjp in parents if p.requires_grad)
    out = Tensor2(data, requires_grad=bool(live))
    out._parents = live
    return out


def constant(data) -> Tensor2:
    return Tensor2(data, requires_grad=False)


def zero_grads(params):
    for p in params.values() if isinstance(params, dict) else params:
        p.grad = None


# -- primitive ops ----------------------------------------------------------

def matmul(a: Tensor2, b: Tensor2) -> Tensor2:
    if a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul {a.data.shape} x {b.data.shape}")
    return _node(a.data @ b.data, [
        (a, lambda g: g @ b.data.T),
        (b, lambda g: a.data.T @ g),
    ])


def add(a: Tensor2, b: Tensor2) -> Tensor2:
    """Elementwise add; b may also be a 1 x cols row broadcast over a's rows."""
    if a.data.shape == b.data.shape:
        return _node(a.data + b.data, [(a, lambda g: g), (b, lambda g: g)])
    if b.data.shape == (1, a.data.shape[1]):
        return _node(a.data + b.data, [
            (a, lambda g: g),
            (b, lambda g: g.sum(axis=0, keepdims=True)),
        ])
    raise ShapeError(f"add {a.data.shape} + {b.data.shape}")


def scale(a: Tensor2, s: float) -> Tensor2:
    s = float(s)
    return _node(a.data * s, [(a, lambda g: g * s)])


def transpose(a: Tensor2) -> Tensor2:
    return _node(a.data.T.copy(), [(a, lambda g: g.T)])


def concat_cols(tensors) -> Tensor2:
    tensors = list(tensors)
    if not tensors:
        raise EmptyInputError("concat_cols of nothing")
    rows = tensors[0].data.shape[0]
    if any(t.data.shape[0] != rows for t in tensors):
        raise ShapeError("concat_cols needs equal row counts")
    widths = [t.data.shape[1] for t in tensors]
    offsets = np.concatenate([[0], np.cumsum(widths)])
    parents = [
        (t, (lambda lo, hi: lambda g: g[:, lo:hi])(offsets[i], offsets[i + 1]))
        for i, t in enumerate(tensors)
    ]
    return _node(np.concatenate([t.data for t in tensors], axis=1), parents)


def concat_rows(tensors) -> Tensor2:
    tensors = list(tensors)
    if not tensors:
        raise EmptyInputError("concat_rows of nothing")
    cols = tensors[0].data.shape[1]
    if any(t.data.shape[1] != cols for t in tensors):
        raise ShapeError("concat_rows needs equal column counts")
    heights = [t.data.shape[0] for t in tensors]
    offsets = np.concatenate([[0], np.cumsum(heights)])
    parents = [
        (t, (lambda lo, hi: lambda g: g[lo:hi, :])(offsets[i], offsets[i + 1]))
        for i, t in enumerate(tensors)
    ]
    return _node(np.concatenate([t.data for t in tensors], axis=0), parents)


def slice_cols(a: Tensor2, start: int, stop: int) -> Tensor2:
    if not 0 <= start < stop <= a.data.shape[1]:
        raise ShapeError(f"slice [{start}:{stop}] of {a.data.shape}")

    def vjp(g):
        out = np.zeros_like(a.data)
        out[:, start:stop] = g
        return out

    return _node(a.data[:, start:stop].copy(), [(a, vjp)])


def relu(a: Tensor2) -> Tensor2:
    mask = a.data > 0
    return _node(np.where(mask, a.data, 0.0), [(a, lambda g: g * mask)])


def softmax_rows(x: Tensor2) -> Tensor2:
    """Row-wise softmax with per-row max subtraction for stability."""
    shifted = x.data - x.data.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    p = e / e.sum(axis=1, keepdims=True)

    def vjp(g):
        return p * (g - (g * p).sum(axis=1, keepdims=True))

    return _node(p, [(x, vjp)])


def col_max(a: Tensor2) -> Tensor2:
    """Columnwise max over rows -> 1 x cols. Ties send the gradient to the
    first maximizing row."""
    if a.data.shape[0] == 0:
        raise EmptyInputError("col_max of an empty sequence")
    idx = a.data.argmax(axis=0)

    def vjp(g):
        out = np.zeros_like(a.data)
        out[idx, np.arange(a.data.shape[1])] = g[0]
        return out

    return _node(a.data.max(axis=0, keepdims=True), [(a, vjp)])


def col_mean(a: Tensor2) -> Tensor2:
    rows = a.data.shape[0]
    if rows == 0:
        raise EmptyInputError("col_mean of an empty sequence")
    return _node(
        a.data.mean(axis=0, keepdims=True),
        [(a, lambda g: np.repeat(g, rows, axis=0) / rows)],
    )


def weighted_cross_entropy(logits: Tensor2, labels, class_weights=(1.0, 1.0)) -> Tensor2:
    """Mean over the batch of w[label] * (-log softmax(logits)[label]).

    labels: class indices, 0 = fake, 1 = bonafide. Uses log-sum-exp so the
    loss stays finite for any finite logits.
    """
    y = np.asarray(labels, dtype=np.intp)
    n, k = logits.data.shape
    if n == 0:
        raise EmptyInputError("cross entropy over an empty batch")
    if y.shape != (n,) or y.min() < 0 or y.max() >= k:
        raise ShapeError(f"labels must be {n} indices below {k}")
    w = np.asarray(class_weights, dtype=np.float64)
    if w.shape != (k,) or np.any(w <= 0):
        raise ParameterError(f"need {k} positive class weights")

    shifted = logits.data - logits.data.max(axis=1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=1, keepdims=True))
    logp = shifted - logz
    wl = w[y]
    loss = -np.mean(wl * logp[np.arange(n), y])

    def vjp(g):
        p = np.exp(logp)
        d = p.copy()
        d[np.arange(n), y] -= 1.0
        return (g[0, 0] / n) * wl[:, None] * d

    return _node(np.array([[loss]]), [(logits, vjp)])


# -- layers -----------------------------------------------------------------

@dataclass
class AffineLayer:
    """x @ weight + bias, applied row-wise."""

    weight: Tensor2
    bias: Tensor2

    def __post_init__(self):
        if self.bias.data.shape != (1, self.weight.data.shape[1]):
            raise ShapeError(
                f"bias {self.bias.data.shape} does not match weight "
                f"{self.weight.data.shape}"
            )

    @property
    def in_dim(self) -> int:
        return self.weight.data.shape[0]

    @property
    def out_dim(self) -> int:
        return self.weight.data.shape[1]

    @classmethod
    def xavier(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> "AffineLayer":
        limit = np.sqrt(6.0 / (in_dim + out_dim))
        w = rng.uniform(-limit, limit, size=(in_dim, out_dim))
        return cls(
            weight=Tensor2(w, requires_grad=True),
            bias=Tensor2(np.zeros((1, out_dim)), requires_grad=True),
        )

    def apply(self, x: Tensor2) -> Tensor2:
        if x.data.shape[1] != self.in_dim:
            raise ShapeError(
                f"affine layer expects {self.in_dim} input columns, "
                f"got {x.data.shape[1]}"
            )
        return add(matmul(x, self.weight), self.bias)


# -- optimizer ---------------------------------------------------------------

@dataclass
class AdamState:
    """Standard Adam moments; only the learning rate is configurable."""

    learning_rate: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ParameterError("learning rate must be positive")


def adam_step(params: dict, state: AdamState):
    """One Adam update in place over a name -> Tensor2 dict.

    Absent gradients count as zero. A NaN gradient aborts the whole step
    before any parameter is touched.
    """
    grads = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        if g.shape != p.data.shape:
            raise ShapeError(f"gradient shape mismatch for {name}")
        if np.any(np.isnan(g)):
            raise PoisonedGradientError(f"NaN gradient in parameter {name!r}")
        grads[name] = g

    state.step += 1
    t = state.step
    b1, b2 = state.beta1, state.beta2
    for name, p in params.items():
        g = grads[name]
        m = state.m.setdefault(name, np.zeros_like(p.data))
        v = state.v.setdefault(name, np.zeros_like(p.data))
        m *= b1
        m += (1 - b1) * g
        v *= b2
        v += (1 - b2) * g * g
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        p.data = p.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.eps)


# -- verification harness -----------------------------------------------------

def grad_check(f, params, h: float = 1e-5, sample: int | None = None, seed: int = 0) -> float:
    """Central-difference check of reverse-mode gradients.

    f() rebuilds the scalar loss from the current parameter data. With
    sample=None every coordinate is probed; otherwise up to `sample`
    coordinates per parameter, drawn from a seeded Philox stream, which
    keeps full-size fusion blocks checkable in seconds.

    Returns max over probed coordinates of
    |g_ad - g_fd| / max(1, |g_ad|, |g_fd|).
    """
    if isinstance(params, dict):
        params = list(params.items())
    if not 0 < h <= 1e-2:
        raise ParameterError(f"step {h} outside a sane central-difference range")

    zero_grads([p for _, p in params])
    loss = f()
    loss.backward()
    ad = {name: (p.grad if p.grad is not None else np.zeros_like(p.data))
          for name, p in params}

    rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
    worst = 0.0
    for name, p in params:
        flat = p.data.reshape(-1)
        n = flat.size
        if sample is None or sample >= n:
            coords = np.arange(n)
        else:
            coords = rng.choice(n, size=sample, replace=False)
        g_flat = ad[name].reshape(-1)
        for idx in coords:
            orig = flat[idx]
            flat[idx] = orig + h
            up = f().item()
            flat[idx] = orig - h
            down = f().item()
            flat[idx] = orig
            if not (np.isfinite(up) and np.isfinite(down)):
                raise ProbeError(f"non-finite loss probing {name}[{idx}]")
            fd = (up - down) / (2 * h)
            g = g_flat[idx]
            err = abs(g - fd) / max(1.0, abs(g), abs(fd))
            if err > worst:
                worst = err
    return worst
