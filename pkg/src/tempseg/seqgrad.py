"""Minimal reverse-mode automatic differentiation over sequence tensors.

A SeqTensor wraps a float64 array: T x C for per-frame sequences, arbitrary
shapes for network parameters, 0-d for scalar losses.  Operations executed
while a Tape is active are recorded; backward() replays the tape in reverse
and accumulates exact gradients into every requires_grad leaf.

Tapes are single-threaded; distinct tapes may run on distinct threads.
"""

from __future__ import annotations

import threading
from typing import Callable, Optional, Sequence

import numpy as np

from . import _kernels

_tls = threading.local()


def _tape_stack() -> list:
    stack = getattr(_tls, "stack", None)
    if stack is None:
        stack = []
        _tls.stack = stack
    return stack


def _active_tape() -> Optional["Tape"]:
    stack = _tape_stack()
    return stack[-1] if stack else None


class SeqTensor:
    """Float64 array plus gradient slot."""

    __slots__ = ("data", "requires_grad", "grad")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None

    @property
    def shape(self):
        return self.data.shape

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"SeqTensor(shape={self.data.shape}, requires_grad={self.requires_grad})"


class _Node:
    __slots__ = ("out", "inputs", "backward_fn")

    def __init__(self, out, inputs, backward_fn):
        self.out = out
        self.inputs = inputs
        self.backward_fn = backward_fn


class Tape:
    """Ordered record of operations; node inputs always precede the node."""

    def __init__(self):
        self.nodes: list[_Node] = []

    def __enter__(self) -> "Tape":
        _tape_stack().append(self)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        _tape_stack().pop()


def _record(out: SeqTensor, inputs: Sequence[SeqTensor],
            backward_fn: Callable[[np.ndarray], tuple]) -> SeqTensor:
    tape = _active_tape()
    if tape is not None and out.requires_grad:
        tape.nodes.append(_Node(out, tuple(inputs), backward_fn))
    return out


def conv1d_dilated(x: SeqTensor, weight: SeqTensor, bias: SeqTensor,
                   dilation: int = 1) -> SeqTensor:
    """Same-length dilated temporal convolution; zero padding outside [0, T)."""
    if weight.data.ndim != 3:
        raise ValueError(f"weight must be Cout x Cin x r, got shape {weight.data.shape}")
    cout, cin, r = weight.data.shape
    if r % 2 != 1:
        raise ValueError(f"kernel size must be odd, got {r}")
    if dilation < 1:
        raise ValueError(f"dilation must be >= 1, got {dilation}")
    if x.data.ndim != 2 or x.data.shape[1] != cin:
        raise ValueError(
            f"input channels {x.data.shape} incompatible with weight Cin={cin}")
    if bias.data.shape != (cout,):
        raise ValueError(f"bias must have shape ({cout},), got {bias.data.shape}")

    y = _kernels.conv1d_forward(x.data, weight.data, bias.data, dilation)
    out = SeqTensor(y, requires_grad=x.requires_grad or weight.requires_grad
                    or bias.requires_grad)
    xd, wd = x.data, weight.data

    def backward_fn(gy):
        gx, gw, gb = _kernels.conv1d_backward(xd, wd, gy, dilation)
        return gx, gw, gb

    return _record(out, (x, weight, bias), backward_fn)


def pointwise_conv(x: SeqTensor, weight: SeqTensor, bias: SeqTensor) -> SeqTensor:
    """Per-frame affine map: y = x @ W^T + b with W of shape Cout x Cin."""
    if weight.data.ndim != 2:
        raise ValueError(f"weight must be Cout x Cin, got shape {weight.data.shape}")
    cout, cin = weight.data.shape
    if x.data.ndim != 2 or x.data.shape[1] != cin:
        raise ValueError(
            f"input channels {x.data.shape} incompatible with weight Cin={cin}")
    if bias.data.shape != (cout,):
        raise ValueError(f"bias must have shape ({cout},), got {bias.data.shape}")

    out = SeqTensor(x.data @ weight.data.T + bias.data,
                    requires_grad=x.requires_grad or weight.requires_grad
                    or bias.requires_grad)
    xd, wd = x.data, weight.data

    def backward_fn(gy):
        return gy @ wd, gy.T @ xd, gy.sum(axis=0)

    return _record(out, (x, weight, bias), backward_fn)


def relu(x: SeqTensor) -> SeqTensor:
    """Elementwise max(0, x); subgradient at 0 is 0."""
    out = SeqTensor(np.maximum(x.data, 0.0), requires_grad=x.requires_grad)
    mask = x.data > 0.0

    def backward_fn(gy):
        return (gy * mask,)

    return _record(out, (x,), backward_fn)


def concat_channels(a: SeqTensor, b: SeqTensor) -> SeqTensor:
    """Channel-wise concatenation of two T x C tensors."""
    if a.data.shape[0] != b.data.shape[0]:
        raise ValueError(
            f"frame counts differ: {a.data.shape[0]} vs {b.data.shape[0]}")
    ca = a.data.shape[1]
    out = SeqTensor(np.concatenate([a.data, b.data], axis=1),
                    requires_grad=a.requires_grad or b.requires_grad)

    def backward_fn(gy):
        return gy[:, :ca], gy[:, ca:]

    return _record(out, (a, b), backward_fn)


def add(a: SeqTensor, b: SeqTensor) -> SeqTensor:
    """Elementwise sum of two same-shape tensors."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"shape mismatch: {a.data.shape} vs {b.data.shape}")
    out = SeqTensor(a.data + b.data,
                    requires_grad=a.requires_grad or b.requires_grad)

    def backward_fn(gy):
        return gy, gy

    return _record(out, (a, b), backward_fn)


def scale(x: SeqTensor, factor) -> SeqTensor:
    """Multiply by a non-differentiable constant (scalar or broadcastable array)."""
    factor = np.asarray(factor, dtype=np.float64)
    out = SeqTensor(x.data * factor, requires_grad=x.requires_grad)

    def backward_fn(gy):
        return (gy * factor,)

    return _record(out, (x,), backward_fn)


def mse(pred: SeqTensor, target: SeqTensor) -> SeqTensor:
    """Sum of squared differences over all entries (sum, not mean)."""
    if pred.data.shape != target.data.shape:
        raise ValueError(
            f"shape mismatch: {pred.data.shape} vs {target.data.shape}")
    diff = pred.data - target.data
    out = SeqTensor(np.sum(diff * diff),
                    requires_grad=pred.requires_grad or target.requires_grad)

    def backward_fn(gy):
        g = 2.0 * gy * diff
        return g, -g

    return _record(out, (pred, target), backward_fn)


def backward(tape: Tape, loss: SeqTensor) -> None:
    """Accumulate d(loss)/d(tensor) into .grad of every requires_grad leaf.

    Calling twice without zero_grad accumulates.  Leaves recorded on the tape
    but not reachable from the loss receive a zero gradient.
    """
    if loss.data.size != 1:
        raise ValueError(f"loss must be scalar, got shape {loss.data.shape}")
    flowing: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    produced = {id(node.out) for node in tape.nodes}
    for node in reversed(tape.nodes):
        gy = flowing.pop(id(node.out), None)
        if gy is None:
            continue
        grads = node.backward_fn(gy)
        for inp, g in zip(node.inputs, grads):
            if g is None or not inp.requires_grad:
                continue
            key = id(inp)
            if key in flowing:
                flowing[key] = flowing[key] + g
            else:
                flowing[key] = g
    seen: set[int] = set()
    for node in tape.nodes:
        for inp in node.inputs:
            key = id(inp)
            if not inp.requires_grad or key in produced or key in seen:
                continue
            seen.add(key)
            g = flowing.get(key)
            if g is None:
                g = np.zeros_like(inp.data)
            inp.grad = g if inp.grad is None else inp.grad + g
