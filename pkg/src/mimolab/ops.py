"""Instrumented linear-algebra primitives.

Detectors and the dense network route their heavy arithmetic through
:func:`matmul` and :func:`solve` so that :class:`OpCounter` can record the
exact number of multiply-accumulate operations a run performs.
"""

from __future__ import annotations

import contextvars
from contextlib import contextmanager
from dataclasses import dataclass, field

import numpy as np

_active: contextvars.ContextVar["OpCounter | None"] = contextvars.ContextVar(
    "mimolab_op_counter", default=None
)


@dataclass
class OpCounter:
    macs: int = 0
    inversions: list[int] = field(default_factory=list)

    def reset(self) -> None:
        self.macs = 0
        self.inversions.clear()


@contextmanager
def count_ops():
    """Collect MAC counts for everything executed inside the block."""
    counter = OpCounter()
    token = _active.set(counter)
    try:
        yield counter
    finally:
        _active.reset(token)


def add_macs(n: int) -> None:
    counter = _active.get()
    if counter is not None:
        counter.macs += int(n)


def matmul(a, b):
    out = np.matmul(a, b)
    counter = _active.get()
    if counter is not None:
        counter.macs += int(out.size) * int(np.shape(a)[-1])
    return out


def solve(a, b):
    """Batched linear solve; counted as one n x n inversion plus n^2 per rhs."""
    out = np.linalg.solve(a, b)
    counter = _active.get()
    if counter is not None:
        n = a.shape[-1]
        batch = int(np.prod(a.shape[:-2], dtype=np.int64))
        rhs = int(b.shape[-1]) if b.ndim == a.ndim else 1
        counter.macs += batch * (n**3 + n * n * rhs)
        counter.inversions.extend([n] * batch)
    return out
