"""Linear equalizers, exhaustive ML detection, hard demapping and the PIC step."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import ops
from .signal import Constellation

MLSD_MAX_HYPOTHESES = 2**24
# complex entries held at once by the enumeration tree
_MLSD_CHUNK_ELEMENTS = 2**22


class DegenerateChannelError(ValueError):
    pass


class SingularChannelError(np.linalg.LinAlgError):
    pass


class MlsdBudgetError(ValueError):
    pass


@dataclass(frozen=True)
class EqualizedSignal:
    x_soft: np.ndarray
    equalizer: str


def _hermitian(H):
    return np.conj(np.swapaxes(H, -1, -2))


def _matched(y, H):
    return ops.matmul(_hermitian(H), np.asarray(y)[..., None])[..., 0]


def mf_equalize(y, H) -> EqualizedSignal:
    """Matched filter with per-antenna normalization, ``D^-1 H^H y``."""
    H = np.asarray(H)
    col_energy = np.sum(np.abs(H) ** 2, axis=-2)
    ops.add_macs(col_energy.size * H.shape[-2])
    if np.any(col_energy == 0):
        raise DegenerateChannelError("channel has a zero-norm column")
    return EqualizedSignal(_matched(y, H) / col_energy, "MF")


def zf_equalize(y, H) -> EqualizedSignal:
    H = np.asarray(H)
    if np.any(np.linalg.matrix_rank(H) < H.shape[-1]):
        raise SingularChannelError("channel matrix is not full column rank")
    gram = ops.matmul(_hermitian(H), H)
    return EqualizedSignal(ops.solve(gram, _matched(y, H)[..., None])[..., 0], "ZF")


def lmmse_equalize(y, H, noise_variance: float) -> EqualizedSignal:
    H = np.asarray(H)
    if noise_variance < 0:
        raise ValueError("noise variance must be nonnegative")
    M = H.shape[-1]
    gram = ops.matmul(_hermitian(H), H) + noise_variance * np.eye(M)
    return EqualizedSignal(ops.solve(gram, _matched(y, H)[..., None])[..., 0], "LMMSE")


def equalize(kind: str, y, H, noise_variance: float = 0.0) -> np.ndarray:
    """Dispatch by name; returns the raw soft estimates."""
    kind = kind.upper()
    if kind == "MF":
        return mf_equalize(y, H).x_soft
    if kind == "ZF":
        return zf_equalize(y, H).x_soft
    if kind == "LMMSE":
        return lmmse_equalize(y, H, noise_variance).x_soft
    raise ValueError(f"unknown equalizer {kind!r}")


def demap_hard(x_soft, constellation: Constellation) -> np.ndarray:
    """Nearest constellation point per entry; ties go to the smaller index."""
    d = np.abs(np.asarray(x_soft)[..., None] - constellation.points) ** 2
    return np.argmin(d, axis=-1)


def _mlsd_chunk(y, H, points):
    """Expand partial sums ``H[:, :k] x[:k]`` one antenna at a time."""
    B, N, M = H.shape
    L = len(points)
    partial = np.zeros((B, 1, N), dtype=np.complex128)
    for m in range(M):
        contrib = points[None, :, None] * H[:, None, :, m]  # (B, L, N)
        partial = (partial[:, :, None, :] + contrib[:, None, :, :]).reshape(B, -1, N)
        ops.add_macs(partial.size)
    resid = y[:, None, :] - partial
    metric = np.sum(resid.real**2 + resid.imag**2, axis=-1)
    ops.add_macs(metric.size * N)
    return np.argmin(metric, axis=-1)


def mlsd_detect(y, H, constellation: Constellation, M: int | None = None) -> np.ndarray:
    """Exhaustive search for ``argmin ||y - H x||^2`` over all L^M vectors.

    Ties resolve to the smallest codeword index (antenna 0 most significant).
    """
    y = np.asarray(y)
    H = np.asarray(H)
    M = H.shape[-1] if M is None else M
    L = constellation.order
    J = L**M
    if J > MLSD_MAX_HYPOTHESES:
        raise MlsdBudgetError(f"{J} hypotheses exceed the budget of {MLSD_MAX_HYPOTHESES}")
    lead = y.shape[:-1]
    N = H.shape[-2]
    yb = y.reshape(-1, N)
    Hb = np.broadcast_to(H, lead + (N, M)).reshape(-1, N, M)
    step = max(1, _MLSD_CHUNK_ELEMENTS // (J * N))
    j = np.concatenate(
        [_mlsd_chunk(yb[i : i + step], Hb[i : i + step], constellation.points)
         for i in range(0, len(yb), step)]
    )
    weights = L ** np.arange(M - 1, -1, -1, dtype=np.int64)
    return ((j[:, None] // weights) % L).reshape(lead + (M,))


def pic_cancel(y, H, m: int, x_hat_m) -> np.ndarray:
    """Subtract symbol ``m``'s contribution: ``y - h_m x_hat_m``."""
    H = np.asarray(H)
    if not 0 <= m < H.shape[-1]:
        raise IndexError(f"antenna {m} out of range for M={H.shape[-1]}")
    x_hat_m = np.asarray(x_hat_m)
    ops.add_macs(H[..., 0].size)
    return np.asarray(y) - H[..., :, m] * x_hat_m[..., None]


def drop_column(H, m: int) -> np.ndarray:
    return np.delete(np.asarray(H), m, axis=-1)
