"""Canned, scaled-down versions of the BER figures.

Every recipe returns a list of :class:`ExperimentSpec` sharing one seed, so
the curves in a figure are noise-paired.  ``scale`` picks the budgets:

========  ==========  ==============  ==========  ============
scale     iterations  min bit errors  max trials  hidden
========  ==========  ==============  ==========  ============
quick     40          5               2 000       32/16
desk      5 000       200             10^6        256/128/64
full      50 000      200             10^7        1024/512/256
========  ==========  ==============  ==========  ============
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import nn
from .harness import ExperimentSpec

FIGURES = ("fig4", "fig5", "fig6", "fig7", "fig8", "fig9", "fig10", "fig11")


@dataclass(frozen=True)
class Scale:
    iterations: int
    min_bit_errors: int
    max_trials: int
    chunk_size: int
    hidden: tuple[int, ...]
    snr_step: float


SCALES = {
    "quick": Scale(40, 5, 2_000, 1_000, (32, 16), 4.0),
    "desk": Scale(5_000, 200, 10**6, 10_000, nn.DESK_HIDDEN, 2.0),
    "full": Scale(50_000, 200, 10**7, 10_000, nn.WIDE_HIDDEN, 1.0),
}


def _grid(lo: float, hi: float, step: float) -> list[float]:
    return [float(v) for v in np.arange(lo, hi + 1e-9, step)]


class _Builder:
    def __init__(self, scale: Scale, seed: int):
        self.scale = scale
        self.seed = seed
        self.specs: list[ExperimentSpec] = []

    def add(self, name, detector, M, N, scheme, grid, **params):
        s = self.scale
        channel_set_size = params.pop("channel_set_size", None)
        if detector in ("VQ", "MNNET"):
            params.setdefault("iterations", s.iterations)
            params.setdefault("hidden", list(s.hidden))
        self.specs.append(ExperimentSpec(
            name=name, detector=detector, M=M, N=N, scheme=scheme, snr_db=grid, seed=self.seed,
            min_bit_errors=s.min_bit_errors, max_trials=s.max_trials, chunk_size=s.chunk_size,
            channel_set_size=channel_set_size, params=params))


def fig4(scale: Scale, seed: int = 0) -> list[ExperimentSpec]:
    """Codebook mappings NN / CLNN / CLkNN, 2x4 QPSK (stands in for 4x8)."""
    b = _Builder(scale, seed)
    g = _grid(0, 12, scale.snr_step)
    for mapping in ("NN", "CLNN", "CLkNN"):
        b.add(f"vq_{mapping.lower()}", "VQ", 2, 4, "QPSK", g, mapping=mapping, train_snr=5.0)
    b.add("mlsd", "MLSD", 2, 4, "QPSK", g)
    return b.specs


def fig5(scale: Scale, seed: int = 0) -> list[ExperimentSpec]:
    """Channel-set sizes J, 2J, 4J and fresh draws, 2x2 QPSK (J = 16)."""
    b = _Builder(scale, seed)
    g = _grid(4, 18, scale.snr_step)
    for size in (16, 32, 64):
        b.add(f"vq_set{size}", "VQ", 2, 2, "QPSK", g, channel_set_size=size, train_snr=8.0,
              iterations=4 * scale.iterations)
        b.add(f"mlsd_set{size}", "MLSD", 2, 2, "QPSK", g, channel_set_size=size)
    b.add("vq_fresh", "VQ", 2, 2, "QPSK", g, train_snr=8.0, iterations=4 * scale.iterations)
    b.add("mlsd_fresh", "MLSD", 2, 2, "QPSK", g)
    return b.specs


def fig6(scale: Scale, seed: int = 0) -> list[ExperimentSpec]:
    """Channel-equalized VQ versus the plain equalizers, 4x8 BPSK."""
    b = _Builder(scale, seed)
    g = _grid(0, 12, scale.snr_step)
    for eq in ("MF", "ZF", "LMMSE"):
        b.add(eq.lower(), eq, 4, 8, "BPSK", g)
        b.add(f"{eq.lower()}_vq", "VQ", 4, 8, "BPSK", g, front_end=eq, train_snr=10.0, slots_per_channel=3)
    return b.specs


def fig7(scale: Scale, seed: int = 0) -> list[ExperimentSpec]:
    """MF-VQ against MF for 2x8 and 2x16, BPSK and QPSK."""
    b = _Builder(scale, seed)
    g = _grid(0, 12, scale.snr_step)
    for N in (8, 16):
        for scheme in ("BPSK", "QPSK"):
            tag = f"2x{N}_{scheme.lower()}"
            b.add(f"mf_{tag}", "MF", 2, N, scheme, g)
            b.add(f"mf_vq_{tag}", "VQ", 2, N, scheme, g, front_end="MF", train_snr=2.0, slots_per_channel=3)
    return b.specs


def fig8(scale: Scale, seed: int = 0) -> list[ExperimentSpec]:
    """Flat MIMO-VQ across modulations, 2x8."""
    b = _Builder(scale, seed)
    g = _grid(-4, 10, scale.snr_step)
    for scheme, train_snr in (("BPSK", 5.0), ("QPSK", 5.0), ("PSK8", 8.0), ("QAM16", 8.0)):
        b.add(f"vq_{scheme.lower()}", "VQ", 2, 8, scheme, g, train_snr=train_snr)
        b.add(f"mlsd_{scheme.lower()}", "MLSD", 2, 8, scheme, g)
    return b.specs


def _mnnet_figure(scale: Scale, seed: int, M: int, N: int, schemes, with_zf: bool, grid):
    b = _Builder(scale, seed)
    for scheme in schemes:
        tag = f"{M}x{N}_{scheme.lower()}"
        b.add(f"mnnet_{tag}", "MNNET", M, N, scheme, grid, train_snr=5.0)
        b.add(f"vq_{tag}", "VQ", M, N, scheme, grid, train_snr=5.0, iterations=M * scale.iterations)
        b.add(f"mlsd_{tag}", "MLSD", M, N, scheme, grid)
        if with_zf:
            b.add(f"zf_{tag}", "ZF", M, N, scheme, grid)
    return b.specs


def fig9(scale: Scale, seed: int = 0) -> list[ExperimentSpec]:
    """MNNet, flat VQ, MLSD and ZF in 4x8."""
    return _mnnet_figure(scale, seed, 4, 8, ("BPSK", "QPSK"), True, _grid(0, 12, scale.snr_step))


def fig10(scale: Scale, seed: int = 0) -> list[ExperimentSpec]:
    """Critically loaded 4x4."""
    return _mnnet_figure(scale, seed, 4, 4, ("BPSK", "QPSK"), True, _grid(0, 16, scale.snr_step))


def fig11(scale: Scale, seed: int = 0) -> list[ExperimentSpec]:
    """Overloaded 8x4, BPSK only below full scale (8x4 QPSK needs 4^8 output neurons)."""
    schemes = ("BPSK", "QPSK") if scale is SCALES["full"] else ("BPSK",)
    return _mnnet_figure(scale, seed, 8, 4, schemes, False, _grid(0, 20, scale.snr_step))


def recipe(figure: str, scale: str = "desk", seed: int = 0) -> list[ExperimentSpec]:
    figure = figure.lower()
    if figure not in FIGURES:
        raise ValueError(f"unknown figure {figure!r}; choose from {FIGURES}")
    if scale not in SCALES:
        raise ValueError(f"unknown scale {scale!r}; choose from {tuple(SCALES)}")
    return globals()[figure](SCALES[scale], seed)
