"""Diagnostics: compression-rate bounds, empirical quantization loss, op counts."""

from __future__ import annotations

import csv
import dataclasses
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import classic, nn, ops
from .mnnet import build_graph, mnnet_detect
from .signal import (
    MimoConfig,
    NoiseModel,
    calibrate_noise,
    draw_channel,
    generate_dataset,
    transmit,
)
from .vq import MappingKind, VqDetector, batch_source, build_detector, make_mapping


@dataclass(frozen=True)
class CompressionReport:
    M: int
    N: int | None
    L: int
    sigma_H_sq: float
    rate_bound: float
    rate_bound_energy: float

    @property
    def distortion_bound(self) -> float:
        return 1.0 - self.rate_bound


def compression_bound(M: int, L: int, sigma_H_sq: float, N: int | None = None) -> CompressionReport:
    """Upper bounds on the MIMO-VQ compression rate for unit symbol energy.

    ``sigma_H_sq`` is the per-entry channel entropy parameter, supplied by
    the caller rather than estimated.
    """
    if M < 1 or sigma_H_sq < 0:
        raise ValueError("need M >= 1 and sigma_H_sq >= 0")
    alpha = math.log2(L)
    return CompressionReport(M, N, L, float(sigma_H_sq),
                             1.0 / (1.0 + M * sigma_H_sq / alpha),
                             1.0 / (1.0 + M * sigma_H_sq))


# -- quantization loss ----------------------------------------------------------------


@dataclass
class LossDecomposition:
    total: np.ndarray
    signal_part: np.ndarray
    csi_part: np.ndarray

    def max_identity_error(self) -> float:
        return float(np.max(np.abs(self.total - (self.signal_part + self.csi_part))))


@dataclass
class QuantizationLossReport:
    mean_loss: float
    decomposition: LossDecomposition | None
    assigned: np.ndarray


def signal_mask(N: int, M: int) -> np.ndarray:
    """Boolean mask of the received-signal entries in a realified ``[h_vec; y]``."""
    K = N * (M + 1)
    block = np.zeros(K, dtype=bool)
    block[N * M:] = True
    return np.concatenate([block, block])


def quantize(s, anchors, N: int | None = None, M: int | None = None):
    """Nearest-anchor assignment under squared Euclidean loss.

    Returns ``(assigned, LossDecomposition | None)``; the split into signal and
    CSI parts needs ``N`` and ``M``.
    """
    s = np.asarray(s, dtype=np.float64)
    anchors = np.asarray(anchors, dtype=np.float64)
    d = (np.sum(s**2, axis=1)[:, None] - 2 * s @ anchors.T + np.sum(anchors**2, axis=1)[None])
    assigned = np.argmin(d, axis=1)
    diff = s - anchors[assigned]
    total = np.sum(diff**2, axis=1)
    if N is None or M is None:
        return assigned, None
    mask = signal_mask(N, M)
    return assigned, LossDecomposition(total, np.sum(diff[:, mask] ** 2, axis=1),
                                       np.sum(diff[:, ~mask] ** 2, axis=1))


def network_anchors(net: nn.DenseNetwork) -> np.ndarray:
    """Incoming weight rows of the output neurons, one anchor per codeword."""
    return np.asarray(net.layers[-1].W.T, dtype=np.float64)


def last_hidden(net: nn.DenseNetwork, s) -> np.ndarray:
    a = np.asarray(s, dtype=net.dtype)
    for layer in net.layers[:-1]:
        a = np.maximum(a @ layer.W + layer.b, 0) if layer.activation == "relu" else a @ layer.W + layer.b
    return a


def fit_anchors(s, labels, J: int) -> np.ndarray:
    """Per-codeword centroids: the squared-loss optimal anchors for a labelled set."""
    s = np.asarray(s, dtype=np.float64)
    sums = np.zeros((J, s.shape[1]))
    np.add.at(sums, labels, s)
    counts = np.bincount(labels, minlength=J)[:, None]
    return np.where(counts > 0, sums / np.maximum(counts, 1), s.mean(axis=0))


def empirical_quantization_loss(detector: VqDetector, trials: int, noise: NoiseModel,
                                rng: np.random.Generator, *, anchors=None, channel_set=None,
                                representation: str = "input") -> QuantizationLossReport:
    """Monte Carlo average of the nearest-anchor loss, averaged uniformly over samples.

    ``representation="input"`` measures in the network input space, where the
    loss splits into signal and CSI parts; this needs input-space anchors
    (explicit, or a network without hidden layers).  ``"hidden"`` measures
    the last hidden representation against the output-layer weight rows.
    """
    if detector.mapping.kind is not MappingKind.NN:
        raise ValueError("anchors are only defined for the NN mapping")
    if detector.front_end != "none":
        raise ValueError("quantization loss is defined on the [h; y] input")
    cfg = detector.config
    data = generate_dataset(rng, cfg, noise, detector.mapping, trials, channel_set)
    if representation == "input":
        a = network_anchors(detector.net) if anchors is None else np.asarray(anchors)
        if a.shape[1] != data.s.shape[1]:
            raise ValueError("input-space loss needs anchors of the input width")
        assigned, dec = quantize(data.s, a, cfg.N, cfg.M)
        return QuantizationLossReport(float(dec.total.mean()), dec, assigned)
    if representation == "hidden":
        a = network_anchors(detector.net) if anchors is None else np.asarray(anchors)
        assigned, _ = quantize(last_hidden(detector.net, data.s), a)
        diff = last_hidden(detector.net, data.s) - a[assigned]
        return QuantizationLossReport(float(np.mean(np.sum(diff**2, axis=1))), None, assigned)
    raise ValueError(f"unknown representation {representation!r}")


# -- complexity accounting ------------------------------------------------------------

DETECTOR_KINDS = ("MF", "ZF", "LMMSE", "MLSD", "VQ", "MF-VQ", "ZF-VQ", "LMMSE-VQ", "MNNET")


@dataclass
class ComplexityReport:
    detector: str
    M: int
    N: int
    L: int
    detection_macs: int
    inversion_dims: tuple[int, ...]
    training_macs: tuple[int, ...] = ()
    batch_size: int = 0

    def row(self) -> dict:
        return {"detector": self.detector, "M": self.M, "N": self.N, "L": self.L,
                "detection_macs": self.detection_macs,
                "inversion_dims": " ".join(map(str, self.inversion_dims)),
                "training_macs": " ".join(map(str, self.training_macs)),
                "batch_size": self.batch_size}


def _train_iteration_macs(net: nn.DenseNetwork, source, b: int, seed: int) -> int:
    net = net.copy()
    state = nn.OptimizerState.init(net.params())
    rng = np.random.default_rng(seed)
    with ops.count_ops() as counter:
        X, Z = source(rng, b)
        grads, _ = nn.backward(net, X, Z, scale=1.0 / b)
        nn.adabound_step(state, net.params(), grads)
    return counter.macs


def count_operations(detector_kind: str, config: MimoConfig, *, hidden: Sequence[int] = nn.DESK_HIDDEN,
                     batch_size: int = 500, eb_n0_db: float = 10.0, seed: int = 0) -> ComplexityReport:
    """Instrumented MAC counts for one detection and, for learned detectors,
    one training iteration (one entry per super-layer for MNNet)."""
    kind = detector_kind.upper()
    if kind not in DETECTOR_KINDS:
        raise ValueError(f"unknown detector kind {detector_kind!r}")
    rng = np.random.default_rng(seed)
    noise = calibrate_noise(eb_n0_db, config)
    channel = draw_channel(rng, config)
    _, y = transmit(rng, config, channel, noise)
    H = channel.H
    training: tuple[int, ...] = ()

    if kind in ("MF", "ZF", "LMMSE"):
        def run():
            classic.demap_hard(classic.equalize(kind, y, H, noise.noise_variance), config.constellation)
    elif kind == "MLSD":
        def run():
            classic.mlsd_detect(y, H, config.constellation)
    elif kind == "MNNET":
        graph = build_graph(config, hidden, seed=seed)
        graph.trained = True

        def run():
            mnnet_detect(graph, y, H)
        training = tuple(
            _train_iteration_macs(net, batch_source(graph.layer_config(m), make_mapping("NN", graph.layer_config(m)),
                                                    eb_n0_db), batch_size, seed)
            for m, net in enumerate(graph.nets, start=1))
    else:
        front = "none" if kind == "VQ" else kind.split("-")[0]
        det = build_detector(config, "NN", front, hidden, rng=np.random.default_rng(seed))

        def run():
            det.detect(y, H, noise.noise_variance)
        training = (_train_iteration_macs(det.net, batch_source(config, det.mapping, eb_n0_db, front),
                                          batch_size, seed),)

    with ops.count_ops() as counter:
        run()
    return ComplexityReport(kind, config.M, config.N, config.L, counter.macs, tuple(counter.inversions),
                            training, batch_size if training else 0)


def write_csv(path, rows: Sequence) -> None:
    """One row per report; accepts ComplexityReport, CompressionReport or dicts."""
    dicts = []
    for r in rows:
        if isinstance(r, ComplexityReport):
            dicts.append(r.row())
        elif isinstance(r, CompressionReport):
            d = dataclasses.asdict(r)
            d["distortion_bound"] = r.distortion_bound
            dicts.append(d)
        else:
            dicts.append(dict(r))
    if not dicts:
        raise ValueError("nothing to write")
    with open(path, "w", newline="") as f:
        w = csv.DictWriter(f, fieldnames=list(dicts[0]))
        w.writeheader()
        w.writerows(dicts)

