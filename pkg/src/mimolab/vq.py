"""Codebook mappings (NN, CLNN, CLkNN) and the ANN-assisted VQ detector."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import nn
from .classic import equalize
from .signal import (
    Constellation,
    Dataset,
    MimoConfig,
    Scheme,
    calibrate_noise,
    codeword_index,
    codeword_symbols,
    complex_to_real,
    csi_input,
    generate_dataset,
)

FRONT_ENDS = ("none", "MF", "ZF", "LMMSE")


class UntrainedDetectorError(RuntimeError):
    pass


class MappingKind(str, enum.Enum):
    NN = "NN"
    CLNN = "CLNN"
    CLKNN = "CLkNN"

    @classmethod
    def parse(cls, value) -> "MappingKind":
        if isinstance(value, cls):
            return value
        for kind in cls:
            if kind.value.lower() == str(value).lower():
                return kind
        raise ValueError(f"unknown codebook mapping {value!r}")


@dataclass(frozen=True, eq=False)
class CodebookMapping:
    kind: MappingKind
    M: int
    constellation: Constellation

    @property
    def L(self) -> int:
        return self.constellation.order

    @property
    def alpha(self) -> int:
        return self.constellation.bits_per_symbol

    @property
    def target_dim(self) -> int:
        if self.kind is MappingKind.NN:
            return self.L**self.M
        if self.kind is MappingKind.CLNN:
            return self.M * self.L
        return self.M * self.alpha

    @property
    def head(self) -> str:
        return {MappingKind.NN: "softmax", MappingKind.CLNN: "cluster_softmax",
                MappingKind.CLKNN: "sigmoid"}[self.kind]

    @property
    def clusters(self) -> int:
        return self.M if self.kind is MappingKind.CLNN else 1

    def encode(self, x_indices) -> np.ndarray:
        x = np.asarray(x_indices, dtype=np.int64)
        if x.shape[-1] != self.M:
            raise ValueError(f"expected {self.M} symbol indices, got {x.shape[-1]}")
        if np.any(x < 0) or np.any(x >= self.L):
            raise ValueError(f"symbol index out of range [0, {self.L})")
        if self.kind is MappingKind.NN:
            j = codeword_index(x, self.L)
            z = np.zeros(j.shape + (self.L**self.M,))
            np.put_along_axis(z, j[..., None], 1.0, axis=-1)
            return z
        if self.kind is MappingKind.CLNN:
            return np.eye(self.L)[x].reshape(x.shape[:-1] + (self.M * self.L,))
        bits = self.constellation.bits_of(x).astype(np.float64)
        return bits.reshape(x.shape[:-1] + (self.M * self.alpha,))

    def decode(self, z_hat) -> np.ndarray:
        """Hard decisions from network output; ties go to the smaller index."""
        z = np.asarray(z_hat)
        lead = z.shape[:-1]
        if self.kind is MappingKind.NN:
            return codeword_symbols(np.argmax(z, axis=-1), self.L, self.M)
        if self.kind is MappingKind.CLNN:
            return np.argmax(z.reshape(lead + (self.M, self.L)), axis=-1)
        bits = (z.reshape(lead + (self.M, self.alpha)) > 0.5).astype(np.int64)
        labels = bits @ (1 << np.arange(self.alpha - 1, -1, -1))
        return self.constellation.label_to_index[labels]


def make_mapping(kind, config: MimoConfig) -> CodebookMapping:
    return CodebookMapping(MappingKind.parse(kind), config.M, config.constellation)


@dataclass
class VqDetector:
    net: nn.DenseNetwork
    mapping: CodebookMapping
    front_end: str
    config: MimoConfig
    loss_trace: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.front_end not in FRONT_ENDS:
            raise ValueError(f"front end must be one of {FRONT_ENDS}")
        if self.net.input_dim != input_dim(self.config, self.front_end):
            raise ValueError("network input width does not match the front end")
        if self.net.output_dim != self.mapping.target_dim:
            raise ValueError("network output width does not match the mapping")

    def features(self, y, H, noise_variance: float = 0.0) -> np.ndarray:
        if self.front_end == "none":
            return csi_input(H, y)
        return complex_to_real(equalize(self.front_end, y, H, noise_variance))

    def detect(self, y, H, noise_variance: float = 0.0) -> np.ndarray:
        return detect(self, y, H, noise_variance)


def input_dim(config: MimoConfig, front_end: str = "none") -> int:
    return 2 * config.N * (config.M + 1) if front_end == "none" else 2 * config.M


def build_detector(config: MimoConfig, mapping, front_end: str = "none",
                   hidden: Sequence[int] = nn.DESK_HIDDEN, *, rng=None, dtype=np.float32) -> VqDetector:
    """Untrained detector with the default layout; hidden widths are configurable."""
    if not isinstance(mapping, CodebookMapping):
        mapping = make_mapping(mapping, config)
    dims = [input_dim(config, front_end), *hidden, mapping.target_dim]
    net = nn.DenseNetwork.build(dims, mapping.head, clusters=mapping.clusters, rng=rng, dtype=dtype)
    return VqDetector(net, mapping, front_end, config)


def detect(detector: VqDetector, y, H, noise_variance: float = 0.0) -> np.ndarray:
    if detector.net.is_zero():
        raise UntrainedDetectorError("detector network has all-zero parameters")
    z_hat = detector.net.forward(detector.features(y, H, noise_variance))
    return detector.mapping.decode(z_hat)


def batch_source(config: MimoConfig, mapping: CodebookMapping, eb_n0_db: float, front_end: str = "none",
                 channel_set=None, slots_per_channel: int = 1):
    """Callable producing fresh ``(s, z)`` training batches."""
    noise = calibrate_noise(eb_n0_db, config)
    fe = None
    if front_end != "none":
        def fe(y, H, var):
            return equalize(front_end, y, H, var)

    def source(rng: np.random.Generator, b: int):
        data: Dataset = generate_dataset(rng, config, noise, mapping, b, channel_set, front_end=fe,
                                         slots_per_channel=slots_per_channel)
        return data.s, data.z

    return source


def train_vq_detector(config: MimoConfig, mapping, front_end: str = "none",
                      training_config: nn.TrainingConfig | None = None, channel_set=None, *,
                      hidden: Sequence[int] = nn.DESK_HIDDEN, slots_per_channel: int = 1,
                      dtype=np.float32) -> VqDetector:
    """Train a detector on freshly synthesized batches at the training Eb/N0.

    The returned detector carries the per-iteration ``loss_trace``.
    """
    tc = training_config or nn.TrainingConfig()
    init_rng = np.random.default_rng([tc.seed, 0x5EED])
    det = build_detector(config, mapping, front_end, hidden, rng=init_rng, dtype=dtype)
    source = batch_source(config, det.mapping, tc.train_eb_n0_db, front_end, channel_set, slots_per_channel)
    det.loss_trace = nn.train(det.net, source, tc).loss_trace
    return det


# -- bundle files ---------------------------------------------------------------------

BUNDLE_MAGIC = "mimolab-detector"


def write_detector(f, det: VqDetector) -> None:
    c = det.config
    f.write(f"{BUNDLE_MAGIC} 1\n")
    f.write(f"system M {c.M} N {c.N} scheme {c.constellation.scheme.value}\n")
    f.write(f"mapping {det.mapping.kind.value}\n")
    f.write(f"front_end {det.front_end}\n")
    nn.write_network(f, det.net)


def read_detector(lines) -> VqDetector:
    header = next(lines).split()
    if header[:1] != [BUNDLE_MAGIC]:
        raise ValueError("not a detector bundle")
    sysline = next(lines).split()
    config = MimoConfig.make(int(sysline[2]), int(sysline[4]), Scheme.parse(sysline[6]))
    mapping = make_mapping(next(lines).split()[1], config)
    front_end = next(lines).split()[1]
    net = nn.read_network(lines)
    return VqDetector(net, mapping, front_end, config)


def save_detector(path, det: VqDetector) -> None:
    with open(path, "w") as f:
        write_detector(f, det)


def load_detector(path) -> VqDetector:
    with open(path) as f:
        return read_detector(iter(f))
