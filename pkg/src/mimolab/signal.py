"""Constellations, Rayleigh MIMO channel, noise calibration and training data.

Everything here is batched: a leading ``(...)`` shape on channels and
signals is carried through unchanged.  Randomness always comes from an
explicit :class:`numpy.random.Generator`.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import ops


class Scheme(str, enum.Enum):
    BPSK = "BPSK"
    QPSK = "QPSK"
    PSK8 = "PSK8"
    QAM16 = "QAM16"

    @classmethod
    def parse(cls, value: "str | Scheme") -> "Scheme":
        if isinstance(value, cls):
            return value
        key = str(value).upper().replace("-", "")
        aliases = {"8PSK": "PSK8", "16QAM": "QAM16"}
        return cls(aliases.get(key, key))


def gray(k):
    return k ^ (k >> 1)


@dataclass(frozen=True, eq=False)
class Constellation:
    """Unit-energy symbol alphabet.

    ``points[i]`` is the symbol with index ``i``; ``labels[i]`` is its Gray
    bit label as an integer, most significant bit first in :attr:`bits`.
    """

    scheme: Scheme
    points: np.ndarray
    labels: np.ndarray

    @property
    def order(self) -> int:
        return len(self.points)

    @property
    def bits_per_symbol(self) -> int:
        return int(round(math.log2(self.order)))

    @property
    def bits(self) -> np.ndarray:
        """(L, alpha) array of 0/1 bit patterns, MSB first."""
        alpha = self.bits_per_symbol
        shifts = np.arange(alpha - 1, -1, -1)
        return (self.labels[:, None] >> shifts) & 1

    @property
    def label_to_index(self) -> np.ndarray:
        inv = np.empty(self.order, dtype=np.int64)
        inv[self.labels] = np.arange(self.order)
        return inv

    def bits_of(self, indices) -> np.ndarray:
        return self.bits[np.asarray(indices)]

    def modulate(self, indices) -> np.ndarray:
        return self.points[np.asarray(indices)]


def build_constellation(scheme) -> Constellation:
    scheme = Scheme.parse(scheme)
    if scheme is Scheme.QAM16:
        levels = np.array([-3.0, -1.0, 1.0, 3.0])
        a, b = np.divmod(np.arange(16), 4)
        points = (levels[a] + 1j * levels[b]) / math.sqrt(10.0)
        labels = (gray(a) << 2) | gray(b)
    else:
        order = {Scheme.BPSK: 2, Scheme.QPSK: 4, Scheme.PSK8: 8}[scheme]
        k = np.arange(order)
        offset = math.pi / 4 if order == 4 else 0.0
        points = np.exp(1j * (2 * math.pi * k / order + offset))
        # exact zeros so BPSK is {+1, -1}
        re, im = points.real, points.imag
        points = np.where(np.abs(re) < 1e-15, 0.0, re) + 1j * np.where(np.abs(im) < 1e-15, 0.0, im)
        if order == 4:
            points = (np.sign(re) + 1j * np.sign(im)) / math.sqrt(2.0)
        labels = gray(k)
    return Constellation(scheme, points.astype(np.complex128), labels.astype(np.int64))


@dataclass(frozen=True)
class MimoConfig:
    M: int
    N: int
    constellation: Constellation

    def __post_init__(self):
        if self.M < 1 or self.N < 1:
            raise ValueError(f"need M >= 1 and N >= 1, got M={self.M}, N={self.N}")

    @classmethod
    def make(cls, M: int, N: int, scheme="QPSK") -> "MimoConfig":
        return cls(int(M), int(N), build_constellation(scheme))

    @property
    def L(self) -> int:
        return self.constellation.order

    @property
    def J(self) -> int:
        return self.L**self.M

    @property
    def bits_per_use(self) -> int:
        return self.M * self.constellation.bits_per_symbol

    def with_antennas(self, M: int) -> "MimoConfig":
        return MimoConfig(M, self.N, self.constellation)


# -- complex <-> real ---------------------------------------------------------


def complex_to_real(v) -> np.ndarray:
    """Stack real then imaginary parts along the last axis."""
    v = np.asarray(v)
    return np.concatenate([v.real, v.imag], axis=-1)


def real_to_complex(r) -> np.ndarray:
    r = np.asarray(r)
    k = r.shape[-1] // 2
    return r[..., :k] + 1j * r[..., k:]


def real_channel(H) -> np.ndarray:
    """2N x 2M real equivalent [[Re, -Im], [Im, Re]]."""
    H = np.asarray(H)
    top = np.concatenate([H.real, -H.imag], axis=-1)
    bottom = np.concatenate([H.imag, H.real], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def vec_channel(H) -> np.ndarray:
    """Column-major vectorization of the trailing N x M matrix."""
    H = np.asarray(H)
    return np.swapaxes(H, -1, -2).reshape(*H.shape[:-2], H.shape[-1] * H.shape[-2])


def unvec_channel(h_vec, N: int, M: int) -> np.ndarray:
    h_vec = np.asarray(h_vec)
    return np.swapaxes(h_vec.reshape(*h_vec.shape[:-1], M, N), -1, -2)


def csi_input(H, y) -> np.ndarray:
    """Realified ``[h_vec; y]`` network input of length 2N(M+1)."""
    return complex_to_real(np.concatenate([vec_channel(H), np.asarray(y)], axis=-1))


def split_csi_input(s, N: int, M: int):
    """Inverse of :func:`csi_input`; returns ``(H, y)``."""
    c = real_to_complex(s)
    return unvec_channel(c[..., : N * M], N, M), c[..., N * M :]


@dataclass(frozen=True, eq=False)
class ChannelRealization:
    H: np.ndarray

    @property
    def h_vec(self) -> np.ndarray:
        return vec_channel(self.H)

    @property
    def H_real(self) -> np.ndarray:
        return real_channel(self.H)

    def __len__(self) -> int:
        return 1 if self.H.ndim == 2 else self.H.shape[0]


def circular_gaussian(rng: np.random.Generator, shape) -> np.ndarray:
    """CN(0, 1) samples: real and imaginary parts each N(0, 1/2)."""
    re = rng.standard_normal(shape)
    im = rng.standard_normal(shape)
    return (re + 1j * im) * math.sqrt(0.5)


def draw_channel(rng: np.random.Generator, config: MimoConfig, size=None) -> ChannelRealization:
    """I.i.d. unit-variance Rayleigh entries; ``size`` adds leading batch dims."""
    lead = () if size is None else tuple(np.atleast_1d(size))
    return ChannelRealization(circular_gaussian(rng, lead + (config.N, config.M)))


@dataclass(frozen=True)
class NoiseModel:
    eb_n0_db: float
    noise_variance: float

    @property
    def std_per_dim(self) -> float:
        return math.sqrt(self.noise_variance / 2.0)


def calibrate_noise(eb_n0_db: float, config: MimoConfig) -> NoiseModel:
    """Per-complex-dimension noise variance for a given Eb/N0 per receive antenna.

    Each receive antenna collects energy M per channel use (unit symbol energy,
    unit channel variance) carrying M log2(L) bits, so Eb = 1/log2(L).
    """
    alpha = config.constellation.bits_per_symbol
    if math.isinf(eb_n0_db) and eb_n0_db > 0:
        return NoiseModel(float(eb_n0_db), 0.0)
    return NoiseModel(float(eb_n0_db), 1.0 / (alpha * 10.0 ** (eb_n0_db / 10.0)))


def draw_symbols(rng: np.random.Generator, config: MimoConfig, size=None) -> np.ndarray:
    lead = () if size is None else tuple(np.atleast_1d(size))
    return rng.integers(0, config.L, size=lead + (config.M,))


def received(H, x_points, noise: NoiseModel, unit_noise) -> np.ndarray:
    """``y = H x + v`` with ``v = sqrt(sigma_v^2) * unit_noise``."""
    y = ops.matmul(H, x_points[..., None])[..., 0]
    if noise.noise_variance > 0:
        y = y + math.sqrt(noise.noise_variance) * unit_noise
    return y


def transmit(rng: np.random.Generator, config: MimoConfig, channel: ChannelRealization,
             noise: NoiseModel):
    """Draw uniform symbols and pass them through ``channel``.

    Returns ``(x_indices, y)``; batch shape follows ``channel.H``.
    """
    lead = channel.H.shape[:-2]
    x = draw_symbols(rng, config, lead if lead else None)
    w = circular_gaussian(rng, lead + (config.N,))
    return x, received(channel.H, config.constellation.modulate(x), noise, w)


# -- codeword indexing ------------------------------------------------------------


def codeword_index(x_indices, L: int) -> np.ndarray:
    """Mixed-radix index with antenna 0 as the most significant digit."""
    x = np.asarray(x_indices, dtype=np.int64)
    M = x.shape[-1]
    weights = L ** np.arange(M - 1, -1, -1, dtype=np.int64)
    return x @ weights


def codeword_symbols(j, L: int, M: int) -> np.ndarray:
    j = np.asarray(j, dtype=np.int64)
    weights = L ** np.arange(M - 1, -1, -1, dtype=np.int64)
    return (j[..., None] // weights) % L


def all_codewords(L: int, M: int) -> np.ndarray:
    """(L^M, M) symbol-index table in codeword order."""
    return codeword_symbols(np.arange(L**M), L, M)


# -- supervised datasets ----------------------------------------------------------


@dataclass(frozen=True)
class TrainingSample:
    s: np.ndarray
    z: np.ndarray
    label: int


@dataclass
class Dataset:
    """Column-stacked training samples plus the ground truth they came from."""

    s: np.ndarray
    z: np.ndarray
    labels: np.ndarray
    x: np.ndarray
    H: np.ndarray

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, i) -> TrainingSample:
        return TrainingSample(self.s[i], self.z[i], int(self.labels[i]))


def _pick_channels(rng, config, count, channel_set, slots_per_channel):
    draws = -(-count // slots_per_channel)
    if channel_set is None:
        H = draw_channel(rng, config, draws).H
    else:
        pool = channel_set.H if isinstance(channel_set, ChannelRealization) else np.asarray(channel_set)
        if pool.ndim == 2:
            pool = pool[None]
        if len(pool) == 0:
            raise ValueError("channel_set is empty")
        H = pool[rng.integers(0, len(pool), size=draws)]
    if slots_per_channel > 1:
        H = np.repeat(H, slots_per_channel, axis=0)
    return H[:count]


def generate_dataset(rng: np.random.Generator, config: MimoConfig, noise: NoiseModel, mapping,
                     count: int, channel_set=None, *, front_end=None,
                     slots_per_channel: int = 1) -> Dataset:
    """Draw ``count`` labelled samples ``(s, z)``.

    ``mapping`` only needs ``encode(x_indices)``.  With ``front_end`` set to
    an equalizer callable ``f(y, H, sigma_v^2)`` the input is the realified
    equalizer output instead of ``[h_vec; y]``.  ``slots_per_channel`` > 1
    reuses each channel draw for that many consecutive samples.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    H = _pick_channels(rng, config, count, channel_set, slots_per_channel)
    x = draw_symbols(rng, config, count)
    w = circular_gaussian(rng, (count, config.N))
    y = received(H, config.constellation.modulate(x), noise, w)
    if front_end is None:
        s = csi_input(H, y)
    else:
        s = complex_to_real(front_end(y, H, noise.noise_variance))
    return Dataset(s, mapping.encode(x), codeword_index(x, config.L), x, H)


def export_dataset(path, dataset: Dataset) -> None:
    """One sample per line: label, s entries, z entries."""
    with open(Path(path), "w") as f:
        for s, z, j in zip(dataset.s, dataset.z, dataset.labels):
            f.write(" ".join([str(int(j))] + [f"{v:.17g}" for v in s] + [f"{v:.17g}" for v in z]))
            f.write("\n")


def load_dataset(path, input_dim: int):
    """Read an exported dataset back as ``(labels, s, z)`` arrays."""
    rows = np.loadtxt(Path(path), ndmin=2)
    return rows[:, 0].astype(np.int64), rows[:, 1 : 1 + input_dim], rows[:, 1 + input_dim :]
