"""Monte Carlo BER experiments, sweeps, CSV/manifest persistence.

Trials are generated in fixed-size chunks.  Chunk ``c`` of the point at
``snr_db`` draws its channels, symbols and unit noise from
``default_rng([seed, snr_key(snr_db), c])`` in that order, so any two
detectors run with the same seed see identical ``(H, x, v)`` sequences.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

import numpy as np
from scipy import stats

from . import classic, nn
from .mnnet import load_graph, mnnet_detect, train_mnnet
from .signal import (
    ChannelRealization,
    MimoConfig,
    calibrate_noise,
    circular_gaussian,
    draw_channel,
    draw_symbols,
    received,
)
from .vq import load_detector, train_vq_detector

CSV_HEADER = ("snr_db", "trials", "bit_errors", "ber", "ci_low", "ci_high")
DETECTORS = ("MF", "ZF", "LMMSE", "MLSD", "VQ", "MNNET")
DetectFn = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass
class ExperimentSpec:
    name: str
    detector: str
    M: int
    N: int
    scheme: str = "QPSK"
    snr_db: Sequence[float] = (0.0,)
    seed: int = 0
    min_bit_errors: int = 200
    max_trials: int = 10**7
    chunk_size: int = 10_000
    channel_set_size: int | None = None
    channel_set_seed: int = 1
    params: dict = field(default_factory=dict)
    output: str | None = None

    def __post_init__(self):
        self.detector = self.detector.upper()
        if self.detector not in DETECTORS:
            raise ValueError(f"unknown detector {self.detector!r}; choose from {DETECTORS}")
        self.snr_db = [float(s) for s in self.snr_db]
        if not self.snr_db:
            raise ValueError("SNR grid is empty")
        if any(b <= a for a, b in zip(self.snr_db, self.snr_db[1:])):
            raise ValueError("SNR grid must be strictly increasing")
        if self.min_bit_errors < 0 or self.max_trials < 1 or self.chunk_size < 1:
            raise ValueError("invalid stopping rule")

    @property
    def config(self) -> MimoConfig:
        return MimoConfig.make(self.M, self.N, self.scheme)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


@dataclass(frozen=True)
class BerPoint:
    snr_db: float
    trials: int
    bit_errors: int
    symbol_errors: int
    bits_per_trial: int
    exhausted: bool = False
    symbols_per_trial: int = 1

    @property
    def bits(self) -> int:
        return self.trials * self.bits_per_trial

    @property
    def ber(self) -> float:
        return self.bit_errors / self.bits

    @property
    def ser(self) -> float:
        return self.symbol_errors / (self.trials * self.symbols_per_trial)

    @property
    def interval(self) -> tuple[float, float]:
        return clopper_pearson(self.bit_errors, self.bits)

    @property
    def std_error(self) -> float:
        p = self.ber
        return math.sqrt(max(p * (1 - p), 0.0) / self.bits)


@dataclass
class BerCurve:
    name: str
    points: list[BerPoint]

    @property
    def snr_db(self) -> np.ndarray:
        return np.array([p.snr_db for p in self.points])

    @property
    def ber(self) -> np.ndarray:
        return np.array([p.ber for p in self.points])

    def rows(self) -> list[tuple]:
        out = []
        for p in self.points:
            lo, hi = p.interval
            out.append((p.snr_db, p.trials, p.bit_errors, p.ber, lo, hi))
        return out

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow(CSV_HEADER)
            for snr, trials, errs, ber, lo, hi in self.rows():
                w.writerow([repr(snr), trials, errs, repr(ber), repr(lo), repr(hi)])

    def snr_at(self, target_ber: float) -> float:
        return snr_at_ber(self.snr_db, self.ber, target_ber)


def clopper_pearson(k: int, n: int, level: float = 0.95) -> tuple[float, float]:
    """Exact binomial confidence interval."""
    a = (1 - level) / 2
    lo = 0.0 if k == 0 else float(stats.beta.ppf(a, k, n - k + 1))
    hi = 1.0 if k == n else float(stats.beta.ppf(1 - a, k + 1, n - k))
    return lo, hi


def snr_at_ber(snr_db, ber, target: float) -> float:
    """Log-linear interpolation of the SNR where a decreasing curve crosses ``target``.

    Returns ``nan`` when the curve never crosses it on the grid.
    """
    snr_db = np.asarray(snr_db, dtype=float)
    ber = np.asarray(ber, dtype=float)
    for i in range(len(ber) - 1):
        b0, b1 = ber[i], ber[i + 1]
        if b0 >= target > b1:
            if b1 <= 0:
                return float(snr_db[i + 1])
            f = (math.log10(target) - math.log10(b0)) / (math.log10(b1) - math.log10(b0))
            return float(snr_db[i] + f * (snr_db[i + 1] - snr_db[i]))
    if len(ber) and ber[0] < target:
        return float("-inf")
    return float("nan")


def mrc_ber_bpsk(eb_n0_db, branches: int = 2) -> np.ndarray:
    """Closed-form BPSK BER with L-branch MRC over i.i.d. Rayleigh fading."""
    g = 10.0 ** (np.asarray(eb_n0_db, dtype=float) / 10.0)
    mu = np.sqrt(g / (1.0 + g))
    total = np.zeros_like(g)
    for k in range(branches):
        total += math.comb(branches - 1 + k, k) * ((1 + mu) / 2) ** k
    return ((1 - mu) / 2) ** branches * total


# -- trial streams --------------------------------------------------------------------


def snr_key(snr_db: float) -> int:
    if math.isinf(snr_db):
        return 0 if snr_db < 0 else 2 * 10**9  # outside the range of finite keys
    return int(round(snr_db * 1000)) + 10**6


def channel_set_for(config: MimoConfig, size: int | None, seed: int) -> ChannelRealization | None:
    if size is None:
        return None
    if size < 1:
        raise ValueError("channel set size must be >= 1")
    return draw_channel(np.random.default_rng([seed, 0xC5E7]), config, size)


def draw_chunk(config: MimoConfig, seed: int, snr_db: float, chunk: int, size: int,
               channel_set: ChannelRealization | None = None):
    """Channels, symbol indices and unit-variance noise for one chunk."""
    rng = np.random.default_rng([seed, snr_key(snr_db), chunk])
    if channel_set is None:
        H = draw_channel(rng, config, size).H
    else:
        H = channel_set.H[rng.integers(0, len(channel_set), size=size)]
    x = draw_symbols(rng, config, size)
    w = circular_gaussian(rng, (size, config.N))
    return H, x, w


def _count_errors(config: MimoConfig, x, x_hat) -> tuple[int, int]:
    bits = config.constellation.bits
    return int(np.sum(bits[x] != bits[x_hat])), int(np.sum(x != x_hat))


def evaluate(detectors: Mapping[str, DetectFn], config: MimoConfig, snr_db: Sequence[float], *,
             seed: int = 0, min_bit_errors: int = 200, max_trials: int = 10**7, chunk_size: int = 10_000,
             channel_set: ChannelRealization | None = None, workers: int = 1) -> dict[str, BerCurve]:
    """Paired BER evaluation: every detector sees exactly the same trials.

    Each SNR point keeps adding chunks until every detector has at least
    ``min_bit_errors`` bit errors or ``max_trials`` is reached.  With
    ``workers > 1`` chunks are evaluated concurrently but aggregated in chunk
    order, so the result does not depend on the worker count.
    """
    names = list(detectors)
    bpt = config.bits_per_use
    curves = {n: BerCurve(n, []) for n in names}

    def run_chunk(snr, c):
        size = min(chunk_size, max_trials - c * chunk_size)
        H, x, w = draw_chunk(config, seed, snr, c, size, channel_set)
        noise = calibrate_noise(snr, config)
        y = received(H, config.constellation.modulate(x), noise, w)
        return size, [_count_errors(config, x, detectors[n](y, H, noise.noise_variance)) for n in names]

    pool = ThreadPoolExecutor(workers) if workers > 1 else None
    try:
        for snr in snr_db:
            trials = 0
            errs = np.zeros((len(names), 2), dtype=np.int64)
            c = 0
            done = False
            while not done:
                n_chunks = -(-max_trials // chunk_size)
                wave = list(range(c, min(c + (workers if pool else 1), n_chunks)))
                results = list(pool.map(lambda i: run_chunk(snr, i), wave)) if pool else [run_chunk(snr, wave[0])]
                for size, counts in results:
                    trials += size
                    errs += np.array(counts)
                    c += 1
                    if np.all(errs[:, 0] >= min_bit_errors) or trials >= max_trials:
                        done = True
                        break
            exhausted = bool(np.any(errs[:, 0] < min_bit_errors))
            for i, n in enumerate(names):
                curves[n].points.append(BerPoint(float(snr), trials, int(errs[i, 0]), int(errs[i, 1]), bpt, exhausted,
                                                config.M))
    finally:
        if pool:
            pool.shutdown()
    return curves


# -- detectors from specs -------------------------------------------------------------


def _training_config(params: Mapping, default_snr: float) -> nn.TrainingConfig:
    return nn.TrainingConfig(
        batch_size=int(params.get("batch_size", 500)),
        iterations=int(params.get("iterations", 2000)),
        train_eb_n0_db=float(params.get("train_snr", default_snr)),
        seed=int(params.get("train_seed", 0)),
        plateau_window=int(params.get("plateau_window", 0)),
        plateau_tol=float(params.get("plateau_tol", 0.0)),
    )


def _hidden(params: Mapping) -> tuple[int, ...]:
    h = params.get("hidden", nn.DESK_HIDDEN)
    if isinstance(h, str):
        h = nn.WIDE_HIDDEN if h.lower() == "wide" else [int(v) for v in h.replace(",", " ").split()]
    return tuple(int(v) for v in h)


def default_train_snr(scheme: str) -> float:
    return 8.0 if scheme.upper() in ("PSK8", "8PSK", "QAM16", "16QAM") else 5.0


def build_detector_fn(spec: ExperimentSpec, channel_set=None) -> tuple[DetectFn, dict]:
    """Resolve (and if needed train) the detector named by ``spec``.

    Returns the detection callable and a dict of training facts for the manifest.
    """
    cfg = spec.config
    p = spec.params
    const = cfg.constellation
    kind = spec.detector
    if kind == "MLSD":
        return (lambda y, H, v: classic.mlsd_detect(y, H, const)), {}
    if kind in ("MF", "ZF", "LMMSE"):
        return (lambda y, H, v: classic.demap_hard(classic.equalize(kind, y, H, v), const)), {}
    tc = _training_config(p, default_train_snr(spec.scheme))
    if kind == "VQ":
        if p.get("bundle"):
            det = load_detector(p["bundle"])
            info = {"bundle": str(p["bundle"])}
        else:
            det = train_vq_detector(cfg, p.get("mapping", "NN"), p.get("front_end", "none"), tc, channel_set,
                                    hidden=_hidden(p), slots_per_channel=int(p.get("slots_per_channel", 1)))
            info = {"training": dataclasses.asdict(tc), "final_loss": float(det.loss_trace[-1])}
        return (lambda y, H, v: det.detect(y, H, v)), info
    if p.get("bundle"):
        graph = load_graph(p["bundle"])
        info = {"bundle": str(p["bundle"])}
    else:
        graph = train_mnnet(cfg, tc, hidden=_hidden(p), propagate=bool(int(p.get("propagate", 0))),
                            finetune_iterations=int(p.get("finetune_iterations", 0)))
        info = {"training": dataclasses.asdict(tc),
                "final_loss": [float(t[-1]) for t in graph.loss_traces]}
    return (lambda y, H, v: mnnet_detect(graph, y, H)), info


def run_experiment(spec: ExperimentSpec, *, workers: int = 1, detector: DetectFn | None = None) -> BerCurve:
    """Train if needed, then sweep the SNR grid; deterministic given ``spec``."""
    channel_set = channel_set_for(spec.config, spec.channel_set_size, spec.channel_set_seed)
    fn = detector
    if fn is None:
        fn, _ = build_detector_fn(spec, channel_set)
    curves = evaluate({spec.name: fn}, spec.config, spec.snr_db, seed=spec.seed,
                      min_bit_errors=spec.min_bit_errors, max_trials=spec.max_trials,
                      chunk_size=spec.chunk_size, channel_set=channel_set, workers=workers)
    curve = curves[spec.name]
    if spec.output:
        curve.write_csv(spec.output)
    return curve


@dataclass
class SweepResult:
    curves: dict[str, BerCurve]
    errors: dict[str, str]
    manifest: dict


def sweep(specs: Sequence[ExperimentSpec], out_dir=None, *, workers: int = 1) -> SweepResult:
    """Run every spec; one failing spec does not stop the others.

    Writes ``<name>.csv`` per curve and ``manifest.json`` when ``out_dir`` is given.
    """
    if not specs:
        raise ValueError("sweep needs at least one spec")
    names = [s.name for s in specs]
    if len(set(names)) != len(names):
        raise ValueError("spec names must be unique")
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    curves: dict[str, BerCurve] = {}
    errors: dict[str, str] = {}
    entries = []

    def one(spec: ExperimentSpec):
        channel_set = channel_set_for(spec.config, spec.channel_set_size, spec.channel_set_seed)
        fn, info = build_detector_fn(spec, channel_set)
        curve = run_experiment(spec, detector=fn)
        return curve, info

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            futures = [pool.submit(one, s) for s in specs]
            outcomes = []
            for f in futures:
                try:
                    outcomes.append((f.result(), None))
                except Exception as exc:  # noqa: BLE001 - reported per spec
                    outcomes.append((None, exc))
    else:
        outcomes = []
        for s in specs:
            try:
                outcomes.append((one(s), None))
            except Exception as exc:  # noqa: BLE001 - reported per spec
                outcomes.append((None, exc))

    for spec, (result, exc) in zip(specs, outcomes):
        entry = {"spec": spec.to_dict()}
        if exc is not None:
            errors[spec.name] = f"{type(exc).__name__}: {exc}"
            entry["error"] = errors[spec.name]
        else:
            curve, info = result
            curves[spec.name] = curve
            entry["detector_info"] = info
            entry["symbol_errors"] = [p.symbol_errors for p in curve.points]
            entry["exhausted"] = [p.exhausted for p in curve.points]
            if out is not None:
                entry["csv"] = f"{spec.name}.csv"
                curve.write_csv(out / entry["csv"])
        entries.append(entry)
    manifest = {"format": "mimolab-sweep", "version": 1, "experiments": entries}
    if out is not None:
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2))
    return SweepResult(curves, errors, manifest)


def load_manifest(path) -> tuple[list[ExperimentSpec], dict]:
    manifest = json.loads(Path(path).read_text())
    specs = []
    for entry in manifest["experiments"]:
        d = dict(entry["spec"])
        d["output"] = None
        specs.append(ExperimentSpec(**d))
    return specs, manifest


def replay(manifest_path, out_dir=None) -> dict[str, bool]:
    """Re-run every experiment in a manifest and compare CSVs byte for byte."""
    manifest_path = Path(manifest_path)
    specs, manifest = load_manifest(manifest_path)
    result = sweep(specs, out_dir)
    same = {}
    for spec, entry in zip(specs, manifest["experiments"]):
        if "csv" not in entry or spec.name not in result.curves:
            same[spec.name] = False
            continue
        original = (manifest_path.parent / entry["csv"]).read_text()
        tmp = manifest_path.parent / f".replay-{spec.name}.csv"
        result.curves[spec.name].write_csv(tmp)
        same[spec.name] = tmp.read_text() == original
        tmp.unlink()
    return same
