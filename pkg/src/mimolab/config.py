"""Plain-text ``key = value`` experiment files (INI sections, one per experiment)."""

from __future__ import annotations

import configparser
from pathlib import Path

from .harness import ExperimentSpec

_INT_KEYS = ("M", "N", "seed", "min_bit_errors", "max_trials", "chunk_size", "channel_set_seed")


def parse_snr(text: str) -> list[float]:
    """``"0:10:2"`` (inclusive range) or a comma/space separated list."""
    text = text.strip()
    if ":" in text:
        start, stop, step = (float(v) for v in text.split(":"))
        n = int(round((stop - start) / step)) + 1
        return [round(start + i * step, 10) for i in range(n)]
    return [float(v) for v in text.replace(",", " ").split()]


def _norm_key(key: str) -> str:
    return key.upper() if key.upper() in ("M", "N") else key.lower()


def spec_from_mapping(name: str, items: dict) -> ExperimentSpec:
    items = {_norm_key(k): v for k, v in items.items()}
    kwargs: dict = {"name": name}
    for key in _INT_KEYS:
        if key in items:
            kwargs[key] = int(items.pop(key))
    kwargs["detector"] = items.pop("detector")
    if "scheme" in items:
        kwargs["scheme"] = items.pop("scheme").upper()
    if "snr" in items:
        kwargs["snr_db"] = parse_snr(items.pop("snr"))
    if "channel_set_size" in items:
        v = items.pop("channel_set_size")
        kwargs["channel_set_size"] = None if v.lower() in ("", "none", "inf") else int(v)
    if "output" in items:
        kwargs["output"] = items.pop("output")
    kwargs["params"] = items
    return ExperimentSpec(**kwargs)


def read_specs(path) -> list[ExperimentSpec]:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    parser.read_string(Path(path).read_text())
    sections = parser.sections()
    if not sections:
        raise ValueError(f"{path}: no [experiment] sections")
    return [spec_from_mapping(s, dict(parser[s])) for s in sections]


def write_specs(path, specs) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for s in specs:
        sec = {
            "detector": s.detector, "M": str(s.M), "N": str(s.N), "scheme": s.scheme,
            "snr": " ".join(repr(v) for v in s.snr_db), "seed": str(s.seed),
            "min_bit_errors": str(s.min_bit_errors), "max_trials": str(s.max_trials),
            "chunk_size": str(s.chunk_size), "channel_set_seed": str(s.channel_set_seed),
            "channel_set_size": "none" if s.channel_set_size is None else str(s.channel_set_size),
        }
        sec.update({k: str(v) for k, v in s.params.items()})
        parser[s.name] = sec
    with open(path, "w") as f:
        parser.write(f)

