"""MNNet: super-layers of shared VQ modules joined by parallel interference cancellation.

Super-layer ``m`` (1-based) holds modules ``(m, k)`` for ``k = 0..m-1``.
Module ``(m, k)`` has already cancelled the symbols ``{0..m-1} \\ {k}`` and
sees the residual system over symbols ``(k, m, m+1, ..., M-1)`` in that
column order.  The top module ``(m, m-1)`` decodes residual positions 0 and
1 and feeds two children; every other module decodes position 1 (symbol
``m``) and feeds one.  All modules of a super-layer share one network.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from . import nn
from .classic import drop_column, pic_cancel
from .signal import MimoConfig, Scheme, calibrate_noise, csi_input, draw_channel, transmit
from .vq import (
    UntrainedDetectorError,
    batch_source,
    build_detector,
    make_mapping,
)

WIRING_VERSION = "cancelled-set-v1"


@dataclass(frozen=True)
class Module:
    layer: int
    k: int
    cancelled: frozenset
    residual: tuple[int, ...]
    children: tuple[tuple[int, tuple[int, int]], ...]  # (cancelled position, child key)

    @property
    def key(self) -> tuple[int, int]:
        return (self.layer, self.k)

    @property
    def decoded_positions(self) -> tuple[int, ...]:
        return tuple(p for p, _ in self.children) or (0,)


@dataclass
class MnnetGraph:
    config: MimoConfig
    nets: list
    modules: dict[tuple[int, int], Module]
    trained: bool = False
    loss_traces: list = field(default_factory=list, repr=False)

    @property
    def M(self) -> int:
        return self.config.M

    @property
    def module_count(self) -> int:
        return len(self.modules)

    def layer_modules(self, m: int) -> list[Module]:
        return [self.modules[(m, k)] for k in range(m)]

    def layer_config(self, m: int) -> MimoConfig:
        return self.config.with_antennas(self.M - m + 1)

    def input_width(self, m: int) -> int:
        return 2 * self.config.N * (self.M - m + 2)

    def output_width(self, m: int) -> int:
        return self.config.L ** (self.M - m + 1)


def lattice(M: int) -> dict[tuple[int, int], Module]:
    modules = {}
    for m in range(1, M + 1):
        for k in range(m):
            residual = (k,) + tuple(range(m, M))
            if m == M:
                children = ()
            elif k == m - 1:
                children = ((0, (m + 1, m)), (1, (m + 1, m - 1)))
            else:
                children = ((1, (m + 1, k)),)
            cancelled = frozenset(range(m)) - {k}
            modules[(m, k)] = Module(m, k, cancelled, residual, children)
    _check_lattice(M, modules)
    return modules


def _check_lattice(M: int, modules) -> None:
    for mod in modules.values():
        if len(mod.residual) != M - mod.layer + 1:
            raise AssertionError(f"module {mod.key} has a residual of the wrong size")
        if set(mod.residual) & mod.cancelled or len(set(mod.residual) | mod.cancelled) != M:
            raise AssertionError(f"module {mod.key} does not partition the antennas")
        for pos, child in mod.children:
            kid = modules[child]
            if kid.residual != mod.residual[:pos] + mod.residual[pos + 1:]:
                raise AssertionError(f"child {child} of {mod.key} has inconsistent residual")
    finals = sorted(modules[(M, k)].residual for k in range(M))
    if finals != [(k,) for k in range(M)]:
        raise AssertionError("final super-layer does not cover every antenna exactly once")


def build_graph(config: MimoConfig, hidden: Sequence[int] = nn.DESK_HIDDEN, *, seed: int = 0,
                dtype=np.float32) -> MnnetGraph:
    nets = []
    for m in range(1, config.M + 1):
        sub = config.with_antennas(config.M - m + 1)
        rng = np.random.default_rng([seed, m, 0x5EED])
        nets.append(build_detector(sub, "NN", "none", hidden, rng=rng, dtype=dtype).net)
    return MnnetGraph(config, nets, lattice(config.M))


@dataclass
class BranchState:
    y: np.ndarray
    H: np.ndarray
    remaining: tuple[int, ...]
    estimates: dict[int, np.ndarray]


def _layer_pass(graph: MnnetGraph, m: int, states: dict):
    """Run super-layer ``m``; returns ``{key: residual decisions (B, r)}``."""
    mods = graph.layer_modules(m)
    X = np.concatenate([csi_input(states[mod.key].H, states[mod.key].y) for mod in mods])
    mapping = make_mapping("NN", graph.layer_config(m))
    decisions = mapping.decode(graph.nets[m - 1].forward(X))
    B = len(states[mods[0].key].y)
    return {mod.key: decisions[i * B:(i + 1) * B] for i, mod in enumerate(mods)}


def _children(graph: MnnetGraph, mod: Module, state: BranchState, decided: np.ndarray, next_states: dict):
    points = graph.config.constellation.points
    for pos, child in mod.children:
        est = dict(state.estimates)
        est[mod.residual[pos]] = decided[:, pos]
        next_states[child] = BranchState(
            pic_cancel(state.y, state.H, pos, points[decided[:, pos]]),
            drop_column(state.H, pos),
            mod.residual[:pos] + mod.residual[pos + 1:],
            est,
        )


def _root(graph: MnnetGraph, y, H) -> dict:
    return {(1, 0): BranchState(np.asarray(y), np.asarray(H), tuple(range(graph.M)), {})}


def mnnet_detect(graph: MnnetGraph, y, H, *, trace: list | None = None) -> np.ndarray:
    """Feed-forward detection over the lattice for a batch ``y (B, N)``, ``H (B, N, M)``.

    If ``trace`` is a list, every module's input :class:`BranchState` is
    appended to it as ``(key, state)``.
    """
    if not graph.trained:
        raise UntrainedDetectorError("MNNet graph has not been trained")
    y = np.asarray(y)
    H = np.asarray(H)
    single = y.ndim == 1
    if single:
        y, H = y[None], H[None]
    M = graph.M
    states = _root(graph, y, H)
    final = np.full((len(y), M), -1, dtype=np.int64)
    filled = np.zeros(M, dtype=int)
    for m in range(1, M + 1):
        decided = _layer_pass(graph, m, states)
        nxt: dict = {}
        for mod in graph.layer_modules(m):
            st = states[mod.key]
            if trace is not None:
                trace.append((mod.key, st))
            if m == M:
                final[:, st.remaining[0]] = decided[mod.key][:, 0]
                filled[st.remaining[0]] += 1
            else:
                _children(graph, mod, st, decided[mod.key], nxt)
        states = nxt
    if not np.all(filled == 1):
        raise AssertionError("final estimates do not cover every antenna exactly once")
    return final[0] if single else final


def train_mnnet(config: MimoConfig, training_config: nn.TrainingConfig | None = None, *,
                hidden: Sequence[int] = nn.DESK_HIDDEN, iterations_per_layer: Sequence[int] | None = None,
                propagate: bool = False, finetune_iterations: int = 0, dtype=np.float32) -> MnnetGraph:
    """Train each super-layer's shared network independently.

    Layer ``m`` learns plain (M-m+1)-antenna MIMO-VQ detection on freshly
    drawn systems, which is what a genie-cancelled residual looks like.  With
    ``propagate`` the layers from 2 on are then fine-tuned on residuals
    produced by the trained upstream layers.
    """
    tc = training_config or nn.TrainingConfig()
    graph = build_graph(config, hidden, seed=tc.seed, dtype=dtype)
    its = list(iterations_per_layer) if iterations_per_layer is not None else [tc.iterations] * config.M
    if len(its) != config.M:
        raise ValueError("need one iteration count per super-layer")
    for m in range(1, config.M + 1):
        sub = graph.layer_config(m)
        source = batch_source(sub, make_mapping("NN", sub), tc.train_eb_n0_db)
        layer_tc = dataclasses.replace(tc, iterations=its[m - 1], seed=tc.seed + 7919 * m)
        graph.loss_traces.append(nn.train(graph.nets[m - 1], source, layer_tc).loss_trace)
    graph.trained = True
    if propagate and finetune_iterations > 0:
        for m in range(2, config.M + 1):
            source = propagated_source(graph, m, tc.train_eb_n0_db)
            layer_tc = dataclasses.replace(tc, iterations=finetune_iterations, seed=tc.seed + 104729 * m)
            trace = nn.train(graph.nets[m - 1], source, layer_tc).loss_trace
            graph.loss_traces[m - 1] = np.concatenate([graph.loss_traces[m - 1], trace])
    return graph


def propagated_source(graph: MnnetGraph, m: int, eb_n0_db: float):
    """Batches for layer ``m`` whose residuals come from upstream decisions."""
    config = graph.config
    noise = calibrate_noise(eb_n0_db, config)
    mapping = make_mapping("NN", graph.layer_config(m))

    def source(rng, b):
        draws = -(-b // m)
        channel = draw_channel(rng, config, draws)
        x, y = transmit(rng, config, channel, noise)
        states = _root(graph, y, channel.H)
        for layer in range(1, m):
            decided = _layer_pass(graph, layer, states)
            nxt: dict = {}
            for mod in graph.layer_modules(layer):
                _children(graph, mod, states[mod.key], decided[mod.key], nxt)
            states = nxt
        mods = graph.layer_modules(m)
        X = np.concatenate([csi_input(states[mod.key].H, states[mod.key].y) for mod in mods])
        Z = np.concatenate([mapping.encode(x[:, list(mod.residual)]) for mod in mods])
        return X[:b], Z[:b]

    return source


# -- bundles --------------------------------------------------------------------------


def save_graph(directory, graph: MnnetGraph) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    c = graph.config
    lines = ["mimolab-mnnet 1", f"M {c.M}", f"N {c.N}", f"scheme {c.constellation.scheme.value}",
             f"wiring {WIRING_VERSION}", f"trained {int(graph.trained)}"]
    for m, net in enumerate(graph.nets, start=1):
        name = f"layer_{m}.net"
        nn.save_network(d / name, net)
        lines.append(f"layer {m} {name}")
    (d / "manifest.txt").write_text("\n".join(lines) + "\n")


def load_graph(directory) -> MnnetGraph:
    d = Path(directory)
    entries = [line.split() for line in (d / "manifest.txt").read_text().splitlines() if line.strip()]
    if entries[0][0] != "mimolab-mnnet":
        raise ValueError("not an MNNet manifest")
    kv = {e[0]: e[1:] for e in entries[1:] if e[0] != "layer"}
    if kv["wiring"][0] != WIRING_VERSION:
        raise ValueError(f"unsupported wiring {kv['wiring'][0]}")
    config = MimoConfig.make(int(kv["M"][0]), int(kv["N"][0]), Scheme.parse(kv["scheme"][0]))
    nets = [nn.load_network(d / e[2]) for e in entries if e[0] == "layer"]
    return MnnetGraph(config, nets, lattice(config.M), trained=bool(int(kv["trained"][0])))
