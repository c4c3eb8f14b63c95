"""The multi-scale, multimodal memory controller and its baselines."""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from ..dlm import DLM
from . import tensor as T
from .layers import DropoutContext, MemoryCellState, MemoryLayer, ShapeMismatch, UnknownMode
from .tensor import Tensor

DEFAULT_MODES = (DLM.GO_FORWARD.value, DLM.TURN_LEFT.value, DLM.TURN_RIGHT.value,
                 DLM.TAKE_ELEVATOR.value)

BASELINE_KINDS = ("decision", "cnn_reactive", "mf_cnn", "cnn_lstm", "wo_l123", "wo_l23",
                  "wo_l12", "no_multimodal_memory")
_KIND_ALIASES = {
    "ablation w/o L#1-3": "wo_l123",
    "ablation w/o L#2-3": "wo_l23",
    "ablation w/o L#1-2": "wo_l12",
    "w/o L#1-3": "wo_l123",
    "w/o L#2-3": "wo_l23",
    "w/o L#1-2": "wo_l12",
}


class UnknownKind(ValueError):
    pass


@dataclass(frozen=True)
class NetConfig:
    input_side: int = 56
    in_channels: int = 1
    channels: tuple[int, int, int] = (16, 32, 64)
    kernel: int = 3
    memory: tuple[bool, bool, bool] = (True, True, True)
    multimodal: bool = True
    head_routing: str = "per_mode"      # "per_mode" | "shared"
    head_hidden: int = 64
    frame_stack: int = 1
    vector_lstm_layers: int = 0
    modes: tuple[str, ...] = DEFAULT_MODES
    gn_groups: int | None = None        # None -> min(32, C)
    dropout: float = 0.3
    dtype: str = "float32"
    seed: int = 0
    kind: str = "decision"

    def __post_init__(self):
        if len(self.channels) != 3 or len(self.memory) != 3:
            raise ValueError("the backbone has exactly three blocks")
        if self.head_routing not in ("per_mode", "shared"):
            raise ValueError(f"head_routing {self.head_routing!r}")

    @property
    def pooled_dim(self) -> int:
        return self.channels[2]

    def block_sides(self) -> list[int]:
        sides, s = [], self.input_side
        for _ in range(3):
            sides.append(s)
            s = (s + 1) // 2
        return sides

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "NetConfig":
        d = dict(d)
        for k in ("channels", "memory", "modes"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def desk_config(**overrides) -> NetConfig:
    return dataclasses.replace(NetConfig(), **overrides)


def full_scale_config(**overrides) -> NetConfig:
    """112x112 input, 1024-d pooled vector, GroupNorm with G=32."""
    base = NetConfig(input_side=112, in_channels=3, channels=(256, 512, 1024),
                     head_hidden=256, gn_groups=32)
    return dataclasses.replace(base, **overrides)


def tiny_config(**overrides) -> NetConfig:
    """Small enough to train in seconds on one CPU core."""
    base = NetConfig(input_side=16, channels=(4, 8, 8), head_hidden=16, dropout=0.0)
    return dataclasses.replace(base, **overrides)


def baseline_config(kind: str, base: NetConfig | None = None) -> NetConfig:
    kind = _KIND_ALIASES.get(kind, kind)
    base = base or NetConfig()
    if kind == "decision":
        return dataclasses.replace(base, kind=kind)
    if kind == "cnn_reactive":
        return dataclasses.replace(base, kind=kind, memory=(False, False, False))
    if kind == "mf_cnn":
        return dataclasses.replace(base, kind=kind, memory=(False, False, False), frame_stack=5)
    if kind == "cnn_lstm":
        return dataclasses.replace(base, kind=kind, memory=(False, False, False), vector_lstm_layers=3)
    if kind == "wo_l123":
        return dataclasses.replace(base, kind=kind, memory=(False, False, False))
    if kind == "wo_l23":
        return dataclasses.replace(base, kind=kind, memory=(True, False, False))
    if kind == "wo_l12":
        return dataclasses.replace(base, kind=kind, memory=(False, False, True))
    if kind == "no_multimodal_memory":
        # with one shared cell the memory path no longer sees the mode; the head
        # is shared as well so no mode-specific structure is left
        return dataclasses.replace(base, kind=kind, multimodal=False, head_routing="shared")
    raise UnknownKind(kind)


@dataclass
class NetState:
    """Recurrent state of one batch of rollouts."""

    memory: list[dict[str, MemoryCellState] | None]
    frames: np.ndarray | None = None
    lstm: list[tuple[Tensor, Tensor]] | None = None

    def detach(self) -> "NetState":
        mem = [None if m is None else {k: s.detach() for k, s in m.items()} for m in self.memory]
        lstm = None if self.lstm is None else [(h.detach(), c.detach()) for h, c in self.lstm]
        return NetState(mem, self.frames, lstm)


@dataclass
class _Conv:
    weight: Tensor
    bias: Tensor
    stride: int

    def __call__(self, x: Tensor) -> Tensor:
        return T.relu(T.conv2d(x, self.weight, self.bias, stride=self.stride,
                               padding=self.weight.shape[2] // 2))


@dataclass
class _Head:
    w1: Tensor
    b1: Tensor
    w2: Tensor
    b2: Tensor

    def __call__(self, v: Tensor) -> Tensor:
        return T.tanh(T.linear(T.relu(T.linear(v, self.w1, self.b1)), self.w2, self.b2))


@dataclass
class _LSTMLayer:
    wx: Tensor  # (D, 4D)
    wh: Tensor
    b: Tensor

    def __call__(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        d = h.shape[1]
        z = T.add(T.add(T.matmul(x, self.wx), T.matmul(h, self.wh)), self.b)
        i = T.sigmoid(z[:, :d])
        f = T.sigmoid(z[:, d:2 * d])
        g = T.tanh(z[:, 2 * d:3 * d])
        o = T.sigmoid(z[:, 3 * d:])
        c = T.add(T.mul(f, c), T.mul(i, g))
        return T.mul(o, T.tanh(c)), c


class DecisionNet:
    """Three blocks of (conv -> memory layer -> stride-2 downsampling), a global
    average pool and (v, theta) heads squashed by tanh.

    Memory layers can be switched off per block, which yields the reactive and
    single-level variants; ``frame_stack`` and ``vector_lstm_layers`` give the
    multi-frame and CNN-LSTM baselines.
    """

    def __init__(self, config: NetConfig, zero: bool = False):
        self.config = config
        cfg = config
        rng = np.random.default_rng(cfg.seed)
        dt = cfg.dtype

        def draw(shape, fan_in, scale=2.0):
            if zero:
                return np.zeros(shape, dtype=dt)
            return (rng.standard_normal(shape) * np.sqrt(scale / fan_in)).astype(dt)

        k = cfg.kernel
        sides = cfg.block_sides()
        cin = cfg.in_channels * cfg.frame_stack
        self.convs_in: list[_Conv] = []
        self.convs_down: list[_Conv] = []
        self.memory: list[MemoryLayer | None] = []
        for b, ch in enumerate(cfg.channels):
            self.convs_in.append(_Conv(T.parameter(draw((ch, cin, k, k), cin * k * k)),
                                       T.parameter(np.zeros(ch, dtype=dt)), 1))
            if cfg.memory[b]:
                self.memory.append(MemoryLayer(cfg.modes, ch, ch, sides[b], sides[b], rng,
                                               kernel=k, groups=cfg.gn_groups,
                                               multimodal=cfg.multimodal, dtype=dt, zero=zero,
                                               index=b))
            else:
                self.memory.append(None)
            self.convs_down.append(_Conv(T.parameter(draw((ch, ch, k, k), ch * k * k)),
                                         T.parameter(np.zeros(ch, dtype=dt)), 2))
            cin = ch
        d = cfg.pooled_dim
        self.lstm: list[_LSTMLayer] = []
        for _ in range(cfg.vector_lstm_layers):
            b = np.zeros(4 * d, dtype=dt)
            if not zero:
                b[d:2 * d] = 1.0
            self.lstm.append(_LSTMLayer(T.parameter(draw((d, 4 * d), d, 1.0)),
                                        T.parameter(draw((d, 4 * d), d, 1.0)),
                                        T.parameter(b)))
        head_keys = cfg.modes if cfg.head_routing == "per_mode" else ("shared",)
        hid = cfg.head_hidden
        self.heads = {m: _Head(T.parameter(draw((d, hid), d)), T.parameter(np.zeros(hid, dtype=dt)),
                               T.parameter(draw((hid, 2), hid, 1.0)), T.parameter(np.zeros(2, dtype=dt)))
                      for m in head_keys}

    # ------------------------------------------------------------------
    def parameters(self) -> dict[str, Tensor]:
        out: dict[str, Tensor] = {}
        for b in range(3):
            ci, cd = self.convs_in[b], self.convs_down[b]
            out[f"conv{b}.w"], out[f"conv{b}.b"] = ci.weight, ci.bias
            if self.memory[b] is not None:
                out.update(self.memory[b].parameters())
            out[f"down{b}.w"], out[f"down{b}.b"] = cd.weight, cd.bias
        for i, layer in enumerate(self.lstm):
            out[f"lstm{i}.wx"], out[f"lstm{i}.wh"], out[f"lstm{i}.b"] = layer.wx, layer.wh, layer.b
        for m, h in self.heads.items():
            for name in ("w1", "b1", "w2", "b2"):
                out[f"head.{m}.{name}"] = getattr(h, name)
        return out

    @property
    def modes(self) -> tuple[str, ...]:
        return self.config.modes

    def initial_state(self, batch: int = 1) -> NetState:
        mem = [None if layer is None else layer.zero_state(batch) for layer in self.memory]
        lstm = None
        if self.lstm:
            d = self.config.pooled_dim
            z = np.zeros((batch, d), dtype=self.config.dtype)
            lstm = [(Tensor(z), Tensor(z.copy())) for _ in self.lstm]
        return NetState(mem, None, lstm)

    def _check_modes(self, modes) -> list[str | None]:
        out: list[str | None] = []
        for m in modes:
            name = m.value if isinstance(m, DLM) else str(m)
            if name == DLM.STOP.value:
                out.append(None)
            elif name not in self.config.modes:
                raise UnknownMode(name)
            else:
                out.append(name)
        return out

    def _input(self, obs: np.ndarray, state: NetState) -> tuple[np.ndarray, np.ndarray | None]:
        cfg = self.config
        obs = np.asarray(obs, dtype=cfg.dtype)
        if obs.ndim == 3:
            obs = obs[:, None]
        if obs.ndim != 4 or obs.shape[1] != cfg.in_channels or obs.shape[2:] != (cfg.input_side,) * 2:
            raise ShapeMismatch(f"observation shape {obs.shape} does not match input side "
                                f"{cfg.input_side} x {cfg.in_channels} channel(s)")
        if cfg.frame_stack == 1:
            return obs, None
        frames = state.frames
        if frames is None:
            frames = np.concatenate([obs] * cfg.frame_stack, axis=1)
        else:
            frames = np.concatenate([frames[:, cfg.in_channels:], obs], axis=1)
        return frames, frames

    def features(self, obs: np.ndarray, modes, state: NetState,
                 ctx: DropoutContext | None = None) -> tuple[Tensor, NetState, list[str | None]]:
        """Pooled feature vector (after the vector LSTM, if any) and the next state."""
        names = self._check_modes(modes)
        if isinstance(obs, Tensor):
            # differentiable input, used to probe gradient flow into observations
            if self.config.frame_stack != 1 or obs.data.ndim != 4:
                raise ShapeMismatch("tensor input requires (N, C, S, S) and no frame stack")
            x, frames = obs, None
        else:
            x_np, frames = self._input(obs, state)
            x = Tensor(x_np)
        if len(names) != x.shape[0]:
            raise ShapeMismatch("one mode per observation row is required")
        mem_states = list(state.memory)
        for b in range(3):
            x = self.convs_in[b](x)
            layer = self.memory[b]
            if layer is not None:
                mem_states[b], x = layer.step(mem_states[b], names, x, ctx)
            x = self.convs_down[b](x)
        v = T.spatial_mean(x)
        lstm_states = None
        if self.lstm:
            lstm_states = []
            for layer, (h, c) in zip(self.lstm, state.lstm):
                h, c = layer(v, h, c)
                lstm_states.append((h, c))
                v = h
        return v, NetState(mem_states, frames, lstm_states), names

    def head_forward(self, v: Tensor, names: list[str | None]) -> Tensor:
        n = v.shape[0]
        out = Tensor(np.zeros((n, 2), dtype=v.dtype))
        groups: dict[str, list[int]] = {}
        for row, m in enumerate(names):
            if m is None:
                continue  # Stop: zero output, no head
            key = m if self.config.head_routing == "per_mode" else "shared"
            groups.setdefault(key, []).append(row)
        for key in sorted(groups):
            rows = np.asarray(groups[key])
            if len(rows) == n:
                out = self.heads[key](v)
            else:
                out = T.scatter_rows(out, rows, self.heads[key](T.take_rows(v, rows)))
        return out

    def __call__(self, obs, modes, state: NetState, ctx: DropoutContext | None = None):
        v, nstate, names = self.features(obs, modes, state, ctx)
        return self.head_forward(v, names), nstate

    def act(self, obs: np.ndarray, mode, state: NetState,
            ctx: DropoutContext | None = None) -> tuple[tuple[float, float], NetState]:
        """Single-sample, no-grad control: returns ((v, theta), state')."""
        with T.no_grad():
            out, nstate = self(np.asarray(obs)[None], [mode], state, ctx)
        v, th = out.data[0]
        return (float(v), float(th)), nstate


def forward(net: DecisionNet, observation, mode, states: NetState,
            ctx: DropoutContext | None = None):
    """Forward pass. A single ``mode`` means a single observation; a sequence of
    modes means a batch with one mode per row."""
    obs = np.asarray(observation)
    if isinstance(mode, (str, DLM)):
        return net(obs[None], [mode], states, ctx)
    return net(obs, list(mode), states, ctx)


def build_baseline(kind: str, base: NetConfig | None = None, zero: bool = False) -> DecisionNet:
    return DecisionNet(baseline_config(kind, base), zero=zero)
