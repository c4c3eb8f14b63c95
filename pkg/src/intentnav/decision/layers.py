"""Memory cell, multimodal memory layer and channel-wise dropout."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .tensor import Tensor

PHASES = ("train", "eval", "mc")
GATES = ("i", "f", "g", "o")


class ShapeMismatch(ValueError):
    pass


class UnknownMode(KeyError):
    pass


def channel_dropout(x: Tensor, rate: float, rng: np.random.Generator, phase: str) -> Tensor:
    """Zero whole channels of an (N, C, ...) map with probability ``rate``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    if phase not in PHASES:
        raise ValueError(f"unknown phase {phase!r}")
    if phase == "eval" or rate == 0.0:
        return x
    mask = channel_mask(rng, x.shape[:2], rate, x.dtype)
    return T.mul(x, mask.reshape(mask.shape + (1,) * (x.data.ndim - 2)))


def channel_mask(rng: np.random.Generator, shape, rate: float, dtype) -> np.ndarray:
    keep = rng.random(shape) >= rate
    return keep.astype(dtype) / (1.0 - rate)


@dataclass
class DropoutContext:
    """Dropout masks for one batch of sequences.

    Input masks are drawn fresh each step; masks on the recurrent path (the
    previous hidden state and the cell update) stay fixed for the whole
    sequence. Every mask is cached by (key, step) so a TBPTT window that
    replays earlier steps sees the same masks again.
    """

    rate: float = 0.0
    phase: str = "eval"
    seed: int = 0
    step: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)
    _masks: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        if self.phase not in PHASES:
            raise ValueError(f"unknown phase {self.phase!r}")
        self._rng = np.random.default_rng(self.seed)

    @property
    def active(self) -> bool:
        return self.phase != "eval" and self.rate > 0.0

    def new_sequence(self) -> None:
        self._masks.clear()
        self.step = 0

    def mask(self, key, shape, dtype, recurrent: bool) -> np.ndarray | None:
        if not self.active:
            return None
        cache_key = (key, None if recurrent else self.step)
        m = self._masks.get(cache_key)
        if m is None or m.shape != tuple(shape):
            m = channel_mask(self._rng, shape, self.rate, dtype)
            self._masks[cache_key] = m
        return m


def _apply_mask(x: Tensor, ctx: DropoutContext | None, key, idx, recurrent: bool,
                batch: int) -> Tensor:
    if ctx is None or not ctx.active:
        return x
    m = ctx.mask(key, (batch, x.shape[1]), x.dtype, recurrent)
    if idx is not None:
        m = m[idx]
    return T.mul(x, m[:, :, None, None])


@dataclass
class MemoryCellParams:
    """Weights of one peephole ConvLSTM cell.

    The input and hidden kernels of the four gates are stored fused along the
    output axis in gate order (i, f, g, o); ``gate_kernel`` slices them out.
    Peephole weights are elementwise over (C, H, W).
    """

    wx: Tensor      # (4C, Cin, k, k)
    wh: Tensor      # (4C, C, k, k)
    bias: Tensor    # (4C,)
    wci: Tensor     # (C, H, W)
    wcf: Tensor
    wco: Tensor
    gn_gamma: Tensor  # (4, C)
    gn_beta: Tensor   # (4, C)
    groups: int

    @property
    def channels(self) -> int:
        return self.wh.shape[1]

    @property
    def spatial(self) -> tuple[int, int]:
        return self.wci.shape[1], self.wci.shape[2]

    def gate_kernel(self, source: str, gate: str) -> np.ndarray:
        c = self.channels
        g = GATES.index(gate)
        w = self.wx if source == "x" else self.wh
        return w.data[g * c:(g + 1) * c]

    def named(self, prefix: str = "") -> dict[str, Tensor]:
        return {prefix + k: getattr(self, k) for k in
                ("wx", "wh", "bias", "wci", "wcf", "wco", "gn_gamma", "gn_beta")}

    @classmethod
    def init(cls, in_channels: int, channels: int, height: int, width: int,
             rng: np.random.Generator, kernel: int = 3, groups: int | None = None,
             dtype="float32", zero: bool = False) -> "MemoryCellParams":
        groups = groups or min(32, channels)
        if channels % groups:
            raise T.IndivisibleChannels(f"{channels} channels, {groups} groups")

        def draw(shape, fan_in):
            if zero:
                return np.zeros(shape, dtype=dtype)
            return (rng.standard_normal(shape) / np.sqrt(fan_in)).astype(dtype)

        beta = np.zeros((4, channels), dtype=dtype)
        if not zero:
            beta[1] = 1.0  # forget gate starts open
        return cls(
            wx=T.parameter(draw((4 * channels, in_channels, kernel, kernel), in_channels * kernel * kernel)),
            wh=T.parameter(draw((4 * channels, channels, kernel, kernel), channels * kernel * kernel)),
            bias=T.parameter(np.zeros(4 * channels, dtype=dtype)),
            wci=T.parameter(draw((channels, height, width), 10.0)),
            wcf=T.parameter(draw((channels, height, width), 10.0)),
            wco=T.parameter(draw((channels, height, width), 10.0)),
            gn_gamma=T.parameter(np.zeros((4, channels), dtype=dtype) if zero
                                 else np.ones((4, channels), dtype=dtype)),
            gn_beta=T.parameter(beta),
            groups=groups,
        )


@dataclass(frozen=True)
class MemoryCellState:
    c: Tensor
    h: Tensor

    @classmethod
    def zeros(cls, batch: int, channels: int, height: int, width: int, dtype="float32"):
        z = np.zeros((batch, channels, height, width), dtype=dtype)
        return cls(Tensor(z), Tensor(z.copy()))

    def detach(self) -> "MemoryCellState":
        return MemoryCellState(self.c.detach(), self.h.detach())


def _gn(z: Tensor, p: MemoryCellParams, gate: int) -> Tensor:
    return T.group_norm(z, p.groups, p.gn_gamma[gate], p.gn_beta[gate])


def memory_cell_step(params: MemoryCellParams, state: MemoryCellState, x: Tensor,
                     ctx: DropoutContext | None = None, key=None, idx=None,
                     batch: int | None = None) -> tuple[MemoryCellState, Tensor]:
    """Advance one cell by one step and return (new state, h_t).

    ``idx``/``batch`` locate these rows inside the full batch so dropout masks
    line up with the sample each row belongs to.
    """
    c_prev, h_prev = state.c, state.h
    n, cin = x.shape[:2]
    ch = params.channels
    if params.wx.shape[1] != cin:
        raise ShapeMismatch(f"cell expects {params.wx.shape[1]} input channels, got {cin}")
    if h_prev.shape != (n, ch) + params.spatial or x.shape[2:] != params.spatial:
        raise ShapeMismatch(f"state {h_prev.shape} / input {x.shape} do not fit cell "
                            f"({ch}, {params.spatial})")
    batch = batch or n
    pad = params.wx.shape[2] // 2
    x = _apply_mask(x, ctx, (key, "x"), idx, False, batch)
    h_prev = _apply_mask(h_prev, ctx, (key, "h"), idx, True, batch)

    z = T.add(T.conv2d(x, params.wx, params.bias, padding=pad), T.conv2d(h_prev, params.wh, padding=pad))
    zi, zf, zg, zo = (z[:, k * ch:(k + 1) * ch] for k in range(4))

    i = T.sigmoid(_gn(T.add(zi, T.mul(c_prev, params.wci)), params, 0))
    f = T.sigmoid(_gn(T.add(zf, T.mul(c_prev, params.wcf)), params, 1))
    g = T.tanh(_gn(zg, params, 2))
    g = _apply_mask(g, ctx, (key, "g"), idx, True, batch)
    c = T.add(T.mul(f, c_prev), T.mul(i, g))
    o = T.sigmoid(_gn(T.add(zo, T.mul(c, params.wco)), params, 3))
    h = T.mul(o, T.tanh(c))
    return MemoryCellState(c, h), h


class MemoryLayer:
    """A bank of memory cells, one per behaviour mode.

    Each sample in the batch activates exactly the cell of its mode; the states
    of all other cells are carried over untouched. With ``multimodal=False``
    a single shared cell serves every mode.
    """

    def __init__(self, modes: tuple[str, ...], in_channels: int, channels: int,
                 height: int, width: int, rng: np.random.Generator, *, kernel: int = 3,
                 groups: int | None = None, multimodal: bool = True, dtype="float32",
                 zero: bool = False, index: int = 0):
        self.modes = tuple(modes)
        self.multimodal = multimodal
        self.index = index
        self.channels = channels
        self.spatial = (height, width)
        self.dtype = dtype
        keys = self.modes if multimodal else ("shared",)
        self.cells = {k: MemoryCellParams.init(in_channels, channels, height, width, rng,
                                               kernel=kernel, groups=groups, dtype=dtype, zero=zero)
                      for k in keys}

    def cell_key(self, mode: str) -> str:
        if mode not in self.modes:
            raise UnknownMode(mode)
        return mode if self.multimodal else "shared"

    def parameters(self) -> dict[str, Tensor]:
        out = {}
        for k, p in self.cells.items():
            out.update(p.named(f"mem{self.index}.{k}."))
        return out

    def zero_state(self, batch: int) -> dict[str, MemoryCellState]:
        return {k: MemoryCellState.zeros(batch, self.channels, *self.spatial, dtype=self.dtype)
                for k in self.cells}

    def step(self, states: dict[str, MemoryCellState], modes: list[str], x: Tensor,
             ctx: DropoutContext | None = None) -> tuple[dict[str, MemoryCellState], Tensor]:
        """Route each row of ``x`` through the cell of its mode.

        ``modes`` holds one mode name per row; ``None`` marks rows with no
        active cell (their output is zero and no state changes).
        """
        n = x.shape[0]
        if len(modes) != n:
            raise ShapeMismatch(f"{len(modes)} modes for a batch of {n}")
        groups: dict[str, list[int]] = {}
        for row, m in enumerate(modes):
            if m is None:
                continue
            groups.setdefault(self.cell_key(m), []).append(row)
        new_states = dict(states)
        out = Tensor(np.zeros((n, self.channels) + self.spatial, dtype=x.dtype))
        for key in sorted(groups):
            rows = np.asarray(groups[key])
            st = states[key]
            if len(rows) == n:
                sub_state, sub_x = st, x
            else:
                sub_state = MemoryCellState(T.take_rows(st.c, rows), T.take_rows(st.h, rows))
                sub_x = T.take_rows(x, rows)
            nst, h = memory_cell_step(self.cells[key], sub_state, sub_x, ctx,
                                      key=(self.index, key), idx=None if len(rows) == n else rows,
                                      batch=n)
            if len(rows) == n:
                new_states[key] = nst
                out = h
            else:
                new_states[key] = MemoryCellState(T.scatter_rows(st.c, rows, nst.c),
                                                  T.scatter_rows(st.h, rows, nst.h))
                out = T.scatter_rows(out, rows, h)
        return new_states, out


def memory_layer_step(layer: MemoryLayer, states: dict[str, MemoryCellState], mode: str,
                      x: Tensor, ctx: DropoutContext | None = None):
    """Single-mode convenience wrapper: every row uses ``mode``."""
    return layer.step(states, [mode] * x.shape[0], x, ctx)
