"""Demonstration datasets, balancing, and truncated-BPTT training."""
from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import nnls

from ..dlm import DLM
from . import tensor as T
from .layers import DropoutContext
from .net import DecisionNet, NetState
from .tensor import Tensor

log = logging.getLogger(__name__)


class EmptyDataset(ValueError):
    pass


class EmptyMode(ValueError):
    pass


@dataclass(frozen=True)
class DemoRecord:
    observation: np.ndarray
    intention: DLM
    v: float
    theta: float
    timestamp: float = 0.0

    def __post_init__(self):
        if not (-1.0 <= self.v <= 1.0 and -1.0 <= self.theta <= 1.0):
            raise ValueError(f"control ({self.v}, {self.theta}) outside [-1, 1]")


@dataclass
class DemoDataset:
    """Sequence-ordered demonstrations stored column-wise.

    ``sequences`` holds half-open [start, stop) row ranges; nothing that reads
    temporal context may cross one of these boundaries.
    """

    observations: np.ndarray          # (N, S, S) float32
    modes: np.ndarray                 # (N,) DLM codes
    controls: np.ndarray              # (N, 2) float32, (v, theta)
    timestamps: np.ndarray            # (N,)
    sequences: list[tuple[int, int]]

    def __len__(self) -> int:
        return int(self.modes.shape[0])

    @classmethod
    def from_sequences(cls, seqs: list[list[DemoRecord]]) -> "DemoDataset":
        seqs = [s for s in seqs if s]
        if not seqs:
            raise EmptyDataset("no records")
        obs, modes, ctrl, ts, bounds = [], [], [], [], []
        start = 0
        for s in seqs:
            for r in s:
                obs.append(np.asarray(r.observation, dtype=np.float32))
                modes.append(DLM(r.intention).code)
                ctrl.append((r.v, r.theta))
                ts.append(r.timestamp)
            bounds.append((start, start + len(s)))
            start += len(s)
        return cls(np.stack(obs), np.asarray(modes, dtype=np.int32),
                   np.asarray(ctrl, dtype=np.float32), np.asarray(ts, dtype=np.float32), bounds)

    @classmethod
    def concat(cls, parts: list["DemoDataset"]) -> "DemoDataset":
        parts = [p for p in parts if p is not None and len(p)]
        if not parts:
            raise EmptyDataset("no records")
        bounds, start = [], 0
        for p in parts:
            bounds += [(a + start, b + start) for a, b in p.sequences]
            start += len(p)
        return cls(np.concatenate([p.observations for p in parts]), np.concatenate([p.modes for p in parts]),
                   np.concatenate([p.controls for p in parts]), np.concatenate([p.timestamps for p in parts]),
                   bounds)

    def subset(self, ranges: list[tuple[int, int]]) -> "DemoDataset":
        idx = np.concatenate([np.arange(a, b) for a, b in ranges]) if ranges else np.zeros(0, int)
        bounds, start = [], 0
        for a, b in ranges:
            bounds.append((start, start + b - a))
            start += b - a
        return DemoDataset(self.observations[idx], self.modes[idx], self.controls[idx],
                           self.timestamps[idx], bounds)

    def records(self):
        for i in range(len(self)):
            yield DemoRecord(self.observations[i], DLM.from_code(self.modes[i]),
                             float(self.controls[i, 0]), float(self.controls[i, 1]),
                             float(self.timestamps[i]))

    def mode_frequencies(self, ignore=(DLM.STOP,)) -> dict[DLM, float]:
        skip = {DLM(m).code for m in ignore}
        keep = np.array([m not in skip for m in self.modes], dtype=bool)
        codes, counts = np.unique(self.modes[keep], return_counts=True)
        total = counts.sum()
        return {DLM.from_code(c): n / total for c, n in zip(codes, counts)}


@dataclass(frozen=True)
class TrainConfig:
    seq_len: int = 35
    frame_stride: int = 3
    k1: int = 5
    k2: int = 10
    base_lr: float = 1e-7
    batch_size: int = 36
    weight_decay: float = 5e-4
    dropout: float = 0.3
    input_side: int = 112
    epochs: int = 200
    lr_decay_epochs: tuple[int, ...] = (70, 140)
    lr_decay: float = 0.1
    max_iters: int | None = None
    long_horizon_scale: int = 3          # L, k1, k2 multiplier for TakeElevator sequences
    betas: tuple[float, float] = (0.9, 0.999)
    adam_eps: float = 1e-8
    balance: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.seq_len < self.k1:
            raise ValueError("seq_len must be >= k1")
        if self.k2 < self.k1:
            raise ValueError("k2 must be >= k1")

    @property
    def lr(self) -> float:
        return self.base_lr * self.batch_size * self.k2

    def for_mode(self, mode: DLM) -> "TrainConfig":
        if mode is not DLM.TAKE_ELEVATOR:
            return self
        s = self.long_horizon_scale
        return dataclasses.replace(self, seq_len=self.seq_len * s, k1=self.k1 * s, k2=self.k2 * s)

    def lr_at_epoch(self, epoch: int) -> float:
        lr = self.lr
        for e in self.lr_decay_epochs:
            if epoch >= e:
                lr *= self.lr_decay
        return lr


class AdamW:
    """Adam with weight decay applied directly to the weights."""

    def __init__(self, params: dict[str, Tensor], lr: float, betas=(0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 0.0):
        self.params = params
        self.lr = lr
        self.b1, self.b2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.grad = None

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.b1 ** self.t
        c2 = 1.0 - self.b2 ** self.t
        for k, p in self.params.items():
            if self.lr == 0.0:
                continue
            g = p.grad
            if g is not None:
                self.m[k] = self.b1 * self.m[k] + (1 - self.b1) * g
                self.v[k] = self.b2 * self.v[k] + (1 - self.b2) * g * g
            update = (self.m[k] / c1) / (np.sqrt(self.v[k] / c2) + self.eps)
            p.data = (p.data - self.lr * (update + self.weight_decay * p.data)).astype(p.data.dtype)


# --------------------------------------------------------------------------
# balancing

def _chunks(dataset: DemoDataset, chunk_len: int) -> list[tuple[int, int]]:
    out = []
    for a, b in dataset.sequences:
        for s in range(a, b, chunk_len):
            out.append((s, min(b, s + chunk_len)))
    return out


def balance_dataset(dataset: DemoDataset, rng: np.random.Generator, chunk_len: int = 105,
                    pool_size: int | None = None, modes=None,
                    ignore=(DLM.STOP,)) -> DemoDataset:
    """Resample whole sub-sequences so every present mode is about equally frequent.

    Sequences are cut into chunks of ``chunk_len`` frames. Chunk weights come
    from a non-negative least-squares fit of the per-chunk mode counts to a
    uniform mode histogram; chunks are then drawn by systematic resampling.
    Calling this once per epoch re-draws the pool.
    """
    if len(dataset) == 0:
        raise EmptyDataset("cannot balance an empty dataset")
    skip = {DLM(m).code for m in ignore}
    present = sorted({int(c) for c in dataset.modes} - skip)
    if modes is not None:
        for m in modes:
            if DLM(m).code not in present:
                raise EmptyMode(f"no records for mode {DLM(m).value}")
    chunks = _chunks(dataset, chunk_len)
    if len(present) <= 1:
        log.warning("dataset holds a single mode; nothing to balance")
        return dataset
    counts = np.zeros((len(present), len(chunks)))
    for j, (a, b) in enumerate(chunks):
        codes = dataset.modes[a:b]
        for i, c in enumerate(present):
            counts[i, j] = np.count_nonzero(codes == c)
    total = counts.sum(axis=0)
    usable = total > 0
    a_mat = counts[:, usable]
    w = np.zeros(len(chunks))
    w_fit, _ = nnls(a_mat, np.ones(len(present)))
    w[usable] = w_fit
    if w.sum() <= 0:
        w[usable] = 1.0 / total[usable]
    # convert chunk weights into draw probabilities proportional to chunk count
    p = w / w.sum()
    n_out = pool_size or len(chunks)
    positions = (rng.random() + np.arange(n_out)) / n_out
    picks = np.searchsorted(np.cumsum(p), positions, side="right")
    picks = np.minimum(picks, len(chunks) - 1)
    rng.shuffle(picks)
    return dataset.subset([chunks[i] for i in picks])


# --------------------------------------------------------------------------
# TBPTT

def sequence_pool(dataset: DemoDataset, cfg: TrainConfig) -> list[np.ndarray]:
    """Index arrays of training sequences: every ``frame_stride``-th frame,
    cut into pieces of at most ``seq_len`` that never cross a boundary."""
    pool = []
    for a, b in dataset.sequences:
        for off in range(cfg.frame_stride):
            idx = np.arange(a + off, b, cfg.frame_stride)
            for s in range(0, len(idx), cfg.seq_len):
                piece = idx[s:s + cfg.seq_len]
                if len(piece) >= cfg.k1:
                    pool.append(piece)
    return pool


@dataclass
class TrainResult:
    losses: list[float] = field(default_factory=list)
    iterations: int = 0
    epochs: int = 0


def window_loss(net: DecisionNet, dataset: DemoDataset, batch: list[np.ndarray],
                 state: NetState, t0: int, t1: int, loss_from: int,
                 ctx: DropoutContext | None, inputs: dict | None = None
                 ) -> tuple[Tensor | None, NetState, list[NetState]]:
    """Forward steps [t0, t1) from ``state``; MSE over predictions at steps >= loss_from.

    ``inputs`` optionally maps a step to a differentiable observation tensor.
    """
    n = len(batch)
    loss = None
    states = []
    for t in range(t0, t1):
        rows = np.array([seq[t] if t < len(seq) else seq[-1] for seq in batch])
        valid = np.array([t < len(seq) for seq in batch], dtype=bool)
        codes = dataset.modes[rows]
        modes = [DLM.from_code(c) for c in codes]
        if ctx is not None:
            ctx.step = t
        obs = inputs[t] if inputs and t in inputs else dataset.observations[rows]
        out, state = net(obs, modes, state, ctx)
        states.append(state)
        if t < loss_from:
            continue
        weight = (valid & (codes != DLM.STOP.code)).astype(out.dtype)
        if weight.sum() == 0:
            continue
        step_loss = T.mse(out, dataset.controls[rows].astype(out.dtype), weight)
        loss = step_loss if loss is None else T.add(loss, step_loss)
    return loss, state, states


def tbptt_train(net: DecisionNet, dataset: DemoDataset, cfg: TrainConfig,
                rng: np.random.Generator | None = None, callback=None) -> TrainResult:
    """Train ``net`` in place with TBPTT(k1, k2) and AdamW.

    Each optimizer step consumes ``k1`` new observations per sequence; the loss
    is the MSE of those ``k1`` predictions and gradients flow back through the
    last ``k2`` steps only. The state entering a window is detached, so
    nothing older than the window receives gradient.
    """
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    rng = rng or np.random.default_rng(cfg.seed)
    params = net.parameters()
    opt = AdamW(params, cfg.lr, cfg.betas, cfg.adam_eps, cfg.weight_decay)
    ctx = DropoutContext(cfg.dropout, "train", seed=int(rng.integers(2 ** 31)))
    result = TrainResult()
    for epoch in range(cfg.epochs):
        opt.lr = cfg.lr_at_epoch(epoch)
        data = dataset
        if cfg.balance:
            data = balance_dataset(dataset, rng, chunk_len=cfg.seq_len * cfg.frame_stride)
        pool = sequence_pool(data, cfg)
        if not pool:
            raise EmptyDataset("no sequence is long enough for k1")
        order = rng.permutation(len(pool))
        for b0 in range(0, len(order), cfg.batch_size):
            batch = [pool[i] for i in order[b0:b0 + cfg.batch_size]]
            length = max(len(s) for s in batch)
            ctx.new_sequence()
            saved = {0: net.initial_state(len(batch))}
            for t1 in range(cfg.k1, length + cfg.k1, cfg.k1):
                t1 = min(t1, length)
                t0 = max(0, t1 - cfg.k2)
                loss, _, states = window_loss(net, data, batch, saved[t0].detach(), t0, t1,
                                               max(t0, t1 - cfg.k1), ctx)
                for k, st in enumerate(states):
                    saved[t0 + k + 1] = st.detach()
                for k in [k for k in saved if k < t1 - cfg.k2]:
                    del saved[k]
                if loss is None:
                    continue
                opt.zero_grad()
                loss.backward()
                opt.step()
                result.losses.append(float(loss.data) / max(1, t1 - max(t0, t1 - cfg.k1)))
                result.iterations += 1
                if callback is not None:
                    callback(result)
                if cfg.max_iters is not None and result.iterations >= cfg.max_iters:
                    result.epochs = epoch + 1
                    return result
        result.epochs = epoch + 1
    return result


def predict_sequence(net: DecisionNet, observations: np.ndarray, modes, phase: str = "eval",
                     seed: int = 0, dropout: float | None = None) -> np.ndarray:
    """Run the net over one sequence and return the (T, 2) controls."""
    state = net.initial_state(1)
    ctx = DropoutContext(net.config.dropout if dropout is None else dropout, phase, seed=seed)
    out = []
    with T.no_grad():
        for t, (obs, m) in enumerate(zip(observations, modes)):
            ctx.step = t
            y, state = net(np.asarray(obs)[None], [m], state, ctx)
            out.append(y.data[0])
    return np.asarray(out)


def pooled_features(net: DecisionNet, dataset: DemoDataset) -> tuple[np.ndarray, list[DLM]]:
    """One pooled vector per record (sequences replayed in order), with its mode."""
    feats, labels = [], []
    with T.no_grad():
        for a, b in dataset.sequences:
            state = net.initial_state(1)
            for i in range(a, b):
                mode = DLM.from_code(dataset.modes[i])
                v, state, _ = net.features(dataset.observations[i][None], [mode], state)
                feats.append(v.data[0].copy())
                labels.append(mode)
    return np.asarray(feats), labels
