"""A mode-conditioned toy task: the image carries no steering information,
so the only way to fit the targets is to use the conditioning mode."""
from __future__ import annotations

import numpy as np

from ..dlm import DLM
from . import tensor as T
from .layers import DropoutContext
from .net import DecisionNet
from .train import DemoDataset, DemoRecord

MODE_THETA = {DLM.GO_FORWARD: 0.0, DLM.TURN_LEFT: 0.6, DLM.TURN_RIGHT: -0.6}
TASK_V = 0.5


def random_scene(side: int, rng: np.random.Generator) -> np.ndarray:
    """A few random rectangles on a dim background."""
    img = np.full((side, side), 0.25, dtype=np.float32)
    for _ in range(rng.integers(2, 5)):
        r0, c0 = rng.integers(0, side - 2, size=2)
        h, w = rng.integers(2, max(3, side // 3), size=2)
        img[r0:r0 + h, c0:c0 + w] = rng.choice([0.0, 0.75, 1.0])
    return img


def make_mode_task(n_sequences: int, length: int, side: int, rng: np.random.Generator,
                   modes=tuple(MODE_THETA), segments: int = 1) -> DemoDataset:
    """Sequences of random scenes; theta is a fixed constant per mode."""
    seqs = []
    for s in range(n_sequences):
        cuts = np.sort(rng.choice(np.arange(1, length), size=segments - 1, replace=False)) \
            if segments > 1 else np.array([], dtype=int)
        bounds = [0, *cuts.tolist(), length]
        recs = []
        first = modes[s % len(modes)]
        for k in range(len(bounds) - 1):
            mode = first if k == 0 else modes[rng.integers(len(modes))]
            for t in range(bounds[k], bounds[k + 1]):
                recs.append(DemoRecord(random_scene(side, rng), mode, TASK_V, MODE_THETA[mode], float(t)))
        seqs.append(recs)
    return DemoDataset.from_sequences(seqs)


def dataset_loss(net: DecisionNet, dataset: DemoDataset) -> float:
    """Mean squared error over every non-Stop record, eval phase, sequences replayed in order."""
    total, count = 0.0, 0
    with T.no_grad():
        for a, b in dataset.sequences:
            state = net.initial_state(1)
            for i in range(a, b):
                mode = DLM.from_code(dataset.modes[i])
                y, state = net(dataset.observations[i][None], [mode], state)
                if mode is DLM.STOP:
                    continue
                total += float(((y.data[0] - dataset.controls[i]) ** 2).mean())
                count += 1
    return total / max(count, 1)


def theta_separation(net: DecisionNet, side: int, rng: np.random.Generator,
                     n_sequences: int = 4, length: int = 10) -> float:
    """Mean |theta(TurnLeft) - theta(TurnRight)| when the same held-out inputs are
    fed under each mode from a fresh state."""
    gaps = []
    ctx = DropoutContext(0.0, "eval")
    with T.no_grad():
        for _ in range(n_sequences):
            frames = [random_scene(side, rng) for _ in range(length)]
            thetas = {}
            for mode in (DLM.TURN_LEFT, DLM.TURN_RIGHT):
                state = net.initial_state(1)
                out = []
                for f in frames:
                    y, state = net(f[None], [mode], state, ctx)
                    out.append(y.data[0, 1])
                thetas[mode] = np.asarray(out)
            gaps.append(np.abs(thetas[DLM.TURN_LEFT] - thetas[DLM.TURN_RIGHT]))
    return float(np.mean(gaps))


def centroid_statistics(features: np.ndarray, labels) -> tuple[float, float]:
    """(mean pairwise distance between mode centroids, mean distance of a
    vector to its own mode centroid)."""
    labels = np.asarray([DLM(m).code for m in labels])
    keys = np.unique(labels)
    cents = {k: features[labels == k].mean(axis=0) for k in keys}
    intra = float(np.mean([np.linalg.norm(features[i] - cents[labels[i]])
                           for i in range(len(features))]))
    pair = [np.linalg.norm(cents[a] - cents[b]) for i, a in enumerate(keys) for b in keys[i + 1:]]
    inter = float(np.mean(pair)) if pair else 0.0
    return inter, intra
