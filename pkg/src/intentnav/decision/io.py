"""On-disk formats for demonstrations, checkpoints and feature dumps.

Dataset directory::

    records.bin   repeated [<f timestamp><i mode code><f v><f theta>][S*S*C float32 image]
    index.json    side, channels, record count and sequence boundaries

Checkpoint::

    b"DCSN" <u4 version> <u4 header length> header JSON, then raw parameter blobs
    in the order of the header's shape table.
"""
from __future__ import annotations

import csv
import json
import struct
from pathlib import Path

import numpy as np

from ..dlm import DLM
from .net import DecisionNet, NetConfig
from .train import DemoDataset, pooled_features

RECORD_HEADER = struct.Struct("<fiff")
CHECKPOINT_MAGIC = b"DCSN"
CHECKPOINT_VERSION = 1
DATASET_VERSION = 1


class FormatError(ValueError):
    pass


def save_dataset(dataset: DemoDataset, directory: str | Path) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    obs = np.ascontiguousarray(dataset.observations, dtype="<f4")
    side = obs.shape[-1]
    channels = 1 if obs.ndim == 3 else obs.shape[1]
    with open(d / "records.bin", "wb") as f:
        for i in range(len(dataset)):
            f.write(RECORD_HEADER.pack(float(dataset.timestamps[i]), int(dataset.modes[i]),
                                       float(dataset.controls[i, 0]), float(dataset.controls[i, 1])))
            f.write(obs[i].tobytes())
    index = {"version": DATASET_VERSION, "side": int(side), "channels": int(channels),
             "count": len(dataset), "sequences": [list(map(int, s)) for s in dataset.sequences]}
    (d / "index.json").write_text(json.dumps(index, indent=1) + "\n")
    return d


def load_dataset(directory: str | Path) -> DemoDataset:
    d = Path(directory)
    index = json.loads((d / "index.json").read_text())
    if index.get("version") != DATASET_VERSION:
        raise FormatError(f"unsupported dataset version {index.get('version')}")
    side, ch, n = index["side"], index["channels"], index["count"]
    shape = (side, side) if ch == 1 else (ch, side, side)
    img_bytes = 4 * side * side * ch
    rec = RECORD_HEADER.size + img_bytes
    raw = (d / "records.bin").read_bytes()
    if len(raw) != rec * n:
        raise FormatError(f"records.bin holds {len(raw)} bytes, expected {rec * n}")
    ts = np.empty(n, np.float32)
    modes = np.empty(n, np.int32)
    ctrl = np.empty((n, 2), np.float32)
    obs = np.empty((n,) + shape, np.float32)
    for i in range(n):
        off = i * rec
        ts[i], modes[i], ctrl[i, 0], ctrl[i, 1] = RECORD_HEADER.unpack_from(raw, off)
        obs[i] = np.frombuffer(raw, "<f4", side * side * ch, off + RECORD_HEADER.size).reshape(shape)
    seqs = [tuple(s) for s in index["sequences"]]
    if seqs and (seqs[0][0] != 0 or seqs[-1][1] != n
                 or any(a[1] != b[0] for a, b in zip(seqs, seqs[1:]))):
        raise FormatError("sequence boundaries do not tile the record range")
    return DemoDataset(obs, modes, ctrl, ts, seqs)


def save_checkpoint(net: DecisionNet, path: str | Path, extra: dict | None = None) -> Path:
    params = net.parameters()
    table, offset = [], 0
    for name, p in params.items():
        nbytes = p.data.astype(p.data.dtype.newbyteorder("<")).nbytes
        table.append({"name": name, "shape": list(p.shape), "dtype": p.data.dtype.str.lstrip("<>|="),
                      "offset": offset, "nbytes": nbytes})
        offset += nbytes
    header = json.dumps({"config": net.config.to_dict(), "params": table, "extra": extra or {}},
                        sort_keys=True).encode()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<II", CHECKPOINT_VERSION, len(header)))
        f.write(header)
        for p in params.values():
            f.write(np.ascontiguousarray(p.data, dtype=p.data.dtype.newbyteorder("<")).tobytes())
    return path


def read_checkpoint_header(path: str | Path) -> dict:
    with open(path, "rb") as f:
        return _header(f.read())[0]


def _header(raw: bytes) -> tuple[dict, int]:
    if raw[:4] != CHECKPOINT_MAGIC:
        raise FormatError("not a checkpoint file")
    version, hlen = struct.unpack_from("<II", raw, 4)
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    start = 12 + hlen
    return json.loads(raw[12:start]), start


def load_checkpoint(path: str | Path) -> DecisionNet:
    raw = Path(path).read_bytes()
    header, start = _header(raw)
    net = DecisionNet(NetConfig.from_dict(header["config"]), zero=True)
    params = net.parameters()
    names = [e["name"] for e in header["params"]]
    if set(names) != set(params):
        raise FormatError("checkpoint parameter names do not match the configured net")
    for e in header["params"]:
        p = params[e["name"]]
        if tuple(e["shape"]) != p.shape:
            raise FormatError(f"{e['name']}: shape {e['shape']} vs {p.shape}")
        blob = np.frombuffer(raw, "<" + e["dtype"], int(np.prod(e["shape"], dtype=np.int64)),
                             start + e["offset"])
        p.data[...] = blob.reshape(p.shape)
    return net


def dump_pooled_features(net: DecisionNet, dataset: DemoDataset,
                         path: str | Path | None = None) -> list[tuple[np.ndarray, DLM]]:
    """Pooled vectors (before the heads), one per record; optionally written as CSV."""
    feats, labels = pooled_features(net, dataset)
    records = list(zip(feats, labels))
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", newline="") as f:
            w = csv.writer(f)
            w.writerow([f"f{i}" for i in range(feats.shape[1] if len(feats) else 0)] + ["mode"])
            for vec, mode in records:
                w.writerow([repr(float(x)) for x in vec] + [mode.value])
    return records


def read_feature_dump(path: str | Path) -> tuple[np.ndarray, list[DLM]]:
    with open(path, newline="") as f:
        rows = list(csv.reader(f))
    body = rows[1:]
    vecs = np.array([[float(x) for x in r[:-1]] for r in body])
    return vecs, [DLM(r[-1]) for r in body]
