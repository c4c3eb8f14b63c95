import logging

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from intentnav.decision import tensor as T
from intentnav.decision.gradcheck import check_gradients
from intentnav.decision.io import (FormatError, dump_pooled_features, load_checkpoint, load_dataset,
                                   read_feature_dump, save_checkpoint, save_dataset)
from intentnav.decision.layers import (DropoutContext, MemoryCellParams, MemoryCellState,
                                       MemoryLayer, ShapeMismatch, UnknownMode, channel_dropout,
                                       memory_cell_step, memory_layer_step)
from intentnav.decision.net import (DecisionNet, UnknownKind, baseline_config, build_baseline,
                                    forward, full_scale_config, tiny_config)
from intentnav.decision.synthetic import make_mode_task, random_scene
from intentnav.decision.tensor import IndivisibleChannels, Tensor
from intentnav.decision.train import (AdamW, DemoDataset, DemoRecord, EmptyDataset, EmptyMode,
                                      TrainConfig, balance_dataset, tbptt_train, window_loss)
from intentnav.dlm import DLM

GF, TL, TR, STOP = DLM.GO_FORWARD, DLM.TURN_LEFT, DLM.TURN_RIGHT, DLM.STOP
TOL = 1e-4


def f64(shape, rng, scale=1.0):
    return T.parameter(rng.standard_normal(shape) * scale)


# -- kernel gradients ---------------------------------------------------------

@pytest.mark.parametrize("stride,padding", [(1, 1), (2, 1), (1, 0)])
def test_conv2d_gradients(stride, padding):
    rng = np.random.default_rng(0)
    x, w, b = f64((2, 3, 6, 6), rng), f64((4, 3, 3, 3), rng), f64((4,), rng)
    probe = rng.standard_normal(T.conv2d(x, w, b, stride, padding).shape)
    errs = check_gradients(lambda: T.sum_all(T.mul(T.conv2d(x, w, b, stride, padding), probe)),
                           {"x": x, "w": w, "b": b})
    assert max(errs.values()) <= TOL, errs


def test_group_norm_gradients():
    rng = np.random.default_rng(1)
    x, g, b = f64((2, 4, 5, 5), rng), f64((4,), rng), f64((4,), rng)
    probe = rng.standard_normal(x.shape)
    errs = check_gradients(lambda: T.sum_all(T.mul(T.group_norm(x, 2, g, b), probe)),
                           {"x": x, "gamma": g, "beta": b})
    assert max(errs.values()) <= TOL, errs


def test_memory_cell_gradients_over_three_steps():
    rng = np.random.default_rng(2)
    p = MemoryCellParams.init(3, 4, 6, 6, rng, groups=2, dtype="float64")
    xs = [Tensor(rng.standard_normal((2, 3, 6, 6))) for _ in range(3)]

    def loss():
        s = MemoryCellState.zeros(2, 4, 6, 6, dtype="float64")
        total = None
        for x in xs:
            s, h = memory_cell_step(p, s, x)
            term = T.sum_all(T.mul(h, h))
            total = term if total is None else T.add(total, term)
        return total

    errs = check_gradients(loss, p.named())
    assert max(errs.values()) <= TOL, errs


def test_multimodal_layer_gradients():
    rng = np.random.default_rng(3)
    layer = MemoryLayer((GF.value, TL.value, TR.value), 3, 4, 6, 6, rng, groups=2, dtype="float64")
    xs = [Tensor(rng.standard_normal((2, 3, 6, 6))) for _ in range(3)]
    modes = [[TL.value, GF.value], [TR.value, TL.value], [TL.value, TL.value]]

    def loss():
        s = layer.zero_state(2)
        total = None
        for x, m in zip(xs, modes):
            s, h = layer.step(s, m, x)
            term = T.sum_all(T.mul(h, h))
            total = term if total is None else T.add(total, term)
        return total

    errs = check_gradients(loss, layer.parameters())
    assert max(errs.values()) <= TOL, errs


def test_head_gradients():
    net = DecisionNet(tiny_config(channels=(4, 4, 6), head_hidden=5, dtype="float64"))
    rng = np.random.default_rng(4)
    v = T.parameter(rng.standard_normal((3, 6)))
    names = [TL.value, TR.value, TL.value]
    params = {k: p for k, p in net.parameters().items() if k.startswith("head.")}
    params["v"] = v
    probe = rng.standard_normal((3, 2))
    errs = check_gradients(lambda: T.sum_all(T.mul(net.head_forward(v, names), probe)), params)
    assert max(errs.values()) <= TOL, errs


# -- GroupNorm ----------------------------------------------------------------

def test_group_norm_constant_input_is_zero():
    x = Tensor(np.full((1, 4, 3, 3), 7.0))
    assert np.all(T.group_norm(x, 2).data == 0.0)


def test_group_norm_two_planes():
    x = np.stack([np.full((4, 4), 1.0), np.full((4, 4), 3.0)])[None]
    out = T.group_norm(Tensor(x), 1).data
    # variance of the group is 1, so the eps-regularised value is 1/sqrt(1 + eps)
    expected = 1.0 / np.sqrt(1.0 + 1e-5)
    np.testing.assert_allclose(out[0, 0], -expected, atol=1e-12)
    np.testing.assert_allclose(out[0, 1], expected, atol=1e-12)
    np.testing.assert_allclose(out[0, 0], -1.0, atol=1e-5)
    affine = T.group_norm(Tensor(x), 1, Tensor(np.full(2, 2.0)), Tensor(np.ones(2))).data
    np.testing.assert_allclose(affine[0, 0], -1.0, atol=2e-5)
    np.testing.assert_allclose(affine[0, 1], 3.0, atol=2e-5)


def test_group_norm_indivisible():
    with pytest.raises(IndivisibleChannels):
        T.group_norm(Tensor(np.zeros((1, 6, 2, 2))), 4)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([1, 2, 4]), st.floats(2.0, 50.0))
def test_group_norm_statistics(seed, groups, scale):
    # spread well above sqrt(eps) so the eps shrinkage of the variance stays below 1e-5
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((2, 8, 5, 5)) * scale + rng.normal(0, 5)
    out = T.group_norm(Tensor(x), groups).data.reshape(2, groups, -1)
    assert np.abs(out.mean(axis=2)).max() <= 1e-6
    assert np.abs(out.var(axis=2) - 1.0).max() <= 1e-5


# -- dropout ------------------------------------------------------------------

def test_dropout_rate_zero_and_eval_are_identity():
    x = Tensor(np.random.default_rng(0).random((2, 3, 4, 4)))
    rng = np.random.default_rng(0)
    assert channel_dropout(x, 0.0, rng, "train") is x
    assert channel_dropout(x, 0.5, rng, "eval") is x


def test_dropout_survival_rate():
    x = Tensor(np.ones((10_000, 1, 1, 1)))
    y = channel_dropout(x, 0.5, np.random.default_rng(4), "train").data
    assert abs((y > 0).mean() - 0.5) <= 0.05
    assert set(np.unique(y)) <= {0.0, 2.0}


def test_dropout_same_seed_same_mask():
    x = Tensor(np.ones((4, 8, 2, 2)))
    a = channel_dropout(x, 0.3, np.random.default_rng(7), "mc").data
    b = channel_dropout(x, 0.3, np.random.default_rng(7), "mc").data
    assert np.array_equal(a, b)


def test_dropout_bad_rate():
    with pytest.raises(ValueError):
        channel_dropout(Tensor(np.ones((1, 1, 1, 1))), 1.0, np.random.default_rng(0), "train")


def test_recurrent_masks_fixed_within_sequence():
    ctx = DropoutContext(0.5, "mc", seed=3)
    ctx.step = 0
    h0, x0 = ctx.mask("h", (2, 16), "float64", True), ctx.mask("x", (2, 16), "float64", False)
    ctx.step = 1
    h1, x1 = ctx.mask("h", (2, 16), "float64", True), ctx.mask("x", (2, 16), "float64", False)
    assert np.array_equal(h0, h1)
    assert not np.array_equal(x0, x1)
    ctx.step = 0
    assert np.array_equal(ctx.mask("x", (2, 16), "float64", False), x0)


# -- memory cell --------------------------------------------------------------

def test_zero_cell_stays_zero():
    p = MemoryCellParams.init(2, 4, 5, 5, np.random.default_rng(0), dtype="float64", zero=True)
    s = MemoryCellState.zeros(1, 4, 5, 5, dtype="float64")
    for _ in range(4):
        s, h = memory_cell_step(p, s, Tensor(np.random.default_rng(1).random((1, 2, 5, 5))))
        assert np.all(s.c.data == 0) and np.all(h.data == 0)


def test_zero_cell_halves_unit_state():
    p = MemoryCellParams.init(2, 4, 5, 5, np.random.default_rng(0), dtype="float64", zero=True)
    s = MemoryCellState(Tensor(np.ones((1, 4, 5, 5))), Tensor(np.zeros((1, 4, 5, 5))))
    s, _ = memory_cell_step(p, s, Tensor(np.ones((1, 2, 5, 5))))
    np.testing.assert_allclose(s.c.data, 0.5, atol=1e-15)


def test_cell_shape_mismatch():
    p = MemoryCellParams.init(2, 4, 5, 5, np.random.default_rng(0))
    s = MemoryCellState.zeros(1, 4, 5, 5)
    with pytest.raises(ShapeMismatch):
        memory_cell_step(p, s, Tensor(np.ones((1, 3, 5, 5), dtype=np.float32)))


# -- multimodal isolation -----------------------------------------------------

def _layer(multimodal=True):
    return MemoryLayer((GF.value, TL.value, TR.value), 2, 4, 5, 5, np.random.default_rng(5),
                       groups=2, multimodal=multimodal, dtype="float64")


def test_inactive_cell_untouched():
    layer = _layer()
    states = layer.zero_state(1)
    x = Tensor(np.random.default_rng(0).random((1, 2, 5, 5)))
    states, _ = memory_layer_step(layer, states, TL.value, x)
    before = states[TR.value]
    states, _ = memory_layer_step(layer, states, TL.value, x)
    assert states[TR.value] is before


@settings(max_examples=25, deadline=None)
@given(st.lists(st.sampled_from([GF.value, TL.value, TR.value]), min_size=1, max_size=8),
       st.integers(0, 1000))
def test_replay_equivalence(modes, seed):
    layer = _layer()
    rng = np.random.default_rng(seed)
    xs = [Tensor(rng.random((1, 2, 5, 5))) for _ in modes]
    states = layer.zero_state(1)
    for m, x in zip(modes, xs):
        states, _ = memory_layer_step(layer, states, m, x)
    for mode in set(modes):
        solo = layer.zero_state(1)
        for m, x in zip(modes, xs):
            if m == mode:
                solo, _ = memory_layer_step(layer, solo, m, x)
        assert np.array_equal(solo[mode].c.data, states[mode].c.data)
        assert np.array_equal(solo[mode].h.data, states[mode].h.data)


def test_batched_rows_match_single_rows():
    layer = _layer()
    rng = np.random.default_rng(6)
    x = Tensor(rng.random((3, 2, 5, 5)))
    states, h = layer.step(layer.zero_state(3), [TL.value, TR.value, TL.value], x)
    for row, m in enumerate([TL.value, TR.value, TL.value]):
        s1, h1 = memory_layer_step(layer, layer.zero_state(1), m, Tensor(x.data[row:row + 1]))
        np.testing.assert_allclose(h1.data[0], h.data[row], rtol=0, atol=1e-12)


def test_equal_cells_equal_outputs():
    layer = _layer()
    ref = layer.cells[GF.value]
    for k in layer.cells:
        layer.cells[k] = ref
    x = Tensor(np.random.default_rng(0).random((1, 2, 5, 5)))
    outs = [memory_layer_step(layer, layer.zero_state(1), m, x)[1].data for m in (GF.value, TL.value)]
    assert np.array_equal(*outs)


def test_unknown_mode():
    layer = _layer()
    with pytest.raises(UnknownMode):
        memory_layer_step(layer, layer.zero_state(1), "Upstairs", Tensor(np.zeros((1, 2, 5, 5))))


# -- full net -----------------------------------------------------------------

def test_zero_net_outputs_zero():
    net = DecisionNet(tiny_config(), zero=True)
    y, _ = forward(net, np.random.default_rng(0).random((16, 16)), TL, net.initial_state())
    assert np.array_equal(y.data, np.zeros((1, 2)))


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10_000), st.floats(-100, 100))
def test_outputs_in_unit_box(seed, scale):
    net = DecisionNet(tiny_config(seed=seed % 7))
    x = np.random.default_rng(seed).standard_normal((3, 16, 16)) * scale
    y, _ = net(x, [GF, TL, TR], net.initial_state(3))
    assert np.all(np.abs(y.data) <= 1.0)


def test_eval_forward_deterministic():
    net = DecisionNet(tiny_config(dropout=0.3))
    x = np.random.default_rng(1).random((16, 16))
    s = net.initial_state()
    ctx = DropoutContext(0.3, "eval")
    a, _ = forward(net, x, TR, s, ctx)
    b, _ = forward(net, x, TR, s, ctx)
    assert np.array_equal(a.data, b.data)


def test_stop_is_zero_and_keeps_state():
    net = DecisionNet(tiny_config())
    s = net.initial_state()
    s, _ = (lambda r: (r[1], r[0]))(forward(net, np.ones((16, 16)), TL, s))
    y, s2 = forward(net, np.ones((16, 16)), STOP, s)
    assert np.array_equal(y.data, np.zeros((1, 2)))
    for b in range(3):
        for k in s.memory[b]:
            assert np.array_equal(s.memory[b][k].h.data, s2.memory[b][k].h.data)


def test_forward_errors():
    net = DecisionNet(tiny_config())
    with pytest.raises(ShapeMismatch):
        forward(net, np.zeros((12, 12)), GF, net.initial_state())
    with pytest.raises(UnknownMode):
        forward(net, np.zeros((16, 16)), DLM.LINKWAY, net.initial_state())


def test_full_scale_preset_geometry():
    cfg = full_scale_config()
    assert cfg.input_side == 112 and cfg.pooled_dim == 1024 and cfg.gn_groups == 32


# -- baselines ----------------------------------------------------------------

def test_feedforward_ablation_ignores_history():
    net = build_baseline("ablation w/o L#1-3", tiny_config())
    rng = np.random.default_rng(0)
    frames = rng.random((5, 16, 16))
    last = rng.random((16, 16))

    def run(order):
        s = net.initial_state()
        for i in order:
            _, s = forward(net, frames[i], GF, s)
        return forward(net, last, GF, s)[0].data

    assert np.array_equal(run([0, 1, 2, 3, 4]), run([4, 2, 0, 3, 1]))


def test_shared_memory_state_independent_of_mode():
    net = build_baseline("no_multimodal_memory", tiny_config())
    x = np.random.default_rng(0).random((16, 16))
    states = [forward(net, x, m, net.initial_state())[1] for m in (GF, TL, TR)]
    for b in range(3):
        cells = [s.memory[b]["shared"] for s in states]
        assert all(np.array_equal(cells[0].c.data, c.c.data) for c in cells)


def test_mf_cnn_stacks_five_frames():
    net = build_baseline("mf_cnn", tiny_config())
    assert net.convs_in[0].weight.shape[1] == 5 * net.config.in_channels


def test_recurrent_baselines_use_history():
    rng = np.random.default_rng(1)
    frames, last = rng.random((4, 16, 16)), rng.random((16, 16))
    for kind in ("decision", "cnn_lstm", "mf_cnn", "wo_l23", "wo_l12"):
        net = build_baseline(kind, tiny_config())
        outs = []
        for order in ([0, 1, 2, 3], [3, 1, 2, 0]):
            s = net.initial_state()
            for i in order:
                _, s = forward(net, frames[i], GF, s)
            outs.append(forward(net, last, GF, s)[0].data)
        assert not np.array_equal(*outs), kind


def test_unknown_kind():
    with pytest.raises(UnknownKind):
        baseline_config("resnet50")


# -- training -----------------------------------------------------------------

def _records(mode, n, side=16, theta=0.0, seed=0):
    rng = np.random.default_rng(seed)
    return [DemoRecord(rng.random((side, side)).astype(np.float32), mode, 0.5, theta, float(t))
            for t in range(n)]


def test_default_learning_rate():
    cfg = TrainConfig()
    assert cfg.lr == pytest.approx(3.6e-5, rel=1e-12)
    assert cfg.lr_at_epoch(0) == cfg.lr
    assert cfg.lr_at_epoch(70) == pytest.approx(3.6e-6)
    assert cfg.lr_at_epoch(150) == pytest.approx(3.6e-7)


def test_train_config_validation():
    with pytest.raises(ValueError):
        TrainConfig(seq_len=3, k1=5)
    with pytest.raises(ValueError):
        TrainConfig(k1=5, k2=4)


def test_zero_lr_leaves_parameters():
    net = DecisionNet(tiny_config())
    before = {k: p.data.copy() for k, p in net.parameters().items()}
    ds = DemoDataset.from_sequences([_records(TL, 12, theta=0.5), _records(TR, 12, theta=-0.5)])
    tbptt_train(net, ds, TrainConfig(seq_len=6, frame_stride=1, k1=3, k2=6, base_lr=0.0,
                                     batch_size=2, epochs=2))
    for k, p in net.parameters().items():
        assert np.array_equal(p.data, before[k]), k


def test_empty_dataset():
    with pytest.raises(EmptyDataset):
        DemoDataset.from_sequences([])


def test_adamw_decoupled_decay():
    p = T.parameter(np.array([2.0]))
    opt = AdamW({"p": p}, lr=0.1, weight_decay=0.5)
    p.grad = np.array([0.0])
    opt.step()
    assert p.data[0] == pytest.approx(2.0 - 0.1 * 0.5 * 2.0)


def test_truncation_cuts_gradient():
    cfg = tiny_config(dtype="float64")
    net = DecisionNet(cfg)
    ds = make_mode_task(2, 8, 16, np.random.default_rng(0))
    ds.observations = ds.observations.astype(np.float64)
    ds.controls = ds.controls.astype(np.float64)
    batch = [np.arange(a, b) for a, b in ds.sequences]
    inputs = {t: T.parameter(ds.observations[[s[t] for s in batch]][:, None]) for t in range(8)}
    # warm-up steps 0..3 with differentiable inputs, then a window [3, 8) from the detached state
    _, state, _ = window_loss(net, ds, batch, net.initial_state(2), 0, 3, 3, None, inputs)
    loss, _, _ = window_loss(net, ds, batch, state.detach(), 3, 8, 5, None, inputs)
    loss.backward()
    for t in range(3):
        assert inputs[t].grad is None or not np.any(inputs[t].grad)
    assert all(np.any(inputs[t].grad) for t in range(3, 8))
    # without truncation the same early inputs do receive gradient
    for p in inputs.values():
        p.grad = None
    full, _, _ = window_loss(net, ds, batch, net.initial_state(2), 0, 8, 5, None, inputs)
    full.backward()
    assert np.any(inputs[0].grad)
    # perturbing a pre-window input changes the window loss value but not the
    # gradient path: the analytic gradient there stays exactly zero
    inputs[0].data += 0.1
    for p in inputs.values():
        p.grad = None
    _, state, _ = window_loss(net, ds, batch, net.initial_state(2), 0, 3, 3, None, inputs)
    loss2, _, _ = window_loss(net, ds, batch, state.detach(), 3, 8, 5, None, inputs)
    loss2.backward()
    assert float(loss2.data) != float(loss.data)
    assert inputs[0].grad is None or not np.any(inputs[0].grad)


def test_short_training_reduces_loss():
    net = DecisionNet(tiny_config())
    ds = make_mode_task(6, 12, 16, np.random.default_rng(0))
    cfg = TrainConfig(seq_len=12, frame_stride=1, k1=4, k2=8, base_lr=2e-3 / 48, batch_size=6,
                      epochs=100, max_iters=30, dropout=0.0, lr_decay_epochs=())
    res = tbptt_train(net, ds, cfg, np.random.default_rng(0))
    assert res.iterations == 30
    assert np.mean(res.losses[-5:]) < 0.5 * np.mean(res.losses[:3])


def test_sequence_pool_respects_boundaries():
    from intentnav.decision.train import sequence_pool
    ds = DemoDataset.from_sequences([_records(GF, 20), _records(TL, 7, seed=1)])
    for piece in sequence_pool(ds, TrainConfig(seq_len=5, frame_stride=3, k1=2, k2=4)):
        seq = [s for s in ds.sequences if s[0] <= piece[0] < s[1]][0]
        assert piece[-1] < seq[1]
        assert np.all(np.diff(piece) == 3)


def test_long_horizon_mode_scales_windows():
    cfg = TrainConfig().for_mode(DLM.TAKE_ELEVATOR)
    assert (cfg.seq_len, cfg.k1, cfg.k2) == (105, 15, 30)
    assert TrainConfig().for_mode(GF) == TrainConfig()


# -- balancing ----------------------------------------------------------------

def _seq_dataset(counts):
    seqs, seed = [], 0
    for mode, n_seq in counts.items():
        for _ in range(n_seq):
            seqs.append(_records(mode, 10, side=4, seed=seed))
            seed += 1
    return DemoDataset.from_sequences(seqs)


def test_balance_ninety_ten():
    ds = _seq_dataset({GF: 18, TL: 2})
    assert ds.mode_frequencies()[GF] == pytest.approx(0.9)
    out = balance_dataset(ds, np.random.default_rng(0), chunk_len=10)
    freq = out.mode_frequencies()
    assert abs(freq[GF] - 0.5) <= 0.1 and abs(freq[TL] - 0.5) <= 0.1


def test_balance_uniform_stays_uniform():
    ds = _seq_dataset({GF: 5, TL: 5, TR: 5})
    freq = balance_dataset(ds, np.random.default_rng(1), chunk_len=10).mode_frequencies()
    assert all(abs(f - 1 / 3) <= 0.1 for f in freq.values())


def test_balance_mixed_sequences_keep_contiguity():
    rng = np.random.default_rng(2)
    seqs = []
    for s in range(30):
        turn = TL if s % 2 else TR
        seqs.append(_records(GF, 12, side=4, seed=s) + _records(turn, 8, side=4, seed=100 + s))
    ds = DemoDataset.from_sequences(seqs)
    out = balance_dataset(ds, rng, chunk_len=5)
    assert all(b - a == 5 for a, b in out.sequences)
    freq = out.mode_frequencies()
    assert all(abs(f - 1 / 3) <= 0.1 for f in freq.values()), freq


def test_balance_single_mode_warns(caplog):
    ds = _seq_dataset({GF: 3})
    with caplog.at_level(logging.WARNING):
        out = balance_dataset(ds, np.random.default_rng(0))
    assert out is ds
    assert "single mode" in caplog.text


def test_balance_missing_mode():
    with pytest.raises(EmptyMode):
        balance_dataset(_seq_dataset({GF: 3, TL: 1}), np.random.default_rng(0), modes=[GF, TR])


# -- persistence and feature dump --------------------------------------------

def test_dataset_round_trip(tmp_path):
    ds = DemoDataset.from_sequences([_records(GF, 5), _records(TL, 3, theta=0.25, seed=1)])
    back = load_dataset(save_dataset(ds, tmp_path / "dataset"))
    assert back.sequences == ds.sequences
    for name in ("observations", "modes", "controls", "timestamps"):
        assert np.array_equal(getattr(back, name), getattr(ds, name))


def test_dataset_truncated_file(tmp_path):
    d = save_dataset(DemoDataset.from_sequences([_records(GF, 3)]), tmp_path / "ds")
    raw = (d / "records.bin").read_bytes()
    (d / "records.bin").write_bytes(raw[:-1])
    with pytest.raises(FormatError):
        load_dataset(d)


def test_checkpoint_round_trip(tmp_path):
    net = DecisionNet(tiny_config(seed=3))
    path = save_checkpoint(net, tmp_path / "ckpt" / "net.dcsn")
    back = load_checkpoint(path)
    assert back.config == net.config
    x = np.random.default_rng(0).random((16, 16))
    a = forward(net, x, TL, net.initial_state())[0].data
    b = forward(back, x, TL, back.initial_state())[0].data
    assert np.array_equal(a, b)


def test_checkpoint_rejects_garbage(tmp_path):
    p = tmp_path / "bad.dcsn"
    p.write_bytes(b"NOPE" + bytes(20))
    with pytest.raises(FormatError):
        load_checkpoint(p)


def test_feature_dump(tmp_path):
    ds = make_mode_task(3, 4, 16, np.random.default_rng(0))
    zero = DecisionNet(tiny_config(), zero=True)
    recs = dump_pooled_features(zero, ds, tmp_path / "f.csv")
    assert len(recs) == len(ds)
    assert all(not np.any(v) for v, _ in recs)
    vecs, labels = read_feature_dump(tmp_path / "f.csv")
    assert vecs.shape == (len(ds), zero.config.pooled_dim)
    assert [m.code for m in labels] == list(ds.modes)


def test_random_scene_range():
    img = random_scene(20, np.random.default_rng(0))
    assert img.shape == (20, 20) and img.min() >= 0 and img.max() <= 1
