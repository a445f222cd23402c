"""Optimizer, training loop, loss, and the gradient-check harness."""

import io
import math

import numpy as np
import pytest

from latseq.errors import EmptyInputError, ShapeError
from latseq.lattice import build_lattice, chain_from_tokenization
from latseq.model import ModelConfig, Seq2SeqModel
from latseq.training import (
    Hyperparams,
    RmspropState,
    TrainConfig,
    grad_check_model,
    filter_pairs,
    rmsprop_update,
    sequence_loss,
    train,
)
from latseq.vocab import EOS, Vocab


def oracle_rmsprop_trajectory(gs, rho, eps, lr, theta0):
    """Scalar recurrence transcribed independently with plain floats."""
    n = m = 0.0
    theta = theta0
    out = []
    for g in gs:
        n = rho * n + (1.0 - rho) * g * g
        m = rho * m + (1.0 - rho) * g
        theta = theta - lr * g / math.sqrt(n - m * m + eps)
        out.append(theta)
    return out


def small_model(cell="dwl", compose="gate", seed=0, dim=4):
    lat = build_lattice("abcd", [["ab", "cd"], ["a", "bcd"], ["ab", "c", "d"]])
    surfaces = sorted({e.surface for e in lat.edges})
    src_vocab = Vocab([s for w in surfaces for s in (w, w[::-1])])
    tgt_vocab = Vocab(["X", "Y", "Z"])
    config = ModelConfig(cell=cell, compose=compose, embed_dim=dim, hidden=dim)
    model = Seq2SeqModel(config, src_vocab, tgt_vocab, seed=seed)
    return model, lat, tgt_vocab


class TestHyperparams:
    def test_defaults(self):
        hp = Hyperparams()
        assert hp.embed_dim == 320
        assert hp.hidden == 512
        assert hp.lr == 5e-4
        assert hp.batch == 80
        assert hp.clip == 1.0
        assert hp.rmsprop_rho == 0.99
        assert hp.rmsprop_eps == 1e-4
        assert hp.rmsprop_momentum == 0.0
        assert hp.max_src_chars == 70
        assert hp.max_tgt_words == 50
        assert hp.patience_epochs == 5

    def test_positivity(self):
        with pytest.raises(ValueError):
            Hyperparams(lr=-1e-4)
        with pytest.raises(ValueError):
            Hyperparams(batch=-1)
        Hyperparams(lr=0.0)  # a zero step size is legal


class TestRmsprop:
    def test_first_step_hand_values(self):
        params = {"w": np.array([1.0])}
        grads = {"w": np.array([1.0])}
        st = RmspropState(params)
        hp = Hyperparams(lr=5e-4, rmsprop_rho=0.99, rmsprop_eps=1e-4)
        rmsprop_update(params, grads, st, hp)
        assert st.n["w"][0] == pytest.approx(0.01, abs=1e-15)
        assert st.m["w"][0] == pytest.approx(0.01, abs=1e-15)
        # denom = sqrt(0.01 - 0.0001 + 0.0001) = 0.1 -> delta = -5e-3
        assert params["w"][0] == pytest.approx(1.0 - 5e-3, abs=1e-15)

    def test_zero_gradient_leaves_params(self):
        params = {"w": np.array([2.0, -1.0])}
        st = RmspropState(params)
        hp = Hyperparams()
        before = params["w"].copy()
        rmsprop_update(params, {"w": np.zeros(2)}, st, hp)
        assert np.array_equal(params["w"], before)

    def test_trajectory_matches_scalar_oracle(self):
        rng = np.random.default_rng(0)
        gs = list(rng.uniform(-1, 1, 100))
        hp = Hyperparams(lr=5e-4)
        params = {"w": np.array([0.3])}
        st = RmspropState(params)
        expected = oracle_rmsprop_trajectory(gs, 0.99, 1e-4, 5e-4, 0.3)
        for g, e in zip(gs, expected):
            rmsprop_update(params, {"w": np.array([g])}, st, hp)
            assert abs(params["w"][0] - e) <= 1e-12

    def test_denominator_positivity(self):
        rng = np.random.default_rng(1)
        params = {"w": np.zeros(8)}
        st = RmspropState(params)
        hp = Hyperparams()
        for _ in range(200):
            rmsprop_update(params, {"w": rng.uniform(-5, 5, 8)}, st, hp)
            denom = st.n["w"] - st.m["w"] ** 2 + hp.rmsprop_eps
            assert np.all(denom >= hp.rmsprop_eps - 1e-15)
            assert np.all(np.isfinite(params["w"]))

    def test_shape_errors(self):
        params = {"w": np.zeros(2)}
        st = RmspropState(params)
        hp = Hyperparams()
        with pytest.raises(ShapeError):
            rmsprop_update(params, {"v": np.zeros(2)}, st, hp)
        with pytest.raises(ShapeError):
            rmsprop_update(params, {"w": np.zeros(3)}, st, hp)


class TestSequenceLoss:
    def test_uniform_model_loss(self):
        model, lat, tgt_vocab = small_model()
        # Zero readout weights give a uniform output distribution.
        for name in ("dec.out.w_y", "dec.out.w_s", "dec.out.w_m", "dec.out.w_o"):
            model.store[name][...] = 0.0
        target = [tgt_vocab.id("X"), EOS]
        loss, _ = sequence_loss(lat, target, model)
        assert loss == pytest.approx(2 * math.log(len(tgt_vocab)), abs=1e-12)

    def test_loss_nonnegative(self):
        model, lat, tgt_vocab = small_model(seed=3)
        loss, _ = sequence_loss(lat, [tgt_vocab.id("Y"), EOS], model)
        assert loss >= 0.0

    def test_empty_target_rejected(self):
        model, lat, _ = small_model()
        with pytest.raises(EmptyInputError):
            sequence_loss(lat, [], model)

    def test_target_must_end_with_eos(self):
        model, lat, tgt_vocab = small_model()
        with pytest.raises(ValueError):
            sequence_loss(lat, [tgt_vocab.id("X")], model)

    def test_gradient_accumulation_linearity(self):
        model, lat, tgt_vocab = small_model(seed=5)
        target = [tgt_vocab.id("X"), tgt_vocab.id("Z"), EOS]
        _, g1 = model.sequence_loss(lat, target)
        acc, _ = model.new_grads()
        for _ in range(3):
            model.sequence_loss(lat, target, grads=acc)
        for name in g1:
            np.testing.assert_allclose(acc[name], 3.0 * g1[name], atol=1e-12)


class TestGradCheckModel:
    @pytest.mark.parametrize("cell,compose", [
        ("gru", "pool"), ("swl", "pool"), ("swl", "gate"),
        ("dwl", "pool"), ("dwl", "gate"),
    ])
    def test_end_to_end(self, cell, compose):
        assert grad_check_model(cell=cell, compose=compose) <= 1e-6


def toy_pairs(tgt_vocab):
    """Ten distinct short sentences over a 4-word inventory."""
    words = ["ab", "cd", "a", "b"]
    sentences = [
        ["ab", "cd"], ["cd", "ab"], ["a", "b"], ["b", "a"], ["ab", "a"],
        ["cd", "b"], ["a", "cd"], ["b", "ab"], ["ab", "b", "a"], ["cd", "a", "b"],
    ]
    pairs = []
    for toks in sentences:
        chars = "".join(toks)
        lat = chain_from_tokenization(chars, toks)
        pairs.append((lat, [tgt_vocab.id(t.upper()) for t in toks] + [EOS]))
    return pairs, words


class TestTrainLoop:
    def make_setup(self):
        tgt_vocab = Vocab(["AB", "CD", "A", "B"])
        pairs, words = toy_pairs(tgt_vocab)
        src_vocab = Vocab([s for w in words for s in (w, w[::-1])])
        return pairs, src_vocab, tgt_vocab

    def config(self, lr=5e-4, max_epochs=5, max_updates=None, seed=0, sink=None):
        return TrainConfig(
            model=ModelConfig(cell="dwl", compose="gate", embed_dim=8, hidden=8),
            hyper=Hyperparams(embed_dim=8, hidden=8, lr=lr, batch=4,
                              patience_epochs=1000),
            seed=seed,
            max_epochs=max_epochs,
            max_updates=max_updates,
            log_sink=sink,
        )

    def test_lr_zero_leaves_params_bitwise(self):
        pairs, src_vocab, tgt_vocab = self.make_setup()
        cfg = self.config(lr=0.0, max_epochs=2)
        fresh = Seq2SeqModel(cfg.model, src_vocab, tgt_vocab, seed=cfg.seed)
        result = train(cfg, pairs, pairs[:2], src_vocab, tgt_vocab)
        for name, t in fresh.parameters().items():
            assert np.array_equal(result.model.parameters()[name], t)

    def test_log_format(self):
        pairs, src_vocab, tgt_vocab = self.make_setup()
        sink = io.StringIO()
        cfg = self.config(max_epochs=3, sink=sink)
        result = train(cfg, pairs, pairs[:2], src_vocab, tgt_vocab)
        assert len(result.log_lines) == 3
        for i, line in enumerate(result.log_lines):
            parts = line.split()
            assert parts[0] == "epoch" and int(parts[1]) == i
            assert parts[2] == "loss" and parts[4] == "val_acc"
            float(parts[3]), float(parts[5])
        assert sink.getvalue() == "".join(l + "\n" for l in result.log_lines)

    def test_loss_decreases_on_memorization_corpus(self):
        pairs, src_vocab, tgt_vocab = self.make_setup()
        cfg = self.config(lr=5e-3, max_epochs=100, max_updates=200)
        result = train(cfg, pairs, pairs, src_vocab, tgt_vocab)
        first = float(result.log_lines[0].split()[3])
        last = float(result.log_lines[-1].split()[3])
        assert last < first

    def test_post_clip_norms_bounded(self):
        pairs, src_vocab, tgt_vocab = self.make_setup()
        cfg = self.config(max_epochs=3)
        result = train(cfg, pairs, pairs[:2], src_vocab, tgt_vocab)
        assert result.post_clip_norms
        assert all(n <= cfg.hyper.clip + 1e-12 for n in result.post_clip_norms)

    def test_batch_mean_convention(self):
        # A batch of k identical sentences steps exactly like a single one.
        pairs, src_vocab, tgt_vocab = self.make_setup()
        lat, target = pairs[0]
        model = Seq2SeqModel(ModelConfig("dwl", "gate", 8, 8), src_vocab, tgt_vocab, seed=0)
        _, g_one = model.sequence_loss(lat, target)
        acc, _ = model.new_grads()
        for _ in range(4):
            model.sequence_loss(lat, target, grads=acc)
        for name in acc:
            np.testing.assert_allclose(acc[name] / 4.0, g_one[name], atol=1e-12)

    def test_determinism_same_seed(self):
        pairs, src_vocab, tgt_vocab = self.make_setup()
        r1 = train(self.config(max_epochs=3), pairs, pairs[:2], src_vocab, tgt_vocab)
        r2 = train(self.config(max_epochs=3), pairs, pairs[:2], src_vocab, tgt_vocab)
        assert r1.log_lines == r2.log_lines
        p1, p2 = r1.model.parameters(), r2.model.parameters()
        for name in p1:
            assert np.array_equal(p1[name], p2[name])

    def test_max_updates_budget(self):
        pairs, src_vocab, tgt_vocab = self.make_setup()
        cfg = self.config(max_epochs=100, max_updates=5)
        result = train(cfg, pairs, pairs[:2], src_vocab, tgt_vocab)
        assert result.updates == 5

    def test_filter_pairs(self):
        pairs, src_vocab, tgt_vocab = self.make_setup()
        hp = Hyperparams(max_src_chars=4, max_tgt_words=3)
        kept, dropped = filter_pairs(pairs, hp)
        assert dropped == sum(
            1 for lat, tgt in pairs if lat.n > 4 or len(tgt) > 3
        )
        assert all(lat.n <= 4 and len(t) <= 3 for lat, t in kept)
        assert len(kept) + dropped == len(pairs)
