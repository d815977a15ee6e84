import math

import numpy as np
import pytest

from shortsim.encoder import EncoderConfig, EncoderParams, IGNORE_INDEX, init_params
from shortsim.errors import (
    NoMaskableTokens,
    NoMaskedPositions,
    NonFiniteGradient,
)
from shortsim.pretrain import (
    MaskedBatch,
    TrainHyper,
    TrainState,
    adam_step,
    mask_count,
    mask_tokens,
    mlm_loss,
    train,
    write_loss_curve,
)
from shortsim.tokenizer import CLS_ID, MASK_ID, PAD_ID, SEP_ID, train_wordpiece


class FakeSeq:
    def __init__(self, ids, mask):
        self.ids = tuple(ids)
        self.attention_mask = tuple(mask)


def seq_with_real_tokens(n_real, pad_to=None):
    ids = [CLS_ID] + [10 + i for i in range(n_real)] + [SEP_ID]
    mask = [1] * len(ids)
    if pad_to:
        ids += [PAD_ID] * (pad_to - len(ids))
        mask += [0] * (pad_to - len(mask))
    return FakeSeq(ids, mask)


class TestMasking:
    def test_twenty_tokens_rate_15_masks_three(self):
        seq = seq_with_real_tokens(20)
        row = mask_tokens(seq, 0.15, seed=0)
        assert sum(l != IGNORE_INDEX for l in row.labels) == 3
        assert mask_count(0.15, 20) == 3

    def test_minimum_one_mask(self):
        seq = seq_with_real_tokens(3)
        row = mask_tokens(seq, 0.15, seed=0)
        assert sum(l != IGNORE_INDEX for l in row.labels) == 1
        assert mask_count(0.15, 3) == 1

    def test_specials_never_masked_and_labels_align(self):
        seq = seq_with_real_tokens(10, pad_to=16)
        for seed in range(50):
            row = mask_tokens(seq, 0.3, seed=seed)
            for i, (inp, lab) in enumerate(zip(row.input_ids, row.labels)):
                if lab != IGNORE_INDEX:
                    assert inp == MASK_ID
                    assert lab == seq.ids[i]
                    assert seq.ids[i] not in (PAD_ID, CLS_ID, SEP_ID)
                else:
                    assert inp == seq.ids[i]

    def test_specials_only_raises(self):
        seq = FakeSeq([CLS_ID, SEP_ID, PAD_ID], [1, 1, 0])
        with pytest.raises(NoMaskableTokens):
            mask_tokens(seq, 0.15, seed=0)

    def test_uniformity_over_10000_draws(self):
        # 3 of 20 positions per draw: each position lands 1500 +- 100 times
        seq = seq_with_real_tokens(20)
        counts = np.zeros(len(seq.ids), dtype=int)
        for seed in range(10_000):
            row = mask_tokens(seq, 0.15, seed=seed)
            for i, lab in enumerate(row.labels):
                if lab != IGNORE_INDEX:
                    counts[i] += 1
        real = counts[1:21]
        assert real.min() >= 1400 and real.max() <= 1600
        assert counts[0] == 0 and counts[21] == 0

    def test_deterministic_given_seed(self):
        seq = seq_with_real_tokens(12)
        assert mask_tokens(seq, 0.2, seed=5) == mask_tokens(seq, 0.2, seed=5)

    def test_bert_split_keeps_labels_everywhere_selected(self):
        seq = seq_with_real_tokens(20)
        row = mask_tokens(seq, 0.5, seed=3, bert_split=True, vocab_size=50)
        n_sel = sum(l != IGNORE_INDEX for l in row.labels)
        assert n_sel == 10
        # some selected position should not be [MASK] across many seeds
        kinds = set()
        for seed in range(40):
            r = mask_tokens(seq, 0.5, seed=seed, bert_split=True, vocab_size=50)
            for inp, lab, orig in zip(r.input_ids, r.labels, seq.ids):
                if lab != IGNORE_INDEX:
                    kinds.add("mask" if inp == MASK_ID
                              else ("keep" if inp == orig else "random"))
        assert kinds == {"mask", "keep", "random"}


class TestMlmLoss:
    def test_uniform_logits_give_log_v(self):
        v = 37
        logits = np.zeros((6, v))
        labels = [IGNORE_INDEX, 4, IGNORE_INDEX, 9, 2, IGNORE_INDEX]
        assert mlm_loss(logits, labels) == pytest.approx(math.log(v), abs=1e-12)

    def test_confident_correct_logits_drive_loss_to_zero(self):
        v = 10
        labels = [3, IGNORE_INDEX]
        prev = None
        for margin in (2.0, 5.0, 10.0, 30.0):
            logits = np.zeros((2, v))
            logits[0, 3] = margin
            loss = mlm_loss(logits, labels)
            if prev is not None:
                assert loss < prev
            prev = loss
        assert prev < 1e-10

    def test_hand_computed_value(self):
        # -log softmax([2,0,0,0])[0] = ln(e^2 + 3) - 2
        logits = np.array([[2.0, 0.0, 0.0, 0.0]])
        expected = math.log(math.exp(2.0) + 3.0) - 2.0
        assert mlm_loss(logits, [0]) == pytest.approx(expected, abs=1e-12)

    def test_no_masked_positions(self):
        with pytest.raises(NoMaskedPositions):
            mlm_loss(np.zeros((2, 4)), [IGNORE_INDEX, IGNORE_INDEX])


def scalar_setup(theta=0.0, lr=0.1):
    params = EncoderParams({"w": np.array([theta], dtype=np.float64)})
    hyper = TrainHyper(lr=lr)
    state = TrainState.fresh(params, hyper)
    return params, state


class TestAdam:
    def test_zero_gradient_is_noop(self):
        params, state = scalar_setup(theta=1.5)
        adam_step(params, {"w": np.array([0.0])}, state)
        assert params["w"][0] == 1.5
        assert state.step == 1

    def test_first_step_bias_corrected(self):
        # m_hat = 1, v_hat = 1 -> update = lr / (1 + eps)
        params, state = scalar_setup(theta=0.0, lr=0.1)
        adam_step(params, {"w": np.array([1.0])}, state)
        assert params["w"][0] == pytest.approx(-0.1, abs=1e-6)

    def test_nonfinite_gradient_aborts_without_mutation(self):
        params, state = scalar_setup(theta=2.0)
        with pytest.raises(NonFiniteGradient) as exc:
            adam_step(params, {"w": np.array([np.nan])}, state)
        assert "'w'" in str(exc.value)
        assert params["w"][0] == 2.0
        assert state.step == 0

    def test_two_identical_runs_identical_params(self):
        rng = np.random.default_rng(0)
        gs = [{"w": rng.normal(size=1)} for _ in range(20)]
        pa, sa = scalar_setup()
        pb, sb = scalar_setup()
        for g in gs:
            adam_step(pa, g, sa)
            adam_step(pb, g, sb)
        assert pa["w"][0] == pb["w"][0]


@pytest.fixture(scope="module")
def toy_setup():
    corpus = [
        "salam donya khubi", "ketab khune raftam", "hava sarde emruz",
        "salam ketab khub", "donya khune sarde", "emruz raftam khune",
        "khubi hava salam", "ketab emruz donya",
    ]
    vocab = train_wordpiece(corpus, vocab_size=80, min_freq=1)
    cfg = EncoderConfig(layers=2, heads=2, hidden=32, ff_dim=64,
                        vocab_size=len(vocab), max_positions=16,
                        dropout_rate=0.1)
    return corpus, vocab, cfg


class TestTrainLoop:
    def test_zero_epochs_returns_init(self, toy_setup):
        corpus, vocab, cfg = toy_setup
        hyper = TrainHyper(epochs=0, max_len=16, seed=21)
        params, state = train(corpus, vocab, cfg, hyper)
        ref = init_params(cfg, seed=21)
        assert all(np.array_equal(params[k], ref[k]) for k in ref.tensors)
        assert state.step == 0 and state.loss_history == []

    def test_seed_reproducibility(self, toy_setup):
        corpus, vocab, cfg = toy_setup
        hyper = TrainHyper(epochs=3, batch_size=4, max_len=16, seed=5, lr=1e-3)
        p1, s1 = train(corpus, vocab, cfg, hyper)
        p2, s2 = train(corpus, vocab, cfg, hyper)
        assert all(np.array_equal(p1[k], p2[k]) for k in p1.tensors)
        assert s1.loss_history == s2.loss_history

    def test_loss_decreases_when_overfitting(self, toy_setup):
        corpus, vocab, cfg = toy_setup
        hyper = TrainHyper(epochs=150, batch_size=8, max_len=16, seed=1,
                           lr=3e-3)
        _, state = train(corpus, vocab, cfg, hyper)
        first = state.loss_history[0][2]
        last = np.mean([l for _, _, l in state.loss_history[-5:]])
        assert last < 0.5 * first

    def test_loss_curve_file(self, toy_setup, tmp_path):
        corpus, vocab, cfg = toy_setup
        hyper = TrainHyper(epochs=1, batch_size=8, max_len=16, seed=2)
        _, state = train(corpus, vocab, cfg, hyper)
        path = tmp_path / "loss.csv"
        write_loss_curve(state.loss_history, str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "step,epoch,loss"
        assert len(lines) == 1 + len(state.loss_history)
        step, epoch, loss = lines[1].split(",")
        assert int(step) == 1 and int(epoch) == 0
        assert float(loss) > 0


class TestMaskedBatch:
    def test_stack_shapes(self):
        seq = seq_with_real_tokens(5, pad_to=10)
        rows = [mask_tokens(seq, 0.2, seed=s) for s in range(3)]
        batch = MaskedBatch.stack(rows)
        assert batch.input_ids.shape == (3, 10)
        assert batch.labels.shape == (3, 10)
        assert batch.attention_mask.shape == (3, 10)
