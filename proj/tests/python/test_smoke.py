import json

import numpy as np
import pytest

import toatod


@pytest.fixture(scope="module")
def corpus():
    return toatod.generate_corpus(seed=3, n_sessions=3)


def test_corpus_round_trip(corpus, tmp_path):
    assert corpus.n_sessions == 3
    path = tmp_path / "c.json"
    corpus.save(path)
    again = toatod.load_corpus(path)
    assert again.to_json() == corpus.to_json()
    assert toatod.generate_corpus(3, 3).to_json() == corpus.to_json()
    assert toatod.generate_corpus(3, 0).n_sessions == 0


def test_belief_serialization(corpus):
    for b in corpus.gold_beliefs():
        parsed, malformed = toatod.parse_belief(toatod.serialize_belief(b), corpus)
        assert parsed == b
        assert not malformed
    _, malformed = toatod.parse_belief(["[hotel]", "area"], corpus)
    assert malformed


def test_metrics():
    gold = [{"hotel": {"area": "north", "day": "monday"}}]
    assert toatod.joint_goal_accuracy(gold, gold) == 1.0
    assert toatod.slot_f1([{"hotel": {"area": "north"}}], gold) == pytest.approx(2 / 3)
    assert toatod.corpus_bleu([["a", "b", "c", "d"]], [["a", "b", "c", "d"]]) == 1.0
    assert toatod.combined_score(97.00, 87.40, 17.12) == pytest.approx(109.32, abs=1e-9)
    assert toatod.count_adapter_params(512, 256, include_ln=False) == 262912
    assert 1.0 <= toatod.reward_dst([{}], gold) <= 2.0
    assert toatod.reward_nlg_terms(1.0, 1.0, 0.7) == pytest.approx(2.0)
    with pytest.raises(toatod.ContractError):
        toatod.corpus_bleu([], [])


def test_gold_replay_is_perfect(corpus):
    report = toatod.evaluate_gold(corpus)
    assert report["jga"] == 1.0
    assert report["inform"] == 1.0
    assert report["success"] == 1.0


def test_adapter_forward_zero_branch():
    rng = np.random.default_rng(0)
    d, h = 8, 4
    H = rng.normal(size=(5, d))
    gamma, beta = rng.normal(size=(1, d)), rng.normal(size=(1, d))
    out = toatod.adapter_forward(H, rng.normal(size=(d, h)), rng.normal(size=(1, h)), np.zeros((h, d)),
                                 np.zeros((1, d)), gamma, beta)
    mu = H.mean(axis=1, keepdims=True)
    var = H.var(axis=1, keepdims=True)
    assert out.shape == (5, d)
    assert np.allclose(out, (H - mu) / np.sqrt(var + 1e-6) * gamma + beta, atol=1e-12)


def test_train_evaluate_and_adapter_files(corpus, tmp_path):
    cfg = {"backbone": {"d_model": 16, "n_layers_enc": 1, "n_layers_dec": 1, "n_heads": 2, "ff_dim": 32}}
    model = toatod.Model(corpus, cfg)
    assert model.trainable_parameter_count("dst") == 2 * toatod.count_adapter_params(16, 8)
    rl = {"lr_sl": 1e-2, "epochs_sl": 2, "batch_sl": 8, "max_decode_len": 10}
    log = model.train_supervised(corpus, "dst", rl)
    assert len(log["epochs"]) == 2
    assert model.step == log["end_step"] > 0
    model.train_reinforce(corpus, "dst", {"epochs_rl_dst": 1, "lr_rl_dst": 1e-3, "max_decode_len": 10})
    with pytest.raises(toatod.ConfigError):
        model.train_reinforce(corpus, "nlu")
    with pytest.raises(toatod.ConfigError):
        model.train_supervised(corpus, "dst", {"alpha": 3.0})
    with pytest.raises(toatod.RoutingError):
        model.train_supervised(corpus, "xyz")

    report = model.evaluate(corpus, "oracle_belief", max_len=10)
    assert report["jga"] == 1.0
    assert set(["bleu", "inform", "success", "combined", "slot_f1"]) <= set(report)

    model.export_adapter(tmp_path / "dst.ad", "dst")
    fresh = toatod.Model(corpus, cfg)
    assert fresh.import_adapter(tmp_path / "dst.ad") == "dst"
    assert fresh.evaluate(corpus, "e2e", max_len=10) == model.evaluate(corpus, "e2e", max_len=10)

    model.save(tmp_path / "m.bin")
    loaded = toatod.Model.load(tmp_path / "m.bin")
    assert loaded.step == model.step
    assert loaded.generate("i need a hotel", "dst", 10) == model.generate("i need a hotel", "dst", 10)
    json.dumps(toatod.default_config())
