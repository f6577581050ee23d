import json

import numpy as np
import pytest

from valleyforge.dataio import apply_normalizer, fit_normalizer, load_table, stratified_split, synth_generate, write_table
from valleyforge.errors import ConfigInvalid, CorruptArtifact, SchemaMismatch, VersionMismatch
from valleyforge.pipeline import (
    ModelArtifact,
    load_artifact,
    load_config,
    resolve_k,
    run_bench,
    run_eval,
    run_predict,
    run_train,
    save_artifact,
)
from valleyforge.features import FeatureScores

SMALL = {
    "dataset": {"synth": {"n": 200, "informative": 3, "noise": 3, "delta": 3.0, "seed": 4}},
    "seed": 1,
    "selection": {"probe_epochs": 2, "sev_eb": {"pop_size": 6, "max_iters": 4, "surrogate_epochs": 10}},
    "network": {"epochs": 4, "hidden": 4, "channels": 2, "attention_dim": 2},
}


@pytest.fixture(scope="module")
def trained(tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = load_config(SMALL)
    return run_train(cfg, out_dir=out), out, cfg


def test_outputs_written(trained):
    art, out, _ = trained
    for name in ("metrics.json", "model.json", "scores.csv", "loss_curve.csv", "roc_disease.csv"):
        assert (out / name).exists()
    assert art.mask.cardinality == art.net_config.input_len
    assert len(art.metrics["selected_features"]) == art.mask.cardinality


def test_artifact_roundtrip_bit_exact(trained, tmp_path):
    art, _, _ = trained
    save_artifact(art, tmp_path / "m.json")
    back = load_artifact(tmp_path / "m.json")
    assert back.to_dict() == art.to_dict()
    assert back.params.equal(art.params)
    for k, v in art.scores.items():
        assert np.array_equal(back.scores[k].s, v.s)
    assert np.array_equal(back.stats.mu, art.stats.mu)
    assert np.array_equal(back.stats.sigma, art.stats.sigma)


def test_artifact_errors(trained, tmp_path):
    art, _, _ = trained
    d = art.to_dict()
    d["format_version"] = 99
    (tmp_path / "v.json").write_text(json.dumps(d))
    with pytest.raises(VersionMismatch):
        load_artifact(tmp_path / "v.json")
    text = json.dumps(art.to_dict())
    (tmp_path / "t.json").write_text(text[: len(text) // 2])
    with pytest.raises(CorruptArtifact):
        load_artifact(tmp_path / "t.json")
    d = art.to_dict()
    del d["params"]
    (tmp_path / "p.json").write_text(json.dumps(d))
    with pytest.raises(CorruptArtifact):
        load_artifact(tmp_path / "p.json")


def test_eval_reproduces_snapshot(trained):
    art, _, cfg = trained
    raw = synth_generate(200, 3, 3, 3.0, 4)
    _, test = stratified_split(raw, cfg.test_fraction, cfg.seed)
    assert run_eval(art, test) == art.metrics["test"]
    for head in art.metrics["test"]["heads"].values():
        assert {"accuracy", "precision", "recall", "f1", "auc"} <= set(head)


def test_normalizer_uses_train_split_only(trained):
    art, _, cfg = trained
    raw = synth_generate(200, 3, 3, 3.0, 4)
    train, _ = stratified_split(raw, cfg.test_fraction, cfg.seed)
    assert np.array_equal(art.stats.mu, train.features.mean(axis=0))
    assert not np.array_equal(art.stats.mu, raw.features.mean(axis=0))


def test_schema_mismatch(trained):
    art, _, _ = trained
    other = synth_generate(20, 2, 4, 3.0, 0)
    with pytest.raises(SchemaMismatch):
        run_eval(art, other)
    with pytest.raises(SchemaMismatch):
        run_predict(art, other)


def test_predict_contract(trained, tmp_path):
    art, _, _ = trained
    t = synth_generate(30, 3, 3, 3.0, 9)
    P = run_predict(art, t, out_path=tmp_path / "p.csv")
    assert P.shape == (30, 1) and np.all((P > 0) & (P < 1))
    perm = np.random.default_rng(0).permutation(30)
    assert np.array_equal(run_predict(art, t.take(perm)), P[perm])
    assert len((tmp_path / "p.csv").read_text().splitlines()) == 31


def test_train_is_deterministic(trained, tmp_path):
    _, out, cfg = trained
    run_train(cfg, out_dir=tmp_path)
    for name in ("metrics.json", "model.json", "scores.csv", "loss_curve.csv"):
        assert (tmp_path / name).read_bytes() == (out / name).read_bytes()


def test_config_errors(tmp_path, monkeypatch):
    with pytest.raises(ConfigInvalid, match="nowhere.csv"):
        load_config({"dataset": {"path": str(tmp_path / "nowhere.csv")}})
    with pytest.raises(ConfigInvalid):
        load_config({**SMALL, "bogus": 1})
    with pytest.raises(ConfigInvalid):
        load_config({**SMALL, "network": {"hidden": 0}})
    with pytest.raises(ConfigInvalid):
        load_config({**SMALL, "selection": {"k_final": 0}})
    with pytest.raises(ConfigInvalid):
        run_train(load_config({**SMALL, "selection": {"k_final": 50}}))
    with pytest.raises(ConfigInvalid):
        load_config(tmp_path / "missing.json")


def test_seed_precedence(monkeypatch):
    monkeypatch.setenv("VALLEYFORGE_SEED", "17")
    assert load_config(SMALL).seed == 17
    assert load_config(SMALL, seed=3).seed == 3
    monkeypatch.delenv("VALLEYFORGE_SEED")
    assert load_config(SMALL).seed == 1


def test_lambda_accepted_beside_sev_eb():
    cfg = load_config({**SMALL, "selection": {"lambda": 0.3, "surrogate_epochs": 7}})
    assert cfg.selection.sev_eb.lam == 0.3 and cfg.selection.sev_eb.surrogate_epochs == 7


def test_resolve_k():
    s = FeatureScores([0.9, 0.8, 0.2, 0.01, 0.02], "blended_owf")
    assert resolve_k(s, "mean") == 2
    assert resolve_k(FeatureScores([0.9, 0.25, 0.25, 0.01, 0.01, 0.01], "blended_owf"), "mean") == 3
    assert resolve_k(s, 4) == 4


def test_csv_dataset_and_tuning(tmp_path):
    write_table(synth_generate(120, 2, 2, 3.0, 0), tmp_path / "d.csv")
    cfg = {**SMALL, "dataset": {"path": str(tmp_path / "d.csv")},
           "blend": {"tune": True, "tune_pop": 4, "tune_iters": 1, "tune_epochs": 1}}
    art = run_train(load_config(cfg))
    assert 0 <= art.blend.wt_1 <= 1 and 1e-3 <= art.net_config.learning_rate <= 1e-1


def test_parallel_fitness_gives_same_artifact(trained):
    art, _, _ = trained
    par = {**SMALL, "selection": {**SMALL["selection"],
                                  "sev_eb": {**SMALL["selection"]["sev_eb"], "n_workers": 3}}}
    assert run_train(load_config(par)).to_dict() == art.to_dict()


def test_bench_rows(tmp_path):
    rows = run_bench({"problems": [["sphere", 3], ["rastrigin", 2]], "seeds": 2,
                      "pop_size": 6, "max_iters": 5}, out_path=tmp_path / "b.csv",
                     history_dir=tmp_path / "h")
    keys = {(r["function"], r["seed"], r["method"]) for r in rows}
    assert len(rows) == len(keys) == 8
    assert all(r["evaluations"] == 36 for r in rows)
    header = (tmp_path / "b.csv").read_text().splitlines()[0]
    assert header == "function,dimension,seed,method,iterations,evaluations,best_fitness,wall_time_ms"
    assert len(list((tmp_path / "h").iterdir())) == 4
    with pytest.raises(ConfigInvalid):
        run_bench({"problems": [["ackley", 2]]})
