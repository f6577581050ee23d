"""End-to-end training, evaluation, prediction and benchmarking.

``run_train`` goes through: load and split, normalize with train-split
statistics, statistical scores, optimizer-driven feature selection,
probe-network saliency, the two-stage score blend, final mask, network
training, and test-split evaluation. Everything is a deterministic function
of the configuration, its seed, and the input files.
"""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import os
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import metrics as M
from .dataio import (
    NormalizationStats,
    RecordTable,
    apply_normalizer,
    fit_normalizer,
    load_table,
    stratified_split,
    synth_generate,
)
from .errors import (
    ConfigInvalid,
    CorruptArtifact,
    SchemaMismatch,
    VersionMismatch,
)
from .features import (
    BlendConfig,
    FeatureMask,
    FeatureScores,
    blend_scores,
    deep_scores,
    select_top,
    statistical_scores,
    write_score_report,
)
from .network import NetConfig, NetParams, predict_proba, train
from .sev_eb import (
    BENCHMARKS,
    DOMAINS,
    SearchSpace,
    SevEbConfig,
    optimize,
    random_search,
    select_features,
)

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
SEED_ENV = "VALLEYFORGE_SEED"
SCORE_KEYS = ("F", "OF", "F1W", "wf", "owf")

__all__ = [
    "PipelineConfig",
    "ModelArtifact",
    "load_config",
    "run_train",
    "run_eval",
    "run_predict",
    "run_bench",
    "save_artifact",
    "load_artifact",
    "resolve_k",
]


@dataclass
class DatasetConfig:
    path: str | None = None
    schema_id: str = "generic"
    synth: dict | None = None


@dataclass
class SelectionConfig:
    # an int, or "mean": keep features whose blended score reaches the mean
    k_final: int | str = "mean"
    val_fraction: float = 0.25
    probe_epochs: int = 20
    sev_eb: SevEbConfig = field(default_factory=SevEbConfig)


@dataclass
class BlendSection:
    wt_1: float = 0.5
    wt_2: float = 0.5
    tune: bool = False
    tune_pop: int = 10
    tune_iters: int = 15
    tune_epochs: int = 10


@dataclass
class PipelineConfig:
    dataset: DatasetConfig = field(default_factory=DatasetConfig)
    test_fraction: float = 0.2
    seed: int = 0
    selection: SelectionConfig = field(default_factory=SelectionConfig)
    blend: BlendSection = field(default_factory=BlendSection)
    # NetConfig fields other than input_len and outputs, which come from the data
    network: dict = field(default_factory=dict)
    output_dir: str | None = None

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _build(cls, data, where: str):
    if isinstance(data, cls):
        return data
    if not isinstance(data, dict):
        raise ConfigInvalid(f"{where}: expected an object, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    data = dict(data)
    if cls is SevEbConfig and "lambda" in data:
        data["lam"] = data.pop("lambda")
    if cls is SelectionConfig:
        # the wrapper-fitness knobs may sit beside sev_eb rather than inside it
        lifted = {k: data.pop(k) for k in ("lambda", "lam", "surrogate_epochs") if k in data}
        if lifted:
            sev = data.get("sev_eb", {})
            sev = dataclasses.asdict(sev) if isinstance(sev, SevEbConfig) else dict(sev)
            data["sev_eb"] = {**sev, **lifted}
    unknown = set(data) - set(names)
    if unknown:
        raise ConfigInvalid(f"{where}: unknown keys {sorted(unknown)}")
    nested = {"dataset": DatasetConfig, "selection": SelectionConfig,
              "blend": BlendSection, "sev_eb": SevEbConfig}
    kwargs = {}
    for key, value in data.items():
        sub = nested.get(key)
        kwargs[key] = _build(sub, value, f"{where}.{key}") if sub else value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(f"{where}: {exc}") from exc


def _validate(cfg: PipelineConfig) -> PipelineConfig:
    ds = cfg.dataset
    if (ds.path is None) == (ds.synth is None):
        raise ConfigInvalid("dataset: give exactly one of 'path' or 'synth'")
    if ds.path is not None and not Path(ds.path).exists():
        raise ConfigInvalid(f"dataset path {ds.path} does not exist")
    if ds.synth is not None:
        keys = {"n", "informative", "noise", "delta", "seed"}
        if set(ds.synth) - keys or not {"n", "informative", "noise", "delta"} <= set(ds.synth):
            raise ConfigInvalid(f"dataset.synth needs keys {sorted(keys)} (seed optional)")
    if not 0.0 < cfg.test_fraction < 1.0:
        raise ConfigInvalid("test_fraction must lie in (0, 1)")
    if not isinstance(cfg.seed, int) or cfg.seed < 0:
        raise ConfigInvalid("seed must be a non-negative integer")
    k = cfg.selection.k_final
    if not (k == "mean" or (isinstance(k, int) and k >= 1)):
        raise ConfigInvalid("selection.k_final must be a positive integer or 'mean'")
    try:
        BlendConfig(cfg.blend.wt_1, cfg.blend.wt_2)
        NetConfig(input_len=1, **cfg.network)
    except (TypeError, ValueError) as exc:
        raise ConfigInvalid(str(exc)) from exc
    if {"input_len", "outputs"} & set(cfg.network):
        raise ConfigInvalid("network.input_len and network.outputs are derived from the data")
    return cfg


def load_config(source=None, seed: int | None = None) -> PipelineConfig:
    """Build a validated config from a JSON path or a dict.

    Seed precedence: explicit ``seed`` argument, then the
    ``VALLEYFORGE_SEED`` environment variable, then the config value.
    """
    if source is None:
        data = {}
    elif isinstance(source, (dict, PipelineConfig)):
        data = source
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigInvalid(f"config file {path} does not exist")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ConfigInvalid(f"config file {path}: {exc}") from exc
    cfg = _build(PipelineConfig, data, "config")
    env = os.environ.get(SEED_ENV)
    if seed is not None:
        cfg.seed = int(seed)
    elif env not in (None, ""):
        try:
            cfg.seed = int(env)
        except ValueError:
            raise ConfigInvalid(f"{SEED_ENV}={env!r} is not an integer") from None
    return _validate(cfg)


@dataclass(eq=False)
class ModelArtifact:
    schema_id: str
    feature_names: list[str]
    label_names: list[str]
    stats: NormalizationStats
    mask: FeatureMask
    blend: BlendConfig
    scores: dict[str, FeatureScores]
    net_config: NetConfig
    params: NetParams
    metrics: dict
    seed: int
    format_version: int = FORMAT_VERSION

    def to_dict(self) -> dict:
        return {
            "format_version": self.format_version,
            "schema_id": self.schema_id,
            "seed": self.seed,
            "feature_names": list(self.feature_names),
            "label_names": list(self.label_names),
            "normalizer": {"mu": self.stats.mu.tolist(), "sigma": self.stats.sigma.tolist()},
            "mask": [bool(v) for v in self.mask.m],
            "blend": {"wt_1": self.blend.wt_1, "wt_2": self.blend.wt_2},
            "scores": {k: self.scores[k].s.tolist() for k in SCORE_KEYS},
            "net_config": self.net_config.to_dict(),
            "params": {
                name: {"shape": list(a.shape), "data": a.ravel().tolist()}
                for name, a in self.params.items()
            },
            "metrics": self.metrics,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ModelArtifact":
        if not isinstance(d, dict) or "format_version" not in d:
            raise CorruptArtifact("artifact has no format_version")
        if d["format_version"] != FORMAT_VERSION:
            raise VersionMismatch(
                f"artifact format_version {d['format_version']!r}; this build reads {FORMAT_VERSION}"
            )
        try:
            net_config = NetConfig(**d["net_config"])
            params = NetParams({
                name: np.array(p["data"], dtype=np.float64).reshape(p["shape"])
                for name, p in d["params"].items()
            })
            params.check_shapes(net_config)
            sources = dict(zip(SCORE_KEYS, ("statistical", "optimal", "deep", "blended_wf", "blended_owf")))
            art = cls(
                schema_id=d["schema_id"],
                feature_names=list(d["feature_names"]),
                label_names=list(d["label_names"]),
                stats=NormalizationStats(d["normalizer"]["mu"], d["normalizer"]["sigma"]),
                mask=FeatureMask(d["mask"]),
                blend=BlendConfig(**d["blend"]),
                scores={k: FeatureScores(d["scores"][k], sources[k]) for k in SCORE_KEYS},
                net_config=net_config,
                params=params,
                metrics=d["metrics"],
                seed=d["seed"],
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise CorruptArtifact(f"malformed artifact: {exc!r}") from exc
        if art.mask.cardinality != art.net_config.input_len:
            raise CorruptArtifact("mask cardinality differs from the network input length")
        return art


def _dumps(obj) -> str:
    return json.dumps(obj, indent=1, allow_nan=False) + "\n"


def save_artifact(artifact: ModelArtifact, path) -> None:
    """Write JSON; floats use the shortest repr that round-trips exactly."""
    Path(path).write_text(_dumps(artifact.to_dict()))


def load_artifact(path) -> ModelArtifact:
    try:
        data = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise CorruptArtifact(f"{path}: {exc}") from exc
    return ModelArtifact.from_dict(data)


def load_dataset(cfg: PipelineConfig) -> RecordTable:
    ds = cfg.dataset
    if ds.synth is not None:
        s = ds.synth
        return synth_generate(int(s["n"]), int(s["informative"]), int(s["noise"]),
                              float(s["delta"]), int(s.get("seed", 0)))
    return load_table(ds.path, ds.schema_id)


def resolve_k(owf: FeatureScores, k_final) -> int:
    """Number of features to keep for a ``k_final`` setting."""
    D = len(owf)
    if k_final == "mean":
        k = int(np.sum(owf.s >= owf.s.mean()))
    else:
        k = int(k_final)
    return min(max(2, k), D) if D >= 2 else 1


def _net_config(cfg: PipelineConfig, input_len: int, outputs: int, **overrides) -> NetConfig:
    base = {**cfg.network, "seed": cfg.seed, **overrides}
    return NetConfig(input_len=input_len, outputs=outputs, **base)


def _blend(F, OF, F1W, w1: float, w2: float):
    wf = blend_scores(F, OF, w1, "blended_wf")
    owf = blend_scores(wf, F1W, w2, "blended_owf")
    return wf, owf


def _macro_f1(table, params, net_cfg) -> float:
    P = predict_proba(table, params, net_cfg)
    return M.evaluate_heads(P, table.labels, table.label_names)["macro"]["f1"]


def _tune(cfg, fit, val, F, OF, F1W) -> tuple[float, float, float]:
    """Outer search over (wt_1, wt_2, log10 learning rate) on validation macro-F1."""
    b = cfg.blend
    sev = dataclasses.replace(cfg.selection.sev_eb, pop_size=b.tune_pop,
                              max_iters=b.tune_iters, seed=cfg.seed, n_workers=1)

    def objective(v):
        _, owf = _blend(F, OF, F1W, float(v[0]), float(v[1]))
        mask = select_top(owf, resolve_k(owf, cfg.selection.k_final))
        net_cfg = _net_config(cfg, mask.cardinality, fit.n_labels,
                              learning_rate=10.0 ** float(v[2]), epochs=b.tune_epochs)
        params, _ = train(fit.select(mask), net_cfg)
        return 1.0 - _macro_f1(val.select(mask), params, net_cfg)

    space = SearchSpace([0.0, 0.0, -3.0], [1.0, 1.0, -1.0])
    res = optimize(objective, space, sev)
    return float(res.x_best[0]), float(res.x_best[1]), float(10.0 ** res.x_best[2])


def run_train(config, out_dir=None) -> ModelArtifact:
    """Train the full pipeline; write outputs if an output directory is set."""
    cfg = config if isinstance(config, PipelineConfig) else load_config(config)
    cfg = _validate(cfg)
    seed = cfg.seed
    out_dir = out_dir if out_dir is not None else cfg.output_dir

    raw = load_dataset(cfg)
    k = cfg.selection.k_final
    if isinstance(k, int) and k > raw.n_features:
        raise ConfigInvalid(f"selection.k_final={k} exceeds the {raw.n_features} features")
    train_raw, test_raw = stratified_split(raw, cfg.test_fraction, seed)
    stats = fit_normalizer(train_raw)
    train_t = apply_normalizer(train_raw, stats)
    fit_t, val_t = stratified_split(train_t, cfg.selection.val_fraction, seed + 1)
    K = raw.n_labels

    F = statistical_scores(train_t)

    sev_cfg = dataclasses.replace(cfg.selection.sev_eb, seed=seed)
    best_mask, frequency, opt = select_features(fit_t, val_t, sev_cfg)
    OF = FeatureScores(frequency, "optimal")
    logger.info("feature search best fitness %.6f with %d features",
                opt.f_best, best_mask.cardinality)

    deep = np.zeros(raw.n_features)
    if best_mask.cardinality:
        probe_cfg = _net_config(cfg, best_mask.cardinality, K,
                                epochs=cfg.selection.probe_epochs, seed=seed + 1)
        probe = deep_scores(train_t.select(best_mask), probe_cfg)
        deep[best_mask.m] = probe.s
    F1W = FeatureScores(deep, "deep")

    w1, w2 = cfg.blend.wt_1, cfg.blend.wt_2
    lr = _net_config(cfg, 1, K).learning_rate
    if cfg.blend.tune:
        w1, w2, lr = _tune(cfg, fit_t, val_t, F, OF, F1W)
        logger.info("tuned wt_1=%.4f wt_2=%.4f learning_rate=%.5g", w1, w2, lr)
    wf, owf = _blend(F, OF, F1W, w1, w2)
    mask = select_top(owf, resolve_k(owf, cfg.selection.k_final))

    net_cfg = _net_config(cfg, mask.cardinality, K, learning_rate=lr)
    params, curve = train(train_t.select(mask), net_cfg)

    artifact = ModelArtifact(
        schema_id=raw.schema_id,
        feature_names=list(raw.feature_names),
        label_names=list(raw.label_names),
        stats=stats,
        mask=mask,
        blend=BlendConfig(w1, w2),
        scores={"F": F, "OF": OF, "F1W": F1W, "wf": wf, "owf": owf},
        net_config=net_cfg,
        params=params,
        metrics={},
        seed=seed,
    )
    test_report = run_eval(artifact, test_raw)
    artifact.metrics = {
        "test": test_report,
        "n_train": train_raw.n_rows,
        "n_test": test_raw.n_rows,
        "selected_features": [n for n, m in zip(raw.feature_names, mask.m) if m],
        "search_best_fitness": opt.f_best,
        "final_train_loss": curve[-1] if curve else None,
    }
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        save_artifact(artifact, out / "model.json")
        (out / "metrics.json").write_text(_dumps(artifact.metrics))
        write_score_report(out / "scores.csv", raw.feature_names, F, F1W, OF, wf, owf, mask)
        write_loss_curve(out / "loss_curve.csv", curve)
        write_roc_files(artifact, test_raw, out)
    return artifact


def write_loss_curve(path, curve) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["epoch", "mean_loss"])
        for epoch, value in enumerate(curve, start=1):
            w.writerow([epoch, repr(float(value))])


def _check_schema(artifact: ModelArtifact, table: RecordTable, need_labels: bool = True) -> None:
    if list(table.feature_names) != list(artifact.feature_names):
        raise SchemaMismatch(
            f"table features {list(table.feature_names)} differ from model features "
            f"{list(artifact.feature_names)}"
        )
    if need_labels and list(table.label_names) != list(artifact.label_names):
        raise SchemaMismatch(
            f"table labels {list(table.label_names)} differ from model labels {artifact.label_names}"
        )


def _probabilities(artifact: ModelArtifact, table: RecordTable) -> np.ndarray:
    normed = apply_normalizer(table, artifact.stats).select(artifact.mask)
    return predict_proba(normed, artifact.params, artifact.net_config)


def run_eval(artifact: ModelArtifact, table: RecordTable, out_dir=None) -> dict:
    """Per-head and macro accuracy, precision, recall, F1 and AUC."""
    _check_schema(artifact, table)
    P = _probabilities(artifact, table)
    report = M.evaluate_heads(P, table.labels, table.label_names)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "metrics.json").write_text(_dumps(report))
        write_roc_files(artifact, table, out, P)
    return report


def write_roc_files(artifact: ModelArtifact, table: RecordTable, out: Path, P=None) -> None:
    P = _probabilities(artifact, table) if P is None else P
    for k, name in enumerate(table.label_names):
        y = table.labels[:, k]
        if 0 < y.sum() < y.size:
            M.write_roc_csv(out / f"roc_{name}.csv", P[:, k], y)


def run_predict(artifact: ModelArtifact, table: RecordTable, out_path=None) -> np.ndarray:
    """Per-record, per-disease risk probabilities (no thresholding)."""
    _check_schema(artifact, table, need_labels=False)
    P = _probabilities(artifact, table)
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow([f"p_{name}" for name in artifact.label_names])
            for row in P:
                w.writerow([repr(float(v)) for v in row])
    return P


DEFAULT_BENCH = {
    "problems": [["sphere", 10], ["rastrigin", 5], ["rosenbrock", 5]],
    "seeds": 10,
    "pop_size": 30,
    "max_iters": 500,
}


def run_bench(config=None, out_path=None, history_dir=None) -> list[dict]:
    """Optimizer versus uniform random search at equal evaluation budgets."""
    cfg = {**DEFAULT_BENCH, **(config or {})}
    unknown = set(cfg) - set(DEFAULT_BENCH)
    if unknown:
        raise ConfigInvalid(f"bench: unknown keys {sorted(unknown)}")
    rows = []
    for name, dim in cfg["problems"]:
        if name not in BENCHMARKS:
            raise ConfigInvalid(f"bench: unknown function {name!r}")
        fn = BENCHMARKS[name]
        space = SearchSpace.box(*DOMAINS[name], int(dim))
        for seed in range(int(cfg["seeds"])):
            sev = SevEbConfig(pop_size=cfg["pop_size"], max_iters=cfg["max_iters"], seed=seed)
            t0 = time.perf_counter()
            res = optimize(fn, space, sev)
            t1 = time.perf_counter()
            rnd = random_search(fn, space, res.n_evals, seed + 10_000)
            t2 = time.perf_counter()
            for method, r, dt in (("sev_eb", res, t1 - t0), ("random", rnd, t2 - t1)):
                rows.append({
                    "function": name,
                    "dimension": int(dim),
                    "seed": seed,
                    "method": method,
                    "iterations": cfg["max_iters"] if method == "sev_eb" else 0,
                    "evaluations": r.n_evals,
                    "best_fitness": r.f_best,
                    "wall_time_ms": round(dt * 1000.0, 3),
                })
            if history_dir is not None:
                hd = Path(history_dir)
                hd.mkdir(parents=True, exist_ok=True)
                with open(hd / f"{name}_d{dim}_seed{seed}.csv", "w", newline="") as fh:
                    w = csv.writer(fh)
                    w.writerow(["iteration", "f_best"])
                    for t, v in enumerate(res.history):
                        w.writerow([t, repr(v)])
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            w = csv.DictWriter(fh, fieldnames=list(rows[0]) if rows else ["function"])
            w.writeheader()
            w.writerows(rows)
    return rows
