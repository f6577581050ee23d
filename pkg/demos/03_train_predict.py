"""Full pipeline: train, persist, reload, evaluate, predict.

Run:  python demos/03_train_predict.py   (about a minute)
"""
import tempfile
from pathlib import Path

import numpy as np

from valleyforge import metrics
from valleyforge.dataio import stratified_split, synth_generate
from valleyforge.pipeline import load_artifact, load_config, run_eval, run_predict, run_train

cfg = load_config({
    "dataset": {"synth": {"n": 2000, "informative": 5, "noise": 15, "delta": 3, "seed": 7}},
    "seed": 0,
})
out = Path(tempfile.mkdtemp(prefix="valleyforge_demo_"))
art = run_train(cfg, out_dir=out)
print(metrics.format_report(art.metrics["test"]))
print("selected:", art.metrics["selected_features"])
print("files:", sorted(p.name for p in out.iterdir()))

# The artifact reloads bit-for-bit and reproduces its own test metrics.
back = load_artifact(out / "model.json")
data = synth_generate(2000, 5, 15, 3.0, 7)
_, test = stratified_split(data, cfg.test_fraction, cfg.seed)
print("reloaded params identical:", back.params.equal(art.params))
print("eval matches snapshot:", run_eval(back, test) == art.metrics["test"])

# Risk probabilities for a few new records (no threshold applied).
new = synth_generate(8, 5, 15, 3.0, seed=99)
P = run_predict(back, new)
for p, y in zip(P[:, 0], new.labels[:, 0]):
    print(f"  p(disease)={p:.3f}  truth={int(y)}")

# Loss curve, first and last epochs
curve = np.loadtxt(out / "loss_curve.csv", delimiter=",", skiprows=1)
print("loss epoch 1 -> 200:", round(curve[0, 1], 4), "->", round(curve[-1, 1], 5))
