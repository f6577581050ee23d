"""How the four score vectors combine into the final feature mask.

Run:  python demos/02_feature_scores.py
"""
import numpy as np

from valleyforge.dataio import apply_normalizer, fit_normalizer, stratified_split, synth_generate
from valleyforge.features import FeatureScores, blend_scores, deep_scores, select_top, statistical_scores
from valleyforge.network import NetConfig
from valleyforge.pipeline import resolve_k
from valleyforge.sev_eb import SevEbConfig, select_features

# 5 informative columns (shifted by +-1.5 between classes) then 15 noise columns
data = synth_generate(2000, 5, 15, 3.0, seed=7)
train, test = stratified_split(data, 0.2, seed=0)
train = apply_normalizer(train, fit_normalizer(train))
fit, val = stratified_split(train, 0.25, seed=1)

F = statistical_scores(train)

# Wrapper search: each position in [-1, 1]^20 is a mask (x > 0), scored by a
# logistic surrogate's validation F1 plus a size penalty.
mask, freq, res = select_features(fit, val, SevEbConfig(seed=0))
OF = FeatureScores(freq, "optimal")
print("best mask:", mask.indices, " fitness", round(res.f_best, 4))

# Saliency of a short-trained probe network, on the best mask's columns only
deep = np.zeros(20)
probe = deep_scores(train.select(mask), NetConfig(input_len=mask.cardinality, epochs=20, seed=1))
deep[mask.m] = probe.s
F1W = FeatureScores(deep, "deep")

wf = blend_scores(F, OF, 0.5)
owf = blend_scores(wf, F1W, 0.5, "blended_owf")
k = resolve_k(owf, "mean")
final = select_top(owf, k)

print(f"\n{'feature':<9} {'F':>6} {'OF':>6} {'F1W':>6} {'wf':>6} {'owf':>6}  kept")
for d, name in enumerate(data.feature_names):
    print(f"{name:<9} {F.s[d]:6.3f} {OF.s[d]:6.3f} {F1W.s[d]:6.3f} {wf.s[d]:6.3f} {owf.s[d]:6.3f}"
          f"  {'*' if final.m[d] else ''}")
print(f"\nmean owf {owf.s.mean():.3f} -> keep {k} features: {final.indices}")
# The optimizer alone usually stops at 2-3 informative columns (validation F1
# is already saturated); the statistical score carries the others over the
# mean threshold.
