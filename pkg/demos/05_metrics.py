"""
Evaluation metrics
==================

Truncated C-index and IPCW Brier score at the quartiles of the training times.
"""
import numpy as np

from gcph.metrics import brier_score, c_index, kaplan_meier, percentile_horizons

# Product-limit estimate: the censored subject at t=2 only shrinks the risk set
km = kaplan_meier([1.0, 2.0, 3.0], [1, 0, 1])
print("S(1), S(2), S(3):", km([1.0, 2.0, 3.0]))

# Concordance: the tied pair earns half its weight, and pairs with two events weigh double
print("C =", c_index([1, 2, 3], [1, 1, 0], [2, 2, 1], horizon=3.0))

# Random scores sit near 0.5
rng = np.random.default_rng(7)
t = rng.exponential(size=1000)
e = rng.random(1000) >= 0.2
print("random C =", round(c_index(t, e, rng.normal(size=1000)), 4))

# Brier score weights by the censoring survivor G, estimated with the events flipped
times, events = [1.0, 2.0, 3.0, 4.0], [1, 0, 1, 0]
G = kaplan_meier(times, np.logical_not(events))
print("Brier at 2.5:", brier_score(times, events, [0.9, 0.8, 0.4, 0.3], G, 2.5))

print("horizons:", [(h.label, h.t) for h in percentile_horizons([1, 2, 3, 4, 5])])
