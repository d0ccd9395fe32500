"""
From activations to a formula
=============================

Each activation is matched against a small library of closed forms
a3 * y(a1 * x + a2) + a4 and the best R^2 wins.  Flat curves are pruned.
"""
import numpy as np

from gcph.datasets import SyntheticConfig, generate_synthetic
from gcph.symbolic import affine_fit, render_formula, symbolify
from gcph.trainer import TrainConfig, train

# Fitting one candidate by hand
xs = np.linspace(-1, 1, 101)
alpha, r2 = affine_fit("sin", xs, 2 * np.sin(3 * xs + 1) + 0.5)
print("sin fit:", np.round(alpha, 3), "R^2 =", round(r2, 6))

# The best candidate for a parabola is the square, ln can only bend one way
for name in ("x^2", "ln", "tanh"):
    print(f"  {name:5s} R^2 on x^2: {affine_fit(name, xs, xs**2)[1]:.4f}")

# A trained model rendered as text
ds = generate_synthetic(SyntheticConfig("linear", n=2000, seed=1))
model, _ = train(ds, TrainConfig(seed=1))
sm = symbolify(model, ds.X)
for t in sm.terms:
    print(f"  feature {t.feature + 1}: {t.candidate:5s} R^2 = {t.r2:.4f}")
print(render_formula(sm))
