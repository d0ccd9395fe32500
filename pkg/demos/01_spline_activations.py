"""
Spline activations
==================

Every covariate gets its own learnable activation: a SiLU base term plus a
weighted sum of B-spline basis functions on a uniform grid.
"""
import numpy as np

from gcph.spline import Activation, KnotGrid, activation_eval, basis_fn, bspline_basis

# A grid with 5 intervals on [-1, 1] and cubic pieces gives 5 + 3 = 8 basis functions
grid = KnotGrid(-1.0, 1.0, num_intervals=5, order=3)
print("knots:", np.round(grid.knots, 2))
print("number of basis functions:", grid.num_basis)

# Inside the grid the basis sums to one (partition of unity)
xs = np.linspace(-1, 1, 7)
B = bspline_basis(xs, grid)
print("row sums:", B.sum(axis=1))

# Cubic pieces overlap: at most order + 1 of them are nonzero at any point
print("nonzero per row:", (B > 0).sum(axis=1))

# The base term is SiLU, x * sigmoid(x)
print("b(1) =", basis_fn(1.0))

# An activation mixes the two parts with scales omega_b and omega_s
rng = np.random.default_rng(0)
a = Activation(omega_b=0.5, omega_s=1.0, coeffs=rng.normal(0, 0.3, grid.num_basis), grid=grid)
for x, y in zip(xs, activation_eval(a, xs)):
    print(f"  phi({x:+.2f}) = {y:+.4f}")

# Outside the grid the splines are not clamped, they just fade out
print("basis sum at x=1.5:", bspline_basis(1.5, grid).sum())
