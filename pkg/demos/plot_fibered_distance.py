"""
Fibered distances between transport plans
=========================================

Two plans with the same first marginal are compared fiber by fiber: the
squared distance is the base-average of the squared 1D Wasserstein
distances between their conditional laws.
"""

import numpy as np

from monoplan import FiberPlan, MapFiber, ScalarMeasure, dirac, discrete, w_rho, w_rho_via_adm, wasserstein2

#%%
# On the line the quadratic Wasserstein distance is the L2 distance between
# quantile functions, so it is exact for atoms and uniform pieces alike.

print(wasserstein2(discrete([0.0, 1.0]), discrete([0.0, 2.0])))  # sqrt(1/2)

#%%
# A plan stores one fiber per base atom and one per uniform base piece.
# Here half the mass sits on [0, 1] and moves along y = 3 - 7x, the other
# half is an atom at 2 spreading evenly to 0 and 9.

base = ScalarMeasure(atoms=((2.0, 0.5),), pieces=((0.0, 1.0, 0.5),))
p1 = FiberPlan(base, (discrete([0.0, 9.0]),), (MapFiber(3.0, -7.0),))
p2 = FiberPlan(base, (dirac(4.5),), (MapFiber(0.0, 0.0),))

#%%
# The closed form and the three-marginal minimisation (solved with the
# transportation simplex on every atomic fiber) agree.

print(w_rho(p1, p2), w_rho_via_adm(p1, p2))
assert np.isclose(w_rho(p1, p2), w_rho_via_adm(p1, p2))
