"""
Witness sequences for tangent plans
===================================

A plan lies in the tangent cone of the monotone plans exactly when it is
induced by a map on the diffuse part of the base; atoms may carry any
fiber.  Each tangent plan comes with an explicit sequence of plans that
become monotone after a small push and converge to it.
"""

import math

from monoplan import (
    ConstFiber,
    FiberPlan,
    MapFiber,
    PiecewiseAffineMap,
    ScalarMeasure,
    discrete,
    tangent_membership,
    uniform,
    witness_atom,
    witness_function,
    witness_sequence,
)

#%%
# A spread fiber on a diffuse piece is not tangent.

print(tangent_membership(FiberPlan(uniform(0.0, 1.0), (), (ConstFiber(discrete([-1.0, 1.0])),)))[0])

#%%
# A downward jump in the velocity is smoothed by a ramp of width 1/n.  The
# squared error is bounded by the base mass under the ramp times the
# squared jump height.

jump = PiecewiseAffineMap(((-math.inf, 0.5, 0.0, 0.0), (0.5, math.inf, -1.0, 0.0)))
for n in (1, 4, 16, 64):
    step = witness_function(jump, uniform(0.0, 1.0), n)
    print(n, step.tau_n, step.wrho_to_target, step.monotone_ok)

#%%
# A spread at an atom is squeezed into a shrinking window around it,
# pushing any nearby base mass out of the way.

for n in (1, 4, 16):
    step = witness_atom(discrete([-1.0, 1.0]), 0.0, discrete([0.0, 1.0]), n)
    print(n, step.wrho_to_target, step.details["decomposition_gap"])

#%%
# The two constructions combine: map witness plus one atom witness per
# atom, summed with push size halved at every step.

base = ScalarMeasure(atoms=((2.0, 0.5),), pieces=((0.0, 1.0, 0.5),))
plan = FiberPlan(base, (discrete([-4.3, -3.7]),), (MapFiber(3.0, -7.0),))
for step in witness_sequence(plan, [1, 4, 16, 64]):
    print(step.n, step.tau_n, step.wrho_to_target, step.monotone_ok)
