"""
Projecting onto the monotone cone
=================================

A plan is monotone when its support never pairs a larger base point with
a smaller target.  The nearest monotone plan is found by isotonic
regression of the concatenated fiber quantiles.
"""

from monoplan import FiberPlan, dirac, discrete, is_monotone, lambda_max, oracle_project, project_cone

#%%
# The antitone plan sends 0 to 1 and 1 to 0.

p = FiberPlan(discrete([0.0, 1.0]), (dirac(1.0), dirac(0.0)))
report = is_monotone(p)
print(report.monotone, report.violation)

#%%
# Pushing the plan as (x, x + tau*y) keeps it monotone up to tau = 1, where
# both images meet at 1.

print(lambda_max(p))

#%%
# Pool-adjacent-violators pools both fibers at 1/2.  The slow Dykstra
# oracle reaches the same point.

proj = project_cone(p)
print([f.atoms for f in proj.plan.atom_fibers], proj.distance)
print(oracle_project(p)[1])

#%%
# A three-atom block pools into a single common fiber.

block = FiberPlan(discrete([0.0, 1.0, 2.0]), (dirac(2.0), dirac(1.0), dirac(0.0)))
print(project_cone(block).distance)  # sqrt(2/3)
