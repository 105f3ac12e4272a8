"""
Fine-graining the environment
=============================

Rational branch weights n_k/N can be rewritten as N equal-weight
components by splitting each environment state into n_k finer ones.
The system and pointer see no difference. An ancilla environment
correlated with the fine-grained labels then makes every
composite swap envariant.
"""

from envlab import (
    add_ancilla_env,
    composite_swap,
    finegrain_env,
    pull_back,
    rationalize,
    reduced_density,
    state_distance,
    swap_op,
    verify_counter,
)
from envlab.cli import paper_states

psi1, psi2 = paper_states()

# weights 3/4 and 1/4 give the plan (3, 1) over N = 4
plan = rationalize([0.75, 0.25], tol=1e-9)
print("plan:", plan.numerators, "/", plan.denominator, "error", plan.achieved_error)

fine, fmap = finegrain_env(psi1, "E", plan)
for labels, amp in fine.components.items():
    print(" ", labels, round(abs(amp), 12))

# the reduced state of S and P is unchanged by the isometry
drift = reduced_density(fine, ["S", "P"]).distance(reduced_density(psi1, ["S", "P"]))
print("rho_SP drift:", drift)

# V^dagger maps the fine-grained state back to the original
print("round trip distance:", state_distance(pull_back(fine, fmap), psi1))

# an irrational weight is only approximated; the error is reported
approx = rationalize([1 / 3.14159, 1 - 1 / 3.14159], tol=1e-3)
print("irrational plan:", approx.numerators, "/", approx.denominator, "error", approx.achieved_error)

# a second environment copies the fine-grained index
ext = add_ancilla_env(fine, "E''")
print("extended layout:", ext.layout.ids)
for i in (1, 2, 3):
    op = composite_swap(ext.layout, ["S", "P", "E"], ("S0", "P0", f"E'{i}"), ("S1", "P1", "E'4"))
    counter = swap_op(ext.layout, "E''", f"E''{i}", "E''4")
    print(f"composite swap E'{i} <-> E'4 residual:", verify_counter(ext, op, counter))
