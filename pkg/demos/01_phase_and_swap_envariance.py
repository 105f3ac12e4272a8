"""
Phase and swap envariance
=========================

A local operation on S is envariant when some operation on the
environment E alone restores the joint state. Local phases always
have this property. Swaps only have it when the two branches carry
equal weight.
"""

import math

import numpy as np

from envlab import build_state, is_envariant, phase_op, swap_op, verify_counter

layout = {"S": ["S0", "S1"], "E": ["Ea", "Eb"]}

# an unequal, entangled two-branch state with complex amplitudes
alpha, beta = math.sqrt(3) / 2 * np.exp(0.4j), 0.5 * np.exp(-1.2j)
state = build_state(layout, [(("S0", "Ea"), alpha), (("S1", "Eb"), beta)])

# a phase on S0 is undone by the opposite phase on Ea
phi = 0.9
u_s = phase_op(state.layout, "S", "S0", phi)
u_e = phase_op(state.layout, "E", "Ea", -phi)
print("phase residual:", verify_counter(state, u_s, u_e))

# the decision procedure finds the same counter-operation on its own
verdict = is_envariant(state, u_s, ["E"])
print("phase envariant:", verdict.envariant)
print("counter-phase diagonal:", np.round(np.diag(verdict.counter_op.matrix), 12))

# swapping S0 and S1 changes the reduced state of E when weights differ
swap = swap_op(state.layout, "S", "S0", "S1")
print("swap envariant at |alpha|^2 = 3/4:", is_envariant(state, swap, ["E"]).envariant)

# with equal weights, the environment swap Ea <-> Eb undoes it
equal = build_state(layout, [(("S0", "Ea"), 1), (("S1", "Eb"), 1)], normalize=True)
verdict = is_envariant(equal, swap_op(equal.layout, "S", "S0", "S1"), ["E"])
print("swap envariant at equal weights:", verdict.envariant, "residual", verdict.residual)
print("counter-swap:\n", np.round(verdict.counter_op.matrix.real, 12) + 0.0)
