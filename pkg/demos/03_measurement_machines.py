"""
Measurement machines and the state-dependence problem
=====================================================

A machine that counts fine-grained branches reproduces Born weights
only on the state it was built for. Applied to a second state with
different weights it counts the wrong number of branches. A machine
that projects on the pointer alone is local but counts one branch
per outcome.
"""

from envlab import finegrained_machine, outcome_statistics, paradox_report, register, sample
from envlab.cli import paper_states

psi1, psi2 = paper_states()

m1 = finegrained_machine(psi1, "P", "E")
print("M(psi1) outcomes:", m1.labels)
print("M(psi1) locality:", m1.locality_note())

# built for psi1, the machine counts 3 of 4 branches on P0
fine = m1.prepare(psi1)
print("branch-count on psi1:", outcome_statistics(m1, fine, "branch-count", "P").as_dict())

# the same machine on psi2 still counts 3 of 4, while Born gives 2/3
mapped = m1.prepare(psi2)
print("branch-count on psi2:", outcome_statistics(m1, mapped, "branch-count", "P").as_dict())
print("born on psi2:        ", outcome_statistics(m1, mapped, "born", "P").as_dict())

# a registration keeps the components consistent with the outcome
post = register(m1, fine, ("P0", "E'1"))
print("register (P0, E'1): weight", post.weight, "->", dict(post.state.components))

# seeded sampling is reproducible
print("counts:", sample(m1, fine, "born", 10_000, seed=42, aggregate_by="P"))

# the full comparison table
report = paradox_report(psi1, psi2, "P", "E")
for row in report.rows:
    if row.rule == "branch-count":
        print(f"{row.machine:8s} {row.state:5s} P0={row.statistics['P0']:.4f} "
              f"born={row.born['P0']:.4f} consistent={row.born_consistent} local={row.local}")
