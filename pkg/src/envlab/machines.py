"""Measurement machines as outcome-labelled families of orthogonal projectors.

A machine records which subsystems its projectors touch (``locality``). A
machine is local when it only projects on its pointer; fine-grained machines
also project on the environment and so act non-locally.

Two registration rules are provided, both pure functions of the projected
weights: ``born`` (probability = squared norm of the projected component) and
``branch-count`` (uniform over outcomes with a non-vanishing component).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .config import get_tolerances
from .errors import (
    AmbiguousBranch,
    IncompleteProjectorFamily,
    LayoutMismatch,
    TargetKindError,
    UnknownOutcome,
    UnknownSubsystem,
    ValidationError,
    ZeroWeightOutcome,
)
from .finegrain import (
    DEFAULT_MAX_DENOMINATOR,
    FineGrainingMap,
    apply_map,
    branch_weights,
    finegrain_env,
    rationalize,
)
from .statespace import LocalOperator, PureState, SubsystemLayout, project

__all__ = [
    "RULES",
    "MeasurementMachine",
    "OutcomeStatistics",
    "PostMeasurementState",
    "ReportRow",
    "ParadoxReport",
    "local_machine",
    "finegrained_machine",
    "outcome_statistics",
    "register",
    "sample",
    "paradox_report",
]

RULES = ("born", "branch-count")
Labels = tuple[str, ...]


@dataclass(frozen=True)
class MeasurementMachine:
    """Orthogonal projectors on the ``locality`` subsystems, one per outcome.

    Outcome labels list one basis label per locality subsystem (layout order).
    ``layout`` fixes the bases the projectors refer to.
    """

    layout: SubsystemLayout
    locality: tuple[str, ...]
    outcomes: tuple[tuple[Labels, LocalOperator], ...]
    pointer: str | None = None
    basis_provenance: FineGrainingMap | None = None
    name: str = ""

    def __post_init__(self):
        tol = get_tolerances().operator
        seen = set()
        for label, proj in self.outcomes:
            if proj.kind != "projector":
                raise TargetKindError(f"outcome {label} is not a projector")
            if proj.targets != self.locality:
                raise LayoutMismatch(f"outcome {label} acts on {proj.targets}, machine on {self.locality}")
            if label in seen:
                raise ValidationError(f"duplicate outcome label {label}")
            seen.add(label)
        mats = [p.matrix for _, p in self.outcomes]
        for i in range(len(mats)):
            for j in range(i + 1, len(mats)):
                if not np.allclose(mats[i] @ mats[j], 0, atol=tol):
                    raise ValidationError(f"projectors {i} and {j} are not orthogonal")

    @property
    def labels(self) -> tuple[Labels, ...]:
        return tuple(lab for lab, _ in self.outcomes)

    @property
    def is_local(self) -> bool:
        """Whether registration touches only the pointer."""
        return self.pointer is not None and set(self.locality) <= {self.pointer}

    def locality_note(self) -> str:
        if self.is_local:
            return f"local: projects on pointer {self.pointer} only"
        others = [s for s in self.locality if s != self.pointer]
        return f"non-local: also projects on {','.join(others)} (condition 4 violated)"

    def projector(self, outcome) -> LocalOperator:
        outcome = _as_label(outcome)
        for label, proj in self.outcomes:
            if label == outcome:
                return proj
        raise UnknownOutcome(f"machine has no outcome {outcome}")

    def compatible(self, state: PureState) -> bool:
        return all(s in state.layout and state.layout.labels(s) == self.layout.labels(s) for s in self.locality)

    def prepare(self, state: PureState) -> PureState:
        """Express ``state`` in the basis the machine projects on.

        States already in that basis pass through; states in the source basis
        of the machine's fine-graining map are pushed through it.
        """
        if self.compatible(state):
            return state
        if self.basis_provenance is not None:
            mapped = apply_map(state, self.basis_provenance)
            if self.compatible(mapped):
                return mapped
        raise LayoutMismatch(f"state layout {state.layout.to_dict()} does not match machine {self.name!r}")


def _as_label(outcome) -> Labels:
    if isinstance(outcome, str):
        return (outcome,)
    return tuple(outcome)


@dataclass(frozen=True)
class OutcomeStatistics:
    rule: str
    entries: Mapping[Labels, float]
    aggregation: str | None = None

    def __getitem__(self, outcome) -> float:
        return self.entries[_as_label(outcome)]

    def get(self, outcome, default: float = 0.0) -> float:
        return self.entries.get(_as_label(outcome), default)

    def as_dict(self) -> dict[str, float]:
        return {",".join(k): v for k, v in self.entries.items()}


@dataclass(frozen=True)
class PostMeasurementState:
    outcome: Labels
    weight: float
    state: PureState


def _diag_projector(layout: SubsystemLayout, targets: Sequence[str], labels: Sequence[str]) -> LocalOperator:
    d = layout.joint_dim(targets)
    m = np.zeros((d, d))
    k = layout.joint_index(targets, labels)
    m[k, k] = 1.0
    return LocalOperator(tuple(targets), m, "projector")


def local_machine(layout: SubsystemLayout, pointer: str) -> MeasurementMachine:
    """Projectors ``I x |P_k><P_k| x I``, one per pointer label."""
    if pointer not in layout:
        raise UnknownSubsystem(f"no pointer subsystem {pointer!r} in layout {layout.ids}")
    outcomes = tuple(((p,), _diag_projector(layout, (pointer,), (p,))) for p in layout.labels(pointer))
    return MeasurementMachine(layout, (pointer,), outcomes, pointer, None, f"local({pointer})")


def finegrained_machine(
    state: PureState,
    pointer: str,
    env: str,
    tol: float = 1e-9,
    max_denominator: int = DEFAULT_MAX_DENOMINATOR,
    label_prefix: str | None = None,
    include_pointer: bool = True,
    name: str | None = None,
) -> MeasurementMachine:
    """Machine projecting on pointer and fine-grained environment labels.

    The environment basis is the one that makes ``state`` an equal-weight
    superposition, so the machine depends on the state it was built for. With
    ``include_pointer=False`` only the environment is projected on.
    """
    if pointer not in state.layout:
        raise UnknownSubsystem(f"no pointer subsystem {pointer!r}")
    _, amps = branch_weights(state, env)
    weights = [abs(a) ** 2 for a in amps]
    plan = rationalize(weights, tol, max_denominator)
    fine, fmap = finegrain_env(state, env, plan, label_prefix=label_prefix)
    layout = fine.layout
    locality = layout.ordered((pointer, fmap.target_env) if include_pointer else (fmap.target_env,))
    pos = [layout.position(s) for s in locality]
    labels = sorted({tuple(c[p] for p in pos) for c in fine.components}, key=lambda lab: layout.joint_index(locality, lab))
    outcomes = tuple((lab, _diag_projector(layout, locality, lab)) for lab in labels)
    return MeasurementMachine(
        layout, locality, outcomes, pointer, fmap, name or f"finegrained({pointer},{fmap.target_env})"
    )


def _projected_weights(machine: MeasurementMachine, state: PureState) -> list[float]:
    if not machine.compatible(state):
        raise LayoutMismatch(f"state layout {state.layout.to_dict()} does not match machine {machine.name!r}")
    out = []
    for _, proj in machine.outcomes:
        comps = project(state, proj)
        out.append(float(sum(abs(a) ** 2 for a in comps.values())))
    return out


def outcome_statistics(
    machine: MeasurementMachine,
    state: PureState,
    rule: str = "born",
    aggregate_by: str | None = None,
) -> OutcomeStatistics:
    """Registration probabilities of each outcome under ``rule``.

    ``aggregate_by`` merges outcomes sharing a label on that subsystem (which
    must be one the machine projects on).
    """
    if rule not in RULES:
        raise ValidationError(f"unknown rule {rule!r}; expected one of {RULES}")
    tol = get_tolerances()
    weights = _projected_weights(machine, state)
    missing = 1.0 - sum(weights)
    if missing > tol.normalization:
        raise IncompleteProjectorFamily(f"outcomes miss probability {missing:.3g} of the state")

    if rule == "born":
        probs = weights
    else:
        for label, w in zip(machine.labels, weights):
            if tol.prune < w <= tol.branch:
                raise AmbiguousBranch(f"outcome {label} has weight {w:.3g} between cutoffs")
        alive = [w > tol.branch for w in weights]
        count = sum(alive)
        probs = [1.0 / count if a else 0.0 for a in alive]

    entries: dict[Labels, float] = {}
    if aggregate_by is None:
        for label, p in zip(machine.labels, probs):
            entries[label] = p
    else:
        if aggregate_by not in machine.locality:
            raise ValidationError(f"machine {machine.name!r} does not project on {aggregate_by!r}")
        k = machine.locality.index(aggregate_by)
        for label in machine.layout.labels(aggregate_by):
            entries[(label,)] = 0.0
        for label, p in zip(machine.labels, probs):
            entries[(label[k],)] += p
    return OutcomeStatistics(rule, entries, aggregate_by)


def register(machine: MeasurementMachine, state: PureState, outcome) -> PostMeasurementState:
    """Normalised post-measurement state for ``outcome`` and its weight."""
    proj = machine.projector(outcome)
    if not machine.compatible(state):
        raise LayoutMismatch(f"state layout does not match machine {machine.name!r}")
    comps = project(state, proj)
    weight = float(sum(abs(a) ** 2 for a in comps.values()))
    if weight <= get_tolerances().prune**2 or not comps:
        raise ZeroWeightOutcome(f"outcome {_as_label(outcome)} has zero weight")
    norm = weight**0.5
    post = PureState(state.layout, {k: v / norm for k, v in comps.items()})
    return PostMeasurementState(_as_label(outcome), weight, post)


def sample(
    machine: MeasurementMachine,
    state: PureState,
    rule: str,
    n: int,
    seed: int,
    aggregate_by: str | None = None,
) -> dict[Labels, int]:
    """Draw ``n`` registrations from :func:`outcome_statistics`; seeded and repeatable."""
    if n < 1:
        raise ValidationError("number of draws must be at least 1")
    stats = outcome_statistics(machine, state, rule, aggregate_by)
    labels = list(stats.entries)
    p = np.array([stats.entries[k] for k in labels])
    p = p / p.sum()
    rng = np.random.default_rng(seed)
    draws = rng.choice(len(labels), size=n, p=p)
    counts = np.bincount(draws, minlength=len(labels))
    return {lab: int(c) for lab, c in zip(labels, counts)}


@dataclass(frozen=True)
class ReportRow:
    machine: str
    state: str
    rule: str
    statistics: Mapping[str, float]
    born: Mapping[str, float]
    gap: float
    born_consistent: bool
    local: bool
    locality: tuple[str, ...]
    equal_weight: bool
    notes: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "machine": self.machine,
            "state": self.state,
            "rule": self.rule,
            "statistics": dict(self.statistics),
            "born": dict(self.born),
            "gap": self.gap,
            "born_consistent": self.born_consistent,
            "local": self.local,
            "locality": list(self.locality),
            "equal_weight": self.equal_weight,
            "notes": list(self.notes),
        }


@dataclass(frozen=True)
class ParadoxReport:
    rows: tuple[ReportRow, ...]
    machines: Mapping[str, MeasurementMachine] = field(default_factory=dict)

    def row(self, machine: str, state: str, rule: str) -> ReportRow:
        for r in self.rows:
            if (r.machine, r.state, r.rule) == (machine, state, rule):
                return r
        raise KeyError((machine, state, rule))

    def to_dict(self) -> dict:
        return {"rows": [r.to_dict() for r in self.rows]}


def paradox_report(
    psi1: PureState,
    psi2: PureState,
    pointer: str,
    env: str,
    tol: float = 1e-9,
    names: tuple[str, str] = ("psi1", "psi2"),
) -> ParadoxReport:
    """Compare state-tailored fine-grained machines against a local machine.

    Each fine-grained machine is built for one state and then also applied to
    the other (through its stored basis change). Rows carry pointer-aggregated
    statistics for both rules next to the Born reference of the measured state.
    """
    if psi1.layout != psi2.layout:
        raise LayoutMismatch("both states must share one layout")
    if branch_weights(psi1, env)[0] != branch_weights(psi2, env)[0]:
        raise LayoutMismatch("both states must use the same environment labels for their branches")

    n1, n2 = names
    m1 = finegrained_machine(psi1, pointer, env, tol, label_prefix=f"{env}'", name=f"M({n1})")
    m2 = finegrained_machine(psi2, pointer, env, tol, label_prefix=f"{env}''", name=f"M({n2})")
    local = local_machine(psi1.layout, pointer)
    local = MeasurementMachine(local.layout, local.locality, local.outcomes, pointer, None, "local")
    states = {n1: psi1, n2: psi2}

    plan = [(m1, n1), (m1, n2), (m2, n2), (m2, n1), (local, n1), (local, n2)]
    rows = []
    branch_tol = get_tolerances().branch
    for machine, sname in plan:
        prepared = machine.prepare(states[sname])
        reference = outcome_statistics(local, states[sname], "born", pointer).as_dict()
        weights = [w for w in _projected_weights(machine, prepared) if w > branch_tol]
        equal = max(weights) - min(weights) <= branch_tol
        for rule in RULES:
            stats = outcome_statistics(machine, prepared, rule, pointer).as_dict()
            gap = max(abs(stats[k] - reference[k]) for k in reference)
            notes = []
            if rule == "branch-count" and not equal:
                notes.append("equal-weight premise not met: branch counting unsupported")
            if not machine.is_local:
                notes.append(machine.locality_note())
            rows.append(
                ReportRow(
                    machine=machine.name,
                    state=sname,
                    rule=rule,
                    statistics=stats,
                    born=reference,
                    gap=gap,
                    born_consistent=gap < tol,
                    local=machine.is_local,
                    locality=machine.locality,
                    equal_weight=equal,
                    notes=tuple(notes),
                )
            )
    return ParadoxReport(tuple(rows), {m1.name: m1, m2.name: m2, "local": local})
