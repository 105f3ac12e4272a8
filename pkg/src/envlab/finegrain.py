"""Fine-graining: equal-weight rewrites of unequal superpositions.

A branch ``c_k |..., E_k>`` with ``|c_k|^2 ~ n_k / N`` is spread over ``n_k``
fresh environment basis vectors, each carrying amplitude ``1/sqrt(N)``. The
basis change is an isometry on the environment alone, stored in a
:class:`FineGrainingMap` so the same physical change can be applied to other
states.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .config import get_tolerances
from .errors import (
    BranchMismatch,
    EnvNotSeparating,
    NoPlanWithinBound,
    NotNormalized,
    UnknownSourceLabel,
    ValidationError,
)
from .statespace import LocalOperator, PureState, _transform, apply_operator

__all__ = [
    "RationalWeightPlan",
    "FineGrainingMap",
    "apportion",
    "rationalize",
    "branch_weights",
    "finegrain_env",
    "apply_map",
    "pull_back",
    "add_ancilla_env",
]

DEFAULT_MAX_DENOMINATOR = 10**6


@dataclass(frozen=True)
class RationalWeightPlan:
    weights: tuple[float, ...]
    numerators: tuple[int, ...]
    denominator: int
    achieved_error: float
    tolerance: float

    @property
    def fractions(self) -> tuple[float, ...]:
        return tuple(n / self.denominator for n in self.numerators)


def apportion(weights: Sequence[float], total: int) -> tuple[int, ...]:
    """Largest-remainder apportionment of ``total`` seats; ties go to the lower index."""
    quotas = [w * total for w in weights]
    seats = [math.floor(q) for q in quotas]
    rema = [q - s for q, s in zip(quotas, seats)]
    deficit = total - sum(seats)
    if deficit >= 0:
        order = sorted(range(len(weights)), key=lambda k: (-rema[k], k))
        for k in order[:deficit]:
            seats[k] += 1
    else:
        order = sorted(range(len(weights)), key=lambda k: (rema[k], k))
        for k in order[:-deficit]:
            seats[k] -= 1
    return tuple(seats)


def _plan_for(weights: Sequence[float], total: int, tol: float) -> RationalWeightPlan | None:
    seats = apportion(weights, total)
    if min(seats) < 1:
        return None
    err = max(abs(n / total - w) for n, w in zip(seats, weights))
    if err > tol:
        return None
    return RationalWeightPlan(tuple(weights), seats, total, err, tol)


def rationalize(
    weights: Sequence[float], tol: float, max_denominator: int = DEFAULT_MAX_DENOMINATOR
) -> RationalWeightPlan:
    """Smallest common denominator ``N`` whose apportionment is within ``tol``.

    Scans ``N = 1, 2, ...`` in vectorised chunks; a chunk is only examined
    term by term where every weight is within ``tol`` of some ``m / N``, which
    apportionment cannot beat.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValidationError("weights must be a non-empty list")
    if np.any(w <= 0):
        raise ValidationError("weights must be positive")
    if abs(w.sum() - 1.0) > get_tolerances().normalization:
        raise ValidationError(f"weights sum to {w.sum():.15g}, expected 1")
    if not tol > 0:
        raise ValidationError("tolerance must be positive")
    wl = [float(x) for x in w]

    chunk = 65536
    start = 1
    while start <= max_denominator:
        stop = min(start + chunk, max_denominator + 1)
        n = np.arange(start, stop, dtype=float)[:, np.newaxis]
        q = w[np.newaxis, :] * n
        gap = np.abs(q - np.rint(q)) / n
        ok = np.all(gap <= tol * (1 + 1e-9) + 1e-15, axis=1)
        for total in (np.nonzero(ok)[0] + start).tolist():
            plan = _plan_for(wl, int(total), tol)
            if plan is not None:
                return plan
        start = stop
    raise NoPlanWithinBound(f"no denominator <= {max_denominator} approximates {wl} within {tol:g}")


@dataclass(frozen=True)
class FineGrainingMap:
    """Environment basis change ``|E_k> -> exp(-i theta_k) / sqrt(n_k) sum_j |E'_j>``.

    ``blocks`` sends each branch's source label to its contiguous run of
    fine-grained labels; source labels carrying no branch pass through
    unchanged, appended after the ``N`` fine-grained labels.
    """

    source_env: str
    source_labels: tuple[str, ...]
    target_env: str
    target_labels: tuple[str, ...]
    blocks: Mapping[str, tuple[str, ...]]
    matrix: np.ndarray
    plan: RationalWeightPlan

    @property
    def operator(self) -> LocalOperator:
        return LocalOperator(
            (self.source_env,), self.matrix, "isometry", (self.target_env, self.target_labels)
        )


def branch_weights(state: PureState, env: str) -> tuple[tuple[str, ...], list[complex]]:
    """Environment labels of the branches (basis order) and their amplitudes.

    Each component is a branch; two components sharing an environment label
    make the environment non-separating.
    """
    pos = state.layout.position(env)
    by_label: dict[str, complex] = {}
    for labels, amp in state.components.items():
        if labels[pos] in by_label:
            raise EnvNotSeparating(f"two branches share environment label {labels[pos]!r}")
        by_label[labels[pos]] = amp
    order = tuple(x for x in state.layout.labels(env) if x in by_label)
    return order, [by_label[x] for x in order]


def finegrain_env(
    state: PureState,
    env: str,
    plan: RationalWeightPlan,
    target_env: str | None = None,
    label_prefix: str | None = None,
) -> tuple[PureState, FineGrainingMap]:
    """Rewrite ``state`` as an (approximately) equal-weight superposition.

    Parameters
    ----------
    state : PureState
        One component per branch, each with its own label on ``env``.
    env : str
        Environment subsystem to fine-grain.
    plan : RationalWeightPlan
        Weights must match the branch weights (``env`` basis order) within 1e-9.
    target_env : str, optional
        Id of the fine-grained subsystem; defaults to ``env``.
    label_prefix : str, optional
        Fine-grained labels are ``prefix + "1" ... prefix + "N"``; defaults to
        ``env + "'"``.

    Returns
    -------
    state, map : PureState, FineGrainingMap
    """
    labels, amps = branch_weights(state, env)
    weights = [abs(a) ** 2 for a in amps]
    if len(weights) != len(plan.weights) or any(
        abs(w - p) > get_tolerances().normalization for w, p in zip(weights, plan.weights)
    ):
        raise BranchMismatch(
            f"branch weights {[round(w, 12) for w in weights]} do not match plan weights {list(plan.weights)}"
        )
    target_env = env if target_env is None else target_env
    prefix = f"{env}'" if label_prefix is None else label_prefix

    source = state.layout.labels(env)
    fine = [f"{prefix}{j}" for j in range(1, plan.denominator + 1)]
    spare = [x for x in source if x not in labels]
    targets = fine + spare
    if len(set(targets)) != len(targets):
        raise ValidationError("fine-grained labels collide with unused environment labels")

    v = np.zeros((len(targets), len(source)), dtype=complex)
    blocks = {}
    start = 0
    for lab, amp, n in zip(labels, amps, plan.numerators):
        col = source.index(lab)
        phase = amp / abs(amp)
        v[start : start + n, col] = phase.conjugate() / math.sqrt(n)
        blocks[lab] = tuple(fine[start : start + n])
        start += n
    for k, lab in enumerate(spare):
        v[plan.denominator + k, source.index(lab)] = 1.0

    fmap = FineGrainingMap(env, source, target_env, tuple(targets), blocks, v, plan)
    return apply_operator(state, fmap.operator), fmap


def _in_source_basis(state: PureState, fmap: FineGrainingMap) -> PureState:
    layout = state.layout
    if fmap.source_env not in layout:
        raise UnknownSourceLabel(f"state has no subsystem {fmap.source_env!r}")
    if layout.labels(fmap.source_env) == fmap.source_labels:
        return state
    extra = set(state.support(fmap.source_env)) - set(fmap.source_labels)
    if extra:
        raise UnknownSourceLabel(f"environment labels {sorted(extra)} are outside the map's source")
    return PureState(layout.replace(fmap.source_env, fmap.source_env, fmap.source_labels), state.components)


def apply_map(state: PureState, fmap: FineGrainingMap) -> PureState:
    """Push ``state`` through the stored environment isometry."""
    return apply_operator(_in_source_basis(state, fmap), fmap.operator)


def pull_back(state: PureState, fmap: FineGrainingMap) -> PureState:
    """Express a state living in the map's range back in the source basis."""
    layout = state.layout
    if fmap.target_env not in layout or layout.labels(fmap.target_env) != fmap.target_labels:
        raise UnknownSourceLabel("state is not expressed in this map's fine-grained basis")
    comps = _transform(state, (fmap.target_env,), fmap.matrix.conj().T, [(x,) for x in fmap.source_labels])
    out_layout = layout.replace(fmap.target_env, fmap.source_env, fmap.source_labels)
    try:
        return PureState(out_layout, comps)
    except NotNormalized:
        raise NotNormalized("state has weight outside the range of the fine-graining map") from None


def add_ancilla_env(state: PureState, new_env_id: str, env: str | None = None) -> PureState:
    """Attach a second environment perfectly correlated with ``env``.

    Each component ``(..., E'_i)`` becomes ``(..., E'_i, E''_i)`` where the new
    label is ``new_env_id`` followed by the 1-based position of ``E'_i``.
    ``env`` defaults to the last subsystem of the layout.
    """
    layout = state.layout
    env = layout.ids[-1] if env is None else env
    source = layout.labels(env)
    new_labels = [f"{new_env_id}{k}" for k in range(1, len(source) + 1)]
    new_layout = layout.append(new_env_id, new_labels)
    branch_weights(state, env)
    pos = layout.position(env)
    comps = {
        labels + (new_labels[source.index(labels[pos])],): amp for labels, amp in state.components.items()
    }
    return PureState(new_layout, comps)
