"""Envariance: local operations on a system that an environment operation undoes.

A state is envariant under ``U_S`` when some ``U_E`` acting only on the
environment restores it exactly, ``U_E U_S |psi> = |psi>``. Equal reduced
states on the non-environment part are necessary and sufficient (both states
are purifications of the same density matrix), and the counter-operation is
read off from the Schmidt decomposition across the system/environment cut.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .config import get_tolerances
from .errors import (
    DegenerateSpectrumUnresolved,
    IdenticalLabels,
    TargetKindError,
    TargetOverlap,
    UnknownLabel,
    ValidationError,
)
from .statespace import (
    LocalOperator,
    PureState,
    SubsystemLayout,
    _bipartite_matrix,
    apply_operator,
    reduced_density,
    schmidt,
    state_distance,
)

__all__ = [
    "EnvarianceVerdict",
    "phase_op",
    "swap_op",
    "composite_swap",
    "is_envariant",
    "verify_counter",
    "causality_check",
]


@dataclass(frozen=True)
class EnvarianceVerdict:
    envariant: bool
    counter_op: LocalOperator | None = None
    residual: float | None = None

    def __bool__(self) -> bool:
        return self.envariant


def phase_op(layout: SubsystemLayout, subsystem: str, label: str, phi: float) -> LocalOperator:
    """Diagonal unitary multiplying the ``label`` amplitude by ``exp(i phi)``."""
    k = layout.label_index(subsystem, label)
    diag = np.ones(layout.dim(subsystem), dtype=complex)
    diag[k] = np.exp(1j * phi)
    return LocalOperator((subsystem,), np.diag(diag))


def _transposition(dim: int, i: int, j: int) -> np.ndarray:
    perm = np.arange(dim)
    perm[i], perm[j] = j, i
    return np.eye(dim)[perm]


def swap_op(layout: SubsystemLayout, subsystem: str, label1: str, label2: str) -> LocalOperator:
    """Permutation unitary ``|l1><l2| + |l2><l1|`` plus identity on the other labels."""
    if label1 == label2:
        raise IdenticalLabels(f"cannot swap {label1!r} with itself")
    i = layout.label_index(subsystem, label1)
    j = layout.label_index(subsystem, label2)
    return LocalOperator((subsystem,), _transposition(layout.dim(subsystem), i, j))


def composite_swap(
    layout: SubsystemLayout,
    targets: Sequence[str],
    tuple1: Sequence[str],
    tuple2: Sequence[str],
) -> LocalOperator:
    """Exchange two joint basis states of several subsystems.

    ``targets`` are taken in the given order and ``tuple1``/``tuple2`` list one
    label per target. The returned operator's targets follow layout order.
    """
    targets = tuple(targets)
    tuple1, tuple2 = tuple(tuple1), tuple(tuple2)
    if len(tuple1) != len(targets) or len(tuple2) != len(targets):
        raise UnknownLabel("label tuples must have one entry per target")
    if tuple1 == tuple2:
        raise IdenticalLabels(f"cannot swap {tuple1} with itself")
    ordered = layout.ordered(targets)
    if len(ordered) != len(targets):
        raise ValidationError("duplicate subsystem in composite swap targets")
    reorder = [targets.index(s) for s in ordered]
    t1 = [tuple1[k] for k in reorder]
    t2 = [tuple2[k] for k in reorder]
    i = layout.joint_index(ordered, t1)
    j = layout.joint_index(ordered, t2)
    return LocalOperator(ordered, _transposition(layout.joint_dim(ordered), i, j))


def _polar_unitary(m: np.ndarray) -> np.ndarray:
    u, _, vh = np.linalg.svd(m)
    return u @ vh


def _counter_operator(state: PureState, moved: PureState, env: tuple[str, ...]) -> LocalOperator:
    """Environment unitary ``W`` with ``(I x W) moved = state``.

    With ``psi = A S R`` (Schmidt form across the cut) and ``U A = A Q`` on the
    support, ``W^T = R^dag Q^dag R + (1 - R^dag R)`` does the job. ``Q`` is
    recovered as ``A^dag Phi R^dag S^-1`` from the moved state ``Phi``, then
    projected onto the degenerate blocks of ``S`` and made exactly unitary.
    """
    layout = state.layout
    system = tuple(s for s in layout.ids if s not in env)
    dec = schmidt(state, system)
    a = dec.left_basis
    r = dec.right_basis.T
    coeff = dec.coefficients
    phi = _bipartite_matrix(moved, system, env)
    q = a.conj().T @ phi @ r.conj().T / coeff[np.newaxis, :]

    tol = get_tolerances().normalization
    block = np.zeros(len(coeff), dtype=int)
    for k in range(1, len(coeff)):
        block[k] = block[k - 1] + (coeff[k - 1] - coeff[k] > tol)
    q_fixed = np.zeros_like(q)
    for b in np.unique(block):
        idx = np.nonzero(block == b)[0]
        q_fixed[np.ix_(idx, idx)] = _polar_unitary(q[np.ix_(idx, idx)])

    d_env = r.shape[1]
    w_t = r.conj().T @ q_fixed.conj().T @ r + (np.eye(d_env) - r.conj().T @ r)
    w = _polar_unitary(w_t.T)
    return LocalOperator(env, w)


def is_envariant(state: PureState, op: LocalOperator, env: Iterable[str]) -> EnvarianceVerdict:
    """Decide whether ``op`` on the system can be undone on ``env`` alone.

    The environment ``env`` is everything the counter-operation may touch; all
    remaining subsystems count as the system side. Equality is exact vector
    equality, no global phase is quotiented out.
    """
    env = state.layout.ordered(env)
    if not env:
        raise ValidationError("environment subset is empty")
    if set(op.targets) & set(env):
        raise TargetOverlap(f"operator targets {op.targets} overlap environment {env}")
    system = tuple(s for s in state.layout.ids if s not in env)
    if not system:
        raise ValidationError("environment covers the whole layout")

    moved = apply_operator(state, op)
    before = reduced_density(state, system)
    after = reduced_density(moved, system)
    tol = get_tolerances().normalization
    if before.distance(after) > tol:
        return EnvarianceVerdict(False)

    counter = _counter_operator(state, moved, env)
    residual = state_distance(apply_operator(moved, counter), state)
    if residual >= tol:
        warnings.warn(
            f"counter-operation residual {residual:.3g} exceeds {tol:.1g}", DegenerateSpectrumUnresolved
        )
        return EnvarianceVerdict(False, None, residual)
    return EnvarianceVerdict(True, counter, residual)


def verify_counter(state: PureState, op: LocalOperator, counter: LocalOperator) -> float:
    """Residual ``||counter op psi - psi||``."""
    if set(op.targets) & set(counter.targets):
        raise TargetOverlap(f"counter targets {counter.targets} overlap {op.targets}")
    return state_distance(apply_operator(apply_operator(state, op), counter), state)


def causality_check(state: PureState, env_op: LocalOperator, system: Iterable[str]) -> bool:
    """True when ``env_op`` leaves the reduced state of ``system`` unchanged."""
    system = state.layout.ordered(system)
    if set(env_op.targets) & set(system):
        raise TargetOverlap(f"environment operator touches system subsystems {system}")
    if env_op.kind != "unitary":
        raise TargetKindError(f"causality check needs a unitary, got {env_op.kind}")
    before = reduced_density(state, system)
    after = reduced_density(apply_operator(state, env_op), system)
    return before.distance(after) <= get_tolerances().normalization
