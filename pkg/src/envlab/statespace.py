"""Sparse multipartite pure states and operators acting on subsystem subsets.

States are stored as a mapping from full label tuples to complex amplitudes.
Dense arrays only appear over the joint basis of the subsystems an operator
actually touches, so a state with a handful of components in a formally huge
space stays cheap.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import Iterable, Mapping, Sequence

import numpy as np

from .config import get_tolerances
from .errors import (
    DuplicateSubsystemId,
    EmptyKeepSet,
    EmptyState,
    InvalidBipartition,
    LayoutMismatch,
    NonUnitary,
    NotNormalized,
    TargetKindError,
    TargetMismatch,
    UnknownLabel,
    UnknownSubsystem,
    ValidationError,
)

__all__ = [
    "SubsystemLayout",
    "PureState",
    "LocalOperator",
    "DensityMatrix",
    "SchmidtDecomposition",
    "build_state",
    "apply_operator",
    "reduced_density",
    "schmidt",
    "state_distance",
    "ray_distance",
    "overlap",
]

Labels = tuple[str, ...]


@dataclass(frozen=True)
class SubsystemLayout:
    """Ordered subsystems, each with an ordered list of basis labels.

    >>> layout = SubsystemLayout([("S", ["S0", "S1"]), ("E", ["Ea", "Eb"])])
    >>> layout.dims
    (2, 2)
    """

    subsystems: tuple[tuple[str, Labels], ...]
    _pos: dict = field(init=False, repr=False, compare=False)
    _lab: dict = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        subs = tuple((str(sid), tuple(str(x) for x in labels)) for sid, labels in self.subsystems)
        pos = {}
        lab = {}
        for i, (sid, labels) in enumerate(subs):
            if sid in pos:
                raise DuplicateSubsystemId(f"subsystem id {sid!r} appears twice")
            if not labels:
                raise ValidationError(f"subsystem {sid!r} has no basis labels")
            if len(set(labels)) != len(labels):
                raise ValidationError(f"duplicate basis label in subsystem {sid!r}")
            pos[sid] = i
            lab[sid] = {x: j for j, x in enumerate(labels)}
        object.__setattr__(self, "subsystems", subs)
        object.__setattr__(self, "_pos", pos)
        object.__setattr__(self, "_lab", lab)

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, Sequence[str]]) -> "SubsystemLayout":
        return cls(list(mapping.items()))

    @property
    def ids(self) -> tuple[str, ...]:
        return tuple(sid for sid, _ in self.subsystems)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(len(labels) for _, labels in self.subsystems)

    def __contains__(self, sid) -> bool:
        return sid in self._pos

    def position(self, sid: str) -> int:
        try:
            return self._pos[sid]
        except KeyError:
            raise UnknownSubsystem(f"no subsystem {sid!r} in layout {self.ids}") from None

    def labels(self, sid: str) -> Labels:
        return self.subsystems[self.position(sid)][1]

    def dim(self, sid: str) -> int:
        return len(self.labels(sid))

    def label_index(self, sid: str, label: str) -> int:
        table = self._lab[self.subsystems[self.position(sid)][0]]
        try:
            return table[label]
        except KeyError:
            raise UnknownLabel(f"label {label!r} is not a basis label of {sid!r}") from None

    def index_tuple(self, labels: Sequence[str]) -> tuple[int, ...]:
        if len(labels) != len(self.subsystems):
            raise UnknownLabel(
                f"label tuple {tuple(labels)} has {len(labels)} entries, layout has {len(self.subsystems)}"
            )
        return tuple(self.label_index(sid, x) for (sid, _), x in zip(self.subsystems, labels))

    def ordered(self, ids: Iterable[str]) -> tuple[str, ...]:
        """Subsystem ids sorted into layout order (unknown ids raise)."""
        ids = set(ids)
        for sid in ids:
            self.position(sid)
        return tuple(sid for sid in self.ids if sid in ids)

    def joint_dim(self, ids: Sequence[str]) -> int:
        return math.prod(self.dim(s) for s in ids)

    def joint_labels(self, ids: Sequence[str]) -> list[Labels]:
        """Joint basis of ``ids`` in row-major order (first id slowest)."""
        return list(itertools.product(*(self.labels(s) for s in ids)))

    def joint_index(self, ids: Sequence[str], labels: Sequence[str]) -> int:
        idx = 0
        for sid, x in zip(ids, labels):
            idx = idx * self.dim(sid) + self.label_index(sid, x)
        return idx

    def restrict(self, ids: Iterable[str]) -> "SubsystemLayout":
        keep = self.ordered(ids)
        return SubsystemLayout([(s, self.labels(s)) for s in keep])

    def replace(self, sid: str, new_id: str, labels: Sequence[str]) -> "SubsystemLayout":
        i = self.position(sid)
        subs = list(self.subsystems)
        subs[i] = (new_id, tuple(labels))
        return SubsystemLayout(subs)

    def append(self, sid: str, labels: Sequence[str]) -> "SubsystemLayout":
        if sid in self._pos:
            raise DuplicateSubsystemId(f"subsystem id {sid!r} already in layout")
        return SubsystemLayout(list(self.subsystems) + [(sid, tuple(labels))])

    def to_dict(self) -> dict:
        return {sid: list(labels) for sid, labels in self.subsystems}


@dataclass(frozen=True)
class PureState:
    """Normalised pure state over a :class:`SubsystemLayout`.

    Components are kept in basis order (layout index order); amplitudes with
    modulus below the pruning tolerance are dropped on construction.
    """

    layout: SubsystemLayout
    components: Mapping[Labels, complex]

    def __post_init__(self):
        tol = get_tolerances()
        cleaned = {}
        for labels, amp in self.components.items():
            labels = tuple(labels)
            self.layout.index_tuple(labels)
            amp = complex(amp)
            if abs(amp) >= tol.prune:
                cleaned[labels] = amp
        if not cleaned:
            raise EmptyState("state has no components above the pruning threshold")
        norm2 = sum(abs(a) ** 2 for a in cleaned.values())
        if abs(math.sqrt(norm2) - 1.0) > tol.normalization:
            raise NotNormalized(f"state norm is {math.sqrt(norm2):.15g}, expected 1")
        ordered = dict(sorted(cleaned.items(), key=lambda kv: self.layout.index_tuple(kv[0])))
        object.__setattr__(self, "components", MappingProxyType(ordered))

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components.items())

    def amplitude(self, labels: Sequence[str]) -> complex:
        labels = tuple(labels)
        self.layout.index_tuple(labels)
        return self.components.get(labels, 0j)

    def norm(self) -> float:
        return math.sqrt(sum(abs(a) ** 2 for a in self.components.values()))

    def support(self, sid: str) -> tuple[str, ...]:
        """Labels of ``sid`` that occur in at least one component, in basis order."""
        i = self.layout.position(sid)
        used = {labels[i] for labels in self.components}
        return tuple(x for x in self.layout.labels(sid) if x in used)

    def to_array(self) -> np.ndarray:
        out = np.zeros(self.layout.dims, dtype=complex)
        for labels, amp in self.components.items():
            out[self.layout.index_tuple(labels)] = amp
        return out

    @classmethod
    def from_array(cls, layout: SubsystemLayout, array, normalize: bool = False) -> "PureState":
        array = np.asarray(array, dtype=complex).reshape(layout.dims)
        if normalize:
            array = array / np.linalg.norm(array)
        comps = {}
        for idx in zip(*np.nonzero(array)):
            labels = tuple(layout.subsystems[k][1][i] for k, i in enumerate(idx))
            comps[labels] = array[idx]
        return cls(layout, comps)

    def phase_shifted(self, labels: Sequence[str], phi: float) -> "PureState":
        """Copy with one component multiplied by ``exp(i phi)``."""
        comps = dict(self.components)
        labels = tuple(labels)
        if labels in comps:
            comps[labels] = comps[labels] * np.exp(1j * phi)
        return PureState(self.layout, comps)


def build_state(
    layout: SubsystemLayout | Mapping[str, Sequence[str]],
    components: Iterable[tuple[Sequence[str], complex]] | Mapping[Sequence[str], complex],
    normalize: bool = False,
) -> PureState:
    """Build a validated :class:`PureState`.

    Parameters
    ----------
    layout : SubsystemLayout or mapping
        Subsystem ids to basis labels.
    components : iterable of (labels, amplitude)
        Repeated label tuples are summed.
    normalize : bool
        Rescale to unit norm instead of raising :class:`NotNormalized`.
    """
    if not isinstance(layout, SubsystemLayout):
        layout = SubsystemLayout.from_mapping(layout)
    if isinstance(components, Mapping):
        components = components.items()
    acc: dict[Labels, complex] = {}
    for labels, amp in components:
        labels = tuple(labels)
        layout.index_tuple(labels)
        acc[labels] = acc.get(labels, 0j) + complex(amp)
    if not acc:
        raise EmptyState("no components given")
    if normalize:
        norm = math.sqrt(sum(abs(a) ** 2 for a in acc.values()))
        if norm == 0:
            raise EmptyState("all amplitudes are zero")
        acc = {k: v / norm for k, v in acc.items()}
    return PureState(layout, acc)


def _frozen_matrix(m) -> np.ndarray:
    m = np.array(m, dtype=complex)
    m.setflags(write=False)
    return m


KINDS = ("unitary", "projector", "isometry")


@dataclass(frozen=True)
class LocalOperator:
    """Matrix acting on the joint basis of ``targets`` (row-major, layout labels).

    An ``isometry`` acts on a single target and replaces that subsystem by
    ``codomain = (new_id, new_labels)``; its matrix is ``len(new_labels) x dim``.
    """

    targets: tuple[str, ...]
    matrix: np.ndarray
    kind: str = "unitary"
    codomain: tuple[str, tuple[str, ...]] | None = None

    def __post_init__(self):
        object.__setattr__(self, "targets", tuple(self.targets))
        m = _frozen_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        if self.kind not in KINDS:
            raise TargetKindError(f"unknown operator kind {self.kind!r}")
        if len(set(self.targets)) != len(self.targets) or not self.targets:
            raise TargetMismatch(f"invalid target list {self.targets}")
        tol = get_tolerances().operator
        if m.ndim != 2:
            raise TargetMismatch("operator matrix must be two-dimensional")
        if self.kind == "isometry":
            if self.codomain is None or len(self.targets) != 1:
                raise TargetMismatch("an isometry needs exactly one target and a codomain")
            new_id, new_labels = self.codomain
            object.__setattr__(self, "codomain", (str(new_id), tuple(new_labels)))
            if m.shape[0] != len(new_labels):
                raise TargetMismatch("isometry rows do not match codomain labels")
            if not np.allclose(m.conj().T @ m, np.eye(m.shape[1]), atol=tol, rtol=0):
                raise NonUnitary("matrix is not an isometry (V^dag V != I)")
            return
        if m.shape[0] != m.shape[1]:
            raise TargetMismatch("operator matrix must be square")
        if self.kind == "unitary":
            if not np.allclose(m.conj().T @ m, np.eye(m.shape[0]), atol=tol, rtol=0):
                raise NonUnitary("matrix is not unitary")
        else:
            if not (np.allclose(m @ m, m, atol=tol, rtol=0) and np.allclose(m, m.conj().T, atol=tol, rtol=0)):
                raise TargetKindError("matrix is not an orthogonal projector")

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def check_layout(self, layout: SubsystemLayout) -> None:
        for t in self.targets:
            if t not in layout:
                raise TargetMismatch(f"operator target {t!r} not in layout {layout.ids}")
        if layout.joint_dim(self.targets) != self.dim:
            raise TargetMismatch(
                f"operator dimension {self.dim} does not match targets {self.targets} "
                f"(joint dimension {layout.joint_dim(self.targets)})"
            )

    def dagger(self) -> "LocalOperator":
        if self.kind == "isometry":
            raise TargetKindError("the adjoint of an isometry is not a LocalOperator")
        return LocalOperator(self.targets, self.matrix.conj().T, self.kind)

    def then(self, other: "LocalOperator") -> "LocalOperator":
        """Operator for applying ``self`` first and ``other`` second (same targets)."""
        if other.targets != self.targets:
            raise TargetMismatch("can only compose operators with identical targets")
        kind = "unitary" if self.kind == other.kind == "unitary" else "projector"
        return LocalOperator(self.targets, other.matrix @ self.matrix, kind)

    @staticmethod
    def identity(layout: SubsystemLayout, targets: Sequence[str]) -> "LocalOperator":
        return LocalOperator(tuple(targets), np.eye(layout.joint_dim(targets)), "unitary")


def _transform(
    state: PureState,
    targets: Sequence[str],
    matrix: np.ndarray,
    out_labels: Sequence[Labels] | None = None,
) -> dict[Labels, complex]:
    """Apply ``matrix`` to the ``targets`` factor; returns raw (unnormalised) components.

    ``out_labels`` gives the label tuple for each output row; defaults to the
    joint basis of ``targets``.
    """
    layout = state.layout
    pos = [layout.position(t) for t in targets]
    in_index = {lab: i for i, lab in enumerate(layout.joint_labels(targets))}
    if out_labels is None:
        out_labels = layout.joint_labels(targets)
    groups: dict[Labels, dict[int, complex]] = {}
    for labels, amp in state.components.items():
        rest = tuple(x for k, x in enumerate(labels) if k not in pos)
        tkey = in_index[tuple(labels[p] for p in pos)]
        groups.setdefault(rest, {})[tkey] = amp

    nfull = len(layout.subsystems)
    rest_pos = [k for k in range(nfull) if k not in pos]
    prune = get_tolerances().prune
    out: dict[Labels, complex] = {}
    for rest, vec in groups.items():
        cols = np.fromiter(vec.keys(), dtype=int)
        vals = np.fromiter(vec.values(), dtype=complex)
        res = matrix[:, cols] @ vals
        for j in np.nonzero(np.abs(res) >= prune)[0]:
            full = [None] * nfull
            for k, x in zip(rest_pos, rest):
                full[k] = x
            for k, x in zip(pos, out_labels[j]):
                full[k] = x
            out[tuple(full)] = res[j]
    return out


def apply_operator(state: PureState, op: LocalOperator) -> PureState:
    """Apply a unitary or isometric :class:`LocalOperator` to ``state``."""
    if op.kind == "projector":
        raise NonUnitary("projectors are applied through measurement machines, not apply_operator")
    if op.kind == "isometry":
        (target,) = op.targets
        if target not in state.layout:
            raise TargetMismatch(f"operator target {target!r} not in layout")
        if state.layout.dim(target) != op.dim:
            raise TargetMismatch("isometry domain does not match target dimension")
        new_id, new_labels = op.codomain
        layout = state.layout.replace(target, new_id, new_labels)
        comps = _transform(state, op.targets, op.matrix, [(x,) for x in new_labels])
        return PureState(layout, comps)
    op.check_layout(state.layout)
    return PureState(state.layout, _transform(state, op.targets, op.matrix))


def project(state: PureState, op: LocalOperator) -> dict[Labels, complex]:
    """Unnormalised components of ``op @ state`` for any operator kind."""
    op.check_layout(state.layout)
    return _transform(state, op.targets, op.matrix)


@dataclass(frozen=True)
class DensityMatrix:
    targets: tuple[str, ...]
    matrix: np.ndarray

    def __post_init__(self):
        m = _frozen_matrix(self.matrix)
        object.__setattr__(self, "matrix", m)
        tol = get_tolerances()
        if abs(np.trace(m) - 1) > tol.normalization:
            raise NotNormalized(f"density matrix trace is {np.trace(m).real:.15g}")
        if not np.allclose(m, m.conj().T, atol=tol.operator, rtol=0):
            raise ValidationError("density matrix is not Hermitian")
        if np.linalg.eigvalsh(m).min() < -tol.normalization:
            raise ValidationError("density matrix has a negative eigenvalue")

    def probabilities(self) -> np.ndarray:
        return self.matrix.diagonal().real.copy()

    def distance(self, other: "DensityMatrix") -> float:
        """Frobenius distance."""
        if self.targets != other.targets:
            raise LayoutMismatch("density matrices over different subsystems")
        return float(np.linalg.norm(self.matrix - other.matrix))


def _bipartite_matrix(state: PureState, left: Sequence[str], right: Sequence[str]) -> np.ndarray:
    layout = state.layout
    lpos = [layout.position(s) for s in left]
    rpos = [layout.position(s) for s in right]
    out = np.zeros((layout.joint_dim(left), layout.joint_dim(right)), dtype=complex)
    for labels, amp in state.components.items():
        i = layout.joint_index(left, [labels[p] for p in lpos])
        j = layout.joint_index(right, [labels[p] for p in rpos])
        out[i, j] = amp
    return out


def reduced_density(state: PureState, keep: Iterable[str]) -> DensityMatrix:
    """Partial trace of ``|state><state|`` over everything outside ``keep``.

    The kept subsystems are ordered as in the state's layout.
    """
    keep = state.layout.ordered(keep)
    if not keep:
        raise EmptyKeepSet("keep set is empty")
    rest = tuple(s for s in state.layout.ids if s not in keep)
    if not rest:
        v = _bipartite_matrix(state, keep, ()).reshape(-1)
        return DensityMatrix(keep, np.outer(v, v.conj()))
    # rows: kept joint basis, columns: traced-out joint basis
    layout = state.layout
    kpos = [layout.position(s) for s in keep]
    rpos = [layout.position(s) for s in rest]
    cols: dict[Labels, int] = {}
    entries = []
    for labels, amp in state.components.items():
        i = layout.joint_index(keep, [labels[p] for p in kpos])
        r = tuple(labels[p] for p in rpos)
        j = cols.setdefault(r, len(cols))
        entries.append((i, j, amp))
    psi = np.zeros((layout.joint_dim(keep), len(cols)), dtype=complex)
    for i, j, amp in entries:
        psi[i, j] = amp
    return DensityMatrix(keep, psi @ psi.conj().T)


@dataclass(frozen=True)
class SchmidtDecomposition:
    """``|psi> = sum_k c_k |u_k>|v_k>`` across a bipartition.

    ``left_basis`` and ``right_basis`` hold the Schmidt vectors as columns over
    the joint bases of the left and right subsystems (layout order).
    """

    left: tuple[str, ...]
    right: tuple[str, ...]
    coefficients: np.ndarray
    left_basis: np.ndarray
    right_basis: np.ndarray
    source_layout: SubsystemLayout

    @property
    def rank(self) -> int:
        return len(self.coefficients)

    def reconstruct(self) -> PureState:
        mat = (self.left_basis * self.coefficients) @ self.right_basis.T
        layout = self.source_layout
        order = self.left + self.right
        tensor = mat.reshape([layout.dim(s) for s in order])
        perm = [order.index(s) for s in layout.ids]
        return PureState.from_array(layout, np.transpose(tensor, perm))


def _dominant_label(layout: SubsystemLayout, ids: Sequence[str], vec: np.ndarray) -> tuple[int, Labels]:
    mags = np.abs(vec)
    top = mags.max()
    labels = layout.joint_labels(ids)
    cands = [i for i in np.nonzero(mags >= top - 1e-12)[0]]
    best = min(cands, key=lambda i: labels[i])
    return int(best), labels[best]


def schmidt(state: PureState, left: Iterable[str]) -> SchmidtDecomposition:
    """Schmidt decomposition across ``left | complement``.

    Coefficients come out descending. Degenerate coefficients are ordered by
    the lexicographically smallest dominant label of their left vector, and
    each left vector is phased so its dominant entry is real positive.
    """
    layout = state.layout
    try:
        left = layout.ordered(left)
    except ValidationError as exc:
        raise InvalidBipartition(str(exc)) from None
    right = tuple(s for s in layout.ids if s not in left)
    if not left or not right:
        raise InvalidBipartition("left side must be a proper non-empty subset of the layout")
    mat = _bipartite_matrix(state, left, right)
    u, s, vh = np.linalg.svd(mat, full_matrices=False)
    keep = s > get_tolerances().prune
    u, s, vh = u[:, keep], s[keep], vh[keep]

    lvecs, rvecs, keys = [], [], []
    for k in range(len(s)):
        i, lab = _dominant_label(layout, left, u[:, k])
        phase = u[i, k] / abs(u[i, k])
        lvecs.append(u[:, k] / phase)
        rvecs.append(vh[k] * phase)
        keys.append(lab)
    # group near-equal coefficients, then order each group by dominant label
    order = []
    k = 0
    tol = get_tolerances().normalization
    while k < len(s):
        j = k
        while j + 1 < len(s) and s[k] - s[j + 1] <= tol:
            j += 1
        order.extend(sorted(range(k, j + 1), key=lambda m: keys[m]))
        k = j + 1
    return SchmidtDecomposition(
        left=left,
        right=right,
        coefficients=s[order].copy(),
        left_basis=np.array([lvecs[m] for m in order]).T,
        right_basis=np.array([rvecs[m] for m in order]).T,
        source_layout=layout,
    )


def _same_layout(a: PureState, b: PureState) -> None:
    if a.layout != b.layout:
        raise LayoutMismatch(f"layouts differ: {a.layout.to_dict()} vs {b.layout.to_dict()}")


def overlap(a: PureState, b: PureState) -> complex:
    """Inner product ``<a|b>``."""
    _same_layout(a, b)
    return sum((a.components[k].conjugate() * v for k, v in b.components.items() if k in a.components), 0j)


def state_distance(a: PureState, b: PureState) -> float:
    """Euclidean distance ``||a - b||``; global phase is *not* quotiented out."""
    _same_layout(a, b)
    keys = set(a.components) | set(b.components)
    return math.sqrt(sum(abs(a.components.get(k, 0j) - b.components.get(k, 0j)) ** 2 for k in keys))


def ray_distance(a: PureState, b: PureState) -> float:
    """Distance minimised over a global phase, ``sqrt(2 - 2|<a|b>|)``."""
    return math.sqrt(max(0.0, 2.0 - 2.0 * abs(overlap(a, b))))
