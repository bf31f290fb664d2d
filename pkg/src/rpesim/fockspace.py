"""Labelled tensor-product spaces with sparse pure states and density matrices.

Kets are plain tuples of local indices, ordered by subsystem registration
order.  A :class:`PureState` maps kets to complex amplitudes and may be
sub-normalised: branches that were projected away simply leave their weight
missing, so ``1 - norm_sq(state)`` is the probability of everything that was
discarded upstream.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Iterator, Mapping, Sequence

import numpy as np

PHOTON_MODE = "photon_mode"
ATOM2 = "atom2"
ATOM3 = "atom3"
FLAG = "flag"
KINDS = (PHOTON_MODE, ATOM2, ATOM3, FLAG)

#: amplitudes below this magnitude are dropped after every operation
PRUNE = 1e-15
#: slack allowed above unit norm
NORM_EPS = 1e-12

Ket = tuple


class SimulationError(Exception):
    """Physics-domain failure (as opposed to a programming error)."""


class ZeroProbabilityError(SimulationError):
    """A projection or normalisation left nothing behind."""


class TruncationError(SimulationError):
    """An operation would put more photons in the system than ``n_max``."""


@dataclass(frozen=True)
class SubsystemLabel:
    name: str
    kind: str
    dim: int

    def __post_init__(self):
        if not self.name:
            raise ValueError("subsystem name must be non-empty")
        if self.kind not in KINDS:
            raise ValueError(f"unknown subsystem kind {self.kind!r}")
        if self.dim < 2:
            raise ValueError(f"{self.name}: dim must be >= 2, got {self.dim}")
        fixed = {ATOM2: 2, ATOM3: 3, FLAG: 2}
        if self.kind in fixed and self.dim != fixed[self.kind]:
            raise ValueError(f"{self.name}: {self.kind} has dim {fixed[self.kind]}")

    def symbol(self, index: int) -> str:
        if self.kind == ATOM2:
            return "+-"[index]
        return str(index)


def photon_mode(name: str, n_max: int = 1) -> SubsystemLabel:
    return SubsystemLabel(name, PHOTON_MODE, n_max + 1)


def atom2(name: str) -> SubsystemLabel:
    """Spin-1/2 atom whose two basis states are the z+ and z- boxes (index 0, 1)."""
    return SubsystemLabel(name, ATOM2, 2)


def atom3(name: str) -> SubsystemLabel:
    return SubsystemLabel(name, ATOM3, 3)


def flag(name: str) -> SubsystemLabel:
    """Two-state record: 0 = clear, 1 = absorbed."""
    return SubsystemLabel(name, FLAG, 2)


@dataclass(frozen=True)
class StateSpace:
    labels: tuple

    def __post_init__(self):
        if not self.labels:
            raise ValueError("a state space needs at least one subsystem")
        names = [lab.name for lab in self.labels]
        dupes = sorted({n for n in names if names.count(n) > 1})
        if dupes:
            raise ValueError(f"duplicate subsystem names: {dupes}")
        photon_dims = {lab.dim for lab in self.labels if lab.kind == PHOTON_MODE}
        if len(photon_dims) > 1:
            raise ValueError("all photon modes in a space must share one truncation")
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def names(self) -> tuple:
        return tuple(lab.name for lab in self.labels)

    @property
    def dims(self) -> tuple:
        return tuple(lab.dim for lab in self.labels)

    @property
    def total_dim(self) -> int:
        return math.prod(self.dims)

    @property
    def n_max(self) -> int | None:
        for lab in self.labels:
            if lab.kind == PHOTON_MODE:
                return lab.dim - 1
        return None

    @property
    def photon_modes(self) -> tuple:
        return tuple(lab.name for lab in self.labels if lab.kind == PHOTON_MODE)

    def __contains__(self, name) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.labels)

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown subsystem {name!r}; space has {list(self.names)}") from None

    def label(self, name: str) -> SubsystemLabel:
        return self.labels[self.index(name)]

    def require(self, name: str, kind: str | None = None) -> int:
        i = self.index(name)
        if kind is not None and self.labels[i].kind != kind:
            raise ValueError(f"{name!r} is a {self.labels[i].kind}, expected {kind}")
        return i

    def ket(self, **occupancy) -> Ket:
        """Build a ket by name; unspecified subsystems default to index 0.

        Two-level atoms also accept ``"+"`` and ``"-"``.
        """
        ket = [0] * len(self.labels)
        for name, value in occupancy.items():
            i = self.index(name)
            lab = self.labels[i]
            if isinstance(value, str):
                value = "+-".index(value) if lab.kind == ATOM2 else int(value)
            if not 0 <= value < lab.dim:
                raise ValueError(f"{name}={value} outside 0..{lab.dim - 1}")
            ket[i] = value
        return tuple(ket)

    def check_ket(self, ket: Ket) -> None:
        if len(ket) != len(self.labels):
            raise ValueError(f"ket {ket} has {len(ket)} entries, space has {len(self.labels)}")
        for value, lab in zip(ket, self.labels):
            if not 0 <= value < lab.dim:
                raise ValueError(f"ket {ket}: {lab.name}={value} outside 0..{lab.dim - 1}")

    def photon_number(self, ket: Ket) -> int:
        return sum(ket[i] for i, lab in enumerate(self.labels) if lab.kind == PHOTON_MODE)

    def ket_str(self, ket: Ket) -> str:
        """Render e.g. ``"d=1 z1=+ z2=+"``; empty modes and clear flags are omitted."""
        parts = []
        for value, lab in zip(ket, self.labels):
            if lab.kind in (PHOTON_MODE, FLAG) and value == 0:
                continue
            parts.append(f"{lab.name}={lab.symbol(value)}")
        return " ".join(parts) if parts else "vac"

    def flat_index(self, ket: Ket) -> int:
        return int(np.ravel_multi_index(ket, self.dims))


def new_space(labels: Sequence[SubsystemLabel]) -> StateSpace:
    return StateSpace(tuple(labels))


def _prune(terms: Mapping) -> dict:
    return {k: complex(a) for k, a in terms.items() if abs(a) >= PRUNE}


@dataclass(frozen=True)
class PureState:
    """Sparse, possibly sub-normalised state vector.

    Construct through :meth:`from_terms` (which validates and prunes) rather
    than calling the dataclass directly.
    """

    space: StateSpace
    terms: Mapping = field(repr=False)

    @classmethod
    def from_terms(cls, space: StateSpace, terms: Mapping | Iterable) -> "PureState":
        items = terms.items() if isinstance(terms, Mapping) else terms
        acc: dict = {}
        for ket, amp in items:
            ket = tuple(int(x) for x in ket)
            space.check_ket(ket)
            amp = complex(amp)
            if not (math.isfinite(amp.real) and math.isfinite(amp.imag)):
                raise ValueError(f"non-finite amplitude on {ket}")
            acc[ket] = acc.get(ket, 0j) + amp
        state = cls(space, _prune(acc))
        if state.norm_sq() > 1 + NORM_EPS:
            raise ValueError(f"state norm^2 {state.norm_sq():.17g} exceeds 1")
        return state

    @classmethod
    def basis(cls, space: StateSpace, amplitude: complex = 1.0, **occupancy) -> "PureState":
        return cls.from_terms(space, {space.ket(**occupancy): amplitude})

    @classmethod
    def from_dense(cls, space: StateSpace, vector: np.ndarray) -> "PureState":
        vector = np.asarray(vector, dtype=complex).reshape(-1)
        if vector.size != space.total_dim:
            raise ValueError("vector length does not match the space")
        nz = np.flatnonzero(np.abs(vector) >= PRUNE)
        kets = np.array(np.unravel_index(nz, space.dims)).T
        return cls.from_terms(space, ((tuple(k), vector[i]) for k, i in zip(kets, nz)))

    def __iter__(self) -> Iterator:
        return iter(sorted(self.terms.items()))

    def __len__(self) -> int:
        return len(self.terms)

    def amplitude(self, ket: Ket | None = None, **occupancy) -> complex:
        if ket is None:
            ket = self.space.ket(**occupancy)
        return self.terms.get(tuple(ket), 0j)

    def norm_sq(self) -> float:
        return float(sum(abs(a) ** 2 for a in self.terms.values()))

    def to_dense(self) -> np.ndarray:
        vec = np.zeros(self.space.total_dim, dtype=complex)
        for ket, amp in self.terms.items():
            vec[self.space.flat_index(ket)] = amp
        return vec

    def scaled(self, factor: complex) -> "PureState":
        return PureState(self.space, _prune({k: a * factor for k, a in self.terms.items()}))

    def max_photon_number(self) -> int:
        return max((self.space.photon_number(k) for k in self.terms), default=0)


def norm_sq(state: PureState) -> float:
    return state.norm_sq()


def normalize(state: PureState) -> tuple[PureState, float]:
    """Return the unit-norm state and the norm^2 it had before."""
    weight = state.norm_sq()
    if weight <= 0.0:
        raise ZeroProbabilityError("cannot normalise the zero state")
    return state.scaled(1.0 / math.sqrt(weight)), weight


def tensor(a: PureState, b: PureState) -> PureState:
    space = new_space(a.space.labels + b.space.labels)
    terms = {ka + kb: xa * xb for ka, xa in a.terms.items() for kb, xb in b.terms.items()}
    return PureState(space, _prune(terms))


def tensor_all(*states: PureState) -> PureState:
    out = states[0]
    for s in states[1:]:
        out = tensor(out, s)
    return out


def reorder(state: PureState, names: Sequence[str]) -> PureState:
    """Permute subsystems into the given name order."""
    perm = [state.space.index(n) for n in names]
    if sorted(perm) != list(range(len(state.space))):
        raise ValueError("reorder needs every subsystem exactly once")
    space = new_space([state.space.labels[i] for i in perm])
    return PureState(space, {tuple(k[i] for i in perm): a for k, a in state.terms.items()})


def project(state: PureState, predicate: Callable[[Ket], bool]) -> PureState:
    """Keep only the kets satisfying ``predicate`` (no renormalisation)."""
    return PureState(state.space, {k: a for k, a in state.terms.items() if predicate(k)})


def truncate(state: PureState, n_max: int | None = None) -> tuple[PureState, float]:
    """Drop kets carrying more than ``n_max`` photons in total.

    Returns the kept state and the weight that was dropped.
    """
    if n_max is None:
        n_max = state.space.n_max
    if n_max is None:
        return state, 0.0
    photon_number = state.space.photon_number
    kept = project(state, lambda k: photon_number(k) <= n_max)
    return kept, state.norm_sq() - kept.norm_sq()


def apply_linear(state: PureState, rule: Callable[[Ket], Iterable]) -> PureState:
    """Apply a linear map given on basis kets.

    ``rule(ket)`` yields ``(new_ket, coefficient)`` pairs; results are summed
    and pruned.
    """
    acc: dict = {}
    for ket, amp in state.terms.items():
        for new_ket, coeff in rule(ket):
            acc[new_ket] = acc.get(new_ket, 0j) + amp * coeff
    return PureState(state.space, _prune(acc))


def relabel(state: PureState, rule: Callable[[Ket], Ket | None]) -> PureState:
    """Move amplitudes between kets; ``rule`` returns the new ket or None to keep.

    The map must be injective on the kets present, otherwise it would not be
    an isometry on this state and a ``ValueError`` is raised.
    """
    out: dict = {}
    for ket, amp in state.terms.items():
        target = rule(ket)
        target = ket if target is None else tuple(target)
        if target in out:
            raise ValueError(f"relabelling is not injective on this state: {target} hit twice")
        out[target] = amp
    return PureState(state.space, out)


@dataclass(frozen=True)
class DensityMatrix:
    space: StateSpace
    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=complex)
        n = self.space.total_dim
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match space dim {n}")
        object.__setattr__(self, "matrix", m)

    @property
    def trace(self) -> float:
        return float(np.trace(self.matrix).real)

    def is_hermitian(self, atol: float = 1e-12) -> bool:
        return bool(np.allclose(self.matrix, self.matrix.conj().T, atol=atol))

    def min_eigenvalue(self) -> float:
        herm = 0.5 * (self.matrix + self.matrix.conj().T)
        return float(np.linalg.eigvalsh(herm).min())

    def normalized(self) -> "DensityMatrix":
        tr = self.trace
        if tr <= 0:
            raise ZeroProbabilityError("density matrix has zero trace")
        return DensityMatrix(self.space, self.matrix / tr)


def projector(state: PureState) -> DensityMatrix:
    vec = state.to_dense()
    return DensityMatrix(state.space, np.outer(vec, vec.conj()))


def partial_trace(state: PureState | DensityMatrix, keep: Sequence[str]) -> DensityMatrix:
    """Reduce onto the ``keep`` subsystems, which come out in registration order."""
    space = state.space
    idx = sorted({space.index(n) for n in keep})
    if not idx:
        raise ValueError("keep must name at least one subsystem")
    rest = [i for i in range(len(space)) if i not in idx]
    kept_space = new_space([space.labels[i] for i in idx])
    keep_dims = kept_space.dims

    if isinstance(state, PureState):
        # rho = M M^dagger with M[kept, rest] the amplitude table
        columns: dict = {}
        for ket, amp in state.terms.items():
            row = int(np.ravel_multi_index(tuple(ket[i] for i in idx), keep_dims))
            col = tuple(ket[i] for i in rest)
            columns.setdefault(col, []).append((row, amp))
        m = np.zeros((kept_space.total_dim, max(len(columns), 1)), dtype=complex)
        for j, entries in enumerate(columns.values()):
            for row, amp in entries:
                m[row, j] += amp
        return DensityMatrix(kept_space, m @ m.conj().T)

    dims = space.dims
    t = state.matrix.reshape(dims + dims)
    for i in sorted(rest, reverse=True):
        t = np.trace(t, axis1=i, axis2=i + t.ndim // 2)
    d = kept_space.total_dim
    return DensityMatrix(kept_space, t.reshape(d, d))
