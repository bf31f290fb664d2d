"""Spin measurements on atom pairs, post-selection, CHSH, concurrence and
seeded sampling."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import _kernels
from .fockspace import (
    ATOM2,
    ATOM3,
    DensityMatrix,
    PureState,
    ZeroProbabilityError,
    new_space,
    atom2,
    partial_trace,
    project,
)

PAULI = np.array([
    [[0, 1], [1, 0]],
    [[0, -1j], [1j, 0]],
    [[1, 0], [0, -1]],
], dtype=complex)
I2 = np.eye(2, dtype=complex)
TSIRELSON = 2 * math.sqrt(2)


@dataclass(frozen=True)
class SpinDirection:
    theta: float
    phi: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.theta <= math.pi + 1e-15:
            raise ValueError(f"theta={self.theta} outside [0, pi]")
        if not 0.0 <= self.phi < 2 * math.pi:
            raise ValueError(f"phi={self.phi} outside [0, 2pi)")

    @classmethod
    def in_xz(cls, angle: float) -> "SpinDirection":
        """Direction at signed ``angle`` from +z towards +x."""
        return cls.from_vector((math.sin(angle), 0.0, math.cos(angle)))

    @classmethod
    def from_vector(cls, vec) -> "SpinDirection":
        x, y, z = (float(c) for c in vec)
        r = math.sqrt(x * x + y * y + z * z)
        theta = math.acos(max(-1.0, min(1.0, z / r)))
        phi = math.atan2(y, x) % (2 * math.pi) if math.hypot(x, y) > 1e-15 else 0.0
        if phi >= 2 * math.pi:
            phi = 0.0
        return cls(theta, phi)

    @property
    def vector(self) -> np.ndarray:
        st = math.sin(self.theta)
        return np.array([st * math.cos(self.phi), st * math.sin(self.phi), math.cos(self.theta)])

    def observable(self) -> np.ndarray:
        return np.einsum("i,ijk->jk", self.vector, PAULI)

    def rotated(self, unitary: np.ndarray) -> "SpinDirection":
        """Direction n' with U sigma_n U^dagger = sigma_n'."""
        return SpinDirection.from_vector(bloch_rotation(unitary) @ self.vector)

    def to_dict(self) -> dict:
        return {"theta": self.theta, "phi": self.phi}


def bloch_rotation(unitary: np.ndarray) -> np.ndarray:
    u = np.asarray(unitary, dtype=complex)
    return np.array([[0.5 * np.trace(PAULI[i] @ u @ PAULI[j] @ u.conj().T).real
                      for j in range(3)] for i in range(3)])


@dataclass(frozen=True)
class ChshSetting:
    a: SpinDirection
    a2: SpinDirection
    b: SpinDirection
    b2: SpinDirection

    @classmethod
    def xz(cls, a: float, a2: float, b: float, b2: float) -> "ChshSetting":
        return cls(*(SpinDirection.in_xz(x) for x in (a, a2, b, b2)))

    def rotated(self, u_first: np.ndarray, u_second: np.ndarray) -> "ChshSetting":
        return ChshSetting(self.a.rotated(u_first), self.a2.rotated(u_first),
                           self.b.rotated(u_second), self.b2.rotated(u_second))

    def to_dict(self) -> dict:
        return {k: getattr(self, k).to_dict() for k in ("a", "a2", "b", "b2")}


#: maximal violation for (z+z+ + z-z-)/sqrt2 in the x-z plane
DEFAULT_CHSH = ChshSetting.xz(0.0, math.pi / 2, math.pi / 4, -math.pi / 4)


@dataclass(frozen=True)
class SampleConfig:
    shots: int
    seed: int = 0

    def __post_init__(self):
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must fit in an unsigned 64-bit integer")


# --- post-selection -----------------------------------------------------------

def postselect(state: PureState, predicate: Callable) -> tuple[PureState, float]:
    """Condition on the kets satisfying ``predicate``.

    The returned probability is ``norm_sq`` of the projected part, i.e. it is
    measured against the unit-norm preparation the state descends from.  For
    a sub-normalised input the branches discarded earlier count as "not the
    event".
    """
    part = project(state, predicate)
    prob = part.norm_sq()
    if prob <= 0.0:
        raise ZeroProbabilityError("post-selected event has zero probability")
    return part.scaled(1 / math.sqrt(prob)), prob


# --- two-qubit reductions -----------------------------------------------------

def as_qubits(rho: DensityMatrix, levels: Sequence[int] = (0, 1), atol: float = 1e-12) -> DensityMatrix:
    """Restrict three-level atoms to two of their levels.

    Raises if any weight sits outside the chosen levels, since the result
    would not be a faithful qubit description.
    """
    space = rho.space
    keep_axes = []
    labels = []
    for lab in space.labels:
        if lab.kind == ATOM3:
            keep_axes.append(list(levels))
            labels.append(atom2(lab.name))
        elif lab.kind == ATOM2:
            keep_axes.append([0, 1])
            labels.append(lab)
        else:
            raise ValueError(f"{lab.name} is not an atom")
    grids = np.ix_(*keep_axes)
    idx = np.ravel_multi_index(np.broadcast_arrays(*grids), space.dims).reshape(-1)
    sub = rho.matrix[np.ix_(idx, idx)]
    if abs(np.trace(sub).real - rho.trace) > atol:
        raise ValueError("state has population outside the selected levels")
    return DensityMatrix(new_space(labels), sub)


def _two_atom(rho: DensityMatrix, atoms: Sequence[str] | None = None) -> DensityMatrix:
    if atoms is not None and tuple(rho.space.names) != tuple(atoms):
        missing = [a for a in atoms if a not in rho.space]
        if missing:
            raise KeyError(f"unknown atoms {missing}")
        rho = partial_trace(rho, atoms)
        if tuple(rho.space.names) != tuple(atoms):
            # partial_trace keeps registration order; swap if asked the other way
            d1, d2 = rho.space.dims
            m = rho.matrix.reshape(d1, d2, d1, d2).transpose(1, 0, 3, 2).reshape(d1 * d2, d1 * d2)
            rho = DensityMatrix(new_space(list(reversed(rho.space.labels))), m)
    if any(k == ATOM3 for k in (lab.kind for lab in rho.space.labels)):
        rho = as_qubits(rho)
    if rho.space.dims != (2, 2):
        raise ValueError(f"expected two qubits, got dims {rho.space.dims}")
    return rho


def spin_probabilities(rho: DensityMatrix, atom: str, direction: SpinDirection) -> tuple[float, float]:
    single = partial_trace(rho, [atom])
    if single.space.labels[0].kind == ATOM3:
        single = as_qubits(single)
    if single.space.labels[0].kind != ATOM2:
        raise ValueError(f"{atom} is not a spin")
    obs = direction.observable()
    up = 0.5 * (I2 + obs)
    p_up = float(np.trace(up @ single.matrix).real)
    return p_up, single.trace - p_up


def correlation_tensor(rho: DensityMatrix, atoms: Sequence[str] | None = None) -> np.ndarray:
    """T_ij = tr(rho sigma_i x sigma_j) / tr(rho)."""
    rho = _two_atom(rho, atoms)
    m = rho.matrix / rho.trace
    return np.array([[np.trace(m @ np.kron(PAULI[i], PAULI[j])).real for j in range(3)]
                     for i in range(3)])


def correlation(rho: DensityMatrix, a: SpinDirection, b: SpinDirection,
                atoms: Sequence[str] | None = None) -> float:
    """P(same) - P(different) for spin outcomes along ``a`` and ``b``."""
    rho = _two_atom(rho, atoms)
    m = rho.matrix / rho.trace
    pa = [0.5 * (I2 + s * a.observable()) for s in (1, -1)]
    pb = [0.5 * (I2 + s * b.observable()) for s in (1, -1)]
    e = 0.0
    for i, sa in enumerate((1, -1)):
        for j, sb in enumerate((1, -1)):
            e += sa * sb * np.trace(m @ np.kron(pa[i], pb[j])).real
    return float(e)


def joint_outcome_probabilities(rho: DensityMatrix, a: SpinDirection, b: SpinDirection,
                                atoms: Sequence[str] | None = None) -> np.ndarray:
    """Probabilities of (++, +-, -+, --) along ``a`` and ``b``."""
    rho = _two_atom(rho, atoms)
    m = rho.matrix / rho.trace
    out = []
    for sa in (1, -1):
        for sb in (1, -1):
            proj = np.kron(0.5 * (I2 + sa * a.observable()), 0.5 * (I2 + sb * b.observable()))
            out.append(np.trace(m @ proj).real)
    return np.clip(np.array(out), 0.0, None)


def chsh(rho: DensityMatrix, setting: ChshSetting = DEFAULT_CHSH,
         atoms: Sequence[str] | None = None) -> float:
    rho = _two_atom(rho, atoms)
    return (correlation(rho, setting.a, setting.b) + correlation(rho, setting.a, setting.b2)
            + correlation(rho, setting.a2, setting.b) - correlation(rho, setting.a2, setting.b2))


def chsh_max(rho: DensityMatrix, atoms: Sequence[str] | None = None) -> float:
    """Largest CHSH value over all settings: 2 sqrt(m1 + m2), m = top eigenvalues of T^T T."""
    t = correlation_tensor(rho, atoms)
    m = np.sort(np.linalg.eigvalsh(t.T @ t))[::-1]
    return float(2 * math.sqrt(max(0.0, m[0] + m[1])))


def random_settings(n: int, rng: np.random.Generator) -> tuple:
    """Four ``(n, 3)`` arrays of isotropic random unit vectors."""
    out = []
    for _ in range(4):
        v = rng.normal(size=(n, 3))
        out.append(v / np.linalg.norm(v, axis=1, keepdims=True))
    return tuple(out)


def chsh_scan(rho: DensityMatrix, n: int = 10_000, seed: int = 0,
              atoms: Sequence[str] | None = None) -> np.ndarray:
    """CHSH values at ``n`` random settings (batched kernel)."""
    t = correlation_tensor(rho, atoms)
    return _kernels.chsh_scan(t, *random_settings(n, np.random.default_rng(seed)))


def concurrence(rho: DensityMatrix, atoms: Sequence[str] | None = None, atol: float = 1e-10) -> float:
    """Wootters concurrence of a two-qubit state (normalised by its trace first)."""
    rho = _two_atom(rho, atoms)
    m = rho.matrix / rho.trace
    if not np.allclose(m, m.conj().T, atol=atol):
        raise ValueError("density matrix is not Hermitian")
    evals, evecs = np.linalg.eigh(0.5 * (m + m.conj().T))
    if evals.min() < -atol:
        raise ValueError("density matrix is not positive semidefinite")
    # singular values of W^T (Y x Y) W with rho = W W^dagger; avoids taking
    # square roots of rounding noise in the near-zero eigenvalues
    w = evecs * np.sqrt(np.clip(evals, 0.0, None))
    yy = np.kron(PAULI[1], PAULI[1])
    lam = np.linalg.svd(w.T @ yy @ w, compute_uv=False)
    return float(max(0.0, lam[0] - lam[1] - lam[2] - lam[3]))


# --- sampling -----------------------------------------------------------------

def sample_events(probabilities: Mapping[str, float], cfg: SampleConfig, stream: int = 0) -> dict:
    """Draw ``cfg.shots`` outcomes from an exclusive, exhaustive event family."""
    names = list(probabilities)
    counts = _kernels.sample_counts([probabilities[k] for k in names], cfg.seed, cfg.shots, stream)
    return {k: int(c) for k, c in zip(names, counts)}


def sample(state: PureState, cfg: SampleConfig, stream: int = 0) -> dict:
    """Born-rule draws over basis kets, keyed by ket string.

    Weight missing from a sub-normalised state is reported as ``"discarded"``.
    """
    items = sorted(state.terms.items())
    probs = {state.space.ket_str(k): abs(a) ** 2 for k, a in items}
    rest = 1.0 - sum(probs.values())
    if rest > 1e-12:
        probs["discarded"] = rest
    return {k: v for k, v in sample_events(probs, cfg, stream).items()}


def sample_chsh(rho: DensityMatrix, setting: ChshSetting, cfg: SampleConfig,
                atoms: Sequence[str] | None = None) -> dict:
    """Estimate CHSH from ``cfg.shots`` simulated coincidences per setting pair."""
    rho = _two_atom(rho, atoms)
    pairs = [(setting.a, setting.b, 1), (setting.a, setting.b2, 1),
             (setting.a2, setting.b, 1), (setting.a2, setting.b2, -1)]
    estimate = 0.0
    var = 0.0
    correlators = []
    for stream, (x, y, sign) in enumerate(pairs, start=1):
        p = joint_outcome_probabilities(rho, x, y)
        counts = _kernels.sample_counts(p / p.sum(), cfg.seed, cfg.shots, stream)
        e = (counts[0] - counts[1] - counts[2] + counts[3]) / cfg.shots
        correlators.append(float(e))
        estimate += sign * e
        var += (1.0 - e * e) / cfg.shots
    return {"value": float(estimate), "sigma": math.sqrt(var), "correlators": correlators,
            "shots_per_setting": cfg.shots}
