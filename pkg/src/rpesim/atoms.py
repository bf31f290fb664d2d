"""Atoms split into spin-z boxes, their absorptive coupling to photon paths,
and three-level emitters for the heralded scheme.

A two-level atom's basis is {z+ box, z- box} (index 0, 1).  Each atom that
can absorb gets a flag subsystem named ``<atom>_abs``; absorption moves a
photon out of the field and sets that flag, so absorbed branches stay in the
state and their weight can be read off instead of assumed.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .fockspace import (
    ATOM2,
    ATOM3,
    FLAG,
    PHOTON_MODE,
    PureState,
    SimulationError,
    TruncationError,
    ZeroProbabilityError,
    apply_linear,
    atom2,
    atom3,
    new_space,
    project,
    relabel,
)

Z_PLUS, Z_MINUS = 0, 1
GROUND, STORE, EXCITED = 0, 1, 2

_S = 1 / math.sqrt(2)


class AtomPrep(enum.Enum):
    """Relative phase the splitting field leaves between the two boxes."""

    I_UP = "i_up"  # (i z+ + z-)/sqrt2
    I_DOWN = "i_down"  # (z+ + i z-)/sqrt2

    @property
    def amplitudes(self) -> tuple:
        return (1j * _S, _S) if self is AtomPrep.I_UP else (_S, 1j * _S)

    def split_phases(self) -> np.ndarray:
        """Diagonal of the box-splitting unitary, taking x+ to the prepared state."""
        return np.sqrt(2) * np.array(self.amplitudes)


def flag_name(atom: str) -> str:
    return f"{atom}_abs"


@dataclass(frozen=True)
class BoxGeometry:
    """Which box of ``atom`` lies across which photon path."""

    atom: str
    box: int
    mode: str

    def __post_init__(self):
        if self.box not in (Z_PLUS, Z_MINUS):
            raise ValueError(f"box must be {Z_PLUS} (z+) or {Z_MINUS} (z-), got {self.box}")

    @property
    def flag(self) -> str:
        return flag_name(self.atom)

    @property
    def other_box(self) -> int:
        return 1 - self.box


def prepare_atom(atom: str, prep: AtomPrep = AtomPrep.I_UP, space=None) -> PureState:
    if space is None:
        space = new_space([atom2(atom)])
    space.require(atom, ATOM2)
    up, down = prep.amplitudes
    return PureState.from_terms(space, {
        space.ket(**{atom: Z_PLUS}): up,
        space.ket(**{atom: Z_MINUS}): down,
    })


def interact_absorb(state: PureState, geometry: BoxGeometry) -> PureState:
    """Photon crossing the occupied box is absorbed with unit efficiency."""
    space = state.space
    m = space.require(geometry.mode, PHOTON_MODE)
    a = space.require(geometry.atom, ATOM2)
    f = space.require(geometry.flag, FLAG)

    def rule(ket):
        if ket[m] >= 1 and ket[a] == geometry.box and ket[f] == 0:
            new = list(ket)
            new[m] -= 1
            new[f] = 1
            return tuple(new)
        return None

    return relabel(state, rule)


def discard_absorption(state: PureState) -> tuple[PureState, float]:
    """Keep the all-flags-clear branch; return it unnormalised plus the discarded weight."""
    flags = [i for i, lab in enumerate(state.space.labels) if lab.kind == FLAG]
    kept = project(state, lambda k: all(k[i] == 0 for i in flags))
    if kept.norm_sq() == 0.0:
        raise ZeroProbabilityError("every branch was absorbed")
    return kept, state.norm_sq() - kept.norm_sq()


def unite_unitary(prep: AtomPrep) -> np.ndarray:
    """Inverse of the splitting phases: takes the prepared state back to x+."""
    return np.diag(np.conj(prep.split_phases()))


def unite_boxes(state: PureState, atom: str, prep: AtomPrep = AtomPrep.I_UP) -> PureState:
    """Recombine the atom's boxes with the inverted field."""
    space = state.space
    a = space.require(atom, ATOM2)
    fname = flag_name(atom)
    if fname in space:
        f = space.index(fname)
        if any(k[f] for k in state.terms):
            raise SimulationError(f"{atom} has absorbed a photon in some branch; cannot reunite its boxes")
    phases = np.conj(prep.split_phases())
    return apply_linear(state, lambda k: [(k, phases[k[a]])])


def measure_box_position(state: PureState, atom: str) -> list:
    """Which-box measurement: ``[(box, probability, conditional state), ...]``.

    Probabilities are absolute; zero-probability boxes are omitted.
    """
    a = state.space.require(atom, ATOM2)
    out = []
    for box in (Z_PLUS, Z_MINUS):
        part = project(state, lambda k, box=box: k[a] == box)
        w = part.norm_sq()
        if w > 0.0:
            out.append((box, w, part.scaled(1 / math.sqrt(w))))
    return out


def prepare_three_level(atom: str, space=None) -> PureState:
    if space is None:
        space = new_space([atom3(atom)])
    space.require(atom, ATOM3)
    return PureState.basis(space, **{atom: GROUND})


def weak_excite(state: PureState, atom: str, epsilon: float) -> PureState:
    """Weak drive on the 0 <-> 2 transition; level 1 is untouched."""
    if not 0.0 <= epsilon <= 1.0:
        raise ValueError(f"excitation amplitude {epsilon} outside [0, 1]")
    a = state.space.require(atom, ATOM3)
    c = math.sqrt(1.0 - epsilon**2)

    def rule(ket):
        level = ket[a]
        if level == STORE:
            return [(ket, 1.0)]
        g = ket[:a] + (GROUND,) + ket[a + 1:]
        e = ket[:a] + (EXCITED,) + ket[a + 1:]
        if level == GROUND:
            return [(g, c), (e, epsilon)]
        return [(g, -epsilon), (e, c)]

    return apply_linear(state, rule)


def decay_emit(state: PureState, atom: str, mode: str) -> PureState:
    """|2>|n> -> |1>|n+1> on the atom's emission mode."""
    space = state.space
    a = space.require(atom, ATOM3)
    m = space.require(mode, PHOTON_MODE)
    n_max = space.n_max

    def rule(ket):
        if ket[a] != EXCITED:
            return None
        if space.photon_number(ket) + 1 > n_max:
            raise TruncationError(f"emission from {atom} would exceed n_max={n_max}")
        new = list(ket)
        new[a] = STORE
        new[m] += 1
        return tuple(new)

    return relabel(state, rule)
