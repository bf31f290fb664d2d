"""Photonic elements acting on :class:`~rpesim.fockspace.PureState`.

Beam splitters follow the convention where transmission keeps a real
amplitude and reflection picks up a factor ``i``::

    in_a -> t * out_a + r * out_b
    in_b -> r * out_a + t * out_b

With ``in_a=u, in_b=v, out_a=c, out_b=d`` this gives ``u -> (c + i d)/sqrt2``
and ``v -> (d + i c)/sqrt2``.  Multi-photon kets use the bosonic lift of the
same single-photon map.
"""

from __future__ import annotations

import cmath
import dataclasses
import math
import warnings
from dataclasses import dataclass
from typing import Callable

from .fockspace import (
    PHOTON_MODE,
    PureState,
    SimulationError,
    TruncationError,
    apply_linear,
    new_space,
    photon_mode,
    project,
)

__all__ = [
    "BeamSplitterConvention",
    "WeakSourceParams",
    "DetectionOutcome",
    "BALANCED",
    "OPEN_PORT",
    "single_photon",
    "weak_source",
    "beam_splitter",
    "phase_shift",
    "block_path",
    "detect",
    "remove_beam_splitter",
    "tune_dark_phase",
]


@dataclass(frozen=True)
class BeamSplitterConvention:
    t: float = 1 / math.sqrt(2)
    reflection_phase: complex = 1j

    def __post_init__(self):
        if not 0.0 <= self.t <= 1.0:
            raise ValueError(f"transmission amplitude {self.t} outside [0, 1]")
        if abs(abs(self.reflection_phase) - 1.0) > 1e-12:
            raise ValueError("reflection phase must be a unit complex number")
        if 0.0 < self.t < 1.0 and abs(complex(self.reflection_phase).real) > 1e-12:
            # the symmetric matrix ((t, r), (r, t)) is unitary only for r = +-i|r|
            raise ValueError("reflection phase must be +i or -i for a symmetric beam splitter")

    @property
    def r(self) -> complex:
        return self.reflection_phase * math.sqrt(max(0.0, 1.0 - self.t**2))

    def matrix(self) -> tuple:
        """Rows are input ports, columns output ports."""
        t, r = self.t, self.r
        return ((t, r), (r, t))


BALANCED = BeamSplitterConvention()
#: full transmission: each input goes straight to its output, used when a BS is pulled out
OPEN_PORT = BeamSplitterConvention(t=1.0)


@dataclass(frozen=True)
class WeakSourceParams:
    p: float
    q: float | None = None

    def __post_init__(self):
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"single-photon amplitude p={self.p} must lie in (0, 1]")
        if self.q is None:
            object.__setattr__(self, "q", math.sqrt(1.0 - self.p**2))
        if abs(self.p**2 + self.q**2 - 1.0) > 1e-12:
            raise ValueError(f"p^2 + q^2 = {self.p**2 + self.q**2!r}, expected 1")
        if self.p == 1.0:
            warnings.warn("p = 1 is a deterministic single-photon source, not a weak one",
                          stacklevel=2)


@dataclass(frozen=True)
class DetectionOutcome:
    count: int
    probability: float
    state: PureState


def _mode_state(space, mode):
    if space is None:
        space = new_space([photon_mode(mode)])
    return space, space.require(mode, PHOTON_MODE)


def single_photon(mode: str, space=None) -> PureState:
    """|1> on ``mode``; every other subsystem of ``space`` sits at index 0."""
    space, _ = _mode_state(space, mode)
    return PureState.basis(space, **{mode: 1})


def weak_source(mode: str, params: WeakSourceParams, space=None) -> PureState:
    space, _ = _mode_state(space, mode)
    return PureState.from_terms(space, {
        space.ket(**{mode: 0}): params.q,
        space.ket(**{mode: 1}): params.p,
    })


def _bosonic_outputs(na: int, nb: int, u) -> dict:
    """Expand (u00 A + u01 B)^na (u10 A + u11 B)^nb |0> / sqrt(na! nb!) into {(m_a, m_b): coeff}."""
    (u00, u01), (u10, u11) = u
    out: dict = {}
    for j in range(na + 1):
        cj = math.comb(na, j) * u00**j * u01 ** (na - j)
        for k in range(nb + 1):
            ck = math.comb(nb, k) * u10**k * u11 ** (nb - k)
            ma = j + k
            mb = na + nb - ma
            out[(ma, mb)] = out.get((ma, mb), 0) + cj * ck
    norm = math.sqrt(math.factorial(na) * math.factorial(nb))
    return {
        key: c * math.sqrt(math.factorial(key[0]) * math.factorial(key[1])) / norm
        for key, c in out.items()
    }


def beam_splitter(state: PureState, mode_a: str, mode_b: str | None,
                  conv: BeamSplitterConvention = BALANCED,
                  outputs: tuple | None = None) -> PureState:
    """Mix two input modes into two output modes.

    ``outputs`` defaults to the input modes themselves (in-place action).
    ``mode_b=None`` feeds vacuum into the second port, which is only
    meaningful together with explicit ``outputs``.  Output modes that are not
    also inputs must be empty in every ket.
    """
    space = state.space
    ia = space.require(mode_a, PHOTON_MODE)
    ib = None if mode_b is None else space.require(mode_b, PHOTON_MODE)
    if outputs is None:
        if ib is None:
            raise ValueError("an in-place beam splitter needs two input modes")
        outputs = (mode_a, mode_b)
    oa = space.require(outputs[0], PHOTON_MODE)
    ob = space.require(outputs[1], PHOTON_MODE)
    if len({oa, ob}) != 2 or (ib is not None and ia == ib):
        raise ValueError("beam splitter ports must be distinct modes")
    inputs = {ia} if ib is None else {ia, ib}
    n_max = space.n_max
    u = conv.matrix()

    def rule(ket):
        na = ket[ia]
        nb = 0 if ib is None else ket[ib]
        base = list(ket)
        for i in inputs:
            base[i] = 0
        for o in (oa, ob):
            if o not in inputs and base[o]:
                raise SimulationError(f"output mode {space.labels[o].name} is already occupied")
        for (ma, mb), coeff in _bosonic_outputs(na, nb, u).items():
            if ma > n_max or mb > n_max:
                if abs(coeff) > 0:
                    raise TruncationError(
                        f"beam splitter would place {max(ma, mb)} photons in one mode (n_max={n_max})")
                continue
            new = list(base)
            new[oa], new[ob] = ma, mb
            yield tuple(new), coeff

    return apply_linear(state, rule)


def phase_shift(state: PureState, mode: str, phi: float) -> PureState:
    i = state.space.require(mode, PHOTON_MODE)
    return apply_linear(state, lambda k: [(k, cmath.exp(1j * phi * k[i]))])


def block_path(state: PureState, mode: str, flag_name: str) -> PureState:
    """An opaque object across ``mode``: one photon is moved into the absorber flag."""
    space = state.space
    i = space.require(mode, PHOTON_MODE)
    f = space.index(flag_name)

    def rule(ket):
        if ket[i] >= 1 and ket[f] == 0:
            new = list(ket)
            new[i] -= 1
            new[f] = 1
            return [(tuple(new), 1.0)]
        return [(ket, 1.0)]

    return apply_linear(state, rule)


def detect(state: PureState, mode: str) -> list[DetectionOutcome]:
    """Born-rule split by photon count in ``mode``.

    Probabilities are absolute (they sum to ``norm_sq(state)``); conditional
    states are normalised.  Zero-probability outcomes are omitted.
    """
    i = state.space.require(mode, PHOTON_MODE)
    outcomes = []
    for n in range(state.space.label(mode).dim):
        part = project(state, lambda k, n=n: k[i] == n)
        weight = part.norm_sq()
        if weight > 0.0:
            outcomes.append(DetectionOutcome(n, weight, part.scaled(1 / math.sqrt(weight))))
    return outcomes


def remove_beam_splitter(config):
    """Return ``config`` with its final beam splitter pulled out."""
    return dataclasses.replace(config, bs_present=False)


def tune_dark_phase(p_dark: Callable[[float], float]) -> float:
    """Find the phase in [0, 2pi) that minimises a two-path fringe ``p_dark(phi)``.

    Any two-path intensity has the form ``a + b cos(phi - phi0)``; three samples
    fix ``phi0`` and the minimum sits at ``phi0 + pi``.
    """
    f0, f1, f2 = p_dark(0.0), p_dark(math.pi / 2), p_dark(math.pi)
    # b cos(phi0) = (f0 - f2)/2, b sin(phi0) = f1 - (f0 + f2)/2
    bc = 0.5 * (f0 - f2)
    bs = f1 - 0.5 * (f0 + f2)
    if math.hypot(bc, bs) < 1e-15:
        raise SimulationError("no interference fringe: the dark phase is undefined")
    phi = (math.atan2(bs, bc) + math.pi) % (2 * math.pi)
    return 0.0 if math.isclose(phi, 2 * math.pi) else phi
