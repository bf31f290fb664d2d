import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hand_states import AFTER_DISCARD, as_state, restricted
from rpesim.atoms import (
    EXCITED,
    GROUND,
    STORE,
    Z_MINUS,
    Z_PLUS,
    AtomPrep,
    BoxGeometry,
    decay_emit,
    discard_absorption,
    flag_name,
    interact_absorb,
    measure_box_position,
    prepare_atom,
    prepare_three_level,
    unite_boxes,
    unite_unitary,
    weak_excite,
)
from rpesim.fockspace import (
    PureState,
    SimulationError,
    TruncationError,
    ZeroProbabilityError,
    atom2,
    atom3,
    flag,
    new_space,
    norm_sq,
    partial_trace,
    photon_mode,
)
from rpesim.measurement import concurrence
from rpesim.optics import beam_splitter, single_photon

S = 1 / math.sqrt(2)


def box_space():
    return new_space([photon_mode(m) for m in ("src", "u", "v")]
                     + [atom2("z1"), atom2("z2"), flag("z1_abs"), flag("z2_abs")])


def after_interaction(prep=AtomPrep.I_UP):
    sp = box_space()
    s = beam_splitter(single_photon("src", sp), "src", None, outputs=("v", "u"))
    up, down = prep.amplitudes
    terms = {}
    for k, a in s.terms.items():
        for z1, c1 in ((Z_PLUS, up), (Z_MINUS, down)):
            for z2, c2 in ((Z_PLUS, up), (Z_MINUS, down)):
                kk = list(k)
                kk[sp.index("z1")], kk[sp.index("z2")] = z1, z2
                terms[tuple(kk)] = a * c1 * c2
    s = PureState.from_terms(sp, terms)
    s = interact_absorb(s, BoxGeometry("z1", Z_PLUS, "v"))
    return interact_absorb(s, BoxGeometry("z2", Z_MINUS, "u"))


def test_prep_amplitudes():
    s = prepare_atom("z1", AtomPrep.I_UP)
    assert s.amplitude(z1="+") == pytest.approx(1j * S)
    assert s.amplitude(z1="-") == pytest.approx(S)
    t = prepare_atom("z1", AtomPrep.I_DOWN)
    assert t.amplitude(z1="+") == pytest.approx(S)
    assert t.amplitude(z1="-") == pytest.approx(1j * S)


def test_interaction_matches_hand_table():
    kept, discarded = discard_absorption(after_interaction())
    assert discarded == pytest.approx(0.5, abs=1e-15)
    sp = new_space([photon_mode(m) for m in "uvcd"] + [atom2("z1"), atom2("z2")])
    hand = as_state(AFTER_DISCARD, sp)
    got = restricted(kept, ("u", "v"))
    assert set(got) == set(restricted(hand, ("u", "v")))
    for key, amp in restricted(hand, ("u", "v")).items():
        assert got[key] == pytest.approx(amp, abs=1e-15)


def test_absorption_is_norm_preserving():
    assert norm_sq(after_interaction()) == pytest.approx(1.0, abs=1e-15)


def test_discard_with_nothing_absorbed():
    sp = box_space()
    s = PureState.basis(sp, u=1)
    kept, discarded = discard_absorption(s)
    assert discarded == 0.0
    assert kept.terms == s.terms


def test_discard_everything_absorbed():
    sp = box_space()
    with pytest.raises(ZeroProbabilityError):
        discard_absorption(PureState.basis(sp, z1_abs=1))


def test_unite_recovers_x_plus():
    for prep in AtomPrep:
        s = unite_boxes(prepare_atom("z1", prep), "z1", prep)
        assert s.amplitude(z1="+") == pytest.approx(S, abs=1e-15)
        assert s.amplitude(z1="-") == pytest.approx(S, abs=1e-15)
        u = unite_unitary(prep)
        assert np.allclose(u @ u.conj().T, np.eye(2))


def test_unite_preserves_entanglement():
    sp = new_space([atom2("z1"), atom2("z2")])
    phi = PureState.from_terms(sp, {(0, 0): S, (1, 1): S})
    united = unite_boxes(unite_boxes(phi, "z1"), "z2")
    assert concurrence(partial_trace(united, ["z1", "z2"])) == pytest.approx(1.0, abs=1e-12)


def test_unite_refuses_absorbed_branch():
    with pytest.raises(SimulationError):
        unite_boxes(after_interaction(), "z1")


def test_box_position_probabilities():
    sp = new_space([atom2("z1"), atom2("z2")])
    phi = PureState.from_terms(sp, {(0, 0): S, (1, 1): S})
    outs = measure_box_position(phi, "z1")
    assert [(b, round(p, 15)) for b, p, _ in outs] == [(Z_PLUS, 0.5), (Z_MINUS, 0.5)]
    for box, _, cond in outs:
        # the partner is found in the matching box with certainty
        assert cond.amplitude(z1=box, z2=box) == pytest.approx(1.0)


def test_box_position_on_definite_state():
    sp = new_space([atom2("z1")])
    outs = measure_box_position(PureState.basis(sp, z1=Z_MINUS), "z1")
    assert len(outs) == 1 and outs[0][0] == Z_MINUS


def test_three_level_sequence():
    sp = new_space([photon_mode("c"), atom3("a")])
    s = prepare_three_level("a", sp)
    assert s.amplitude(a=GROUND) == 1
    s = weak_excite(s, "a", 0.1)
    assert s.amplitude(a=EXCITED) == pytest.approx(0.1)
    assert s.amplitude(a=GROUND) == pytest.approx(math.sqrt(0.99))
    s = decay_emit(s, "a", "c")
    assert s.amplitude(a=STORE, c=1) == pytest.approx(0.1)
    assert norm_sq(s) == pytest.approx(1.0)


def test_weak_excite_bounds_and_zero():
    sp = new_space([atom3("a")])
    with pytest.raises(ValueError):
        weak_excite(prepare_three_level("a", sp), "a", 1.5)
    # epsilon = 0 leaves the atom in the ground state, so nothing can be emitted
    s = weak_excite(prepare_three_level("a", sp), "a", 0.0)
    assert s.terms == {(GROUND,): 1.0}


def test_decay_respects_nmax():
    sp = new_space([photon_mode("c"), atom3("a")])
    s = PureState.basis(sp, c=1, a=EXCITED)
    with pytest.raises(TruncationError):
        decay_emit(s, "a", "c")


def test_box_geometry_validation():
    with pytest.raises(ValueError):
        BoxGeometry("z1", 2, "u")
    g = BoxGeometry("z1", Z_PLUS, "v")
    assert g.flag == flag_name("z1") == "z1_abs"
    assert g.other_box == Z_MINUS


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(list(AtomPrep)), st.sampled_from(list(AtomPrep)))
def test_absorption_only_in_crossed_box(p1, p2):
    # every absorbed branch has the absorbing atom in the crossed box
    s = after_interaction(p1)
    sp = s.space
    for k in s.terms:
        if k[sp.index("z1_abs")]:
            assert k[sp.index("z1")] == Z_PLUS
        if k[sp.index("z2_abs")]:
            assert k[sp.index("z2")] == Z_MINUS
        assert k[sp.index("z1_abs")] + k[sp.index("z2_abs")] + k[sp.index("u")] + k[sp.index("v")] == 1
