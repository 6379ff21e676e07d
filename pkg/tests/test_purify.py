import numpy as np
import pytest
from hypothesis import given, strategies as st

from bilayer.noise import NoiseModel
from bilayer.purify import (
    BellDiagonalState, PurifyTable, bennett_purify, build_purify_table, effective_cnot_error,
    simulate_bell_chain,
)
from oracles import bennett_recurrence

NOISELESS = NoiseModel.noiseless()


def gate_only(p):
    return NoiseModel(p=p, single_qubit=0.0, measure=0.0, reset=0.0, idle=0.0)


@st.composite
def bell_states(draw, min_fidelity=0.0):
    w = np.array(draw(st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4)))
    if w.sum() == 0:
        w[0] = 1
    w = w / w.sum()
    w[0] = max(w[0], min_fidelity)
    w = w / w.sum()
    return BellDiagonalState(*w)


@pytest.mark.parametrize("length", [1, 2, 5, 8])
def test_noiseless_chain_is_perfect(length):
    assert simulate_bell_chain(length, NOISELESS, 2000).as_array().tolist() == [1, 0, 0, 0]


def test_single_gate_channel_closed_form():
    # a folded two-qubit depolarising error lands in each of X, Y, Z with 4 of the 15 Paulis
    p, shots = 0.05, 200_000
    st_ = simulate_bell_chain(1, gate_only(p), shots, seed=1)
    expected = np.array([1 - 12 * p / 15, 4 * p / 15, 4 * p / 15, 4 * p / 15])
    sigma = np.sqrt(expected * (1 - expected) / shots)
    assert (np.abs(st_.as_array() - expected) < 4 * sigma).all()


def test_fidelity_decreases_with_length():
    noise = NoiseModel(p=1e-3)
    f = [simulate_bell_chain(L, noise, 100_000, seed=L).fidelity for L in (2, 4, 8, 16)]
    assert all(a > b for a, b in zip(f, f[1:]))


def test_chain_rejects_bad_arguments():
    with pytest.raises(ValueError):
        simulate_bell_chain(0, NOISELESS, 10)
    with pytest.raises(ValueError):
        simulate_bell_chain(2, NOISELESS, 0)


def test_purify_perfect_inputs():
    ok, out = bennett_purify(BellDiagonalState.perfect(), BellDiagonalState.perfect(), NOISELESS, 1000)
    assert ok == 1.0 and out.fidelity == 1.0


def test_purify_bit_flip_pair_against_formula():
    q, shots = 0.1, 100_000
    s = BellDiagonalState(1 - q, q, 0.0, 0.0)
    ok, out = bennett_purify(s, s, NOISELESS, shots, seed=2)
    success = (1 - q) ** 2 + q**2
    assert ok == pytest.approx(success, abs=3 * np.sqrt(success * (1 - success) / shots))
    px = q**2 / success
    assert out.p_x == pytest.approx(px, abs=3 * np.sqrt(px * (1 - px) / (success * shots)))


@pytest.mark.parametrize("seed", range(20))
def test_purify_matches_recurrence(seed):
    rng = np.random.default_rng(100 + seed)
    src = BellDiagonalState(*rng.dirichlet([6, 1, 1, 1]))
    don = BellDiagonalState(*rng.dirichlet([6, 1, 1, 1]))
    shots = 100_000
    ok, out = bennett_purify(src, don, NOISELESS, shots, seed=seed)
    ok_ref, out_ref = bennett_recurrence(src.as_array(), don.as_array())
    assert abs(ok - ok_ref) < 3 * np.sqrt(ok_ref * (1 - ok_ref) / shots)
    kept = ok * shots
    sig = np.sqrt(out_ref * (1 - out_ref) / kept)
    assert (np.abs(out.as_array() - out_ref) < 3 * sig + 1e-12).all()


@given(bell_states(0.5), bell_states(0.5))
def test_recurrence_never_loses_fidelity_on_depolarised_inputs(a, b):
    # the guarantee holds for Werner-type inputs; twirl both first
    def werner(s):
        r = (1 - s.p_i) / 3
        return np.array([s.p_i, r, r, r])

    src, don = werner(a), werner(b)
    _, out = bennett_recurrence(src, don)
    if min(src[0], don[0]) > 0.5:
        assert out[0] >= min(src[0], don[0]) - 1e-12


@given(bell_states(), bell_states())
def test_purified_state_normalised(a, b):
    _, out = bennett_purify(a, b, NoiseModel(p=0.01), 500)
    assert abs(out.as_array().sum() - 1) < 1e-12


def test_effective_error_map():
    assert effective_cnot_error(BellDiagonalState.perfect()) == 0
    r0 = 0.03
    f = 1 - 15 / 16 * r0
    rest = (1 - f) / 3
    assert effective_cnot_error(BellDiagonalState(f, rest, rest, rest)) == pytest.approx(r0)
    assert effective_cnot_error(BellDiagonalState(0.25, 0.25, 0.25, 0.25)) == pytest.approx(0.8)


@pytest.mark.xfail(strict=True, reason=(
    "junction readouts leave about 7p of Z error per chain and one bit-flip round "
    "doubles it, giving about 15p at L=8"))
def test_length_eight_rate_sanity_band():
    p = 1e-3
    table = build_purify_table(8, NoiseModel(p=p), shots=100_000, lengths=[8])
    assert p <= table[8].cnot_error <= 10 * p


def test_noiseless_table():
    t = build_purify_table(6, NOISELESS)
    assert t.is_noiseless and t.lengths == list(range(1, 7))
    assert PurifyTable.noiseless(6).is_noiseless


def test_table_deterministic_and_prefix_consistent():
    noise = NoiseModel(p=2e-3)
    a = build_purify_table(4, noise, shots=5000, seed=3)
    b = build_purify_table(6, noise, shots=5000, seed=3)
    assert a.to_csv() == build_purify_table(4, noise, shots=5000, seed=3).to_csv()
    for L in a.lengths:
        assert a[L] == b[L]


def test_success_decreases_with_length():
    t = build_purify_table(16, NoiseModel(p=1e-3), shots=100_000, lengths=[2, 4, 8, 16])
    s = [t[L].success_prob for L in (2, 4, 8, 16)]
    assert all(x > y for x, y in zip(s, s[1:]))


def test_csv_roundtrip_and_missing_length():
    t = build_purify_table(3, NoiseModel(p=1e-2), shots=2000)
    back = PurifyTable.from_csv(t.to_csv())
    assert back.lengths == t.lengths
    for L in t.lengths:
        assert back[L].success_prob == pytest.approx(t[L].success_prob)
        assert back[L].fidelity == pytest.approx(t[L].fidelity)
    with pytest.raises(KeyError, match="length 9"):
        t[9]


def test_invalid_state_rejected():
    with pytest.raises(ValueError):
        BellDiagonalState(0.5, 0.5, 0.5, 0.0)
