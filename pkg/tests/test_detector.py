import numpy as np
import pytest
from hypothesis import given, strategies as st

from bilayer import gf2
from bilayer.circuit import CircuitIR, Instruction, MeasRecord, build_bb_memory, build_surface_memory
from bilayer.detector import (
    NondeterministicError, build_detector_model, circuit_detectors, pack_shots, sample_shots, unpack_shots,
    xor_probability,
)
from bilayer.noise import NoiseModel
from oracles import brute_force_model, model_as_dict, repetition_circuit
from test_circuit import lossy_table, setup

NOISE = NoiseModel(p=1e-3)


def assert_models_equal(got, want):
    assert set(got) == set(want)
    for k in want:
        assert got[k] == pytest.approx(want[k], rel=1e-9, abs=1e-15)


def test_noiseless_circuit_has_no_classes():
    model = build_detector_model(repetition_circuit(0.0, 2))
    assert model.n_classes == 0 and model.n_detectors > 0


@pytest.mark.parametrize("rounds", [1, 2])
def test_repetition_model_matches_brute_force(rounds):
    c = repetition_circuit(0.01, rounds)
    assert_models_equal(model_as_dict(build_detector_model(c, ("Z",))), brute_force_model(c, ("Z",)))


def test_repetition_boundary_error_structure():
    # a data flip between rounds 1 and 2 on the middle qubit lights both checks' round-2 detectors;
    # a flip on an end qubit lights only its one adjacent check
    c = CircuitIR(5)
    c.begin_round(0)
    c.add("reset", range(5))
    for r in range(3):
        if r:
            c.begin_round(r)
        if r == 2:
            c.add("x-error", [1], 0.01)
            c.add("x-error", [0], 0.02)
        c.add("reset", [3, 4])
        c.add("cnot", [0, 3, 1, 4])
        c.add("cnot", [1, 3, 2, 4])
        c.measure([3, 4], [MeasRecord("Z", 0, r), MeasRecord("Z", 1, r)])
    c.measure([0, 1, 2], [MeasRecord("D", q, 2) for q in range(3)])
    c.observables.append((c.meas_index()[("D", 0, 2)],))
    model = build_detector_model(c, ("Z",))
    dets = circuit_detectors(c, ("Z",))
    by = {(d.generator, d.round): d.id for d in dets}
    got = model_as_dict(model)
    assert got[(frozenset({by[(0, 2)], by[(1, 2)]}), frozenset())] == pytest.approx(0.01)
    assert got[(frozenset({by[(0, 2)]}), frozenset({0}))] == pytest.approx(0.02)


@pytest.mark.parametrize("sectors", [("Z",), ("X", "Z")])
def test_surface_round_matches_brute_force(sectors):
    c = build_surface_memory(3, NOISE, 1)
    assert_models_equal(model_as_dict(build_detector_model(c, sectors)), brute_force_model(c, sectors))


def test_bb72_masked_model_matches_brute_force():
    code, p, cls, plan, dmax = setup("bb72")
    c = build_bb_memory(code, p, cls, plan, lossy_table(dmax), NOISE, rounds=2, t_m=2, seed=1)
    assert_models_equal(model_as_dict(build_detector_model(c, ("Z",))), brute_force_model(c, ("Z",)))


def test_class_invariants():
    code, p, cls, plan, dmax = setup("bb72")
    c = build_bb_memory(code, p, cls, plan, lossy_table(dmax), NOISE, rounds=3, t_m=2, seed=2)
    model = build_detector_model(c, ("Z",))
    assert ((model.probabilities > 0) & (model.probabilities <= 0.5)).all()
    sigs = model_as_dict(model)
    assert len(sigs) == model.n_classes
    assert all(d or o for d, o in sigs)
    touched = np.zeros(model.n_detectors, bool)
    touched[model.class_detectors.indices] = True
    assert touched.all()


def test_detector_spans_follow_availability():
    code, p, cls, plan, dmax = setup("bb90")
    c = build_bb_memory(code, p, cls, plan, lossy_table(dmax, 0.6), NOISE, rounds=10, t_m=3, seed=5)
    s = c.schedule
    dets = circuit_detectors(c)
    expected = 0
    for kind in "XZ":
        av = s.available[kind]
        expected += int(av[1:].sum())
        for d in (d for d in dets if d.kind == kind):
            rounds = np.flatnonzero(av[:, d.generator])
            i = list(rounds).index(d.round)
            assert d.prev_round == rounds[i - 1] and d.span >= 1
            if not (cls.x_long if kind == "X" else cls.z_long)[d.generator] and av[1:, d.generator].all():
                assert d.span == 1
    assert len(dets) == expected
    assert max(d.span for d in dets) > 3  # some region widened by a random failure


def test_nondeterministic_observable_rejected():
    c = CircuitIR(1)
    c.begin_round(0)
    c.add("reset", [0])
    c.add("h", [0])
    c.add("depolarize1", [0], 0.01)
    c.measure([0], [MeasRecord("D", 0, 0)])
    c.observables.append((0,))
    with pytest.raises(NondeterministicError):
        build_detector_model(c)
    with pytest.raises(ValueError):
        build_detector_model(CircuitIR(1))


def test_zero_noise_shots_are_zero():
    dets, obs = sample_shots(repetition_circuit(0.0, 3), None, 500)
    assert not dets.any() and not obs.any()


def test_injected_fault_reproduces_its_signature():
    c = repetition_circuit(0.0, 2)
    start = c.round_starts[2]
    c.instructions.insert(start, Instruction("x-error", (1,), 1.0))
    c.round_starts[2:] = [s + 1 for s in c.round_starts[2:]]
    (key,) = brute_force_model(c, ("Z",))
    dets, obs = sample_shots(c, None, 64, sectors=("Z",))
    assert all(set(np.flatnonzero(row)) == set(key[0]) for row in dets)
    assert all(set(np.flatnonzero(row)) == set(key[1]) for row in obs)


def test_repetition_marginals_match_enumeration():
    c = repetition_circuit(0.02, 2)
    classes = brute_force_model(c, ("Z",))
    n_det = len(circuit_detectors(c, ("Z",)))
    exact = np.zeros(n_det)
    for d in range(n_det):
        prod = np.prod([1 - 2 * p for (ds, _), p in classes.items() if d in ds])
        exact[d] = (1 - prod) / 2
    shots = 100_000
    dets, _ = sample_shots(c, None, shots, seed=7, sectors=("Z",))
    sig = np.sqrt(exact * (1 - exact) / shots)
    assert (np.abs(dets.mean(axis=0) - exact) < 3 * sig).all()


def test_sampled_syndromes_lie_in_class_span():
    code, p, cls, plan, dmax = setup("bb72")
    c = build_bb_memory(code, p, cls, plan, lossy_table(dmax), NoiseModel(p=3e-3), rounds=2, t_m=2, seed=3)
    model = build_detector_model(c, ("Z",))
    dets, obs = sample_shots(c, model, 40, seed=9)
    cols = np.vstack([model.class_detectors.to_dense().T, model.class_observables.to_dense().T])
    span = gf2.BitMatrix.from_dense(cols.T)
    vecs = gf2.BitMatrix.from_dense(np.hstack([dets, obs]))
    assert gf2.in_row_space(span, vecs).all()


def test_sampling_deterministic_given_seed():
    c = repetition_circuit(0.05, 3)
    a = sample_shots(c, None, 1000, seed=4)
    b = sample_shots(c, None, 1000, seed=4)
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    with pytest.raises(ValueError):
        sample_shots(c, None, 0)


@given(st.lists(st.floats(0, 0.5), min_size=1, max_size=6), st.randoms())
def test_prior_merge_order_independent(ps, rnd):
    def fold(seq):
        acc = 0.0
        for p in seq:
            acc = xor_probability(acc, p)
        return acc

    shuffled = list(ps)
    rnd.shuffle(shuffled)
    assert fold(ps) == pytest.approx(fold(shuffled), abs=1e-12)
    assert fold(ps) == pytest.approx((1 - np.prod([1 - 2 * p for p in ps])) / 2, abs=1e-12)


def test_export_and_packed_shots():
    c = repetition_circuit(0.05, 2)
    model = build_detector_model(c, ("Z",))
    text = model.export()
    assert len(text.splitlines()) == model.n_classes
    assert all(l.startswith("error ") and "|" in l for l in text.splitlines())
    dets, obs = sample_shots(c, model, 77, seed=1)
    d2, o2 = unpack_shots(pack_shots(dets, obs), model.n_detectors, model.n_observables)
    assert np.array_equal(d2, dets) and np.array_equal(o2, obs)
