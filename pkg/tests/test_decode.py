import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from bilayer.circuit import build_surface_memory
from bilayer.decode import (
    BPConfig, BPOSDDecoder, OSDConfig, bp_minsum, combine_surface_copies, fit_epsilon, osd_postprocess,
    run_experiment, split_surface_copies,
)
from bilayer.detector import Detector, DetectorModel, build_detector_model
from bilayer.gf2 import SparseIndexMatrix
from bilayer.noise import NoiseModel
from oracles import low_weight_sets, ml_failure_rate, repetition_circuit

NOISE = NoiseModel(p=1e-3)


@pytest.fixture(scope="module")
def surface_model():
    return build_detector_model(build_surface_memory(3, NOISE, 2), ("Z",))


@pytest.fixture(scope="module")
def surface_decoder(surface_model):
    return BPOSDDecoder(surface_model)


def random_syndromes(model, rng, shots, weight):
    out = []
    errs = []
    for _ in range(shots):
        e = np.zeros(model.n_classes, np.uint8)
        e[rng.choice(model.n_classes, weight, replace=False)] = 1
        errs.append(e)
        out.append(model.syndrome_of(e))
    return np.array(out), np.array(errs)


def test_config_validation():
    with pytest.raises(ValueError):
        BPConfig(max_iterations=0)
    with pytest.raises(ValueError):
        BPConfig(scaling=0)
    with pytest.raises(ValueError):
        BPConfig(schedule="random")
    with pytest.raises(ValueError):
        OSDConfig(order=-1)


def test_zero_syndrome(surface_model):
    res = bp_minsum(surface_model, np.zeros(surface_model.n_detectors))
    assert res.converged and res.iterations == 1 and not res.hard.any()


def test_unique_single_class_recovered(surface_model, surface_decoder):
    sigs = [tuple(surface_model.class_detectors.row(e)) for e in range(surface_model.n_classes)]
    unique = [e for e, s in enumerate(sigs) if sigs.count(s) == 1]
    for e in unique[:40]:
        v = np.zeros(surface_model.n_classes, np.uint8)
        v[e] = 1
        out = surface_decoder.decode(surface_model.syndrome_of(v))
        assert np.array_equal(out.observables, surface_model.observables_of(v))


@pytest.mark.parametrize("schedule", ["flooding", "serial"])
def test_outcome_reproduces_syndrome(surface_model, schedule):
    dec = BPOSDDecoder(surface_model, BPConfig(schedule=schedule))
    syn, _ = random_syndromes(surface_model, np.random.default_rng(1), 60, 4)
    for s in syn:
        out = dec.decode(s)
        assert np.array_equal(surface_model.syndrome_of(out.classes), s)


def test_converged_hard_decision_kept(surface_model, surface_decoder):
    syn, _ = random_syndromes(surface_model, np.random.default_rng(2), 30, 1)
    for s in syn:
        res = surface_decoder.bp_minsum(s)
        if res.converged:
            out = surface_decoder.osd_postprocess(s, res.marginals)
            assert np.array_equal(out.classes, res.hard)


def test_higher_order_never_costs_more(surface_model):
    rng = np.random.default_rng(3)
    syn, _ = random_syndromes(surface_model, rng, 80, 6)
    d0 = BPOSDDecoder(surface_model, osd=OSDConfig(order=0))
    d10 = BPOSDDecoder(surface_model, osd=OSDConfig(order=10))
    w = d0.weight
    for s in syn:
        res = d0.bp_minsum(s)
        a = d0.osd_postprocess(s, res.marginals).classes
        b = d10.osd_postprocess(s, res.marginals).classes
        assert w @ b <= w @ a + 1e-9


def test_osd_rejects_infeasible_syndrome():
    # two classes with signatures {0,1} and {1,2}: syndrome {0} is unreachable
    dets = tuple(Detector(i, "Z", i, 1, 0, (i, i + 3)) for i in range(3))
    model = DetectorModel(dets, 1, np.array([0.01, 0.02]), SparseIndexMatrix.from_rows(3, [[0, 1], [1, 2]]),
                          SparseIndexMatrix.from_rows(1, [[0], []]))
    dec = BPOSDDecoder(model)
    with pytest.raises(ValueError, match="not produced"):
        osd_postprocess(model, [1, 0, 0], dec.prior)
    assert dec.decode([1, 0, 1]).classes.tolist() == [1, 1]


def test_surface_single_faults_all_corrected(surface_model, surface_decoder):
    fails = 0
    for e in range(surface_model.n_classes):
        v = np.zeros(surface_model.n_classes, np.uint8)
        v[e] = 1
        out = surface_decoder.decode(surface_model.syndrome_of(v))
        fails += not np.array_equal(out.observables, surface_model.observables_of(v))
    assert fails == 0


def test_batch_matches_single_and_is_deterministic(surface_model, surface_decoder):
    syn, _ = random_syndromes(surface_model, np.random.default_rng(4), 50, 3)
    pred, conv = surface_decoder.decode_batch(syn)
    pred2, _ = surface_decoder.decode_batch(syn)
    assert np.array_equal(pred, pred2)
    for s, p in zip(syn, pred):
        assert np.array_equal(surface_decoder.decode(s).observables, p)
    with pytest.raises(ValueError):
        surface_decoder.decode_batch(syn[:, :-1])


@pytest.mark.parametrize("rounds", [1, 2])
def test_repetition_close_to_maximum_likelihood(rounds):
    model = build_detector_model(repetition_circuit(1e-3, rounds), ("Z",))
    syn, obs, prob = low_weight_sets(model, 2)
    pred, _ = BPOSDDecoder(model).decode_batch(syn)
    bp_fail = float(prob[(pred != obs).any(axis=1)].sum())
    assert bp_fail <= 1.05 * ml_failure_rate(syn, obs, prob) + 1e-15


def test_zero_noise_experiment():
    res = run_experiment(lambda s: build_surface_memory(3, NoiseModel.noiseless(), 2), 300, batch=100)
    assert res.failures == 0 and res.realizations == 3 and res.stderr == 0


def test_experiment_deterministic_and_stderr():
    build = lambda s: build_surface_memory(3, NoiseModel(p=5e-3), 2)  # noqa: E731
    a = run_experiment(build, 400, seed=2, batch=200)
    b = run_experiment(build, 400, seed=2, batch=200)
    assert a == b
    assert a.stderr == pytest.approx(math.sqrt(a.p_log * (1 - a.p_log) / 400))
    with pytest.raises(ValueError):
        run_experiment(build, 0)


def test_fit_recovers_synthetic_rate():
    eps = 1e-3
    pts = [(t, 1 - (1 - eps) ** t) for t in (4, 8, 12)]
    assert fit_epsilon(pts) == pytest.approx(eps, rel=0.01)
    pts = [(t, 1 - (1 - 1.6e-4) ** t) for t in (5, 10, 15)]
    assert fit_epsilon(pts) == pytest.approx(1.6e-4, rel=1e-9)


def test_fit_edge_cases():
    assert fit_epsilon([(1, 0.02)]) == pytest.approx(0.02)
    assert fit_epsilon([(4, 0.0), (8, 0.0)]) == 0.0
    with pytest.raises(ValueError):
        fit_epsilon([])
    with pytest.raises(ValueError):
        fit_epsilon([(4, 1.0)])


@given(st.floats(1e-6, 0.05), st.lists(st.integers(1, 30), min_size=1, max_size=5, unique=True))
def test_fit_scale_consistent(eps, ts):
    pts = [(t, 1 - (1 - eps) ** t) for t in ts]
    e1 = fit_epsilon(pts)
    doubled = [(2 * t, 1 - (1 - e1) ** (2 * t)) for t in ts]
    assert fit_epsilon(doubled) == pytest.approx(e1, rel=0.01)


def test_surface_copies():
    assert combine_surface_copies(0.0, 8) == 0
    assert combine_surface_copies(0.3, 1) == pytest.approx(0.3)
    assert combine_surface_copies(2.53e-5, 8) == pytest.approx(2.0e-4, rel=0.02)
    with pytest.raises(ValueError):
        combine_surface_copies(1.5, 2)


@settings(max_examples=50)
@given(st.floats(0, 0.5), st.integers(1, 20))
def test_surface_copies_roundtrip(p, k):
    assert split_surface_copies(combine_surface_copies(p, k), k) == pytest.approx(p, abs=1e-12)
