import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from rabi_squeeze.errors import LeakError, RegimeError
from rabi_squeeze.hilbert import FockConfig, coherent, cutoff_for_coherent, purity, qubit_reduced, vacuum
from rabi_squeeze.metrics import moments, squeezing_db
from rabi_squeeze.protocol import (
    InteractionSchedule,
    analytic_schedule,
    count_peaks,
    evolve_pure,
    peak_count_check,
    run_unitary,
)

# deterministic-branch optimum for N=3 at cutoff 120, frozen from the optimizer
N3_OPT = InteractionSchedule.from_vector([2.53814, -1.11214, -0.28213, 0.17163, 0.48551, -1.01268])


def test_analytic_examples():
    s1 = analytic_schedule(1, 0.45)
    assert_allclose(s1.u, [0.6364], atol=1e-4)
    assert_allclose(s1.v, [-1.2342], atol=1e-4)
    s2 = analytic_schedule(2, 0.45)
    assert_allclose(s2.u, [1.2728, -0.6364], atol=1e-4)
    assert_allclose(s2.v, [0.6171, -1.2342], atol=1e-4)
    assert s2.L == 0.45


@given(st.integers(1, 8), st.floats(0.05, 5.0))
def test_analytic_u_telescopes(N, L):
    s = analytic_schedule(N, L)
    assert sum(s.u) == pytest.approx(math.sqrt(2) * L, rel=1e-12, abs=1e-12)
    assert s.total_duration == pytest.approx(sum(abs(x) for x in s.u + s.v))


def test_analytic_preconditions():
    with pytest.raises(ValueError):
        analytic_schedule(0, 0.45)
    with pytest.raises(ValueError):
        analytic_schedule(2, 0.0)


def test_schedule_validation():
    with pytest.raises(ValueError):
        InteractionSchedule((), ())
    with pytest.raises(ValueError):
        InteractionSchedule((1.0, 2.0), (1.0,))
    with pytest.raises(ValueError):
        InteractionSchedule((float("nan"),), (1.0,))


finite = st.floats(-10, 10, allow_nan=False)


@given(st.integers(1, 6).flatmap(lambda n: st.tuples(st.lists(finite, min_size=n, max_size=n), st.lists(finite, min_size=n, max_size=n))),
       st.one_of(st.none(), st.floats(0.1, 1.0)))
def test_schedule_json_round_trip(uv, L):
    s = InteractionSchedule(uv[0], uv[1], L)
    back = InteractionSchedule.from_json(s.to_json())
    assert back == s
    d = json.loads(s.to_json())
    assert set(d) == {"N", "L", "u", "v"} and d["N"] == s.N


def test_schedule_dict_errors():
    with pytest.raises(ValueError):
        InteractionSchedule.from_dict({"N": 2, "L": None, "u": [1.0], "v": [1.0]})
    with pytest.raises(ValueError):
        InteractionSchedule.from_dict({"N": 1, "L": None, "u": [1.0], "v": [1.0], "extra": 0})


def test_vector_round_trip():
    s = analytic_schedule(3, 0.5)
    assert InteractionSchedule.from_vector(s.as_vector(), 0.5) == s


def test_zero_schedule_gives_vacuum(cfg60):
    res = run_unitary(InteractionSchedule.zeros(3), cfg60)
    assert res.postselect_prob == pytest.approx(1.0)
    assert_allclose(res.deterministic, np.outer(vacuum(cfg60), vacuum(cfg60)), atol=1e-14)
    sq, asq = squeezing_db(res.deterministic)
    assert sq == pytest.approx(0, abs=1e-12) and asq == pytest.approx(0, abs=1e-12)


@given(st.integers(1, 4), st.floats(0.3, 0.7))
def test_run_unitary_preserves_norm(N, L):
    psi = evolve_pure(analytic_schedule(N, L), FockConfig(cutoff=200))
    assert abs(np.vdot(psi, psi).real - 1) < 1e-10


def test_result_invariants(cfg120):
    res = run_unitary(analytic_schedule(3, 0.45), cfg120)
    assert 0 <= res.postselect_prob <= 1
    assert np.trace(res.deterministic).real == pytest.approx(1, abs=1e-10)
    assert np.vdot(res.postselected, res.postselected).real == pytest.approx(1, abs=1e-10)
    assert res.branch(False) is res.deterministic and res.branch(True) is res.postselected


def test_single_step_cat_target():
    cfg = FockConfig(cutoff=100)
    res = run_unitary(analytic_schedule(1, 3.0), cfg)
    target = coherent(3.0, cfg) + coherent(-3.0, cfg)
    target /= np.linalg.norm(target)
    rho = res.deterministic
    assert np.vdot(target, rho @ target).real > 0.98
    # bimodal: Var(X) set by the peaks at +-3 sqrt2
    _, _, vx, _ = moments(rho)
    assert vx == pytest.approx(2 * 3.0**2 + 0.5, rel=0.05)


def test_leak_raised():
    with pytest.raises(LeakError):
        run_unitary(analytic_schedule(4, 2.0), FockConfig(cutoff=40))


def test_disentangling_improves_with_L():
    cfg = FockConfig(cutoff=cutoff_for_coherent(12.0))
    pur = [purity(qubit_reduced(evolve_pure(analytic_schedule(2, L), cfg))) for L in (1.5, 2.0, 3.0)]
    assert pur[0] < pur[1] < pur[2]


def test_optimized_n3_branches(cfg120):
    res = run_unitary(N3_OPT, cfg120)
    assert res.postselect_prob > 0.9
    det, _ = squeezing_db(res.deterministic)
    post, _ = squeezing_db(res.postselected)
    assert det == pytest.approx(8.5, abs=0.3)
    assert post >= det


def test_count_peaks_rules():
    assert count_peaks(np.array([0.0, 1.0, 0.0, 2.0, 0.0])) == 2
    # plateau counts once
    assert count_peaks(np.array([0.0, 1.0, 1.0, 1.0, 0.0])) == 1
    # endpoint rises are not interior maxima
    assert count_peaks(np.array([3.0, 2.0, 1.0])) == 0
    assert count_peaks(np.array([1.0, 2.0])) == 0
    # negligible ripples are ignored
    assert count_peaks(np.array([0.0, 1.0, 0.0, 1e-9, 0.0])) == 1


@pytest.mark.parametrize(
    "N, L, cfg, expected",
    [
        (1, 3.0, FockConfig(cutoff=60), 2),
        (2, 2.0, FockConfig(cutoff=120), 4),
        (3, 2.0, FockConfig(cutoff=cutoff_for_coherent(14.0)), 8),
    ],
)
def test_peak_counts(N, L, cfg, expected):
    assert peak_count_check(analytic_schedule(N, L), cfg) == expected


def test_peak_count_regime():
    with pytest.raises(RegimeError):
        peak_count_check(analytic_schedule(2, 0.45))
    with pytest.raises(RegimeError):
        peak_count_check(InteractionSchedule((1.0,), (1.0,)))
