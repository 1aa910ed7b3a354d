import math

import numpy as np
import pytest
import scipy.linalg as sl
from numpy.testing import assert_allclose

from rabi_squeeze import lindblad
from rabi_squeeze.errors import IntegratorDiverged
from rabi_squeeze.gates import p_sigma_x
from rabi_squeeze.hilbert import (
    KET_0,
    KET_1,
    KET_PLUS,
    QUBIT_I,
    SIGMA_Z,
    FockConfig,
    annihilation,
    coherent,
    density,
    fock,
    joint_state,
    number,
    partial_trace_qubit,
    qubit_reduced,
    tensor_qubit_osc,
    vacuum,
)
from rabi_squeeze.lindblad import (
    NOISE_KINDS,
    Generator,
    NoiseKind,
    NoiseModel,
    Segment,
    default_dt_report,
    evolve_master,
    lindblad_ops,
    plan_duration,
    run_noisy_protocol,
    schedule_to_segments,
)
from rabi_squeeze.metrics import moments, squeezing_db
from rabi_squeeze.protocol import InteractionSchedule, analytic_schedule, evolve_pure, run_unitary

SMALL = FockConfig(cutoff=30)
N3_OPT = InteractionSchedule.from_vector([2.53814, -1.11214, -0.28213, 0.17163, 0.48551, -1.01268])


def test_noise_kind_parse():
    assert NoiseKind.parse("BosonLoss") is NoiseKind.BOSON_LOSS
    assert NoiseKind.parse("qubit_dephasing") is NoiseKind.QUBIT_DEPHASING
    assert NoiseKind.parse(NoiseKind.NONE) is NoiseKind.NONE
    with pytest.raises(ValueError):
        NoiseKind.parse("photon_loss")
    assert len(NOISE_KINDS) == 5


def test_noise_model_validation():
    with pytest.raises(ValueError):
        NoiseModel("boson_loss", -0.1)
    with pytest.raises(ValueError):
        NoiseModel("boson_loss", float("inf"))
    assert NoiseModel("none", 0.3).is_noiseless
    assert NoiseModel("boson_loss", 0.0).is_noiseless


def test_lindblad_ops_forms():
    g = 0.04
    s = math.sqrt(g)
    a = annihilation(SMALL)
    eye_b = np.eye(SMALL.dim)
    (loss,) = lindblad_ops(NoiseModel("BosonLoss", g), SMALL)
    assert_allclose(loss, s * np.kron(QUBIT_I, a), atol=1e-15)
    (deph,) = lindblad_ops(NoiseModel("BosonDephasing", g), SMALL)
    assert_allclose(deph, s * np.kron(QUBIT_I, a @ a.T + a.T @ a), atol=1e-12)
    heat = lindblad_ops(NoiseModel("BosonHeating", g), SMALL)
    assert len(heat) == 2
    assert_allclose(heat[1], s * np.kron(QUBIT_I, a.T), atol=1e-15)
    (qd,) = lindblad_ops(NoiseModel("QubitDephasing", g), SMALL)
    assert_allclose(qd, s * tensor_qubit_osc(SIGMA_Z, eye_b), atol=1e-15)
    assert lindblad_ops(NoiseModel("none", g), SMALL) == []


def test_qubit_decay_lowers_qubit():
    g = 0.09
    (op,) = lindblad_ops(NoiseModel("QubitDecay", g), SMALL)
    out = op @ joint_state(KET_1, fock(4, SMALL))
    assert_allclose(out, math.sqrt(g) * joint_state(KET_0, fock(4, SMALL)), atol=1e-15)
    assert np.allclose(op @ joint_state(KET_0, fock(4, SMALL)), 0)
    (flipped,) = lindblad_ops(NoiseModel("QubitDecay", g, decay_to=1), SMALL)
    assert_allclose(flipped, op.conj().T, atol=0)


@pytest.mark.parametrize("kind", [k.value for k in NOISE_KINDS])
def test_zero_rate_ops_are_zero(kind):
    for op in lindblad_ops(NoiseModel(kind, 0.0), SMALL):
        assert not np.any(op)


def test_segments_example():
    plan = schedule_to_segments(InteractionSchedule((0.6364,), (-1.2342,)))
    assert plan == (Segment(Generator.P_SIGMA_X, 1, 0.6364), Segment(Generator.X_SIGMA_Y, -1, 1.2342))
    assert schedule_to_segments(InteractionSchedule.zeros(3)) == ()
    plan = schedule_to_segments(InteractionSchedule((1.0, 0.0), (0.0, -2.0)))
    assert [s.generator for s in plan] == [Generator.P_SIGMA_X, Generator.X_SIGMA_Y]


def test_durations_roughly_double():
    d3 = plan_duration(schedule_to_segments(analytic_schedule(3, 0.45)))
    d4 = plan_duration(schedule_to_segments(analytic_schedule(4, 0.45)))
    assert d3 == pytest.approx(analytic_schedule(3, 0.45).total_duration)
    assert 1.6 <= d4 / d3 <= 2.4


def test_noiseless_master_equals_unitary():
    s = analytic_schedule(2, 0.45)
    rho = evolve_master(density(joint_state(KET_0, vacuum(SMALL))), schedule_to_segments(s), NoiseModel(), SMALL, dt=1e-3)
    ref = density(evolve_pure(s, SMALL))
    assert np.max(np.abs(rho - ref)) < 1e-6


def test_noiseless_master_default_dt():
    s = InteractionSchedule((0.9, -0.5), (0.3, -0.7))
    res = run_noisy_protocol(s, NoiseModel(), SMALL)
    ref = run_unitary(s, SMALL)
    assert np.max(np.abs(res.joint - density(ref.joint))) < 1e-6


def _free(t):
    return (Segment(Generator.FREE, 1, t),)


def test_boson_loss_oracle():
    g, t = 0.3, 1.7
    cfg = FockConfig(cutoff=40)
    rho0 = density(joint_state(KET_0, coherent(2.0, cfg)))
    rho = evolve_master(rho0, _free(t), NoiseModel("BosonLoss", g), cfg)
    n_mean = np.trace(partial_trace_qubit(rho) @ number(cfg)).real
    assert n_mean == pytest.approx(4.0 * math.exp(-g * t), rel=1e-3)


def test_qubit_dephasing_oracle():
    g, t = 0.2, 1.3
    rho0 = density(joint_state(KET_PLUS, vacuum(SMALL)))
    rho = evolve_master(rho0, _free(t), NoiseModel("QubitDephasing", g), SMALL)
    assert abs(qubit_reduced(rho)[0, 1]) == pytest.approx(0.5 * math.exp(-2 * g * t), rel=1e-3)


def test_trace_and_positivity():
    res = run_noisy_protocol(analytic_schedule(2, 0.45), NoiseModel("BosonHeating", 0.05), SMALL)
    assert abs(np.trace(res.joint).real - 1) < 1e-6
    assert np.linalg.eigvalsh(res.joint).min() > -1e-6
    assert res.meta["min_eigenvalue"] > -1e-6


def test_step_size_defaults():
    plan = schedule_to_segments(InteractionSchedule((0.2, 3.0), (0.1, -1.0)))
    steps = default_dt_report(plan, NoiseModel(), SMALL)
    assert steps[0] == pytest.approx(0.2 / 50)
    assert steps[1] == pytest.approx(0.1 / 50)
    assert steps[2] == pytest.approx(1e-2)
    stiff = default_dt_report(plan, NoiseModel("BosonLoss", 100.0), SMALL)
    assert all(h < 1e-3 for h in stiff)
    # diagonal channels are integrated exactly and leave the step alone
    assert default_dt_report(plan, NoiseModel("BosonDephasing", 100.0), SMALL) == steps


def test_halving_dt_converges():
    s = analytic_schedule(2, 0.45)
    m = NoiseModel("QubitDecay", 0.01)
    cfg = FockConfig(cutoff=60)
    a = squeezing_db(run_noisy_protocol(s, m, cfg).deterministic)[0]
    b = squeezing_db(run_noisy_protocol(s, m, cfg, dt=5e-3).deterministic)[0]
    assert abs(a - b) < 0.02


def test_divergence_raises(monkeypatch):
    monkeypatch.setattr(lindblad, "RK4_STABILITY", 1e9)
    rho0 = density(joint_state(KET_0, coherent(1.0, SMALL)))
    with pytest.raises(IntegratorDiverged):
        evolve_master(rho0, _free(20.0), NoiseModel("BosonLoss", 1.0), SMALL, dt=10.0)


def test_shape_mismatch():
    with pytest.raises(ValueError):
        evolve_master(np.eye(4) / 4, (), NoiseModel(), SMALL)


def test_noiseless_metrics_match_unitary(cfg120):
    a = squeezing_db(run_unitary(N3_OPT, cfg120).deterministic)[0]
    b = squeezing_db(run_noisy_protocol(N3_OPT, NoiseModel(), cfg120).deterministic)[0]
    assert abs(a - b) < 0.01


def test_boson_dephasing_worse_than_qubit_dephasing(cfg120):
    boson = squeezing_db(run_noisy_protocol(N3_OPT, NoiseModel("BosonDephasing", 1e-2), cfg120).deterministic)[0]
    qubit = squeezing_db(run_noisy_protocol(N3_OPT, NoiseModel("QubitDephasing", 1e-2), cfg120).deterministic)[0]
    assert boson < qubit


def test_postselection_under_qubit_decay(cfg120):
    res = run_noisy_protocol(N3_OPT, NoiseModel("QubitDecay", 1e-2), cfg120)
    det = squeezing_db(res.deterministic)[0]
    post = squeezing_db(res.postselected)[0]
    assert post >= det - 0.05
    _, _, vx, vp = moments(res.postselected)
    assert vx * vp >= 0.25 - 1e-6


def _liouvillian(h, ops):
    """Column-stacked superoperator of ``-i[H, rho] + sum D[L] rho``."""
    eye = np.eye(h.shape[0])
    sup = -1j * (np.kron(eye, h) - np.kron(h.T, eye))
    for op in ops:
        ld = op.conj().T @ op
        sup += np.kron(op.conj(), op) - 0.5 * (np.kron(eye, ld) + np.kron(ld.T, eye))
    return sup


@pytest.mark.parametrize("kind, gamma", [("BosonDephasing", 3.0), ("QubitDephasing", 5.0), ("BosonLoss", 0.4)])
def test_master_equation_matches_dense_liouvillian(kind, gamma):
    cfg = FockConfig(cutoff=18)
    m = NoiseModel(kind, gamma)
    seg = Segment(Generator.P_SIGMA_X, 1, 0.4)
    rho0 = density(joint_state(KET_PLUS, coherent(0.5, cfg)))
    rho = evolve_master(rho0, (seg,), m, cfg, dt=1e-3)
    ham = -p_sigma_x(cfg)
    vec = sl.expm(_liouvillian(ham, lindblad_ops(m, cfg)) * seg.duration) @ rho0.reshape(-1, order="F")
    np.testing.assert_allclose(rho, vec.reshape(rho0.shape, order="F"), atol=1e-8)
