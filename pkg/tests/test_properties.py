"""Cross-module invariants over randomly drawn schedules and noise settings."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from rabi_squeeze.hilbert import FockConfig, partial_trace_qubit
from rabi_squeeze.lindblad import NOISE_KINDS, NoiseModel, run_noisy_protocol
from rabi_squeeze.metrics import moments
from rabi_squeeze.protocol import InteractionSchedule, run_unitary

CFG = FockConfig(cutoff=40)

gate = st.floats(-1.2, 1.2)
schedules = st.integers(1, 3).flatmap(
    lambda n: st.builds(InteractionSchedule, st.lists(gate, min_size=n, max_size=n), st.lists(gate, min_size=n, max_size=n))
)


def _heisenberg(state):
    _, _, vx, vp = moments(state)
    return vx * vp >= 0.25 - 1e-6


@given(schedules)
def test_unitary_outputs_respect_heisenberg(s):
    res = run_unitary(s, CFG)
    assert _heisenberg(res.deterministic)
    assert _heisenberg(res.postselected)
    assert 0 <= res.postselect_prob <= 1


@settings(max_examples=8)
@given(schedules, st.sampled_from(NOISE_KINDS), st.floats(0.0, 0.1))
def test_noisy_outputs_are_valid_states(s, kind, gamma):
    res = run_noisy_protocol(s, NoiseModel(kind, gamma), FockConfig(cutoff=30))
    rho = res.joint
    assert abs(np.trace(rho).real - 1) < 1e-6
    assert np.max(np.abs(rho - rho.conj().T)) < 1e-8
    assert np.linalg.eigvalsh(rho).min() > -1e-6
    assert _heisenberg(res.deterministic)
    if res.postselected is not None:
        assert _heisenberg(res.postselected)
    assert np.allclose(partial_trace_qubit(rho), res.deterministic)
