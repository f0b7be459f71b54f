import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.linalg import expm

from qclimit.errors import ContractViolation, DegenerateWeightsError, FitError, NonExhaustiveObservablesError
from qclimit.modes import (
    FitQualityWarning,
    ModeSet,
    decoherence_time,
    effective_gamma,
    effective_generator,
    entropy_production,
    fit_modes,
    fit_observables,
    hermitian_basis,
    linear_entropy,
    moving_preferred_basis,
    pauli_basis,
    privileged_state,
    trace_distance,
)
from qclimit.poles import PoleCatalogue

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SY = np.array([[0, -1j], [1j, 0]])
SZ = np.diag([1.0, -1.0]).astype(complex)


# ---- fits


def test_constant_series():
    t = np.linspace(0, 10, 200)
    dec = fit_modes(t, np.full_like(t, 0.42), PoleCatalogue.from_pairs([(2, 1.0)]))
    assert dec.equilibrium == pytest.approx(0.42, abs=1e-12)
    assert all(abs(m.amplitude) < 1e-12 for m in dec.modes)


def test_single_mode_round_trip():
    t = np.linspace(0, 8, 800)
    y = 0.3 + 0.7 * np.exp(-t) * np.cos(2 * t)
    dec = fit_modes(t, y, PoleCatalogue.from_pairs([(2.0, 1.0)]))
    m = dec.modes[0]
    assert dec.equilibrium == pytest.approx(0.3, abs=1e-6)
    assert (m.amplitude, m.phase, m.freq, m.gamma) == pytest.approx((0.7, 0.0, 2.0, 1.0), abs=1e-6)


def test_two_mode_round_trip():
    t = np.linspace(0, 30, 1500)
    y = 0.1 + 0.5 * np.exp(-0.2 * t) * np.cos(1.3 * t + 0.4) + 0.25 * np.exp(-1.5 * t)
    dec = fit_modes(t, y, PoleCatalogue.from_pairs([(1.3, 0.2), (0.0, 1.5)]))
    amps = [m.amplitude for m in dec.modes]
    assert amps == pytest.approx([0.5, 0.25], abs=1e-4)
    assert dec.modes[0].phase == pytest.approx(0.4, abs=1e-6)


def test_frequency_refinement_recovers_shifted_frequency():
    t = np.linspace(0, 40, 2000)
    y = np.exp(-0.2 * t) * np.cos(1.05 * t)
    dec = fit_modes(t, y, PoleCatalogue.from_pairs([(1.0, 0.2)]))
    assert dec.modes[0].freq == pytest.approx(1.05, abs=1e-8)
    assert dec.residual_rms < 1e-8


def test_too_few_samples():
    with pytest.raises(FitError):
        fit_modes([0.0, 1.0], [1.0, 0.5], PoleCatalogue.from_pairs([(1.0, 0.2)]))


def test_quality_warning_is_carried():
    t = np.linspace(0, 40, 400)
    y = np.exp(-0.05 * t) + 0.2 * np.sin(7 * t)
    with pytest.warns(FitQualityWarning):
        dec = fit_modes(t, y, PoleCatalogue.from_pairs([(0.0, 0.05)]), refine=False)
    assert dec.warning is not None


def test_gammas_sorted_and_copied():
    cat = PoleCatalogue.from_pairs([(0.0, 0.5), (1.0, 0.1)])
    t = np.linspace(0, 60, 600)
    dec = fit_modes(t, np.exp(-0.1 * t) * np.cos(t), cat)
    assert list(dec.gammas) == [0.1, 0.5]


# ---- effective width


def test_effective_gamma_examples():
    eq = effective_gamma([1, 2, 3], [0.4, 0.4, 0.4])
    assert eq.gamma_eff == pytest.approx(0.4) and eq.slow_count == 3
    e = effective_gamma([1, 1], [1, 3])
    assert e.gamma_eff == 2 and e.slow_count == 1 and e.slow == (0,) and e.fast == (1,)
    e = effective_gamma([3, 1], [1, 3])
    assert e.gamma_eff == 1.5 and e.slow_count == 1


def test_degenerate_weights():
    with pytest.raises(DegenerateWeightsError):
        effective_gamma([1, -1], [1, 3])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 10), min_size=1, max_size=6), st.integers(0, 2**32 - 1))
def test_gamma_eff_within_range(weights, seed):
    g = np.random.default_rng(seed).uniform(0.1, 5, len(weights))
    e = effective_gamma(weights, g)
    assert g.min() * (1 - 1e-12) <= e.gamma_eff <= g.max() * (1 + 1e-12)
    assert all(g[i] <= e.gamma_eff * (1 + 1e-12) for i in e.slow)
    assert all(g[i] > e.gamma_eff for i in e.fast)


@settings(max_examples=50, deadline=None)
@given(st.floats(-1e3, 1e3).filter(lambda c: abs(c) > 1e-3))
def test_split_scale_invariant(c):
    w, g = np.array([0.3, 1.2, 0.7]), np.array([0.5, 1.0, 2.5])
    a, b = effective_gamma(w, g), effective_gamma(c * w, g)
    assert b.gamma_eff == pytest.approx(a.gamma_eff, rel=1e-12)
    assert (a.slow, a.fast) == (b.slow, b.fast)


def test_decoherence_time():
    assert decoherence_time(2.0) == 0.5
    e = effective_gamma([1.0], [0.25])
    assert decoherence_time(e) == pytest.approx(4.0)
    with pytest.raises(ContractViolation):
        decoherence_time(0.0)


# ---- privileged state


def _synthetic_qubit(times, gammas=(0.2, 0.4), omega=1.0):
    g1, g2 = gammas
    out = []
    for t in times:
        coh = 0.3 * np.exp(-g1 * t / 2) * np.exp(-1j * omega * t)
        pop = 0.1 * np.exp(-g2 * t / 2)
        out.append(np.array([[1 - pop, coh], [np.conj(coh), pop]]))
    return out


def _synthetic_modeset():
    times = np.linspace(0, 60, 1200)
    states = _synthetic_qubit(times)
    cat = PoleCatalogue.from_pairs([(1.0, 0.1), (0.0, 0.2)])
    return times, states, fit_observables(times, states, pauli_basis(), cat)


def test_all_modes_reproduce_state():
    times, states, ms = _synthetic_modeset()
    for k in (0, 300, 900):
        ps = privileged_state(ms, ms.n_modes, times[k])
        assert trace_distance(ps.rho, states[k]) < 1e-6


def test_no_modes_is_equilibrium():
    times, _, ms = _synthetic_modeset()
    ps = privileged_state(ms, 0, 5.0)
    assert np.allclose(ps.rho.entries, np.diag([1.0, 0.0]), atol=1e-6)
    with pytest.raises(ContractViolation):
        privileged_state(ms, 5, 0.0)


def test_privileged_consistency_with_truncated_sum():
    times, _, ms = _synthetic_modeset()
    ps = privileged_state(ms, 1, 7.0)
    for o, d in zip(ms.observables, ms.decomps):
        raw_val = np.real(np.trace(ps.raw @ o))
        assert raw_val == pytest.approx(d.evaluate(7.0, 1), abs=1e-3)


def test_non_exhaustive_observables():
    times = np.linspace(0, 60, 300)
    states = _synthetic_qubit(times)
    cat = PoleCatalogue.from_pairs([(1.0, 0.1)])
    with pytest.raises(NonExhaustiveObservablesError):
        fit_observables(times, states, pauli_basis()[:3], cat)


def test_hermitian_basis_is_exhaustive():
    b = hermitian_basis(3)
    assert len(b) == 9
    assert all(np.allclose(m, m.conj().T) for m in b)


def test_trace_distance():
    assert trace_distance(np.diag([1.0, 0]), np.diag([0, 1.0])) == pytest.approx(2.0)


# ---- moving preferred basis


def test_static_diagonal_series():
    series = [np.diag([0.7, 0.3])] * 5
    mpb = moving_preferred_basis(series)
    assert np.allclose(mpb.weights, [0.7, 0.3])
    assert np.allclose(np.abs(mpb.frames), np.eye(2))
    gen = effective_generator(mpb)
    assert np.allclose(gen.matrices, 0, atol=1e-14)


def test_rotating_pure_qubit():
    omega, dt = 0.7, 0.01
    t = np.arange(0, 3, dt)
    series = [np.outer(v, v) for v in np.column_stack([np.cos(omega * t / 2), np.sin(omega * t / 2)])]
    mpb = moving_preferred_basis(series, t)
    for k in range(len(t) - 1):
        ov = mpb.frames[k].conj().T @ mpb.frames[k + 1]
        assert np.linalg.norm(ov - np.eye(2), 2) <= omega * dt / 2 * (1 + 1e-9)
    gen = effective_generator(mpb)
    assert np.allclose(gen.matrices[5], omega * SY / 2, atol=1e-8)
    ev = np.linalg.eigvalsh(gen.matrices[50])
    assert ev == pytest.approx([-omega / 2, omega / 2], abs=1e-8)


def test_maximally_mixed_is_flagged():
    mpb = moving_preferred_basis([np.eye(2) / 2] * 3)
    assert mpb.degenerate.all()
    assert np.isnan(effective_generator(mpb).matrices).all()


def test_frames_unitary_and_weights_probability(qubit_run):
    mpb = moving_preferred_basis(qubit_run.privileged_matrices(), qubit_run.times)
    eye = np.eye(2)
    for f in mpb.frames[::50]:
        assert np.allclose(f.conj().T @ f, eye, atol=1e-10)
    assert np.all((mpb.weights >= 0) & (mpb.weights <= 1))
    assert np.allclose(mpb.weights.sum(axis=1), 1, atol=1e-8)


def _commutator_residual(dt):
    t = np.arange(0, 2 + dt / 2, dt)
    base = np.diag([0.8, 0.2])
    us = [expm(-1j * (s * SZ + 0.3 * s * s * SX)) for s in t]
    series = [u @ base @ u.conj().T for u in us]
    mpb = moving_preferred_basis(series, t)
    gen = effective_generator(mpb)
    res = []
    for k in range(1, len(t) - 1):
        dp = (mpb.projector(0, k + 1) - mpb.projector(0, k - 1)) / (2 * dt)
        a = gen.matrices[k]
        p = mpb.projector(0, k)
        res.append(np.linalg.norm(dp + 1j * (a @ p - p @ a)))
    return max(res)


def test_projector_evolution_second_order():
    r1, r2 = _commutator_residual(0.02), _commutator_residual(0.01)
    assert np.log2(r1 / r2) == pytest.approx(2, abs=0.3)


def test_generator_hermitian(qubit_run):
    mpb = moving_preferred_basis(qubit_run.privileged_matrices(), qubit_run.times)
    for ref in (None, np.diag([0.0, 1.0])):
        g = effective_generator(mpb, reference=ref).matrices
        assert np.max(np.abs(g - np.conj(np.swapaxes(g, 1, 2)))) < 1e-8


def test_reference_gauge_sets_diagonal(qubit_run):
    mpb = moving_preferred_basis(qubit_run.privileged_matrices(), qubit_run.times)
    h = np.diag([0.0, 1.0])
    g = effective_generator(mpb, reference=h)
    for k in (10, 500, 1500):
        v = mpb.frames[k]
        assert np.allclose(np.diag(v.conj().T @ g.matrices[k] @ v), np.diag(v.conj().T @ h @ v))
    # off-diagonal part is the gauge-independent frame motion
    free = effective_generator(mpb)
    for k in (10, 500):
        v = mpb.frames[k]
        a = v.conj().T @ g.matrices[k] @ v
        b = v.conj().T @ free.matrices[k] @ v
        assert abs(a[0, 1] - b[0, 1]) < 1e-12


# ---- entropy


def test_linear_entropy_values():
    psi = np.array([0.6, 0.8j])
    assert linear_entropy(np.outer(psi, psi.conj())) == pytest.approx(0, abs=1e-15)
    for d in (2, 3, 5):
        assert linear_entropy(np.eye(d) / d) == pytest.approx(1 - 1 / d, abs=1e-15)
    assert linear_entropy(np.diag([0.5, 0.5])) == 0.5


def test_entropy_production_constant_and_unitary():
    assert np.allclose(entropy_production([np.diag([0.6, 0.4])] * 4, 0.1), 0)
    errs = []
    for dt in (0.02, 0.01):
        t = np.arange(0, 1, dt)
        series = [expm(-1j * s * SX) @ np.diag([0.7, 0.3]) @ expm(1j * s * SX) for s in t]
        errs.append(np.max(np.abs(entropy_production(series, dt))))
    assert errs[0] < 1e-2 * 0.02 ** 2 * 100
    assert errs[1] <= errs[0]
    with pytest.raises(ContractViolation):
        entropy_production([np.eye(2) / 2] * 2, 0.1)


def test_reduced_entropy_grows_early(qubit_run):
    dt = qubit_run.times[1] - qubit_run.times[0]
    ds = entropy_production(qubit_run.states, dt)
    # S_lin rises until ~0.6 t_R, then the qubit purifies towards its ground state
    early = qubit_run.times < 0.5 * qubit_run.t_r
    assert np.all(ds[early] >= -1e-6)
