import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from math import factorial

from qclimit.errors import ConfigurationError, ContractViolation, DimensionMismatch, TruncationError
from qclimit.friedrichs import (
    CoherentPairDynamics,
    CoherentPairInit,
    DensityMatrix,
    FriedrichsConfig,
    Propagator,
    SpectralDensity,
    build_one_excitation_hamiltonian,
    coherent_fock,
    coherent_pair_state,
    offdiagonal_envelope,
    position_to_alpha,
    qubit_reduced_series,
    reduced_density,
    survival_amplitude,
)


def small_cfg(n=40, g=0.05):
    return FriedrichsConfig.from_density(SpectralDensity.flat(g, 1.0, 2.0), 1.0, n)


def partial_trace_oracle(psi, ds, de):
    rho = np.zeros((ds, ds), dtype=complex)
    for i in range(ds):
        for j in range(ds):
            for k in range(de):
                rho[i, j] += psi[i * de + k] * np.conj(psi[j * de + k])
    return rho


def random_state(rng, n):
    v = rng.normal(size=n) + 1j * rng.normal(size=n)
    return v / np.linalg.norm(v)


# ---- spectral density and configuration


def test_flat_density_support_and_values():
    J = SpectralDensity.flat(0.1, 1.0, 2.0)
    assert J.support == (0.0, 2.0)
    assert J(1.3) == pytest.approx(0.01)
    assert J(2.5) == 0.0
    assert J.continued(1.0 - 0.3j) == pytest.approx(0.01)


def test_discretize_midpoint_couplings():
    J = SpectralDensity.flat(0.1, 1.0, 2.0)
    w, lam = J.discretize(4)
    assert np.allclose(w, [0.25, 0.75, 1.25, 1.75])
    assert np.allclose(lam, np.sqrt(0.01 * 0.5))


def test_config_rejects_bad_values():
    with pytest.raises(ConfigurationError):
        FriedrichsConfig(1.0, np.array([0.5, 1.5]), np.array([0.1]))
    with pytest.raises((ConfigurationError, ContractViolation)):
        FriedrichsConfig(1.0, np.array([0.5]), np.array([0.1]), hbar=-1.0)


def test_hamiltonian_layout():
    cfg = FriedrichsConfig(1.0, np.array([0.5, 1.5]), np.array([0.1, 0.2]), hbar=2.0)
    h = build_one_excitation_hamiltonian(cfg)
    expect = 2.0 * np.array([[1.0, 0.1, 0.2], [0.1, 0.5, 0.0], [0.2, 0.0, 1.5]])
    assert np.allclose(h, expect)


def test_recurrence_time():
    cfg = small_cfg(40)
    assert cfg.recurrence_time == pytest.approx(2 * np.pi / 0.05)


# ---- survival amplitude


def test_survival_at_zero_is_one():
    h = build_one_excitation_hamiltonian(small_cfg())
    assert survival_amplitude(h, [0.0])[0] == pytest.approx(1.0, abs=1e-13)


def test_decoupled_phase_rotation():
    cfg = small_cfg(10, g=0.0)
    h = build_one_excitation_hamiltonian(cfg)
    t = np.linspace(0, 20, 50)
    a = survival_amplitude(h, t)
    assert np.allclose(a, np.exp(-1j * t), atol=1e-12)


def test_unitarity_and_sector(rng):
    cfg = small_cfg(60)
    prop = Propagator(build_one_excitation_hamiltonian(cfg), cfg.hbar)
    psi0 = random_state(rng, cfg.n_bath + 1)
    states = prop.evolve(psi0, np.linspace(0, 50, 11))
    assert np.allclose(np.linalg.norm(states, axis=1), 1.0, atol=1e-10)
    # the one-excitation block is the whole space here, so the sector is the
    # span of these basis vectors: evolution cannot leave it
    assert states.shape[1] == cfg.n_bath + 1


def test_propagator_matches_expm():
    from scipy.linalg import expm

    cfg = small_cfg(12)
    h = build_one_excitation_hamiltonian(cfg)
    e0 = np.zeros(13)
    e0[0] = 1
    psi = Propagator(h).evolve(e0, [3.7])[0]
    assert np.allclose(psi, expm(-1j * 3.7 * h) @ e0, atol=1e-12)


# ---- density matrices and partial trace


def test_density_matrix_invariants():
    with pytest.raises(ContractViolation):
        DensityMatrix(np.array([[0.5, 0.1], [0.2, 0.5]]))
    with pytest.raises(ContractViolation):
        DensityMatrix(np.diag([0.6, 0.6]))
    with pytest.raises(ContractViolation):
        DensityMatrix(np.diag([1.2, -0.2]))
    DensityMatrix(np.diag([0.7, 0.3]))


def test_product_state_gives_pure_reduced():
    psi = np.array([0.6, 0.8])
    phi = np.array([1, 1j, 0]) / np.sqrt(2)
    rho = reduced_density(np.kron(psi, phi), 2, 3)
    assert np.allclose(rho.entries, np.outer(psi, psi))


def test_maximally_entangled_one_excitation():
    full = np.zeros(4)
    full[1 * 2 + 0] = 1 / np.sqrt(2)
    full[0 * 2 + 1] = 1 / np.sqrt(2)
    assert np.allclose(reduced_density(full, 2, 2).entries, np.diag([0.5, 0.5]))


def test_partial_trace_matches_double_sum(rng):
    for _ in range(5):
        psi = random_state(rng, 4)
        assert np.allclose(reduced_density(psi, 2, 2).entries, partial_trace_oracle(psi, 2, 2),
                           atol=1e-12)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        reduced_density(np.ones(5) / np.sqrt(5), 2, 2)


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(2, 4), st.integers(2, 5))
def test_expectation_identity(seed, ds, de):
    rng = np.random.default_rng(seed)
    psi = random_state(rng, ds * de)
    rho_s = reduced_density(psi, ds, de)
    a = rng.normal(size=(ds, ds)) + 1j * rng.normal(size=(ds, ds))
    o = a + a.conj().T
    full = np.vdot(psi, np.kron(o, np.eye(de)) @ psi)
    assert abs(rho_s.expect(o) - full) < 1e-12


def test_reduced_series_has_unit_trace():
    cfg = small_cfg(40)
    for rho in qubit_reduced_series(cfg, 0.3, np.linspace(0, 30, 7)):
        assert abs(np.trace(rho.entries) - 1) < 1e-10


# ---- coherent states


def test_alpha_conventions_agree_at_unit_hbar():
    a = position_to_alpha(1.3, 1.0, 2.0, 1.0, "scaled")
    b = position_to_alpha(1.3, 1.0, 2.0, 1.0, "standard")
    assert a == pytest.approx(b)
    assert b == pytest.approx(np.sqrt(2.0 / 2) * 1.3)
    # the two formulas differ away from hbar = 1
    assert position_to_alpha(1.0, 1.0, 1.0, 0.5, "scaled") != pytest.approx(
        position_to_alpha(1.0, 1.0, 1.0, 0.5, "standard"))


def test_coherent_fock_series_oracle():
    alpha = 0.8 - 0.3j
    v = coherent_fock(alpha, 30)
    oracle = np.array([np.exp(-abs(alpha) ** 2 / 2) * alpha ** n / np.sqrt(float(factorial(n)))
                       for n in range(30)])
    assert np.allclose(v, oracle, atol=1e-14)


def test_coherent_truncation_error():
    with pytest.raises(TruncationError) as info:
        coherent_fock(3.0, 8)
    assert info.value.deficit > 1e-8


def test_pair_single_branch():
    cfg = small_cfg(10)
    init = CoherentPairInit(0.7, -0.7, 1.0, 0.0)
    v = coherent_pair_state(init, cfg)
    alpha = position_to_alpha(0.7, 1.0, 1.0, 1.0)
    assert np.allclose(v, coherent_fock(alpha, cfg.fock_cutoff), atol=1e-12)


def test_cat_state_coefficients():
    cfg = small_cfg(10)
    v = coherent_pair_state(CoherentPairInit(1.0, -1.0), cfg)
    a = position_to_alpha(1.0, 1.0, 1.0, 1.0)
    n = np.arange(cfg.fock_cutoff)
    raw = np.array([np.exp(-a * a / 2) * (a ** k + (-a) ** k) / np.sqrt(float(factorial(k))) for k in n])
    assert np.allclose(v, raw / np.linalg.norm(raw), atol=1e-12)
    assert np.allclose(v[1::2], 0)


def test_degenerate_pair_is_one_coherent_state():
    cfg = small_cfg(10)
    v = coherent_pair_state(CoherentPairInit(0.5, 0.5), cfg)
    a = position_to_alpha(0.5, 1.0, 1.0, 1.0)
    assert np.allclose(v, coherent_fock(a, cfg.fock_cutoff), atol=1e-12)


def test_envelope_zero_separation_is_flat():
    cfg = small_cfg(80)
    dyn = CoherentPairDynamics.from_init(CoherentPairInit(0.4, 0.4), cfg)
    c = dyn.cross_coefficient(np.linspace(0, 60, 13))
    assert np.allclose(c, 1.0, atol=1e-12)


def test_envelope_initial_value_and_positivity():
    cfg = small_cfg(80)
    init = CoherentPairInit(-0.5, 0.5)
    dyn = CoherentPairDynamics.from_init(init, cfg)
    times = np.linspace(0, 10, 6)
    series = dyn.reduced_series(times)
    a1, a2 = dyn.alphas
    e1, e2 = coherent_fock(a1, cfg.fock_cutoff), coherent_fock(a2, cfg.fock_cutoff)
    env = offdiagonal_envelope(series, (e1, e2))
    assert np.all(env >= 0)
    w1, w2 = dyn.weights
    cross = np.outer(e1, e2.conj())
    expected = abs(w1 * np.conj(w2)) * np.linalg.norm(cross + cross.conj().T)
    assert env[0] == pytest.approx(expected, rel=1e-6)


def test_envelope_rejects_empty_series():
    with pytest.raises((ContractViolation, ValueError)):
        offdiagonal_envelope([], (np.ones(2), np.ones(2)))
