import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from qclimit.classical import (
    ActionAnglePair,
    Box,
    SymbolSeries,
    action_angle_from_projector,
    band_projector,
    box_average,
    characteristic_domain,
    check_partition,
    evolve_phase_space,
    projector_symbol,
    trajectory_surfaces,
)
from qclimit.errors import (
    ContractViolation,
    EmptyDomainError,
    GridMismatchError,
    TruncationError,
    UnsupportedGeometryError,
)
from qclimit.scenarios import annulus_pair, characteristic_defects
from qclimit.wwm import PhaseSpaceFunction, PhaseSpaceGrid, lattice_states


@pytest.fixture(scope="module")
def grid():
    return PhaseSpaceGrid.centered(128, 3.0, 0.05)


def const(grid, c):
    return grid.sample(lambda X, P: c + 0 * X)


# ---- projector symbols and domains


def test_projector_symbol_of_ground_state(grid):
    v = lattice_states(grid, 1)
    sym = projector_symbol(band_projector(v), grid)
    X, P = grid.mesh()
    h = grid.hbar
    # operator convention: the state Wigner function times 2 pi hbar
    assert np.allclose(sym.values, 2 * np.exp(-(X ** 2 + P ** 2) / h), atol=1e-6)


def test_projector_symbol_rejects_non_projector(grid):
    with pytest.raises(ContractViolation, match="idempotent"):
        projector_symbol(0.5 * np.eye(128), grid)
    a = np.zeros((128, 128))
    a[0, 1] = 1
    with pytest.raises(ContractViolation, match="Hermitian"):
        projector_symbol(a, grid)


def test_domain_of_constants(grid):
    d = characteristic_domain(const(grid, 1.0))
    assert d.volume == 1.0 and d.connected
    with pytest.raises(EmptyDomainError):
        characteristic_domain(const(grid, 0.0))


BANDS = ((12, 20), (20, 28), (28, 36))


@pytest.fixture(scope="module")
def rings():
    g = PhaseSpaceGrid.centered(256, 1.2, 1e-2)
    v = lattice_states(g, 36)
    syms = [projector_symbol(band_projector(v[:, a:b]), g, tol=1e-8) for a, b in BANDS]
    return g, syms, [characteristic_domain(s) for s in syms]


def test_ring_symbols_carry_the_trace(rings):
    g, syms, _ = rings
    for (a, b), s in zip(BANDS, syms):
        assert np.sum(s.values) * g.cell_area == pytest.approx(2 * np.pi * g.hbar * (b - a), rel=1e-6)


def test_ring_areas_near_bohr_sommerfeld(rings):
    g, _, doms = rings
    areas = np.array([d.area for d in doms])
    expected = np.array([2 * np.pi * g.hbar * (b - a) for a, b in BANDS])
    assert np.all(np.abs(areas[:2] / expected[:2] - 1) < 0.1)
    # the outer ring keeps interior ripples below the 0.5 level on a few cells
    assert abs(areas[2] / expected[2] - 1) < 0.15
    assert all(d.connected for d in doms)


def test_partition_reports(rings):
    _, _, doms = rings
    rep = check_partition([doms[0], doms[2]])
    assert rep.passed and rep.total_volume <= 1
    # adjacent rings share their blurred rim at this hbar
    adjacent = check_partition(doms[:2])
    assert not adjacent.passed and adjacent.overlap_fraction[0, 1] < 0.1
    twice = check_partition([doms[0], doms[0]])
    assert not twice.passed and twice.overlap_fraction[0, 1] == 1.0


def test_partition_grid_mismatch(grid):
    other = PhaseSpaceGrid.centered(64, 3.0, 0.05)
    with pytest.raises(GridMismatchError):
        check_partition([characteristic_domain(const(grid, 1.0)),
                         characteristic_domain(const(other, 1.0))])


def test_defects_shrink_with_hbar():
    d = characteristic_defects()
    assert np.all(np.diff(d) < 0)


def test_orthogonal_projectors_decouple():
    # the pointwise product of the symbols of orthogonal bands goes to zero
    out = []
    for h in (0.05, 0.0125):
        g = PhaseSpaceGrid.centered(256, 1.6, h)
        n = int(round(0.3 / h))
        v = lattice_states(g, 2 * n)
        a = projector_symbol(band_projector(v[:, :n]), g, tol=1e-8)
        b = projector_symbol(band_projector(v[:, n:]), g, tol=1e-8)
        out.append((a * b).l1())
    assert out[1] < out[0]


# ---- boxes


def test_box_floor_and_grid(grid):
    with pytest.raises(ContractViolation):
        Box((0, 0), (0.1, 0.1), hbar=0.05)
    with pytest.raises(ContractViolation):
        Box((0, 0), (0.5, -1), hbar=0.05)
    with pytest.raises(ContractViolation):
        Box((2.9, 0), (0.5, 0.5), hbar=0.05).mask(grid)


def test_box_average_constant_density(grid):
    box = Box((0.2, -0.1), (1.0, 1.0), hbar=0.05)
    m = box.mask(grid)
    # uniform density normalized on the box
    rho = const(grid, 1.0 / (m.sum() * grid.cell_area))
    assert box_average(const(grid, 3.0), rho, box) == pytest.approx(3.0 / 1.0, rel=1e-12)


def test_box_average_gaussian_mean(grid):
    x0 = 0.3
    X, P = grid.mesh()
    h = grid.hbar
    rho = PhaseSpaceFunction(grid, np.exp(-((X - x0) ** 2 + P ** 2) / h) / (np.pi * h))
    box = Box((x0, 0.0), (2.4, 2.4), hbar=h)
    f = grid.sample(lambda X, P: X)
    # the box holds the whole Gaussian, so the average is <x> / area
    assert box_average(f, rho, box) * 2.4 * 2.4 == pytest.approx(x0, abs=1e-6)


@settings(max_examples=20, deadline=None)
@given(st.floats(-2, 2), st.floats(-2, 2))
def test_box_average_linear_and_positive(a, b):
    g = PhaseSpaceGrid.centered(64, 3.0, 0.05)
    X, P = g.mesh()
    rho = PhaseSpaceFunction(g, np.exp(-(X ** 2 + P ** 2) / 0.05))
    box = Box((0, 0), (1, 1), hbar=0.05)
    f1 = PhaseSpaceFunction(g, X ** 2)
    f2 = PhaseSpaceFunction(g, np.cos(P))
    lhs = box_average(f1 * a + f2 * b, rho, box)
    rhs = a * box_average(f1, rho, box) + b * box_average(f2, rho, box)
    assert lhs == pytest.approx(rhs, abs=1e-10)
    assert box_average(f1, rho, box) >= 0


def test_box_average_grid_mismatch(grid):
    other = PhaseSpaceGrid.centered(64, 3.0, 0.05)
    with pytest.raises(GridMismatchError):
        box_average(const(grid, 1.0), const(other, 1.0), Box((0, 0), (1, 1), 0.05))


# ---- action-angle pairs


def test_harmonic_pair_bracket(grid):
    pair = ActionAnglePair.harmonic(grid)
    assert pair.bracket_residual < 0.05
    assert pair.action(1.0, 0.0) == pytest.approx(0.5)
    assert pair.angle(0.0, -1.0) == pytest.approx(np.pi / 2)


def test_pair_from_annuli(rings):
    pair = annulus_pair()
    assert pair.bracket_residual < 0.05
    assert np.all(np.diff(pair.domain_actions) > 0)
    assert abs(pair.center[0]) < 0.05 and abs(pair.center[1]) < 0.05


def test_pair_rejects_disconnected(grid):
    X, P = grid.mesh()
    two = PhaseSpaceFunction(grid, ((np.abs(X - 1) < 0.3) | (np.abs(X + 1) < 0.3)).astype(float))
    with pytest.raises(UnsupportedGeometryError):
        action_angle_from_projector([characteristic_domain(two)])


# ---- transport


def _box(grid):
    return Box((0.8, 0.0), (np.sqrt(grid.hbar), np.sqrt(grid.hbar)), hbar=grid.hbar)


def test_zero_generator_is_still(grid):
    pair = ActionAnglePair.harmonic(grid)
    gen = SymbolSeries.constant(const(grid, 0.0), 5.0)
    tr = evolve_phase_space(gen, pair, np.linspace(0, 5, 11), _box(grid))
    assert np.allclose(tr.positions, tr.positions[0])
    assert np.allclose(tr.Pi_bar, tr.Pi_bar[0])


def test_harmonic_generator_rotates(grid):
    pair = ActionAnglePair.harmonic(grid)
    omega = 1.3
    gen = SymbolSeries.constant(grid.sample(lambda X, P: omega * (X ** 2 + P ** 2) / 2), 4.0)
    times = np.linspace(0, 4, 41)
    tr = evolve_phase_space(gen, pair, times, _box(grid))
    assert np.max(np.abs(tr.Pi_bar - tr.Pi_bar[0])) < 1e-4 * tr.Pi_bar[0]
    # the box Riemann sum carries total weight sum(w), slightly below 1
    slope = np.polyfit(times, tr.Phi_bar, 1)[0]
    assert slope == pytest.approx(omega * tr.weights.sum(), rel=1e-4)


def test_linear_interpolation_option(grid):
    pair = ActionAnglePair.harmonic(grid)
    gen = SymbolSeries.constant(grid.sample(lambda X, P: (X ** 2 + P ** 2) / 2), 1.0)
    tr = evolve_phase_space(gen, pair, np.linspace(0, 1, 5), _box(grid), interpolation="linear")
    assert np.max(np.abs(tr.Pi_bar - tr.Pi_bar[0])) < 1e-2 * tr.Pi_bar[0]
    with pytest.raises(ValueError):
        evolve_phase_space(gen, pair, [0, 1], _box(grid), interpolation="quintic")


def test_truncation_reports_exit_time(grid):
    pair = ActionAnglePair.harmonic(grid)
    gen = SymbolSeries.constant(grid.sample(lambda X, P: -X), 10.0)   # dp/dt = 1
    with pytest.raises(TruncationError) as info:
        evolve_phase_space(gen, pair, np.linspace(0, 10, 21), _box(grid))
    assert 0 < info.value.exit_time < 3.5


def test_symbol_series_contract(grid):
    with pytest.raises(ContractViolation):
        SymbolSeries(np.array([0.0, 1.0]), [const(grid, 1.0)], np.ones((3, 1)))
    s = SymbolSeries(np.array([0.0, 2.0]), [const(grid, 1.0)], np.array([[0.0], [2.0]]))
    assert s.coefficients_at(1.0)[0] == pytest.approx(1.0)


# ---- surfaces


def test_rotation_never_equilibrates():
    t = np.linspace(0, 10, 501)
    rep = trajectory_surfaces(t, np.ones_like(t), 2.0 * t, t_r=1.0)
    assert not rep.equilibrium and not rep.flags.any()


def test_converging_curve_is_flagged():
    t = np.linspace(0, 20, 2001)
    rep = trajectory_surfaces(t, 1 + np.exp(-3 * t), 1 - np.exp(-3 * t), t_r=1.0)
    assert rep.equilibrium
    assert rep.flag_time == pytest.approx(rep.equilibrium_time + 0.5)
    assert rep.flags[-1] and not rep.flags[0]
    with pytest.raises(ContractViolation):
        trajectory_surfaces(t, t[:-1], t, 1.0)
