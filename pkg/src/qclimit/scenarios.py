"""End-to-end scenarios shared by the command line and the acceptance suite.

Each builder returns a plain dataclass with the arrays it produced so that
callers can emit, test or plot them without re-running the physics.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .classical import (
    ActionAnglePair,
    Box,
    SymbolSeries,
    Trajectory,
    TrajectoryReport,
    action_angle_from_projector,
    band_projector,
    characteristic_domain,
    check_partition,
    evolve_phase_space,
    projector_symbol,
    trajectory_surfaces,
)
from .friedrichs import (
    CoherentPairDynamics,
    CoherentPairInit,
    FriedrichsConfig,
    SpectralDensity,
    build_one_excitation_hamiltonian,
    offdiagonal_envelope,
    qubit_reduced_series,
    survival_amplitude,
)
from .modes import (
    ModeSet,
    effective_gamma,
    effective_generator,
    entropy_production,
    fit_observables,
    moving_preferred_basis,
    pauli_basis,
    privileged_state,
    trace_distance,
)
from .poles import ComplexPole, expectation_catalogue, find_pole, pole_ladder, relaxation_time
from .wwm import (
    PhaseSpaceFunction,
    PhaseSpaceGrid,
    lattice_states,
    moyal_bracket,
    poisson_bracket,
    star_product,
    wigner_transform,
)


@dataclass(frozen=True)
class BandModel:
    """Friedrichs model with a flat or parabolic band centred on ``center`` (default omega)."""

    g: float = 0.05
    width: float = 2.0
    omega: float = 1.0
    n_modes: int = 400
    hbar: float = 1.0
    mass: float = 1.0
    fock_cutoff: int = 32
    kind: str = "flat"
    center: float | None = None

    @property
    def density(self) -> SpectralDensity:
        c = self.omega if self.center is None else self.center
        if self.kind == "flat":
            return SpectralDensity.flat(self.g, c, self.width)
        if self.kind == "parabolic":
            return SpectralDensity.parabolic(self.g, c, self.width)
        raise ValueError(f"unknown band kind {self.kind!r}")

    @classmethod
    def from_config(cls, model: dict) -> "BandModel":
        d = model.get("density", {})
        return cls(g=d.get("g", 0.05), width=d.get("width", 2.0), omega=model.get("omega", 1.0),
                   n_modes=model.get("n_modes", 400), hbar=model.get("hbar", 1.0),
                   mass=model.get("mass", 1.0), fock_cutoff=model.get("fock_cutoff", 32),
                   kind=d.get("kind", "flat"), center=d.get("center"))

    def config(self) -> FriedrichsConfig:
        return FriedrichsConfig.from_density(self.density, self.omega, self.n_modes,
                                             hbar=self.hbar, mass=self.mass,
                                             fock_cutoff=self.fock_cutoff)

    def pole(self, tol: float = 1e-10) -> ComplexPole:
        """Lowest pole in energy units (frequency pole times hbar)."""
        return find_pole(self.density, self.omega, tol=tol).scaled(self.hbar)

    def relaxation_time(self) -> float:
        return relaxation_time(pole_ladder(self.pole(), 1), self.hbar)


FlatBand = BandModel


# ------------------------------------------------------------ golden rule


@dataclass
class GoldenRuleResult:
    gamma_pole: float
    gamma_fit: float
    t_r: float
    times: np.ndarray
    survival: np.ndarray

    @property
    def relative_error(self) -> float:
        return abs(self.gamma_fit - self.gamma_pole) / self.gamma_pole


def golden_rule(model: FlatBand = FlatBand(), span: float = 3.0,
                n_times: int = 601) -> GoldenRuleResult:
    """Pole width against the rate fitted to ln|A(t)|^2 over [0, span t_R]."""
    pole = model.pole()
    t_r = model.hbar / pole.gamma
    cfg = model.config()
    t_end = span * t_r
    if t_end >= cfg.recurrence_time:
        raise ValueError("fit window reaches the recurrence time of the discretized bath")
    times = np.linspace(0.0, t_end, n_times)
    amp = survival_amplitude(build_one_excitation_hamiltonian(cfg), times, model.hbar)
    prob = np.abs(amp) ** 2
    slope = np.polyfit(times, np.log(prob), 1)[0]
    return GoldenRuleResult(pole.gamma, -slope * model.hbar, t_r, times, amp)


# -------------------------------------------------------- coherent pair


@dataclass
class PairDecoherence:
    separation: float
    rate: float
    t_d: float
    t_r: float
    predicted_ratio: float      # 2 hbar^2 / (m omega0' L^2)
    times: np.ndarray
    coherence: np.ndarray
    envelope: np.ndarray | None = None

    @property
    def ratio(self) -> float:
        return self.t_d / self.t_r


def pair_decoherence(separation: float, model: FlatBand = FlatBand(),
                     window=(0.05, 0.3), n_times: int = 241, a: complex = 1.0,
                     b: complex = 1.0, convention: str = "scaled",
                     with_envelope: bool = False) -> PairDecoherence:
    """Decoherence of a|alpha1> + b|alpha2> with x1, x2 = -+L/2.

    The rate is the initial slope of -ln|c_12(t)| (interference weight in the
    moving coherent pair), from a quadratic fit over ``window`` (in units of
    t_R), which starts after the short quadratic (Zeno) region.
    """
    cfg = model.config()
    pole = model.pole()
    t_r = model.hbar / pole.gamma
    omega_eff = pole.omega / model.hbar
    init = CoherentPairInit(-separation / 2, separation / 2, a, b)
    dyn = CoherentPairDynamics.from_init(init, cfg, omega_eff, convention)
    times = np.linspace(window[0] * t_r, window[1] * t_r, n_times)
    c = dyn.cross_coefficient(times)
    if separation == 0:
        rate = 0.0
    else:
        coef = np.polyfit(times - times[0], -np.log(c), 2)
        # slope at t = 0 of the fitted quadratic
        rate = coef[1] - 2 * coef[0] * times[0]
    t_d = model.hbar / (rate * model.hbar) if rate > 0 else float("inf")
    env = None
    if with_envelope:
        series = dyn.reduced_series(times)
        u, _ = dyn.amplitudes(times)
        from .friedrichs import coherent_fock
        env = offdiagonal_envelope(
            series, lambda k: tuple(coherent_fock(al * u[k], cfg.fock_cutoff) for al in dyn.alphas))
    pred = 2 * model.hbar ** 2 / (model.mass * omega_eff * separation ** 2) if separation else np.inf
    return PairDecoherence(separation, rate, t_d, t_r, pred, times, c, env)


# --------------------------------------------------------------- qubit MPB


@dataclass
class QubitRun:
    model: BandModel
    excited_population: float
    times: np.ndarray
    states: list
    modeset: ModeSet
    gamma_eff: float
    slow_count: int
    t_d: float
    t_r: float
    privileged: list = field(repr=False)
    repair: np.ndarray = field(repr=False)
    distances: np.ndarray = field(repr=False)

    def privileged_matrices(self) -> np.ndarray:
        return np.array([p.rho.entries for p in self.privileged])


def qubit_scenario(model: FlatBand = FlatBand(), excited_population: float = 0.1,
                   t_span: float = 5.0, n_times: int = 2001) -> QubitRun:
    """Vacuum / one-quantum reduced dynamics, its mode fit, privileged state and MPB.

    Observables are the Pauli matrices; the catalogue holds the widths that
    the ladder z_n = n z0 produces in a two-level expectation value.
    """
    cfg = model.config()
    z0 = model.pole()
    t_r = model.hbar / z0.gamma
    times = np.linspace(0.0, t_span * t_r, n_times)
    states = qubit_reduced_series(cfg, excited_population, times)
    cat = expectation_catalogue(z0, 1)
    ms = fit_observables(times, states, pauli_basis(), cat, model.hbar)
    eff = effective_gamma(ms)
    t_d = model.hbar / eff.gamma_eff
    ps = [privileged_state(ms, eff.slow_count, t) for t in times]
    dist = np.array([trace_distance(p.rho, s) for p, s in zip(ps, states)])
    return QubitRun(model, excited_population, times, states, ms, eff.gamma_eff,
                    eff.slow_count, t_d, t_r, ps, np.array([p.repair_distance for p in ps]), dist)


# -------------------------------------------------------------- trajectory


@dataclass
class TrajectoryRun:
    trajectory: Trajectory
    report: TrajectoryReport
    pair: ActionAnglePair
    t_r: float
    generator_norm: np.ndarray

    def drift(self, t_end: float) -> float:
        """max |Pi_bar(t) - Pi_bar(0)| / |Pi_bar(0)| for t <= t_end."""
        tr = self.trajectory
        sel = tr.times <= t_end + 1e-12
        return float(np.max(np.abs(tr.Pi_bar[sel] - tr.Pi_bar[0])) / abs(tr.Pi_bar[0]))


def oscillator_grid(hbar: float = 1.0, n: int = 128, extent: float = 8.0) -> PhaseSpaceGrid:
    return PhaseSpaceGrid.centered(n, extent * np.sqrt(hbar), hbar)


def generator_symbols(run: QubitRun, grid: PhaseSpaceGrid,
                      gauge: str = "energy") -> tuple[SymbolSeries, np.ndarray]:
    """aleph(t) of the qubit MPB as a symbol on the oscillator phase space.

    The qubit is the {|0>, |1>} subspace of the system oscillator, so
    symb(aleph) = sum_ij aleph_ij(t) symb(|i><j|).  ``gauge`` is "transport"
    (damped generator, no diagonal part in the moving basis) or "energy"
    (phases pinned to the system Hamiltonian diag(0, hbar omega0')).
    """
    mpb = moving_preferred_basis(run.privileged_matrices(), run.times)
    if gauge == "transport":
        ref = None
    elif gauge == "energy":
        ref = np.diag([0.0, run.model.pole().omega])
    else:
        raise ValueError(f"unknown gauge {gauge!r}")
    gen = effective_generator(mpb, run.model.hbar, reference=ref)
    vecs = lattice_states(grid, 2)
    basis, coefs = [], []
    for i in range(2):
        for j in range(2):
            basis.append(wigner_transform(np.outer(vecs[:, i], vecs[:, j].conj()), grid))
            coefs.append(gen.matrices[:, i, j])
    coefs = np.nan_to_num(np.array(coefs).T)
    norms = np.linalg.norm(gen.matrices, axis=(1, 2))
    return SymbolSeries(run.times, basis, coefs), norms


def trajectory_scenario(run: QubitRun | None = None, t_end: float | None = None,
                        box: Box | None = None, n_out: int | None = None,
                        max_step: float | None = None, grid: PhaseSpaceGrid | None = None,
                        gauge: str = "energy") -> TrajectoryRun:
    """Transport a minimal box under the MPB generator and detect equilibrium."""
    run = run or qubit_scenario()
    hbar = run.model.hbar
    grid = grid or oscillator_grid(hbar)
    series, norms = generator_symbols(run, grid, gauge)
    pair = ActionAnglePair.harmonic(grid, run.model.mass * run.model.omega)
    t_end = run.times[-1] if t_end is None else t_end
    sel = run.times <= t_end + 1e-12
    times = run.times[sel]
    if n_out:
        times = np.linspace(0.0, t_end, n_out)
    box = box or Box((1.0, 0.0), (np.sqrt(hbar), np.sqrt(hbar)), hbar)
    traj = evolve_phase_space(series, pair, times, box, max_step=max_step)
    rep = trajectory_surfaces(traj.times, traj.Pi_bar, traj.Phi_bar, run.t_r)
    return TrajectoryRun(traj, rep, pair, run.t_r, norms)


# ----------------------------------------------------------- hbar studies


HBAR_SWEEP = (1e-3, 3e-3, 1e-2, 3e-2, 1e-1)


def loglog_slope(hbars, errors) -> float:
    return float(np.polyfit(np.log(hbars), np.log(errors), 1)[0])


def _l2(fn: PhaseSpaceFunction) -> float:
    return float(np.sqrt(np.sum(np.abs(fn.values) ** 2) * fn.grid.cell_area))


def _study_grid(hbar: float) -> PhaseSpaceGrid:
    return PhaseSpaceGrid(-6.0, 6.0, -6.0, 6.0, 128, 128, hbar)


def _gaussian(grid, x0, p0, sx, sp):
    return grid.sample(lambda x, p: np.exp(-(x - x0) ** 2 / (2 * sx ** 2) - (p - p0) ** 2 / (2 * sp ** 2)))


def star_scaling(hbars=HBAR_SWEEP, order: int = 4) -> dict:
    """Errors of star product, Moyal bracket and commuting pair against their hbar->0 limits."""
    out = {"hbar": np.array(hbars), "star": [], "moyal": [], "commuting": []}
    for h in hbars:
        grid = _study_grid(h)
        f = _gaussian(grid, 0.3, -0.2, 1.0, 0.8)
        g = _gaussian(grid, -0.4, 0.5, 0.7, 1.1)
        out["star"].append(_l2(star_product(f, g, order) - f * g))
        out["moyal"].append(_l2(moyal_bracket(f, g, order) - poisson_bracket(f, g)))
        # functions of H = (x^2 + p^2)/2 quantize to commuting operators
        a = grid.sample(lambda x, p: np.exp(-(x ** 2 + p ** 2) / 2))
        b = grid.sample(lambda x, p: (x ** 2 + p ** 2) / 2 * np.exp(-(x ** 2 + p ** 2) / 4))
        out["commuting"].append(_l2(star_product(a, b, order) - a * b))
    for key in ("star", "moyal", "commuting"):
        out[key] = np.array(out[key])
        out[key + "_slope"] = loglog_slope(hbars, out[key])
    return out


def idempotency_scaling(hbars=HBAR_SWEEP, order: int = 4, n: int = 64) -> dict:
    """int |Pi * Pi - Pi| for the oscillator ground-state projector."""
    defects = []
    for h in hbars:
        grid = PhaseSpaceGrid.centered(n, 7.0 * np.sqrt(h), h)
        v = lattice_states(grid, 1)
        pi = projector_symbol(band_projector(v), grid)
        defects.append((star_product(pi, pi, order) - pi).l1())
    d = np.array(defects)
    return {"hbar": np.array(hbars), "defect": d, "slope": loglog_slope(hbars, d)}


def characteristic_defects(hbars=(1e-1, 3e-2, 1e-2, 3e-3), action_range=(0.1, 0.3)) -> np.ndarray:
    """int |Pi (Pi - 1)| for the projector onto the oscillator levels whose
    action (n + 1/2) hbar lies in ``action_range``."""
    out = []
    for h in hbars:
        levels = [n for n in range(int(action_range[1] / h) + 1)
                  if action_range[0] <= (n + 0.5) * h < action_range[1]]
        if not levels:
            raise ValueError(f"no level in the action range at hbar={h}")
        extent = np.sqrt(2 * action_range[1]) + 6 * np.sqrt(h)
        n_sites = 64
        grid = PhaseSpaceGrid.centered(n_sites, extent, h)
        while grid.p_max < extent:
            n_sites *= 2
            grid = PhaseSpaceGrid.centered(n_sites, extent, h)
        v = lattice_states(grid, levels[-1] + 1)
        pi = projector_symbol(band_projector(v[:, levels[0]:levels[-1] + 1]), grid, tol=1e-8)
        out.append((pi * (pi - 1.0)).l1())
    return np.array(out)


# ------------------------------------------------------------ domains


@dataclass
class DomainFamily:
    hbar: float
    bands: list
    domains: list
    partition: object
    grid: PhaseSpaceGrid


def number_band_domains(hbar: float = 1e-3, max_action: float = 0.24, n_bands: int = 5,
                        n_sites: int = 1024, x_extent: float = 0.8, threshold: float = 0.5,
                        overlap_tol: float = 0.01) -> DomainFamily:
    """Domains of the number-basis projectors grouped into equal-action bands.

    The number basis is the asymptotic moving basis of the flat-band model
    (the effective Hamiltonian is proportional to a^dagger a).
    """
    grid = PhaseSpaceGrid.centered(n_sites, x_extent, hbar)
    per = int(round(max_action / hbar / n_bands))
    vecs = lattice_states(grid, per * n_bands)
    bands, domains = [], []
    for k in range(n_bands):
        sl = slice(k * per, (k + 1) * per)
        sym = projector_symbol(band_projector(vecs[:, sl]), grid, tol=1e-8)
        bands.append((sl.start, sl.stop))
        domains.append(characteristic_domain(sym, threshold))
    return DomainFamily(hbar, bands, domains, check_partition(domains, overlap_tol), grid)


def annulus_pair(hbar: float = 1e-2, n_sites: int = 256, bands=((12, 20), (20, 28), (28, 36)),
                 x_extent: float = 1.2) -> ActionAnglePair:
    grid = PhaseSpaceGrid.centered(n_sites, x_extent, hbar)
    vecs = lattice_states(grid, max(b for _, b in bands))
    doms = [characteristic_domain(projector_symbol(band_projector(vecs[:, a:b]), grid, tol=1e-8))
            for a, b in bands]
    return action_angle_from_projector(doms, grid)


def entropy_check(run: QubitRun) -> dict:
    """Linear-entropy production of rho_S and of the privileged state on (0, t_D)."""
    dt = run.times[1] - run.times[0]
    ds_s = entropy_production(run.states, dt)
    ds_ps = entropy_production(run.privileged_matrices(), dt)
    sel = (run.times > 0) & (run.times < run.t_d)
    return {"times": run.times[sel], "system": ds_s[sel], "privileged": ds_ps[sel]}
