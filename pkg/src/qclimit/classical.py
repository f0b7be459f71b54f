"""Classical structure read off projector symbols.

Projector symbols approach characteristic functions of phase-space domains
as hbar shrinks.  This module extracts those domains, averages observables
over minimal boxes, builds action-angle pairs for annular (oscillator-like)
families and transports box averages along the characteristics of a
time-dependent generator symbol.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from ._backend import bilinear_sample, cubic_sample, label_components
from .errors import (
    ContractViolation,
    EmptyDomainError,
    GridMismatchError,
    TruncationError,
    UnsupportedGeometryError,
)
from .wwm import PhaseSpaceFunction, PhaseSpaceGrid, gradient, wigner_transform


def projector_symbol(proj, grid: PhaseSpaceGrid, tol: float = 1e-10) -> PhaseSpaceFunction:
    """Operator-convention symbol of a Hermitian idempotent lattice matrix."""
    p = np.asarray(proj, dtype=complex)
    if np.max(np.abs(p - p.conj().T)) > tol:
        raise ContractViolation("projector is not Hermitian")
    if np.max(np.abs(p @ p - p)) > tol:
        raise ContractViolation("matrix is not idempotent")
    return wigner_transform(p, grid).real


def band_projector(vectors: np.ndarray) -> np.ndarray:
    """Sum of |v><v| over the columns of an orthonormal block."""
    v = np.asarray(vectors, dtype=complex)
    return v @ v.conj().T


# ----------------------------------------------------------------- domains


@dataclass(frozen=True)
class Domain:
    mask: np.ndarray
    volume: float          # fraction of the grid area
    area: float            # absolute phase-space area
    connected: bool
    n_components: int
    grid: PhaseSpaceGrid = field(repr=False)


def characteristic_domain(sym: PhaseSpaceFunction, threshold: float = 0.5) -> Domain:
    if np.iscomplexobj(sym.values) and np.max(np.abs(sym.values.imag)) > 1e-10:
        raise ContractViolation("symbol must be real")
    mask = np.real(sym.values) >= threshold
    count = int(mask.sum())
    if count == 0:
        raise EmptyDomainError(f"no cells reach the threshold {threshold}")
    _, n = label_components(mask)
    g = sym.grid
    return Domain(mask, count / mask.size, count * g.cell_area, n == 1, int(n), g)


@dataclass(frozen=True)
class PartitionReport:
    overlaps: np.ndarray           # cell counts
    overlap_fraction: np.ndarray   # relative to the smaller domain
    volumes: np.ndarray
    total_volume: float
    violations: list
    passed: bool


def check_partition(domains: Sequence[Domain], overlap_tol: float = 0.01,
                    volume_tol: float = 1e-3) -> PartitionReport:
    """Pairwise overlaps and the summed-volume bound for a domain family."""
    n = len(domains)
    shapes = {d.mask.shape for d in domains}
    if len(shapes) > 1:
        raise GridMismatchError("domains do not share a grid")
    counts = np.array([d.mask.sum() for d in domains], dtype=float)
    vols = np.array([d.volume for d in domains])
    ov = np.zeros((n, n), dtype=int)
    frac = np.zeros((n, n))
    violations = []
    for i in range(n):
        for j in range(i + 1, n):
            c = int(np.count_nonzero(domains[i].mask & domains[j].mask))
            ov[i, j] = ov[j, i] = c
            f = c / max(min(counts[i], counts[j]), 1)
            frac[i, j] = frac[j, i] = f
            if f > overlap_tol:
                violations.append(f"domains {i} and {j} overlap on {c} cells ({f:.1%})")
    total = float(vols.sum())
    if total > 1 + volume_tol:
        violations.append(f"total volume {total:.6f} exceeds 1")
    if np.any(vols < 0):
        violations.append("negative volume")
    return PartitionReport(ov, frac, vols, total, violations, not violations)


# -------------------------------------------------------------- box average


@dataclass(frozen=True)
class Box:
    center: tuple[float, float]
    widths: tuple[float, float]
    hbar: float = 1.0

    def __post_init__(self):
        sx, sp = self.widths
        if sx <= 0 or sp <= 0:
            raise ContractViolation("box widths must be positive")
        if sx * sp < self.hbar / 2 * (1 - 1e-12):
            raise ContractViolation(f"box area {sx * sp:.3g} below the hbar/2 floor")

    def mask(self, grid: PhaseSpaceGrid) -> np.ndarray:
        (xc, pc), (sx, sp) = self.center, self.widths
        if (xc - sx / 2 < grid.x_min or xc + sx / 2 > grid.x_max
                or pc - sp / 2 < grid.p_min or pc + sp / 2 > grid.p_max):
            raise ContractViolation("box extends beyond the grid")
        x, p = grid.mesh()
        return (np.abs(x - xc) <= sx / 2) & (np.abs(p - pc) <= sp / 2)


def box_average(f: PhaseSpaceFunction, rho_w: PhaseSpaceFunction, box: Box) -> float:
    """(1 / sx sp) * sum over the box of f rho_W dA (Riemann sum)."""
    if not f.grid.same_as(rho_w.grid):
        raise GridMismatchError("f and rho_W use different grids")
    m = box.mask(f.grid)
    sx, sp = box.widths
    return float(np.real(np.sum(f.values[m] * rho_w.values[m])) * f.grid.cell_area / (sx * sp))


# ------------------------------------------------------------ action-angle


@dataclass(frozen=True)
class ActionAnglePair:
    Pi: PhaseSpaceFunction
    Phi: PhaseSpaceFunction
    center: tuple[float, float]
    scale: float                     # m * omega estimate
    bracket_residual: float
    domain_actions: tuple = ()

    def _scaled(self, x, p):
        xs = np.sqrt(self.scale) * (np.asarray(x) - self.center[0])
        ps = (np.asarray(p) - self.center[1]) / np.sqrt(self.scale)
        return xs, ps

    def action(self, x, p):
        xs, ps = self._scaled(x, p)
        return 0.5 * (xs ** 2 + ps ** 2)

    def angle(self, x, p):
        xs, ps = self._scaled(x, p)
        return np.arctan2(-ps, xs)

    @classmethod
    def harmonic(cls, grid: PhaseSpaceGrid, m_omega: float = 1.0,
                 center=(0.0, 0.0)) -> "ActionAnglePair":
        tmp = cls(None, None, tuple(center), float(m_omega), 0.0)  # type: ignore[arg-type]
        x, p = grid.mesh()
        pi = PhaseSpaceFunction(grid, tmp.action(x, p))
        phi = PhaseSpaceFunction(grid, tmp.angle(x, p))
        res = _bracket_residual(pi, phi, _radius_mask(grid, center, 3))
        return cls(pi, phi, tuple(center), float(m_omega), res)


def _radius_mask(grid, center, cells):
    x, p = grid.mesh()
    rx = (x - center[0]) / grid.dX
    rp = (p - center[1]) / grid.dP
    return np.hypot(rx, rp) > cells


def angle_poisson_bracket(phi: PhaseSpaceFunction, pi: PhaseSpaceFunction) -> np.ndarray:
    """{Phi, Pi} by second-order differences, unwrapping Phi through exp(i Phi)."""
    g = phi.grid
    e = np.exp(1j * phi.values)
    ex, ep = np.gradient(e, g.dX, g.dP)
    phix = np.imag(np.conj(e) * ex)
    phip = np.imag(np.conj(e) * ep)
    pix, pip = np.gradient(np.real(pi.values), g.dX, g.dP)
    return phix * pip - phip * pix


def _bracket_residual(pi, phi, region):
    br = angle_poisson_bracket(phi, pi)
    inner = np.zeros_like(region)
    inner[2:-2, 2:-2] = True
    sel = region & inner
    return float(np.max(np.abs(br[sel] - 1))) if sel.any() else float("nan")


def _is_annulus(mask, center_idx):
    """True when the complement has a bounded hole containing ``center_idx``."""
    comp, _ = label_components(~mask)
    lab = comp[center_idx]
    if lab == 0:
        return False
    border = np.concatenate([comp[0], comp[-1], comp[:, 0], comp[:, -1]])
    return lab not in set(border.tolist())


def action_angle_from_projector(domains: Sequence[Domain],
                                grid: PhaseSpaceGrid | None = None) -> ActionAnglePair:
    """Action-angle pair for a family of nested annuli (innermost may be a disk).

    The centre and the oscillator scale m*omega are estimated from the union
    of the domains (centroid and ratio of second moments).  The bracket
    residual is evaluated on the annular cells more than 3 cells from the
    centre.
    """
    if not domains:
        raise ContractViolation("empty domain family")
    grid = grid or domains[0].grid
    x, p = grid.mesh()
    union = np.zeros_like(domains[0].mask)
    for d in domains:
        if d.mask.shape != union.shape:
            raise GridMismatchError("domains do not share a grid")
        union |= d.mask
    xc = float(x[union].mean())
    pc = float(p[union].mean())
    ci = (int(round((xc - grid.x_min) / grid.dX)), int(round((pc - grid.p_min) / grid.dP)))
    ci = (min(max(ci[0], 0), grid.n_x - 1), min(max(ci[1], 0), grid.n_p - 1))
    for k, d in enumerate(domains):
        if not d.connected:
            raise UnsupportedGeometryError(f"domain {k} is not connected")
        if d.mask[ci]:
            continue   # disk around the centre
        if not _is_annulus(d.mask, ci):
            raise UnsupportedGeometryError(f"domain {k} is not an annulus around the centre")
    vx = float(np.mean((x[union] - xc) ** 2))
    vp = float(np.mean((p[union] - pc) ** 2))
    scale = np.sqrt(vp / vx)
    pair = ActionAnglePair.harmonic(grid, scale, (xc, pc))
    region = _radius_mask(grid, (xc, pc), 3) & union
    res = _bracket_residual(pair.Pi, pair.Phi, region)
    actions = tuple(float(pair.Pi.values[d.mask].mean()) for d in domains)
    return ActionAnglePair(pair.Pi, pair.Phi, (xc, pc), scale, res, actions)


# ------------------------------------------------------------- transport


@dataclass
class SymbolSeries:
    """Time-dependent real symbol Re sum_b c_b(t) basis_b, linear in t between samples."""

    times: np.ndarray
    basis: list
    coefficients: np.ndarray    # (T, B)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.coefficients = np.asarray(self.coefficients, dtype=complex)
        if self.coefficients.shape != (self.times.size, len(self.basis)):
            raise ContractViolation("coefficient table does not match times x basis")
        grids = [b.grid for b in self.basis]
        if any(not grids[0].same_as(g) for g in grids[1:]):
            raise GridMismatchError("basis symbols use different grids")

    @property
    def grid(self) -> PhaseSpaceGrid:
        return self.basis[0].grid

    @classmethod
    def from_snapshots(cls, times, symbols) -> "SymbolSeries":
        return cls(times, list(symbols), np.eye(len(symbols)))

    @classmethod
    def constant(cls, symbol: PhaseSpaceFunction, t_end: float) -> "SymbolSeries":
        return cls(np.array([0.0, t_end]), [symbol], np.ones((2, 1)))

    def coefficients_at(self, t: float) -> np.ndarray:
        t = min(max(t, self.times[0]), self.times[-1])
        k = int(np.clip(np.searchsorted(self.times, t) - 1, 0, self.times.size - 2)) \
            if self.times.size > 1 else 0
        if self.times.size == 1:
            return self.coefficients[0]
        w = (t - self.times[k]) / (self.times[k + 1] - self.times[k])
        return (1 - w) * self.coefficients[k] + w * self.coefficients[k + 1]

    def symbol_at(self, t: float) -> PhaseSpaceFunction:
        c = self.coefficients_at(t)
        vals = np.real(sum(ci * b.values for ci, b in zip(c, self.basis)))
        return PhaseSpaceFunction(self.grid, vals)


@dataclass(frozen=True)
class Trajectory:
    times: np.ndarray
    Pi_bar: np.ndarray
    Phi_bar: np.ndarray
    positions: np.ndarray = field(repr=False)   # (T, N, 2)
    weights: np.ndarray = field(repr=False)


def evolve_phase_space(gen: SymbolSeries, pair: ActionAnglePair, times, init: Box,
                       rho_w: PhaseSpaceFunction | None = None,
                       max_step: float | None = None, method: str = "auto",
                       interpolation: str = "cubic") -> Trajectory:
    """Transport the grid points of ``init`` along dx/dt = d aleph/dp, dp/dt = -d aleph/dx.

    Classical RK4; the symbol gradients are sampled with tensor cubic
    Lagrange interpolation (``interpolation="linear"`` selects bilinear).
    Box averages follow the transported points with their initial weights
    rho_W dA / (sx sp) (uniform density when ``rho_w`` is None).
    """
    grid = gen.grid
    times = np.asarray(times, dtype=float)
    m = init.mask(grid)
    x, p = grid.mesh()
    pts = np.column_stack([x[m], p[m]])
    sx, sp = init.widths
    if rho_w is None:
        w = np.full(len(pts), grid.cell_area / (sx * sp))
    else:
        w = np.real(rho_w.values[m]) * grid.cell_area / (sx * sp)

    stack = []   # per basis: re dx, im dx, re dp, im dp
    for b in gen.basis:
        gx, gp = gradient(b, method)
        stack += [np.real(gx), np.imag(gx), np.real(gp), np.imag(gp)]
    stack = np.array(stack)
    args = (grid.x_min, grid.dX, grid.p_min, grid.dP)
    if interpolation == "cubic":
        def sample(q):
            return cubic_sample(stack, *args, q[:, 0], q[:, 1])
    elif interpolation == "linear":
        def sample(q):
            cols = [bilinear_sample(f, *args, q[:, 0], q[:, 1]) for f in stack]
            return np.array([c[0] for c in cols]), cols[0][1]
    else:
        raise ValueError(f"unknown interpolation {interpolation!r}")

    def velocity(t, q):
        c = gen.coefficients_at(t)
        vals, inside = sample(q)
        if not inside.all():
            raise TruncationError("trajectory left the grid", exit_time=t)
        vals = vals.reshape(len(c), 4, -1)
        vx = np.einsum("b,bn->n", c.real, vals[:, 2]) - np.einsum("b,bn->n", c.imag, vals[:, 3])
        vp = -np.einsum("b,bn->n", c.real, vals[:, 0]) + np.einsum("b,bn->n", c.imag, vals[:, 1])
        return np.column_stack([vx, vp])

    if max_step:
        h = float(max_step)
    else:
        # RK4 step from a Lipschitz bound of the velocity field
        hess = max(float(np.max(np.abs(np.gradient(f, grid.dX, grid.dP)))) for f in stack)
        cmax = float(np.max(np.sum(np.abs(gen.coefficients), axis=1)))
        h = float(np.min(np.diff(times))) if times.size > 1 else 1.0
        if hess * cmax > 0:
            h = min(h, 0.1 / (hess * cmax))
    out = np.empty((times.size, len(pts), 2))
    out[0] = pts
    q = pts.copy()
    # angles are unwrapped along the internal steps, not the output samples
    ang = np.empty((times.size, len(pts)))
    phi = pair.angle(q[:, 0], q[:, 1])
    ang[0] = phi
    for k in range(1, times.size):
        t0, t1 = times[k - 1], times[k]
        n = max(1, int(np.ceil((t1 - t0) / h)))
        dt = (t1 - t0) / n
        t = t0
        for _ in range(n):
            k1 = velocity(t, q)
            k2 = velocity(t + dt / 2, q + dt / 2 * k1)
            k3 = velocity(t + dt / 2, q + dt / 2 * k2)
            k4 = velocity(t + dt, q + dt * k3)
            q = q + dt / 6 * (k1 + 2 * k2 + 2 * k3 + k4)
            t += dt
            new_phi = pair.angle(q[:, 0], q[:, 1])
            phi = phi + np.angle(np.exp(1j * (new_phi - phi)))
        out[k] = q
        ang[k] = phi
    act = pair.action(out[..., 0], out[..., 1])
    return Trajectory(times, act @ w, ang @ w, out, w)


@dataclass(frozen=True)
class TrajectoryReport:
    times: np.ndarray
    Pi_bar: np.ndarray
    Phi_bar: np.ndarray
    flags: np.ndarray
    equilibrium: bool
    equilibrium_time: float | None
    flag_time: float | None
    thresholds: tuple[float, float]


def trajectory_surfaces(times, Pi_bar, Phi_bar, t_r: float, rel_threshold: float = 1e-3,
                        window: float | None = None) -> TrajectoryReport:
    """Curve (t, Pi_bar, Phi_bar) and equilibrium detection.

    Both |dPi_bar/dt| and |dPhi_bar/dt| must stay below ``rel_threshold``
    times their maxima over the first window for a whole window
    (default 0.5 t_R).  ``equilibrium_time`` is the start of the first such
    window and ``flag_time`` its end, when the flag can be raised.
    """
    t = np.asarray(times, dtype=float)
    pi = np.asarray(Pi_bar, dtype=float)
    phi = np.asarray(Phi_bar, dtype=float)
    if not (t.shape == pi.shape == phi.shape):
        raise ContractViolation("series must share the time grid")
    window = 0.5 * t_r if window is None else window
    dpi = np.abs(np.gradient(pi, t))
    dphi = np.abs(np.gradient(phi, t))
    head = t <= t[0] + window
    thr = (rel_threshold * dpi[head].max(), rel_threshold * dphi[head].max())
    quiet = (dpi <= thr[0]) & (dphi <= thr[1])
    flags = np.zeros(t.size, dtype=bool)
    eq_time = flag_time = None
    # first index k whose forward window is entirely quiet
    bad = np.flatnonzero(~quiet)
    for k in range(t.size):
        end = t[k] + window
        if end > t[-1]:
            break
        if not quiet[k]:
            continue
        nxt = bad[bad > k]
        if nxt.size == 0 or t[nxt[0]] > end:
            eq_time, flag_time = float(t[k]), float(end)
            flags = t >= end
            break
    return TrajectoryReport(t, pi, phi, flags, eq_time is not None, eq_time, flag_time, thr)


__all__ = [
    "Domain", "Box", "ActionAnglePair", "PartitionReport", "SymbolSeries", "Trajectory",
    "TrajectoryReport", "projector_symbol", "band_projector", "characteristic_domain",
    "check_partition", "box_average", "action_angle_from_projector", "angle_poisson_bracket",
    "evolve_phase_space", "trajectory_surfaces",
]
