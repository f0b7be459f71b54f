"""Decay-mode decomposition, effective width, privileged state and moving basis.

An expectation value is written as

    <O>(t) = eq + sum_i A_i cos(nu_i t + phi_i) exp(-gamma_i t / hbar)

with widths taken from a pole catalogue.  For fixed widths and frequencies the
fit is linear (a cosine and a sine column per mode); frequencies can be
refined by variable projection when the catalogue seeds are off.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.linalg import schur
from scipy.optimize import least_squares, linear_sum_assignment

from .errors import (
    ContractViolation,
    DegenerateWeightsError,
    DimensionMismatch,
    FitError,
    NonExhaustiveObservablesError,
)
from .friedrichs import DensityMatrix, _as_matrix
from .poles import PoleCatalogue


class FitQualityWarning(UserWarning):
    pass


@dataclass(frozen=True)
class Mode:
    amplitude: float
    phase: float
    freq: float
    gamma: float

    @property
    def initial(self) -> float:
        """a_i(0) = A cos(phi)."""
        return self.amplitude * np.cos(self.phase)

    def coefficient(self, t):
        return self.amplitude * np.cos(self.freq * np.asarray(t, dtype=float) + self.phase)

    def value(self, t, hbar: float = 1.0):
        t = np.asarray(t, dtype=float)
        return self.coefficient(t) * np.exp(-self.gamma * t / hbar)


@dataclass(frozen=True)
class ModeDecomposition:
    equilibrium: float
    modes: tuple[Mode, ...]
    hbar: float = 1.0
    residual_rms: float = 0.0
    tolerance: float = 1e-3
    warning: str | None = None

    @property
    def gammas(self) -> np.ndarray:
        return np.array([m.gamma for m in self.modes])

    @property
    def initial_weights(self) -> np.ndarray:
        return np.array([m.initial for m in self.modes])

    def evaluate(self, t, n_modes: int | None = None):
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.equilibrium, dtype=float)
        for m in self.modes[: len(self.modes) if n_modes is None else n_modes]:
            out = out + m.value(t, self.hbar)
        return out


# ------------------------------------------------------------------ fitting


def _design(t, gammas, freqs, hbar):
    cols = [np.ones_like(t)]
    layout = []
    for g, nu in zip(gammas, freqs):
        env = np.exp(-g * t / hbar)
        if nu == 0:
            cols.append(env)
            layout.append(1)
        else:
            cols.append(env * np.cos(nu * t))
            cols.append(env * np.sin(nu * t))
            layout.append(2)
    return np.column_stack(cols), layout


def _solve(t, y, gammas, freqs, hbar):
    a, layout = _design(t, gammas, freqs, hbar)
    coef, *_ = np.linalg.lstsq(a, y, rcond=None)
    return coef, layout, y - a @ coef


def fit_modes(times, values, catalogue: PoleCatalogue, hbar: float = 1.0,
              tol: float = 1e-3, refine: bool = True) -> ModeDecomposition:
    """Fit equilibrium value and mode amplitudes with widths fixed by ``catalogue``.

    Frequencies start at |omega_i|/hbar.  If the residual RMS exceeds
    ``tol`` times the series range and ``refine`` is set, the non-zero
    frequencies are adjusted by nonlinear least squares.  A residual still
    above tolerance is reported in ``warning`` (and as a FitQualityWarning).
    """
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.shape != y.shape or t.ndim != 1:
        raise FitError("times and values must be 1-D arrays of equal length")
    if len(catalogue) == 0:
        raise FitError("empty catalogue")
    gammas = catalogue.gammas.astype(float)
    freqs = np.abs(catalogue.omegas) / hbar
    n_par = 1 + sum(1 if f == 0 else 2 for f in freqs)
    if t.size < n_par + 1:
        raise FitError(f"{t.size} samples cannot determine {n_par} parameters")

    notes = []
    span = t[-1] - t[0]
    osc = freqs[freqs > 0]
    t_r = hbar / gammas.min() if gammas.min() > 0 else np.inf
    if not ((osc.size and span * osc.min() / (2 * np.pi) >= 3) or span >= 5 * t_r):
        notes.append("series shorter than 3 slow periods and 5 relaxation times")

    coef, layout, res = _solve(t, y, gammas, freqs, hbar)
    scale = max(float(np.ptp(y)), 1e-300)
    rms = float(np.sqrt(np.mean(res ** 2)))
    movable = freqs > 0
    if refine and rms > tol * scale and movable.any():
        def resid(nu_free):
            nu = freqs.copy()
            nu[movable] = nu_free
            return _solve(t, y, gammas, nu, hbar)[2]

        sol = least_squares(resid, freqs[movable], x_scale="jac", xtol=1e-14, ftol=1e-14)
        trial = freqs.copy()
        trial[movable] = np.abs(sol.x)
        c2, l2, r2 = _solve(t, y, gammas, trial, hbar)
        rms2 = float(np.sqrt(np.mean(r2 ** 2)))
        if rms2 < rms:
            freqs, coef, layout, rms = trial, c2, l2, rms2

    modes = []
    k = 1
    for g, nu, width in zip(gammas, freqs, layout):
        if width == 1:
            c = coef[k]
            modes.append(Mode(abs(c), 0.0 if c >= 0 else np.pi, 0.0, float(g)))
        else:
            # A cos(nu t + phi) = A cos(phi) cos(nu t) - A sin(phi) sin(nu t)
            cc, cs = coef[k], coef[k + 1]
            modes.append(Mode(float(np.hypot(cc, cs)), float(np.arctan2(-cs, cc)), float(nu),
                              float(g)))
        k += width

    if rms > tol * scale and np.ptp(y) > 0:
        notes.append(f"residual RMS {rms:.3e} above {tol:g} of range")
        warnings.warn(notes[-1], FitQualityWarning, stacklevel=2)
    return ModeDecomposition(float(coef[0]), tuple(modes), hbar, rms, tol,
                             "; ".join(notes) or None)


# ---------------------------------------------------------- effective mode


@dataclass(frozen=True)
class EffectiveMode:
    gamma_eff: float
    slow_count: int
    slow: tuple[int, ...]
    fast: tuple[int, ...]


def effective_gamma(source, gammas=None) -> EffectiveMode:
    """Weighted width sum a_i(0) gamma_i / sum a_i(0) and the slow/fast split.

    ``source`` is a ModeDecomposition, a ModeSet (operator-norm weights) or
    an array of weights (then ``gammas`` is required).  Slow means
    gamma_i <= gamma_eff.
    """
    if isinstance(source, ModeDecomposition):
        w, g = source.initial_weights, source.gammas
    elif isinstance(source, ModeSet):
        w, g = source.operator_weights(), source.gammas
    else:
        if gammas is None:
            raise ContractViolation("gammas are required with raw weights")
        w, g = np.asarray(source, dtype=float), np.asarray(gammas, dtype=float)
    total = float(np.sum(w))
    if w.size == 0 or abs(total) <= 1e-300 or abs(total) <= 1e-14 * np.sum(np.abs(w)):
        raise DegenerateWeightsError("initial mode weights sum to zero")
    geff = float(np.sum(w * g) / total)
    cut = geff * (1 + 1e-12) + 1e-300
    slow = tuple(int(i) for i in np.flatnonzero(g <= cut))
    fast = tuple(int(i) for i in np.flatnonzero(g > cut))
    return EffectiveMode(geff, len(slow), slow, fast)


def decoherence_time(eff: EffectiveMode | float, hbar: float = 1.0) -> float:
    g = eff.gamma_eff if isinstance(eff, EffectiveMode) else float(eff)
    if not g > 0:
        raise ContractViolation("gamma_eff must be positive")
    return hbar / g


# ------------------------------------------------------------- observables


def pauli_basis() -> list[np.ndarray]:
    return [np.eye(2, dtype=complex),
            np.array([[0, 1], [1, 0]], dtype=complex),
            np.array([[0, -1j], [1j, 0]], dtype=complex),
            np.array([[1, 0], [0, -1]], dtype=complex)]


def hermitian_basis(d: int) -> list[np.ndarray]:
    """d^2 Hermitian matrices orthonormal under tr(AB)."""
    out = []
    for i in range(d):
        e = np.zeros((d, d), dtype=complex)
        e[i, i] = 1
        out.append(e)
    for i in range(d):
        for j in range(i + 1, d):
            s = np.zeros((d, d), dtype=complex)
            s[i, j] = s[j, i] = 1 / np.sqrt(2)
            a = np.zeros((d, d), dtype=complex)
            a[i, j], a[j, i] = -1j / np.sqrt(2), 1j / np.sqrt(2)
            out.extend([s, a])
    return out


def _dual_basis(observables):
    ops = [np.asarray(o, dtype=complex) for o in observables]
    d = ops[0].shape[0]
    vec = np.array([o.ravel() for o in ops])
    real = np.hstack([vec.real, vec.imag])
    if len(ops) < d * d or np.linalg.matrix_rank(real, tol=1e-10) < d * d:
        raise NonExhaustiveObservablesError(
            f"{len(ops)} observables do not span the {d * d}-dimensional operator space")
    gram = np.real(vec.conj() @ vec.T)
    ginv = np.linalg.pinv(gram)
    return [sum(ginv[k, l] * ops[l] for l in range(len(ops))) for k in range(len(ops))]


@dataclass
class ModeSet:
    """Mode decompositions of an exhaustive observable set, aligned by mode index."""

    observables: list
    decomps: list
    duals: list = field(init=False, repr=False)

    def __post_init__(self):
        if len(self.observables) != len(self.decomps):
            raise ContractViolation("one decomposition per observable is required")
        counts = {len(d.modes) for d in self.decomps}
        if len(counts) != 1:
            raise ContractViolation("decompositions must share the mode catalogue")
        self.duals = _dual_basis(self.observables)

    @property
    def hbar(self) -> float:
        return self.decomps[0].hbar

    @property
    def gammas(self) -> np.ndarray:
        return self.decomps[0].gammas

    @property
    def n_modes(self) -> int:
        return len(self.decomps[0].modes)

    def equilibrium_state(self) -> np.ndarray:
        return sum(d.equilibrium * dual for d, dual in zip(self.decomps, self.duals))

    def mode_operator(self, i: int, t: float = 0.0) -> np.ndarray:
        """Operator amplitude of mode i at time t (without the decay factor)."""
        return sum(float(d.modes[i].coefficient(t)) * dual
                   for d, dual in zip(self.decomps, self.duals))

    def operator_weights(self) -> np.ndarray:
        """Frobenius norms of the mode operators at t = 0."""
        return np.array([np.linalg.norm(self.mode_operator(i)) for i in range(self.n_modes)])

    def raw_state(self, t: float, n_modes: int | None = None) -> np.ndarray:
        vals = [d.evaluate(t, n_modes) for d in self.decomps]
        rho = sum(float(v) * dual for v, dual in zip(vals, self.duals))
        return 0.5 * (rho + rho.conj().T)


def fit_observables(times, states: Sequence, observables: Sequence, catalogue: PoleCatalogue,
                    hbar: float = 1.0, tol: float = 1e-3, refine: bool = True) -> ModeSet:
    """Fit every <O_k>(t) of a state series against one catalogue."""
    mats = np.array([_as_matrix(r) for r in states])
    decomps = []
    for o in observables:
        series = np.real(np.einsum("tij,ji->t", mats, np.asarray(o)))
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", FitQualityWarning)
            decomps.append(fit_modes(times, series, catalogue, hbar, tol, refine))
    return ModeSet(list(observables), decomps)


# -------------------------------------------------------- privileged state


@dataclass(frozen=True)
class PrivilegedState:
    rho: DensityMatrix
    repair_distance: float
    raw: np.ndarray


def repair_state(raw) -> tuple[np.ndarray, float]:
    """Clip negative eigenvalues and renormalize; returns (state, trace-norm change)."""
    h = 0.5 * (np.asarray(raw) + np.asarray(raw).conj().T)
    w, v = np.linalg.eigh(h)
    if w.min() >= 0 and abs(w.sum() - 1) < 1e-12:
        return h, 0.0
    wc = np.clip(w, 0.0, None)
    if wc.sum() <= 0:
        raise ContractViolation("state has no positive part")
    wc /= wc.sum()
    fixed = (v * wc) @ v.conj().T
    fixed = 0.5 * (fixed + fixed.conj().T)
    return fixed, trace_distance(h, fixed)


def privileged_state(modeset: ModeSet, M: int, t: float) -> PrivilegedState:
    """Equilibrium plus the M slowest modes, mapped back to a state."""
    if not 0 <= M <= modeset.n_modes:
        raise ContractViolation(f"M={M} outside [0, {modeset.n_modes}]")
    raw = modeset.raw_state(t, M)
    raw = raw / np.trace(raw).real
    fixed, dist = repair_state(raw)
    return PrivilegedState(DensityMatrix(fixed, validate=False), dist, raw)


def trace_distance(a, b) -> float:
    """Trace norm ||a - b||_1 (sum of absolute eigenvalues)."""
    d = _as_matrix(a) - _as_matrix(b)
    return float(np.sum(np.abs(np.linalg.eigvalsh(0.5 * (d + d.conj().T)))))


# ----------------------------------------------------------- moving basis


@dataclass(frozen=True)
class MovingPreferredBasis:
    times: np.ndarray
    frames: np.ndarray        # (T, d, d), columns are |i(t)>
    weights: np.ndarray       # (T, d)
    degenerate: np.ndarray    # (T,) bool

    def projector(self, i: int, k: int) -> np.ndarray:
        v = self.frames[k, :, i]
        return np.outer(v, v.conj())


def moving_preferred_basis(series: Sequence, times=None,
                           gap_tol: float = 1e-8) -> MovingPreferredBasis:
    """Eigenframes of each state, continued in time by overlap matching.

    Frames at t_0 are ordered by decreasing weight with each vector's
    largest component made real positive.  Later frames are permuted to
    maximize overlap with the previous one and rephased so that
    <i(t_k)|i(t_k+1)> is real and positive.
    """
    mats = [_as_matrix(r) for r in series]
    if not mats:
        raise ContractViolation("empty state series")
    times = np.arange(len(mats), dtype=float) if times is None else np.asarray(times, float)
    d = mats[0].shape[0]
    frames = np.empty((len(mats), d, d), dtype=complex)
    weights = np.empty((len(mats), d))
    degenerate = np.zeros(len(mats), dtype=bool)
    prev = None
    for k, rho in enumerate(mats):
        w, v = np.linalg.eigh(0.5 * (rho + rho.conj().T))
        v = v.astype(complex)
        w, v = w[::-1], v[:, ::-1]
        if d > 1 and np.min(np.diff(np.sort(w))) < gap_tol:
            degenerate[k] = True
        if prev is None:
            for i in range(d):
                j = np.argmax(np.abs(v[:, i]))
                v[:, i] *= np.exp(-1j * np.angle(v[j, i]))
        else:
            ov = prev.conj().T @ v
            rows, cols = linear_sum_assignment(-np.abs(ov))
            order = cols[np.argsort(rows)]
            v, w = v[:, order], w[order]
            diag = np.einsum("ij,ij->j", prev.conj(), v)
            v = v * np.exp(-1j * np.angle(diag))
        frames[k] = v
        weights[k] = np.clip(w, 0.0, 1.0)
        prev = v
    return MovingPreferredBasis(times, frames, weights, degenerate)


def _unitary_log(u: np.ndarray) -> np.ndarray:
    t, z = schur(u, output="complex")
    return (z * np.log(np.diag(t))) @ z.conj().T


@dataclass(frozen=True)
class GeneratorSeries:
    times: np.ndarray
    matrices: np.ndarray   # (T, d, d) Hermitian
    valid: np.ndarray      # (T,) bool


def effective_generator(mpb: MovingPreferredBasis, hbar: float = 1.0,
                        reference=None) -> GeneratorSeries:
    """aleph(t) = i hbar (dU/dt) U^dagger with U(t) = V(t) V(0)^dagger.

    Interior samples use the central log-step i hbar log(V_k+1 V_k-1^dag)/(2 dt),
    which is Hermitian by construction and second order; the end points are
    linearly extrapolated from the two nearest half-step values.

    The frame phases follow parallel transport, so aleph has no diagonal part
    in the moving basis and vanishes once the basis stops moving.  Passing a
    ``reference`` Hamiltonian fixes the phases dynamically instead: the
    diagonal of aleph in the moving basis is replaced by that of ``reference``.
    """
    v = mpb.frames
    t = mpb.times
    n = len(t)
    if n < 3:
        raise ContractViolation("need at least three frames")
    d = v.shape[1]
    out = np.zeros((n, d, d), dtype=complex)

    def step(a, b):
        return 1j * hbar * _unitary_log(v[b] @ v[a].conj().T) / (t[b] - t[a])

    for k in range(1, n - 1):
        out[k] = step(k - 1, k + 1)
    h01, h12 = step(0, 1), step(1, 2)
    out[0] = 1.5 * h01 - 0.5 * h12
    ha, hb = step(n - 2, n - 1), step(n - 3, n - 2)
    out[-1] = 1.5 * ha - 0.5 * hb
    out = 0.5 * (out + np.conj(np.swapaxes(out, 1, 2)))
    if reference is not None:
        h = np.asarray(reference, dtype=complex)
        if h.shape != (d, d):
            raise DimensionMismatch(f"reference must be {d}x{d}")
        for k in range(n):
            vk = v[k]
            diff = np.real(np.diag(vk.conj().T @ (h - out[k]) @ vk))
            out[k] += (vk * diff) @ vk.conj().T
    bad = mpb.degenerate.copy()
    valid = ~(bad | np.roll(bad, 1) | np.roll(bad, -1))
    out[~valid] = np.nan
    return GeneratorSeries(t, out, valid)


# --------------------------------------------------------------- entropy


def linear_entropy(rho) -> float:
    r = _as_matrix(rho)
    return float(np.real(np.trace(r) - np.trace(r @ r)))


def entropy_production(series: Sequence, dt: float) -> np.ndarray:
    """dS_lin/dt = -2 tr(rho drho/dt) on a uniform grid."""
    mats = np.array([_as_matrix(r) for r in series])
    if len(mats) < 3:
        raise ContractViolation("entropy production needs at least three samples")
    drho = np.gradient(mats, dt, axis=0, edge_order=2)
    return -2 * np.real(np.einsum("tij,tji->t", mats, drho))


__all__ = [
    "Mode", "ModeDecomposition", "EffectiveMode", "ModeSet", "MovingPreferredBasis",
    "GeneratorSeries", "PrivilegedState", "FitQualityWarning", "fit_modes",
    "fit_observables", "effective_gamma", "decoherence_time", "privileged_state",
    "repair_state", "moving_preferred_basis", "effective_generator", "linear_entropy",
    "entropy_production", "trace_distance", "pauli_basis", "hermitian_basis",
]
