"""Discretized oscillator-plus-bath model, exact evolution and reduced states.

The proper system is an oscillator of frequency ``omega`` coupled linearly
(rotating-wave form) to a band of bath oscillators.  Because the number of
excitations is conserved, the single-excitation sector is a
``(1 + N) x (1 + N)`` matrix and everything about one-quantum dynamics
follows from diagonalizing it once.  Coherent states evolve in closed form
under the same Hamiltonian, which is used for the two-lobe (cat) scenario.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import lgamma, log
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ConfigurationError,
    ContractViolation,
    DimensionMismatch,
    TruncationError,
)

HERMITIAN_TOL = 1e-12
TRACE_TOL = 1e-10
PSD_TOL = 1e-10


# ---------------------------------------------------------------- densities


@dataclass(frozen=True)
class SpectralDensity:
    """Bath spectral density J(w) = n(w)|lambda_w|^2 on ``[lower, upper]``.

    ``profile`` evaluates J on real frequencies inside the support and
    ``continuation`` gives its analytic extension to complex arguments
    (needed on the second sheet of the self-energy).
    """

    lower: float
    upper: float
    profile: Callable[[np.ndarray], np.ndarray]
    continuation: Callable[[complex], complex]
    name: str = "custom"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.upper > self.lower:
            raise ConfigurationError("spectral support must have upper > lower")

    @property
    def support(self) -> tuple[float, float]:
        return (self.lower, self.upper)

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def __call__(self, w):
        w = np.asarray(w, dtype=float)
        inside = (w >= self.lower) & (w <= self.upper)
        vals = np.where(inside, self.profile(np.where(inside, w, self.lower)), 0.0)
        if np.any(vals < 0):
            raise ContractViolation("spectral density must be non-negative")
        return vals if vals.ndim else float(vals)

    def continued(self, z: complex) -> complex:
        return complex(self.continuation(complex(z)))

    @property
    def is_zero(self) -> bool:
        return bool(self.params.get("zero", False))

    def discretize(self, n_modes: int) -> tuple[np.ndarray, np.ndarray]:
        """Midpoint grid of ``n_modes`` frequencies with couplings sqrt(J dw)."""
        if n_modes < 1:
            raise ConfigurationError("need at least one bath mode")
        dw = self.width / n_modes
        grid = self.lower + dw * (np.arange(n_modes) + 0.5)
        couplings = np.sqrt(self(grid) * dw)
        return grid, couplings

    # built-in shapes

    @classmethod
    def flat(cls, g: float, center: float, width: float) -> "SpectralDensity":
        """J = g^2 on [center - width/2, center + width/2]; continued as the constant."""
        j0 = float(g) ** 2
        return cls(
            center - width / 2,
            center + width / 2,
            lambda w: np.full_like(w, j0, dtype=float),
            lambda z: j0,
            name="flat",
            params={"g": float(g), "center": float(center), "width": float(width),
                    "zero": j0 == 0.0},
        )

    @classmethod
    def parabolic(cls, g: float, center: float, width: float) -> "SpectralDensity":
        """J = g^2 (1 - u^2) with u = 2(w - center)/width; continued as the same polynomial."""
        j0 = float(g) ** 2
        half = width / 2

        def poly(w):
            u = (w - center) / half
            return j0 * (1 - u * u)

        return cls(
            center - half,
            center + half,
            lambda w: np.clip(poly(w), 0.0, None),
            poly,
            name="parabolic",
            params={"g": float(g), "center": float(center), "width": float(width),
                    "zero": j0 == 0.0},
        )


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class FriedrichsConfig:
    omega: float
    bath_grid: np.ndarray
    couplings: np.ndarray
    hbar: float = 1.0
    mass: float = 1.0
    fock_cutoff: int = 32

    def __post_init__(self):
        grid = np.asarray(self.bath_grid, dtype=float).ravel()
        lam = np.asarray(self.couplings, dtype=float).ravel()
        object.__setattr__(self, "bath_grid", grid)
        object.__setattr__(self, "couplings", lam)
        if grid.shape != lam.shape:
            raise ConfigurationError(
                f"bath_grid has {grid.size} entries but couplings has {lam.size}")
        if grid.size > 1 and np.any(np.diff(grid) <= 0):
            raise ConfigurationError("bath_grid must be strictly increasing")
        if not self.hbar > 0:
            raise ConfigurationError("hbar must be positive")
        if not self.mass > 0:
            raise ConfigurationError("mass must be positive")
        if int(self.fock_cutoff) < 1:
            raise ConfigurationError("fock_cutoff must be >= 1")

    @classmethod
    def from_density(cls, density: SpectralDensity, omega: float, n_modes: int,
                     **kw) -> "FriedrichsConfig":
        grid, lam = density.discretize(n_modes)
        return cls(omega=omega, bath_grid=grid, couplings=lam, **kw)

    @property
    def n_bath(self) -> int:
        return int(self.bath_grid.size)

    @property
    def recurrence_time(self) -> float:
        """2 pi / spacing of the bath grid; decay statements hold only before this."""
        if self.n_bath < 2:
            return float("inf")
        return float(2 * np.pi / np.min(np.diff(self.bath_grid)))


def build_one_excitation_hamiltonian(cfg: FriedrichsConfig) -> np.ndarray:
    n = cfg.n_bath
    h = np.zeros((n + 1, n + 1))
    h[0, 0] = cfg.omega
    h[np.arange(1, n + 1), np.arange(1, n + 1)] = cfg.bath_grid
    h[0, 1:] = cfg.couplings
    h[1:, 0] = cfg.couplings
    return cfg.hbar * h


# --------------------------------------------------------------- evolution


class Propagator:
    """exp(-iHt/hbar) for a fixed Hermitian H through one eigendecomposition."""

    def __init__(self, h, hbar: float = 1.0):
        h = np.asarray(h)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ContractViolation("Hamiltonian must be square")
        scale = max(1.0, float(np.max(np.abs(h))))
        if np.max(np.abs(h - h.conj().T)) > 1e-12 * scale:
            raise ContractViolation("Hamiltonian is not Hermitian")
        self.hbar = float(hbar)
        self.energies, self.vectors = np.linalg.eigh(h)

    def evolve(self, psi0, times) -> np.ndarray:
        """States at each time, shape (len(times), dim)."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        c = self.vectors.conj().T @ np.asarray(psi0, dtype=complex)
        phases = np.exp(-1j * np.outer(t, self.energies) / self.hbar)
        return (phases * c) @ self.vectors.T

    def amplitude(self, index: int, times) -> np.ndarray:
        """<index| exp(-iHt/hbar) |index> for each time."""
        t = np.atleast_1d(np.asarray(times, dtype=float))
        w = np.abs(self.vectors[index]) ** 2
        return np.exp(-1j * np.outer(t, self.energies) / self.hbar) @ w


def survival_amplitude(h, t, hbar: float = 1.0):
    """<1_S| exp(-iHt/hbar) |1_S> for scalar or array ``t`` (t >= 0)."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ContractViolation("times must be non-negative")
    out = Propagator(h, hbar).amplitude(0, t_arr.ravel())
    return complex(out[0]) if t_arr.ndim == 0 else out.reshape(t_arr.shape)


# ---------------------------------------------------------- reduced states


class DensityMatrix:
    """Validated finite-dimensional state: Hermitian, unit trace, PSD."""

    __slots__ = ("entries",)

    def __init__(self, entries, validate: bool = True):
        a = np.array(entries, dtype=complex)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DimensionMismatch("density matrix must be square")
        if validate:
            if np.max(np.abs(a - a.conj().T), initial=0.0) > HERMITIAN_TOL:
                raise ContractViolation("density matrix is not Hermitian")
            if abs(np.trace(a) - 1) > TRACE_TOL:
                raise ContractViolation(f"trace {np.trace(a).real:.3e} != 1")
            if np.linalg.eigvalsh(a)[0] < -PSD_TOL:
                raise ContractViolation("density matrix has a negative eigenvalue")
        self.entries = a

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def __array__(self, dtype=None, copy=None):
        return self.entries if dtype is None else self.entries.astype(dtype)

    def expect(self, op) -> complex:
        return complex(np.trace(self.entries @ np.asarray(op)))

    def __repr__(self):
        return f"DensityMatrix(dim={self.dim})"


def _as_matrix(rho) -> np.ndarray:
    return rho.entries if isinstance(rho, DensityMatrix) else np.asarray(rho)


def reduced_density(full_state, system_dim: int, env_dim: int) -> DensityMatrix:
    """Partial trace over the environment of a pure vector or a density matrix.

    The tensor ordering is system (slow index) x environment (fast index).
    """
    a = np.asarray(full_state, dtype=complex)
    total = system_dim * env_dim
    if a.ndim == 1:
        if a.size != total:
            raise DimensionMismatch(f"state of size {a.size} != {system_dim}x{env_dim}")
        m = a.reshape(system_dim, env_dim)
        rho = m @ m.conj().T
    elif a.ndim == 2 and a.shape == (total, total):
        rho = np.trace(a.reshape(system_dim, env_dim, system_dim, env_dim), axis1=1, axis2=3)
    else:
        raise DimensionMismatch(f"cannot trace {a.shape} as {system_dim}x{env_dim}")
    rho = 0.5 * (rho + rho.conj().T)
    return DensityMatrix(rho)


# --------------------------------------------------------- coherent states


@dataclass(frozen=True)
class CoherentPairInit:
    x1: float
    x2: float
    a: complex = 1.0
    b: complex = 1.0

    @property
    def separation(self) -> float:
        return abs(self.x2 - self.x1)


ALPHA_CONVENTIONS = ("scaled", "standard")


def position_to_alpha(x: float, mass: float, omega: float, hbar: float,
                      convention: str = "scaled") -> float:
    """Coherent amplitude of a packet centred at ``x`` with zero momentum.

    ``scaled`` uses m w / sqrt(2 m hbar^2 w) * x, which carries an extra
    1/sqrt(hbar) relative to ``standard`` sqrt(m w / 2 hbar) * x.  The two
    coincide at hbar = 1.
    """
    if convention == "scaled":
        return mass * omega / np.sqrt(2 * mass * hbar ** 2 * omega) * x
    if convention == "standard":
        return np.sqrt(mass * omega / (2 * hbar)) * x
    raise ConfigurationError(f"unknown alpha convention {convention!r}")


def coherent_fock(alpha: complex, cutoff: int, tol: float = 1e-8) -> np.ndarray:
    """Fock coefficients e^{-|a|^2/2} a^n / sqrt(n!), n < cutoff."""
    n = np.arange(cutoff)
    alpha = complex(alpha)
    if alpha == 0:
        vec = np.zeros(cutoff, dtype=complex)
        vec[0] = 1.0
        return vec
    logmag = -abs(alpha) ** 2 / 2 + n * log(abs(alpha)) - 0.5 * np.array([lgamma(k + 1) for k in n])
    vec = np.exp(logmag) * np.exp(1j * np.angle(alpha) * n)
    deficit = 1.0 - float(np.sum(np.abs(vec) ** 2))
    if deficit > tol:
        raise TruncationError(
            f"Fock cutoff {cutoff} keeps norm 1 - {deficit:.3e} of |alpha={alpha:.3g}>",
            deficit=deficit)
    return vec


def coherent_pair_state(init: CoherentPairInit, cfg: FriedrichsConfig,
                        omega_eff: float | None = None,
                        convention: str = "scaled") -> np.ndarray:
    """Normalized a|alpha1> + b|alpha2> in the truncated Fock space of the system."""
    w = cfg.omega if omega_eff is None else omega_eff
    a1 = position_to_alpha(init.x1, cfg.mass, w, cfg.hbar, convention)
    a2 = position_to_alpha(init.x2, cfg.mass, w, cfg.hbar, convention)
    vec = (init.a * coherent_fock(a1, cfg.fock_cutoff)
           + init.b * coherent_fock(a2, cfg.fock_cutoff))
    norm = np.linalg.norm(vec)
    if norm == 0:
        raise ContractViolation("coherent pair amplitudes cancel")
    return vec / norm


def coherent_overlap(alpha: complex, beta: complex) -> complex:
    """<alpha|beta> for untruncated coherent states."""
    return complex(np.exp(-abs(alpha) ** 2 / 2 - abs(beta) ** 2 / 2 + np.conj(alpha) * beta))


@dataclass
class CoherentPairDynamics:
    """Closed-form reduced dynamics of a two-lobe state.

    Under the rotating-wave Hamiltonian a coherent product state stays a
    product: |alpha> x |0..0> -> |alpha u(t)> x |alpha v_k(t)>, with u the
    survival amplitude and v_k the bath amplitudes of the one-excitation
    problem.  The reduced state of a|alpha1> + b|alpha2> is therefore a
    mixture of moving coherent states weighted by bath overlaps.
    """

    cfg: FriedrichsConfig
    alphas: tuple[complex, complex]
    weights: tuple[complex, complex]

    @classmethod
    def from_init(cls, init: CoherentPairInit, cfg: FriedrichsConfig,
                  omega_eff: float | None = None, convention: str = "scaled"):
        w = cfg.omega if omega_eff is None else omega_eff
        a1 = position_to_alpha(init.x1, cfg.mass, w, cfg.hbar, convention)
        a2 = position_to_alpha(init.x2, cfg.mass, w, cfg.hbar, convention)
        ov = coherent_overlap(a1, a2)
        norm2 = abs(init.a) ** 2 + abs(init.b) ** 2 + 2 * (np.conj(init.a) * init.b * ov).real
        s = 1 / np.sqrt(norm2)
        return cls(cfg, (a1, a2), (init.a * s, init.b * s))

    def amplitudes(self, times) -> tuple[np.ndarray, np.ndarray]:
        """u(t) and the bath-norm squared 1 - |u|^2 (exact, by unitarity)."""
        h = build_one_excitation_hamiltonian(self.cfg)
        prop = Propagator(h, self.cfg.hbar)
        e0 = np.zeros(h.shape[0])
        e0[0] = 1.0
        states = prop.evolve(e0, times)
        u = states[:, 0]
        bath = np.sum(np.abs(states[:, 1:]) ** 2, axis=1)
        return u, bath

    def reduced_series(self, times) -> list[DensityMatrix]:
        u, bath = self.amplitudes(times)
        cut = self.cfg.fock_cutoff
        out = []
        for ut, bt in zip(u, bath):
            vecs = [coherent_fock(al * ut, cut) for al in self.alphas]
            rho = np.zeros((cut, cut), dtype=complex)
            for i in range(2):
                for j in range(2):
                    # <alpha_j v | alpha_i v> with |v|^2 = bt
                    env = np.exp(bt * (-abs(self.alphas[i]) ** 2 / 2 - abs(self.alphas[j]) ** 2 / 2
                                       + np.conj(self.alphas[j]) * self.alphas[i]))
                    rho += (self.weights[i] * np.conj(self.weights[j]) * env
                            * np.outer(vecs[i], vecs[j].conj()))
            rho = 0.5 * (rho + rho.conj().T)
            rho /= np.trace(rho).real
            out.append(DensityMatrix(rho))
        return out

    def cross_coefficient(self, times) -> np.ndarray:
        """|c_12(t)| / |c_12(0)|: the interference weight in the moving pair basis.

        This strips the changing norm of |alpha1 u><alpha2 u| and isolates the
        environment overlap, so its log-derivative is the decoherence rate.
        """
        u, bath = self.amplitudes(times)
        a1, a2 = self.alphas
        return np.exp(-abs(a1 - a2) ** 2 * bath / 2)


# ------------------------------------------------------ qubit reduction


def qubit_reduced_series(cfg: FriedrichsConfig, excited_population: float,
                         times) -> list[DensityMatrix]:
    """Reduced state of sqrt(1-s2)|0> + sqrt(s2)|1> (system) x |vac> (bath).

    The full state lives in the zero- and one-excitation sectors; it is
    written as a system (2) x environment (1 + N) vector and traced.
    """
    if not 0 <= excited_population <= 1:
        raise ContractViolation("excited population must lie in [0, 1]")
    c0 = np.sqrt(1 - excited_population)
    c1 = np.sqrt(excited_population)
    h = build_one_excitation_hamiltonian(cfg)
    prop = Propagator(h, cfg.hbar)
    e0 = np.zeros(h.shape[0])
    e0[0] = 1.0
    states = prop.evolve(e0, times)
    n_env = cfg.n_bath + 1
    out = []
    for s in states:
        full = np.zeros((2, n_env), dtype=complex)
        full[0, 0] = c0
        full[1, 0] = c1 * s[0]
        full[0, 1:] = c1 * s[1:]
        out.append(reduced_density(full.ravel(), 2, n_env))
    return out


# -------------------------------------------------------------- envelope


def offdiagonal_envelope(rho_series: Sequence, basis_pair) -> np.ndarray:
    """Frobenius norm of the off-diagonal block of each state.

    ``basis_pair`` holds two (not necessarily orthogonal) vectors; the state
    is written as sum c_ij |e_i><e_j| in that pair (least squares through the
    Gram matrix) and the norm of c_12|e_1><e_2| + h.c. is returned.  When
    ``basis_pair`` is callable it is called with the sample index to allow a
    moving pair.
    """
    if len(rho_series) == 0:
        raise ContractViolation("empty state series")
    out = np.empty(len(rho_series))
    for k, rho in enumerate(rho_series):
        e1, e2 = basis_pair(k) if callable(basis_pair) else basis_pair
        c = pair_coefficients(_as_matrix(rho), e1, e2)
        nd = c[0, 1] * np.outer(e1, np.conj(e2)) + c[1, 0] * np.outer(e2, np.conj(e1))
        out[k] = np.linalg.norm(nd)
    return out


def pair_coefficients(rho, e1, e2) -> np.ndarray:
    """Coefficients c with rho ~ sum_ij c_ij |e_i><e_j| (projection onto span)."""
    e = np.stack([np.asarray(e1), np.asarray(e2)], axis=1)
    gram = e.conj().T @ e
    ginv = np.linalg.pinv(gram)
    return ginv @ (e.conj().T @ np.asarray(rho) @ e) @ ginv


def fock_operators(cutoff: int) -> tuple[np.ndarray, np.ndarray]:
    """Truncated annihilation operator and number operator."""
    a = np.diag(np.sqrt(np.arange(1, cutoff)), 1).astype(complex)
    return a, np.diag(np.arange(cutoff)).astype(complex)


__all__ = [
    "SpectralDensity", "FriedrichsConfig", "DensityMatrix", "CoherentPairInit",
    "CoherentPairDynamics", "Propagator", "build_one_excitation_hamiltonian",
    "survival_amplitude", "reduced_density", "coherent_pair_state", "coherent_fock",
    "coherent_overlap", "position_to_alpha", "qubit_reduced_series",
    "offdiagonal_envelope", "pair_coefficients", "fock_operators",
]
