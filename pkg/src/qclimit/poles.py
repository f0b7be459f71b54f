"""Resonance poles of the continued resolvent and the relaxation time.

The self-energy is Sigma(z) = int J(w')/(z - w') dw' over the bath support.
Below the real axis the physical continuation (second sheet) is
Sigma_II(z) = Sigma_I(z) - 2 pi i J(z), with J continued analytically.
Poles are roots of z - omega - Sigma_II(z) in the lower half plane.

Units: ``J``, ``omega`` and the returned pole share one unit (frequency,
i.e. energy / hbar).  A mode with width ``gamma`` decays as exp(-gamma t/hbar)
when ``gamma`` is an energy; use :meth:`ComplexPole.scaled` to convert.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ContractViolation,
    ConvergenceError,
    NoRelaxationError,
    SingularEvaluationError,
)
from .friedrichs import SpectralDensity

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(16)


@dataclass(frozen=True)
class ComplexPole:
    omega: float
    gamma: float

    def __post_init__(self):
        if self.gamma < 0:
            raise ContractViolation("pole width gamma must be >= 0")

    @property
    def z(self) -> complex:
        return complex(self.omega, -self.gamma / 2)

    @classmethod
    def from_z(cls, z: complex) -> "ComplexPole":
        return cls(float(z.real), float(max(-2 * z.imag, 0.0)))

    def scaled(self, factor: float) -> "ComplexPole":
        """Same pole in units multiplied by ``factor`` (e.g. hbar for energies)."""
        return ComplexPole(self.omega * factor, self.gamma * factor)


@dataclass(frozen=True)
class PoleCatalogue:
    poles: tuple[ComplexPole, ...]
    ladder_base: ComplexPole | None = None
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        poles = tuple(self.poles)
        if not poles:
            raise ContractViolation("pole catalogue is empty")
        gammas = [p.gamma for p in poles]
        if any(b < a for a, b in zip(gammas, gammas[1:])):
            raise ContractViolation("poles must be sorted by gamma")
        object.__setattr__(self, "poles", poles)

    def __len__(self):
        return len(self.poles)

    def __iter__(self):
        return iter(self.poles)

    def __getitem__(self, i):
        return self.poles[i]

    @property
    def gammas(self) -> np.ndarray:
        return np.array([p.gamma for p in self.poles])

    @property
    def omegas(self) -> np.ndarray:
        return np.array([p.omega for p in self.poles])

    @classmethod
    def from_pairs(cls, pairs) -> "PoleCatalogue":
        """Build from (omega, gamma) pairs in any order."""
        poles = sorted((ComplexPole(float(w), float(g)) for w, g in pairs),
                       key=lambda p: (p.gamma, p.omega))
        return cls(tuple(poles))


# ------------------------------------------------------------- self energy


def _breakpoints(lo: float, hi: float, x: float, y: float) -> np.ndarray:
    pts = [lo, hi]
    if lo < x < hi:
        pts.append(x)
        h = max(abs(y), 1e-12 * (hi - lo))
        step = h
        while step < hi - lo:
            for s in (x - step, x + step):
                if lo < s < hi:
                    pts.append(s)
            step *= 4.0
    return np.unique(np.array(pts))


def _panel_rule(edges: np.ndarray, refine: int):
    """Gauss-Legendre nodes/weights on each panel split ``refine`` times."""
    if refine > 1:
        fine = [np.linspace(a, b, refine + 1)[:-1] for a, b in zip(edges[:-1], edges[1:])]
        edges = np.append(np.concatenate(fine), edges[-1])
    a = edges[:-1, None]
    b = edges[1:, None]
    nodes = 0.5 * (b - a) * _GL_NODES + 0.5 * (b + a)
    weights = 0.5 * (b - a) * _GL_WEIGHTS
    return nodes.ravel(), weights.ravel()


def _first_sheet(z: complex, J: SpectralDensity, refine: int) -> complex:
    lo, hi = J.support
    x, y = z.real, z.imag
    jx = float(J(x)) if lo <= x <= hi else 0.0
    # subtract the value at Re z so the remaining integrand is bounded
    sing = jx * (np.log(z - lo) - np.log(z - hi)) if jx else 0.0
    edges = _breakpoints(lo, hi, x, y)
    nodes, weights = _panel_rule(edges, refine)
    integrand = (J(nodes) - jx) / (z - nodes)
    return complex(sing + np.sum(weights * integrand))


def self_energy(z: complex, J: SpectralDensity, sheet: str = "first",
                refine: int | None = None, tol: float = 1e-13) -> complex:
    """Sigma(z) on the requested sheet.

    With ``refine=None`` the composite Gauss-Legendre rule doubles its panel
    count until successive values agree to ``tol`` (relative); an explicit
    ``refine`` fixes the number of sub-panels per breakpoint interval.
    """
    z = complex(z)
    lo, hi = J.support
    if sheet not in ("first", "second"):
        raise ValueError(f"sheet must be 'first' or 'second', not {sheet!r}")
    if J.is_zero:
        return 0j
    if sheet == "first" and z.imag == 0 and lo <= z.real <= hi:
        raise SingularEvaluationError(f"z={z} lies on the branch cut [{lo}, {hi}]")
    if refine is not None:
        val = _first_sheet(z, J, refine)
    else:
        r = 2
        val = _first_sheet(z, J, r)
        for _ in range(10):
            r *= 2
            new = _first_sheet(z, J, r)
            done = abs(new - val) <= tol * max(1.0, abs(new))
            val = new
            if done:
                break
    if sheet == "second":
        val -= 2j * np.pi * J.continued(z)
    return val


# -------------------------------------------------------------- pole search


def find_pole(J: SpectralDensity, omega: float, guess: complex | None = None,
              tol: float = 1e-10, max_iter: int = 100,
              refine: int | None = None) -> ComplexPole:
    """Newton search for the root of z - omega - Sigma_II(z).

    The default seed is the golden-rule estimate omega - i pi J(omega).
    """
    if J.is_zero:
        return ComplexPole(float(omega), 0.0)
    if guess is None:
        guess = complex(omega, -np.pi * float(J(omega)))

    def f(z):
        return z - omega - self_energy(z, J, "second", refine=refine)

    z = complex(guess)
    fz = f(z)
    for it in range(max_iter):
        if abs(fz) < tol:
            return ComplexPole.from_z(z)
        h = 1e-6 * max(abs(z), 1e-3)
        dfz = (f(z + h) - f(z - h)) / (2 * h)
        if dfz == 0:
            break
        step = -fz / dfz
        lam = 1.0
        while True:
            znew = z + lam * step
            fnew = f(znew)
            if abs(fnew) < abs(fz) or lam < 1e-6:
                break
            lam *= 0.5
        z, fz = znew, fnew
    if abs(fz) < tol:
        return ComplexPole.from_z(z)
    raise ConvergenceError(
        f"pole search did not converge (|F| = {abs(fz):.3e})", residual=abs(fz),
        iterations=max_iter)


def pole_ladder(z0: ComplexPole, n_max: int) -> PoleCatalogue:
    """Catalogue z_n = n z0 for n = 1..n_max."""
    if n_max < 1:
        raise ContractViolation("n_max must be >= 1")
    poles = tuple(ComplexPole(n * z0.omega, n * z0.gamma) for n in range(1, n_max + 1))
    return PoleCatalogue(poles, ladder_base=z0)


def expectation_catalogue(z0: ComplexPole, n_max: int) -> PoleCatalogue:
    """Frequencies and widths that appear in expectation values.

    Matrix elements between ladder levels n and m rotate at (n - m) omega0 and
    decay with (n + m) gamma0 / 2.  Entries are unique, sorted by width.
    """
    pairs = set()
    for n in range(n_max + 1):
        for m in range(n + 1):
            if n + m == 0:
                continue
            pairs.add((round((n - m) * z0.omega, 14), round((n + m) * z0.gamma / 2, 14)))
    cat = PoleCatalogue.from_pairs(pairs)
    return PoleCatalogue(cat.poles, ladder_base=None, meta={"ladder_base": z0, "n_max": n_max})


def relaxation_time(catalogue: PoleCatalogue, hbar: float = 1.0) -> float:
    g = float(np.min(catalogue.gammas))
    if g <= 0:
        raise NoRelaxationError("minimum pole width is zero; no relaxation")
    return hbar / g


# ----------------------------------------------------------- late-time flag


@dataclass(frozen=True)
class KhalfinReport:
    flagged: np.ndarray
    first_time: float | None
    local_rate: np.ndarray


def detect_nonexponential(times, survival_prob, gamma: float, hbar: float = 1.0,
                          tolerance: float = 0.3, start: float = 0.0) -> KhalfinReport:
    """Flag samples where d ln|A|^2/dt deviates from -gamma/hbar by > tolerance.

    Samples before ``start`` (for instance the short-time quadratic region)
    are never flagged.
    """
    t = np.asarray(times, dtype=float)
    p = np.clip(np.asarray(survival_prob, dtype=float), 1e-300, None)
    rate = np.gradient(np.log(p), t)
    expected = -gamma / hbar
    flagged = (np.abs(rate - expected) > tolerance * abs(expected)) & (t >= start)
    first = float(t[np.argmax(flagged)]) if flagged.any() else None
    return KhalfinReport(flagged, first, rate)


__all__ = [
    "ComplexPole", "PoleCatalogue", "self_energy", "find_pole", "pole_ladder",
    "expectation_catalogue", "relaxation_time", "detect_nonexponential", "KhalfinReport",
]
