"""Weyl-Wigner-Moyal numerics for one degree of freedom.

Lattice convention
------------------
Operators are matrices on a position lattice x_k = x0 + k dx (k < n, n even)
in the orthonormal site basis.  Their Weyl symbols live on

* rows X_s = x0 + s dx/2, s = 0 .. 2n-1 (midpoints (x_k + x_l)/2), and
* columns p_j = (j - n/2) pi hbar / (n dx), j < n (half of the lattice band).

The forward map is

    symb(A)(X_s, p_j) = 2 sum_{k+l=s} A_kl exp(-i p_j (k-l) dx / hbar)

and its exact left inverse is weyl_quantize.  Symbols of Hermitian operators
are real, tr(AB) = (1/2 pi hbar) int int symb(A) symb(B) holds exactly, and
weyl_quantize(1) is the identity of the band-limited subspace (states whose
momenta lie inside the half band).  State symbols carry the extra
1/(2 pi hbar) so that they integrate to one.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Callable

import numpy as np

from .errors import (
    BoundaryMassError,
    ContractViolation,
    DimensionMismatch,
    GridMismatchError,
    ResolutionError,
    SmoothnessError,
)


# -------------------------------------------------------------------- grids


@dataclass(frozen=True)
class PhaseSpaceGrid:
    """Uniform (x, p) grid; endpoints inclusive."""

    x_min: float
    x_max: float
    p_min: float
    p_max: float
    n_x: int
    n_p: int
    hbar: float

    def __post_init__(self):
        if self.n_x < 16 or self.n_p < 16:
            raise ContractViolation("grids need at least 16 points per axis")
        if not self.hbar > 0:
            raise ContractViolation("hbar must be positive")
        if not (self.x_max > self.x_min and self.p_max > self.p_min):
            raise ContractViolation("grid extents must be increasing")

    @classmethod
    def for_lattice(cls, x0: float, dx: float, n: int, hbar: float) -> "PhaseSpaceGrid":
        """Symbol grid matching the position lattice x0 + k dx, k < n."""
        if n % 2:
            raise ContractViolation("lattice size must be even")
        dp = np.pi * hbar / (n * dx)
        return cls(x0, x0 + (2 * n - 1) * dx / 2, -(n // 2) * dp, (n // 2 - 1) * dp,
                   2 * n, n, hbar)

    @classmethod
    def centered(cls, n: int, x_extent: float, hbar: float) -> "PhaseSpaceGrid":
        """Lattice of n sites spread symmetrically over [-x_extent, x_extent]."""
        dx = 2 * x_extent / (n - 1)
        return cls.for_lattice(-x_extent, dx, n, hbar)

    @classmethod
    def covering(cls, x_extent: float, p_extent: float, hbar: float,
                 min_n: int = 16) -> "PhaseSpaceGrid":
        """Smallest power-of-two lattice whose symbol grid covers both extents."""
        n = min_n
        while True:
            g = cls.centered(n, x_extent, hbar)
            if g.p_max >= p_extent:
                return g
            n *= 2

    # geometry

    @property
    def dX(self) -> float:
        return (self.x_max - self.x_min) / (self.n_x - 1)

    @property
    def dP(self) -> float:
        return (self.p_max - self.p_min) / (self.n_p - 1)

    @property
    def cell_area(self) -> float:
        return self.dX * self.dP

    @property
    def xs(self) -> np.ndarray:
        return self.x_min + self.dX * np.arange(self.n_x)

    @property
    def ps(self) -> np.ndarray:
        return self.p_min + self.dP * np.arange(self.n_p)

    def mesh(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.xs, self.ps, indexing="ij")

    @property
    def is_lattice(self) -> bool:
        if self.n_x != 2 * self.n_p:
            return False
        dp = np.pi * self.hbar / (self.n_p * 2 * self.dX)
        return abs(self.dP - dp) <= 1e-9 * dp and abs(self.p_min + (self.n_p // 2) * dp) <= 1e-9 * dp * self.n_p

    @property
    def lattice_size(self) -> int:
        return self.n_p

    @property
    def dx(self) -> float:
        """Position-lattice spacing (twice the row spacing)."""
        return 2 * self.dX

    @property
    def positions(self) -> np.ndarray:
        return self.x_min + self.dx * np.arange(self.n_p)

    def sample(self, fn: Callable, kind: str = "operator") -> "PhaseSpaceFunction":
        x, p = self.mesh()
        return PhaseSpaceFunction(self, np.asarray(fn(x, p)) * np.ones_like(x), kind)

    def with_hbar(self, hbar: float) -> "PhaseSpaceGrid":
        return PhaseSpaceGrid(self.x_min, self.x_max, self.p_min, self.p_max,
                              self.n_x, self.n_p, hbar)

    def same_as(self, other: "PhaseSpaceGrid") -> bool:
        a = np.array([self.x_min, self.x_max, self.p_min, self.p_max, self.hbar])
        b = np.array([other.x_min, other.x_max, other.p_min, other.p_max, other.hbar])
        return (self.n_x, self.n_p) == (other.n_x, other.n_p) and np.allclose(a, b, rtol=1e-12)


@dataclass
class PhaseSpaceFunction:
    grid: PhaseSpaceGrid
    values: np.ndarray
    kind: str = "operator"   # or "state" (includes the 1/(2 pi hbar) factor)

    def __post_init__(self):
        self.values = np.asarray(self.values)
        if self.values.shape != (self.grid.n_x, self.grid.n_p):
            raise DimensionMismatch(
                f"values {self.values.shape} do not match grid {(self.grid.n_x, self.grid.n_p)}")
        if not np.all(np.isfinite(self.values)):
            raise ContractViolation("phase-space samples must be finite")
        if self.kind not in ("operator", "state"):
            raise ContractViolation(f"unknown symbol kind {self.kind!r}")

    def _check(self, other):
        if isinstance(other, PhaseSpaceFunction) and not self.grid.same_as(other.grid):
            raise GridMismatchError("phase-space functions live on different grids")

    def _wrap(self, values, kind=None):
        return PhaseSpaceFunction(self.grid, values, kind or self.kind)

    def __add__(self, other):
        self._check(other)
        return self._wrap(self.values + getattr(other, "values", other))

    def __sub__(self, other):
        self._check(other)
        return self._wrap(self.values - getattr(other, "values", other))

    def __mul__(self, other):
        self._check(other)
        return self._wrap(self.values * getattr(other, "values", other))

    __rmul__ = __mul__
    __radd__ = __add__

    def __neg__(self):
        return self._wrap(-self.values)

    @property
    def real(self) -> "PhaseSpaceFunction":
        return self._wrap(np.real(self.values))

    def integral(self) -> complex:
        return complex(np.sum(self.values) * self.grid.cell_area)

    def l1(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.grid.cell_area)

    def as_operator_symbol(self) -> "PhaseSpaceFunction":
        if self.kind == "operator":
            return self
        return PhaseSpaceFunction(self.grid, self.values * 2 * np.pi * self.grid.hbar, "operator")


# --------------------------------------------------------- lattice transform


def _index_tables(n: int):
    k, l = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    s = k + l
    r = s % 2
    m = ((k - l - r) // 2) % n
    return k, l, s, r, m


_TABLES: dict = {}


def _tables(n: int):
    if n not in _TABLES:
        _TABLES.clear()
        _TABLES[n] = _index_tables(n)
    return _TABLES[n]


def _row_phase(n: int) -> np.ndarray:
    j = np.arange(n)
    # shape (2, n): parity r = 0 and r = 1 rows
    return np.exp(-1j * np.pi * np.outer(np.arange(2), j - n // 2) / n)


def _symbol_of_matrix(a: np.ndarray) -> np.ndarray:
    n = a.shape[0]
    k, l, s, r, m = _tables(n)
    g = np.zeros((2 * n, n), dtype=complex)
    g[s, m] = a[k, l]
    sign = (-1.0) ** np.arange(n)
    out = np.fft.fft(g * sign, axis=1)
    parity = np.arange(2 * n) % 2
    return 2 * out * _row_phase(n)[parity]


def _matrix_of_symbol(f: np.ndarray) -> np.ndarray:
    n = f.shape[1]
    k, l, s, r, m = _tables(n)
    parity = np.arange(2 * n) % 2
    h = np.fft.ifft(f * np.conj(_row_phase(n)[parity]), axis=1)
    h = 0.5 * h * ((-1.0) ** np.arange(n))
    return h[s, m]


def _lattice(grid: PhaseSpaceGrid) -> int:
    if not grid.is_lattice:
        raise GridMismatchError("grid is not the symbol grid of a position lattice")
    return grid.lattice_size


def boundary_mass(fn: PhaseSpaceFunction, frame: int | None = None) -> float:
    """Integral of |f| over an outer frame of the grid."""
    v = np.abs(fn.values)
    fx = frame or max(1, fn.grid.n_x // 32)
    fp = frame or max(1, fn.grid.n_p // 32)
    inner = v[fx:-fx, fp:-fp].sum()
    return float((v.sum() - inner) * fn.grid.cell_area)


def density_from_wavefunction(psi, grid: PhaseSpaceGrid) -> np.ndarray:
    """Lattice density matrix of psi sampled at the lattice sites (L2 normalized)."""
    psi = np.asarray(psi, dtype=complex)
    v = psi * np.sqrt(grid.dx)
    v = v / np.linalg.norm(v)
    return np.outer(v, v.conj())


def wigner_transform(op, grid: PhaseSpaceGrid, state: bool = False,
                     boundary_tol: float = 1e-8) -> PhaseSpaceFunction:
    """Weyl symbol of a lattice operator (``state=True`` for the normalized Wigner function).

    For states the outer frame of the grid must carry less than
    ``boundary_tol`` of |W|, otherwise BoundaryMassError is raised.
    """
    n = _lattice(grid)
    a = np.asarray(op, dtype=complex)
    if a.shape != (n, n):
        raise DimensionMismatch(f"operator shape {a.shape} does not match lattice size {n}")
    vals = _symbol_of_matrix(a)
    hermitian = np.allclose(a, a.conj().T, atol=1e-13 * max(1.0, np.abs(a).max()))
    if hermitian:
        vals = vals.real
    if not state:
        return PhaseSpaceFunction(grid, vals, "operator")
    if abs(np.trace(a) - 1) > 1e-8:
        raise ContractViolation("state must have unit trace")
    fn = PhaseSpaceFunction(grid, vals / (2 * np.pi * grid.hbar), "state")
    mass = boundary_mass(fn)
    if mass > boundary_tol:
        raise BoundaryMassError(f"boundary mass {mass:.2e} exceeds {boundary_tol:.0e}", mass)
    return fn


def weyl_quantize(f: PhaseSpaceFunction, check_roundtrip: bool = False,
                  tol: float = 1e-6) -> np.ndarray:
    """Lattice operator whose symbol is ``f`` (exact left inverse of wigner_transform)."""
    _lattice(f.grid)
    sym = f.as_operator_symbol().values
    a = _matrix_of_symbol(np.asarray(sym, dtype=complex))
    if np.isrealobj(f.values):
        a = 0.5 * (a + a.conj().T)
    if check_roundtrip:
        back = _symbol_of_matrix(a)
        err = np.max(np.abs(back - sym)) / max(np.max(np.abs(sym)), 1e-300)
        if err > tol:
            raise ResolutionError(f"symbol is not resolved by the lattice (round trip {err:.2e})")
    return a


def position_operator(grid: PhaseSpaceGrid) -> np.ndarray:
    return np.diag(grid.positions).astype(complex)


def momentum_operator(grid: PhaseSpaceGrid) -> np.ndarray:
    """Spectral momentum restricted to the half band, built on a 2n periodic lattice."""
    n = _lattice(grid)
    big = 2 * n
    q = np.fft.fftfreq(big, d=grid.dx) * 2 * np.pi * grid.hbar
    m = np.fft.fftfreq(big, d=1.0 / big)
    keep = (m >= -n // 2) & (m < n // 2)
    f = np.fft.fft(np.eye(big), axis=0) / np.sqrt(big)
    full = f.conj().T @ np.diag(q * keep) @ f
    return full[:n, :n]


def trace_pairing(rho_w: PhaseSpaceFunction, o_w: PhaseSpaceFunction) -> float:
    """int int rho_W O_W dx dp (rho_W a state symbol, O_W an operator symbol)."""
    if not rho_w.grid.same_as(o_w.grid):
        raise GridMismatchError("state and observable symbols use different grids")
    if rho_w.kind != "state":
        raise ContractViolation("first argument must be a state symbol")
    return float(np.real(np.sum(rho_w.values * o_w.as_operator_symbol().values))
                 * rho_w.grid.cell_area)


# ------------------------------------------------------------- derivatives


def _fd_weights(offsets: np.ndarray, order: int) -> np.ndarray:
    """Finite-difference weights for the ``order``-th derivative at 0."""
    n = offsets.size
    vander = np.vander(offsets.astype(float), n, increasing=True).T
    rhs = np.zeros(n)
    rhs[order] = factorial(order)
    return np.linalg.solve(vander, rhs)


def _fd_derivative(f: np.ndarray, h: float, axis: int, order: int, width: int = 9) -> np.ndarray:
    f = np.moveaxis(f, axis, 0)
    n = f.shape[0]
    half = width // 2
    out = np.empty_like(f)
    centre = _fd_weights(np.arange(-half, half + 1), order)
    if n > 2 * half:
        acc = np.zeros_like(f[half:n - half])
        for w, o in zip(centre, range(-half, half + 1)):
            acc = acc + w * f[half + o:n - half + o]
        out[half:n - half] = acc
    for i in list(range(half)) + list(range(n - half, n)):
        start = min(max(i - half, 0), n - width)
        offs = np.arange(start, start + width) - i
        w = _fd_weights(offs, order)
        out[i] = np.tensordot(w, f[start:start + width], axes=(0, 0))
    return np.moveaxis(out / h ** order, 0, axis)


def _decays(f: np.ndarray, axis: int, rel: float = 1e-10) -> bool:
    scale = np.max(np.abs(f))
    if scale == 0:
        return True
    edges = np.take(f, [0, 1, -2, -1], axis=axis)
    return bool(np.max(np.abs(edges)) <= rel * scale)


def _spectral_derivative(f: np.ndarray, h: float, axis: int, order: int) -> np.ndarray:
    n = f.shape[axis]
    spec = np.fft.fft(f, axis=axis)
    power = np.abs(spec) ** 2
    tot = power.sum()
    if tot > 0:
        freq = np.abs(np.fft.fftfreq(n))
        tail = np.take(power, np.flatnonzero(freq > 0.4), axis=axis).sum()
        if tail > 1e-16 * tot:
            raise SmoothnessError("spectral coefficients do not decay; function is under-resolved")
    k = 2j * np.pi * np.fft.fftfreq(n, d=h)
    if n % 2 == 0:
        k[n // 2] = 0.0
    shape = [1] * f.ndim
    shape[axis] = n
    return np.fft.ifft(spec * (k ** order).reshape(shape), axis=axis)


class _Derivatives:
    """Cached mixed partials d^a/dx^a d^b/dp^b of one function."""

    def __init__(self, fn: PhaseSpaceFunction, method: str):
        self.fn = fn
        self.grid = fn.grid
        self.cache = {(0, 0): fn.values}
        self.methods = []
        for axis in (0, 1):
            m = method
            if m == "auto":
                m = "spectral" if _decays(fn.values, axis) else "fd"
            self.methods.append(m)

    def _axis(self, f, axis, order):
        h = self.grid.dX if axis == 0 else self.grid.dP
        if self.methods[axis] == "spectral":
            out = _spectral_derivative(f, h, axis, order)
            return out.real if np.isrealobj(f) else out
        return _fd_derivative(f, h, axis, order)

    def get(self, a: int, b: int) -> np.ndarray:
        if (a, b) not in self.cache:
            base = self.cache[(a, 0)] if (a, 0) in self.cache else self._axis(self.fn.values, 0, a)
            self.cache[(a, 0)] = base
            self.cache[(a, b)] = self._axis(base, 1, b) if b else base
        return self.cache[(a, b)]


def _bidiff(df: _Derivatives, dg: _Derivatives, k: int) -> np.ndarray:
    """Lambda^k(f, g) = sum_r C(k,r) (-1)^r f_{x^(k-r) p^r} g_{p^(k-r) x^r}."""
    total = 0
    for r in range(k + 1):
        total = total + comb(k, r) * (-1) ** r * df.get(k - r, r) * dg.get(r, k - r)
    return total


def _pair(f, g):
    if not f.grid.same_as(g.grid):
        raise GridMismatchError("phase-space functions live on different grids")
    return f.as_operator_symbol(), g.as_operator_symbol()


def star_product(f: PhaseSpaceFunction, g: PhaseSpaceFunction, order: int = 4,
                 method: str = "auto") -> PhaseSpaceFunction:
    """Moyal series f exp(i hbar/2 (<dx dp> - <dp dx>)) g truncated at hbar^order.

    Derivatives are spectral along axes where the function decays at the
    grid edges and 9-point finite differences otherwise (exact for
    polynomials of degree <= 8).
    """
    if order < 0:
        raise ContractViolation("order must be >= 0")
    f, g = _pair(f, g)
    df, dg = _Derivatives(f, method), _Derivatives(g, method)
    h = f.grid.hbar
    out = f.values * g.values + 0j
    for k in range(1, order + 1):
        out = out + (0.5j * h) ** k / factorial(k) * _bidiff(df, dg, k)
    return PhaseSpaceFunction(f.grid, out, "operator")


def moyal_bracket(f: PhaseSpaceFunction, g: PhaseSpaceFunction, order: int = 4,
                  method: str = "auto") -> PhaseSpaceFunction:
    """(f * g - g * f)/(i hbar) from the odd terms of the series."""
    f, g = _pair(f, g)
    df, dg = _Derivatives(f, method), _Derivatives(g, method)
    h = f.grid.hbar
    out = np.zeros(f.values.shape, dtype=complex)
    for k in range(1, max(order, 1) + 1, 2):
        out = out + (0.5j * h) ** (k - 1) / factorial(k) * _bidiff(df, dg, k)
    if np.isrealobj(f.values) and np.isrealobj(g.values):
        out = out.real
    return PhaseSpaceFunction(f.grid, out, "operator")


def poisson_bracket(f: PhaseSpaceFunction, g: PhaseSpaceFunction,
                    method: str = "auto") -> PhaseSpaceFunction:
    f, g = _pair(f, g)
    df, dg = _Derivatives(f, method), _Derivatives(g, method)
    out = _bidiff(df, dg, 1)
    if np.isrealobj(f.values) and np.isrealobj(g.values):
        out = np.real(out)
    return PhaseSpaceFunction(f.grid, out, "operator")


def gradient(f: PhaseSpaceFunction, method: str = "auto") -> tuple[np.ndarray, np.ndarray]:
    """(df/dx, df/dp) on the grid."""
    d = _Derivatives(f.as_operator_symbol(), method)
    return d.get(1, 0), d.get(0, 1)


# ---------------------------------------------------------- bipartite check


def bipartite_symbol(op: np.ndarray, grid_s: PhaseSpaceGrid,
                     grid_e: PhaseSpaceGrid) -> np.ndarray:
    """Two-particle Weyl symbol, axes (X_s, p_s, X_e, p_e)."""
    ns, ne = _lattice(grid_s), _lattice(grid_e)
    a = np.asarray(op, dtype=complex)
    if a.shape != (ns * ne, ns * ne):
        raise DimensionMismatch("operator does not match the bipartite lattice")
    t = a.reshape(ns, ne, ns, ne).transpose(0, 2, 1, 3)      # (k1, l1, k2, l2)
    k, l, s, r, m = _tables(ne)
    g = np.zeros((ns, ns, 2 * ne, ne), dtype=complex)
    g[:, :, s, m] = t[:, :, k, l]
    parity = np.arange(2 * ne) % 2
    g = 2 * np.fft.fft(g * (-1.0) ** np.arange(ne), axis=3) * _row_phase(ne)[parity]
    k, l, s, r, m = _tables(ns)
    h = np.zeros((2 * ns, ns, 2 * ne, ne), dtype=complex)
    h[s, m] = g[k, l]
    parity = np.arange(2 * ns) % 2
    h = 2 * np.fft.fft(h * ((-1.0) ** np.arange(ns))[None, :, None, None], axis=1)
    return h * _row_phase(ns)[parity][:, :, None, None]


@dataclass(frozen=True)
class ReducedSymbolReport:
    constant: float
    max_deviation: float
    passed: bool


def reduced_symbol_check(o_s: np.ndarray, env_dim: int, grid_s: PhaseSpaceGrid,
                         grid_e: PhaseSpaceGrid | None = None, tol: float = 1e-6,
                         constant: float | None = None) -> ReducedSymbolReport:
    """Integrate the environment out of symb(O_S x I_E) and compare with symb(O_S).

    The normalization constant is calibrated once on O_S = I_S unless given.
    """
    if grid_e is None:
        grid_e = PhaseSpaceGrid.centered(env_dim, grid_s.x_max, grid_s.hbar)
    if grid_e.lattice_size != env_dim:
        raise DimensionMismatch("environment grid does not match env_dim")
    ns = _lattice(grid_s)
    if max(ns, env_dim) > 64:
        raise ContractViolation("bipartite check is limited to 64 sites per factor")
    eye_e = np.eye(env_dim)

    def reduced(o):
        full = bipartite_symbol(np.kron(o, eye_e), grid_s, grid_e)
        return full.sum(axis=(2, 3)) * grid_e.cell_area

    if constant is None:
        ident = np.eye(ns)
        ref = _symbol_of_matrix(ident)
        red = reduced(ident)
        constant = float(np.real(ref.sum() / red.sum()))
    sys = _symbol_of_matrix(np.asarray(o_s, dtype=complex))
    dev = float(np.max(np.abs(constant * reduced(o_s) - sys)))
    scale = max(float(np.max(np.abs(sys))), 1e-300)
    return ReducedSymbolReport(constant, dev / scale, dev <= tol * scale)


__all__ = [
    "PhaseSpaceGrid", "PhaseSpaceFunction", "wigner_transform", "weyl_quantize",
    "star_product", "moyal_bracket", "poisson_bracket", "trace_pairing",
    "reduced_symbol_check", "ReducedSymbolReport", "bipartite_symbol", "gradient",
    "position_operator", "momentum_operator", "density_from_wavefunction", "boundary_mass",
    "hermite_functions", "lattice_states",
]


def hermite_functions(x, n_max: int, hbar: float = 1.0, m_omega: float = 1.0) -> np.ndarray:
    """Oscillator eigenfunctions psi_0..psi_{n_max-1} at ``x`` (rows), by the stable recursion."""
    x = np.asarray(x, dtype=float)
    out = np.zeros((n_max, x.size))
    xi = x * np.sqrt(m_omega / hbar)
    out[0] = (m_omega / (np.pi * hbar)) ** 0.25 * np.exp(-xi ** 2 / 2)
    if n_max > 1:
        out[1] = np.sqrt(2.0) * xi * out[0]
    for n in range(1, n_max - 1):
        out[n + 1] = np.sqrt(2.0 / (n + 1)) * xi * out[n] - np.sqrt(n / (n + 1)) * out[n - 1]
    return out


def lattice_states(grid: PhaseSpaceGrid, n_max: int, m_omega: float = 1.0) -> np.ndarray:
    """Columns are oscillator eigenstates as unit vectors on the lattice of ``grid``."""
    h = hermite_functions(grid.positions, n_max, grid.hbar, m_omega) * np.sqrt(grid.dx)
    return h.T.astype(complex)
