"""Semicircle-law calculus.

Integrals against the semicircle density rho_sc(lambda) = (2 pi w^2)^-1
sqrt((4w^2 - lambda^2)_+), its Fourier transform v(t), the generalized
Fourier transform v~(z) on the lower half-plane, and the closed-form
self-convolutions of v used by the limiting covariance kernels.

Quadrature is Gauss-Chebyshev of the second kind: after lambda = 2w cos(theta)
the semicircle weight is exactly the Chebyshev-U weight, so an N-node rule
integrates polynomials of degree <= 2N - 1 exactly.

Fourier convention (fixed here to keep sign/2pi drift out of the rest of the
package): phi_hat(t) = (2 pi)^-1 Integral e^{-i t lambda} phi(lambda) dlambda,
with inversion phi(lambda) = Integral e^{i lambda t} phi_hat(t) dt.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad
from scipy.special import j1

from .errors import ContractError, CoverageError

DEFAULT_NODES = 128


# ---------------------------------------------------------------------------
# test functions
# ---------------------------------------------------------------------------

POLYNOMIAL = "polynomial"
GAUSSIAN_DAMPED = "gaussian_damped_polynomial"
TABULATED = "tabulated"


def _poly_parity(coefficients: Sequence[float]) -> str:
    """Parity declared from exactly-zero coefficient structure."""
    coeffs = np.asarray(coefficients, dtype=float)
    if coeffs.size == 0 or not np.any(coeffs != 0.0):
        return "even"  # zero/constant functions count as even
    odd_zero = np.all(coeffs[1::2] == 0.0)
    even_zero = np.all(coeffs[0::2] == 0.0)
    if odd_zero:
        return "even"
    if even_zero:
        return "odd"
    return "none"


@dataclass(frozen=True, eq=False)
class TestFunction:
    """A test function phi with an exactly-integrable representation.

    kind "polynomial": coefficients c_k in ascending powers, phi = sum c_k x^k.
    kind "gaussian_damped_polynomial": phi = p(x) * exp(-x^2 / (2 width^2)).
    kind "tabulated": linear interpolation of (grid, values).
    """

    kind: str
    coefficients: tuple[float, ...] = ()
    envelope_width: float = 0.0
    grid: np.ndarray | None = None
    values: np.ndarray | None = None
    parity: str = field(default="none")

    def __call__(self, lam):
        lam = np.asarray(lam, dtype=complex if np.iscomplexobj(lam) else float)
        if self.kind == POLYNOMIAL:
            return np.polynomial.polynomial.polyval(lam, np.asarray(self.coefficients))
        if self.kind == GAUSSIAN_DAMPED:
            p = np.polynomial.polynomial.polyval(lam, np.asarray(self.coefficients))
            return p * np.exp(-(lam**2) / (2.0 * self.envelope_width**2))
        return np.interp(lam, self.grid, self.values)

    @property
    def degree(self) -> int:
        if self.kind not in (POLYNOMIAL, GAUSSIAN_DAMPED):
            raise ContractError("degree is defined for polynomial-backed test functions")
        coeffs = np.asarray(self.coefficients)
        nz = np.nonzero(coeffs)[0]
        return int(nz[-1]) if nz.size else 0

    def derivative(self) -> "TestFunction":
        """Exact derivative; polynomial and gaussian-damped kinds only."""
        pp = np.polynomial.polynomial
        c = np.asarray(self.coefficients, dtype=float)
        if self.kind == POLYNOMIAL:
            dc = pp.polyder(c) if c.size > 1 else np.zeros(1)
            return polynomial(dc)
        if self.kind == GAUSSIAN_DAMPED:
            dc = pp.polyder(c) if c.size > 1 else np.zeros(1)
            dc = pp.polysub(dc, pp.polymulx(c) / self.envelope_width**2)
            return gaussian_damped(dc, self.envelope_width)
        raise ContractError("derivative requires a polynomial-backed test function")

    def descriptor(self) -> dict:
        """JSON-ready provenance key."""
        d: dict = {"kind": self.kind, "parity": self.parity}
        if self.kind in (POLYNOMIAL, GAUSSIAN_DAMPED):
            d["coefficients"] = list(self.coefficients)
        if self.kind == GAUSSIAN_DAMPED:
            d["envelope_width"] = self.envelope_width
        if self.kind == TABULATED:
            d["grid_span"] = [float(self.grid[0]), float(self.grid[-1])]
            d["grid_points"] = int(self.grid.size)
        return d


def polynomial(coefficients: Sequence[float]) -> TestFunction:
    coeffs = tuple(float(c) for c in coefficients)
    if not all(math.isfinite(c) for c in coeffs):
        raise ContractError("polynomial coefficients must be finite")
    return TestFunction(kind=POLYNOMIAL, coefficients=coeffs, parity=_poly_parity(coeffs))


def monomial(power: int) -> TestFunction:
    """phi(x) = x^power."""
    return polynomial([0.0] * power + [1.0])


def gaussian_damped(coefficients: Sequence[float], envelope_width: float = 1.0) -> TestFunction:
    coeffs = tuple(float(c) for c in coefficients)
    if envelope_width <= 0 or not math.isfinite(envelope_width):
        raise ContractError("envelope width must be positive and finite")
    # even envelope: parity is that of the polynomial factor
    return TestFunction(
        kind=GAUSSIAN_DAMPED,
        coefficients=coeffs,
        envelope_width=float(envelope_width),
        parity=_poly_parity(coeffs),
    )


def tabulated(grid: Sequence[float], values: Sequence[float]) -> TestFunction:
    g = np.asarray(grid, dtype=float)
    v = np.asarray(values, dtype=float)
    if g.ndim != 1 or g.shape != v.shape or g.size < 2:
        raise ContractError("tabulated test function needs matching 1-D grid and values")
    if not np.all(np.diff(g) > 0):
        raise ContractError("tabulated grid must be strictly increasing")
    parity = "none"
    scale = float(np.max(np.abs(v))) or 1.0
    if np.allclose(g, -g[::-1], rtol=0, atol=1e-12 * max(1.0, float(g[-1]))):
        if np.allclose(v, v[::-1], rtol=0, atol=1e-12 * scale):
            parity = "even"
        elif np.allclose(v, -v[::-1], rtol=0, atol=1e-12 * scale):
            parity = "odd"
    g = g.copy()
    v = v.copy()
    g.setflags(write=False)
    v.setflags(write=False)
    return TestFunction(kind=TABULATED, grid=g, values=v, parity=parity)


def fourier_transform(phi: TestFunction) -> Callable[[np.ndarray], np.ndarray]:
    """Closed-form phi_hat for Gaussian-damped polynomials.

    With phi = sum c_k x^k exp(-a x^2), a = 1/(2 width^2):
    phi_hat(t) = (2 pi)^-1 sum c_k (i d/dt)^k [sqrt(pi/a) exp(-t^2/(4a))],
    evaluated by differentiating q(t) exp(-b t^2), b = 1/(4a), in coefficient
    space: q -> i(q' - 2 b t q).
    """
    if phi.kind != GAUSSIAN_DAMPED:
        raise ContractError("closed-form Fourier transform requires a gaussian_damped test function")
    a = 1.0 / (2.0 * phi.envelope_width**2)
    b = 1.0 / (4.0 * a)
    total = np.zeros(1, dtype=complex)
    q = np.ones(1, dtype=complex)  # current (i d/dt)^k prefactor polynomial
    for k, c_k in enumerate(phi.coefficients):
        if k > 0:
            dq = np.polynomial.polynomial.polyder(q) if q.size > 1 else np.zeros(1, complex)
            q = 1j * (np.polynomial.polynomial.polysub(dq, 2.0 * b * np.polynomial.polynomial.polymulx(q)))
        if c_k != 0.0:
            total = np.polynomial.polynomial.polyadd(total, c_k * q)
    norm = math.sqrt(math.pi / a) / (2.0 * math.pi)

    def phi_hat(t):
        t = np.asarray(t, dtype=float)
        return norm * np.polynomial.polynomial.polyval(t, total) * np.exp(-b * t * t)

    return phi_hat


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Chebyshev-U rule for Integral f(lambda) rho_sc(lambda) dlambda."""

    nodes: np.ndarray
    weights: np.ndarray
    w: float
    n: int


@lru_cache(maxsize=128)
def _chebyshev_u_rule(w: float, n_nodes: int) -> QuadratureRule:
    k = np.arange(1, n_nodes + 1, dtype=float)
    theta = k * math.pi / (n_nodes + 1)
    nodes = 2.0 * w * np.cos(theta)
    weights = (2.0 / (n_nodes + 1)) * np.sin(theta) ** 2
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return QuadratureRule(nodes=nodes, weights=weights, w=w, n=n_nodes)


def gauss_chebyshev_u(w: float, n_nodes: int = DEFAULT_NODES) -> QuadratureRule:
    if w <= 0:
        raise ContractError("scale w must be positive")
    if n_nodes < 1:
        raise ContractError("node count must be >= 1")
    return _chebyshev_u_rule(float(w), int(n_nodes))


def rho_sc(lam, w: float):
    """Semicircle density; zero outside [-2w, 2w]."""
    if w <= 0:
        raise ContractError("scale w must be positive")
    lam = np.asarray(lam, dtype=float)
    supp = np.maximum(4.0 * w * w - lam * lam, 0.0)
    return np.sqrt(supp) / (2.0 * math.pi * w * w)


def sc_integral(phi: Callable, w: float, n_nodes: int = DEFAULT_NODES):
    """Integral phi(lambda) rho_sc(lambda) dlambda by Gauss-Chebyshev-U.

    Exact for polynomial phi of degree <= 2 n_nodes - 1.
    """
    rule = gauss_chebyshev_u(w, n_nodes)
    if isinstance(phi, TestFunction) and phi.kind == TABULATED:
        if phi.grid[0] > -2.0 * w or phi.grid[-1] < 2.0 * w:
            raise CoverageError(
                f"tabulated grid [{phi.grid[0]}, {phi.grid[-1]}] does not cover [-{2*w}, {2*w}]"
            )
    vals = phi(rule.nodes)
    total = np.sum(rule.weights * vals)
    return complex(total) if np.iscomplexobj(vals) else float(total)


def sc_moment(power: int, w: float, n_nodes: int = DEFAULT_NODES) -> float:
    """Semicircle moment m_p; m_{2k} = C_k w^{2k} (Catalan), odd moments 0."""
    rule = gauss_chebyshev_u(w, n_nodes)
    return float(np.sum(rule.weights * rule.nodes**power))


# ---------------------------------------------------------------------------
# Stieltjes transform on the support
# ---------------------------------------------------------------------------


def stieltjes_rho(lam: float, w: float) -> float:
    """Principal value of Integral rho_sc(mu)/(mu - lambda) dmu = -lambda/(2 w^2)."""
    if w <= 0:
        raise ContractError("scale w must be positive")
    if abs(lam) >= 2.0 * w:
        raise ContractError("stieltjes_rho requires |lambda| < 2w")
    return -lam / (2.0 * w * w)


def stieltjes_rho_pv_check(lam: float, w: float, deltas: Sequence[float] = (0.02, 0.01, 0.005)) -> float:
    """Quadrature cross-check of stieltjes_rho.

    Integrates over {|mu - lambda| > delta} with symmetric node pairing
    (the lambda +- s contributions are combined so their poles cancel), then
    Richardson-extrapolates the remaining O(delta) truncation to delta -> 0.
    """
    if abs(lam) >= 2.0 * w:
        raise ContractError("stieltjes_rho_pv_check requires |lambda| < 2w")
    deltas = sorted(float(d) for d in deltas)
    if deltas[0] <= 0:
        raise ContractError("deltas must be positive")
    half_width = min(2.0 * w - lam, lam + 2.0 * w)

    def excluded_integral(delta: float) -> float:
        paired = quad(
            lambda s: (rho_sc(lam + s, w) - rho_sc(lam - s, w)) / s,
            delta,
            half_width,
            limit=200,
        )[0]
        outer = 0.0
        if lam - half_width > -2.0 * w:
            outer += quad(lambda mu: rho_sc(mu, w) / (mu - lam), -2.0 * w, lam - half_width, limit=200)[0]
        if lam + half_width < 2.0 * w:
            outer += quad(lambda mu: rho_sc(mu, w) / (mu - lam), lam + half_width, 2.0 * w, limit=200)[0]
        return paired + outer

    vals = [excluded_integral(d) for d in deltas]
    # excluded window contributes ~ 2 rho'(lam) delta: one Richardson level per halving
    while len(vals) > 1:
        vals = [2.0 * lo - hi for lo, hi in zip(vals[:-1], vals[1:])]
    return vals[0]


# ---------------------------------------------------------------------------
# v(t), v~(z), and self-convolutions
# ---------------------------------------------------------------------------


def v_of_t(t, w: float, method: str = "bessel"):
    """v(t) = Integral e^{i t lambda} rho_sc dlambda = J1(2wt)/(wt); real and even.

    method="quadrature" evaluates the defining integral directly (oracle path).
    """
    if w <= 0:
        raise ContractError("scale w must be positive")
    t_arr = np.asarray(t, dtype=float)
    if method == "quadrature":
        rule = gauss_chebyshev_u(w, 256)
        vals = np.cos(np.multiply.outer(t_arr, rule.nodes)) @ rule.weights
        return float(vals) if np.isscalar(t) else vals
    x = w * t_arr
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    out = np.where(small, 1.0 - x * x / 2.0 + x**4 / 12.0, j1(2.0 * safe) / safe)
    return float(out) if np.isscalar(t) else out


def v_tilde(z, w: float):
    """Generalized Fourier transform of v on Im z < 0.

    v~(z) = (2 w^2)^-1 (sqrt(z^2 - 4 w^2) - z) on the branch with
    sqrt(z^2 - 4w^2) = z + O(1/z); satisfies w^2 v~^2 + z v~ + 1 = 0.
    """
    if w <= 0:
        raise ContractError("scale w must be positive")
    z_arr = np.asarray(z, dtype=complex)
    if np.any(np.imag(z_arr) >= 0):
        raise ContractError("v_tilde requires Im z < 0")
    # z*sqrt(1 - 4w^2/z^2) keeps the required branch away from [-2w, 2w];
    # -2/(z + root) is the cancellation-free form of (root - z)/(2w^2)
    root = z_arr * np.sqrt(1.0 - 4.0 * w * w / (z_arr * z_arr))
    out = -2.0 / (z_arr + root)
    return complex(out) if np.isscalar(z) else out


def sc_convolutions(t, w: float, n_nodes: int = DEFAULT_NODES) -> dict:
    """Closed-form (v*v)(t) and (v*v*v)(t) via single semicircle integrals.

    (v*v)(t)   = -(i/w^2) Integral e^{i mu t} mu rho_sc(mu) dmu
               = (1/w^2) Integral sin(mu t) mu rho_sc(mu) dmu
    (v*v*v)(t) = w^-4 Integral cos(lambda t) (w^2 - lambda^2) rho_sc dlambda.
    Both are real.
    """
    rule = gauss_chebyshev_u(w, n_nodes)
    t_arr = np.asarray(t, dtype=float)
    arg = np.multiply.outer(t_arr, rule.nodes)
    vv = (np.sin(arg) @ (rule.weights * rule.nodes)) / (w * w)
    vvv = (np.cos(arg) @ (rule.weights * (w * w - rule.nodes**2))) / w**4
    if np.isscalar(t):
        return {"vv": float(vv), "vvv": float(vvv)}
    return {"vv": vv, "vvv": vvv}
