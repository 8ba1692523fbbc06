"""Entry distributions and samplers for real symmetric Wigner/GOE matrices.

Normalizations: the sampled matrix is M = n^{-1/2} W where off-diagonal
entries of W are i.i.d. with mean 0 and variance w^2.  Diagonal variance is
set by the convention:

  paper_symmetric  W_jj = sqrt(2) V_jj      (diagonal variance 2 w^2)
  goe              Gaussian paper_symmetric  (the classical invariant ensemble)
  general_diagonal W_jj = sqrt(w2) V_jj     (diagonal variance w2 w^2)

Sampling is counter-based (Philox keyed by (root seed, n, replica)), so any
replica regenerates bit-identically and distinct replicas are independent
streams that may be drawn in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import seeding
from .cumulants import MAX_ORDER, moments_to_cumulants
from .errors import ContractError, InvalidDistributionError, UnsupportedCFError

GAUSSIAN = "gaussian"
RADEMACHER = "rademacher"
TWO_POINT = "two_point"
UNIFORM = "uniform"
DISCRETE_CUSTOM = "discrete_custom"

KINDS = (GAUSSIAN, RADEMACHER, TWO_POINT, UNIFORM, DISCRETE_CUSTOM)

PAPER_SYMMETRIC = "paper_symmetric"
GOE = "goe"
GENERAL_DIAGONAL = "general_diagonal"

CONVENTIONS = (PAPER_SYMMETRIC, GOE, GENERAL_DIAGONAL)

_ATOL = 1e-12


@dataclass(frozen=True, eq=False)
class EntryDistribution:
    """One off-diagonal entry law, with exact moments and cumulants."""

    kind: str
    w: float
    moments: tuple[float, ...]  # mu_1..mu_6
    kappas: tuple[float, ...]  # kappa_1..kappa_6
    cf_closed_form: str | None = None
    atoms: np.ndarray | None = None
    probs: np.ndarray | None = None

    @property
    def kappa4(self) -> float:
        return self.kappas[3]

    def moment(self, order: int) -> float:
        return self._moments8()[order - 1]

    def cumulant(self, order: int) -> float:
        """kappa_l for l <= 8; orders beyond the stored 6 come from exact moments."""
        if self.kind == GAUSSIAN:
            return {1: 0.0, 2: self.w**2}.get(order, 0.0)
        if order > self.cumulant_order_available():
            raise ContractError(f"cumulant order {order} exceeds supported maximum {MAX_ORDER}")
        return moments_to_cumulants(self._moments8()[:order])[order]

    def cumulant_order_available(self) -> int:
        return MAX_ORDER

    def _moments8(self) -> tuple[float, ...]:
        w = self.w
        if self.kind == GAUSSIAN:
            return (0.0, w**2, 0.0, 3 * w**4, 0.0, 15 * w**6, 0.0, 105 * w**8)
        if self.kind == UNIFORM:
            a = math.sqrt(3.0) * w
            return (0.0, a**2 / 3, 0.0, a**4 / 5, 0.0, a**6 / 7, 0.0, a**8 / 9)
        return tuple(float(np.sum(self.probs * self.atoms**p)) for p in range(1, MAX_ORDER + 1))

    def descriptor(self) -> dict:
        d: dict = {"kind": self.kind, "w": self.w}
        if self.atoms is not None:
            d["atoms"] = [float(a) for a in self.atoms]
            d["probs"] = [float(p) for p in self.probs]
        return d


def _finalize(kind: str, w: float, moments6: Sequence[float], cf: str | None,
              atoms: np.ndarray | None = None, probs: np.ndarray | None = None) -> EntryDistribution:
    mu = tuple(float(m) for m in moments6)
    if abs(mu[0]) > _ATOL * max(w, 1.0):
        raise InvalidDistributionError(f"entry law must have mean 0, got {mu[0]}")
    if abs(mu[1] - w * w) > _ATOL * max(w * w, 1.0):
        raise InvalidDistributionError(f"entry law must have variance w^2 = {w*w}, got {mu[1]}")
    kappas = tuple(moments_to_cumulants(mu).values)
    return EntryDistribution(kind=kind, w=float(w), moments=mu, kappas=kappas,
                             cf_closed_form=cf, atoms=atoms, probs=probs)


def make_entry_distribution(kind: str, w: float, params: dict | None = None) -> EntryDistribution:
    """Build an entry law of the given kind with off-diagonal std-dev w.

    Discrete kinds take params {"atoms": [...], "probs": [...]}; the atoms must
    already have mean 0 and variance w^2 (they are not rescaled here).
    """
    if w <= 0 or not math.isfinite(w):
        raise InvalidDistributionError(f"scale w must be positive and finite, got {w}")
    params = params or {}

    if kind == GAUSSIAN:
        mu = (0.0, w**2, 0.0, 3 * w**4, 0.0, 15 * w**6)
        return _finalize(kind, w, mu, "exp(-(w*x)^2/2)")

    if kind == RADEMACHER:
        atoms = np.array([-w, w])
        probs = np.array([0.5, 0.5])
        return _discrete(kind, w, atoms, probs, cf="cos(w*x)")

    if kind == UNIFORM:
        a = math.sqrt(3.0) * w
        mu = (0.0, a**2 / 3, 0.0, a**4 / 5, 0.0, a**6 / 7)
        return _finalize(kind, w, mu, "sin(a*x)/(a*x), a = w*sqrt(3)")

    if kind in (TWO_POINT, DISCRETE_CUSTOM):
        if "atoms" not in params or "probs" not in params:
            raise InvalidDistributionError(f"{kind} requires params 'atoms' and 'probs'")
        atoms = np.asarray(params["atoms"], dtype=float)
        probs = np.asarray(params["probs"], dtype=float)
        if kind == TWO_POINT and atoms.size != 2:
            raise InvalidDistributionError("two_point takes exactly two atoms")
        return _discrete(kind, w, atoms, probs)

    raise InvalidDistributionError(f"unknown distribution kind {kind!r}")


def _discrete(kind: str, w: float, atoms: np.ndarray, probs: np.ndarray,
              cf: str = "sum_j p_j exp(i*x*a_j)") -> EntryDistribution:
    if atoms.ndim != 1 or atoms.shape != probs.shape or atoms.size < 1:
        raise InvalidDistributionError("atoms and probs must be matching 1-D arrays")
    if np.any(probs < 0):
        raise InvalidDistributionError("probabilities must be nonnegative")
    if abs(float(np.sum(probs)) - 1.0) > 1e-14:
        raise InvalidDistributionError(f"probabilities sum to {float(np.sum(probs))}, not 1")
    mu = [float(np.sum(probs * atoms**p)) for p in range(1, 7)]
    atoms = atoms.copy()
    probs = probs.copy()
    atoms.setflags(write=False)
    probs.setflags(write=False)
    return _finalize(kind, w, mu, cf, atoms=atoms, probs=probs)


def entry_cf(dist: EntryDistribution, x):
    """Exact characteristic function E{e^{i x V}} of one entry."""
    x_arr = np.asarray(x, dtype=float)
    if dist.kind == GAUSSIAN:
        out = np.exp(-(dist.w**2) * x_arr**2 / 2.0) + 0.0j
    elif dist.kind == UNIFORM:
        a = math.sqrt(3.0) * dist.w
        out = np.sinc(a * x_arr / math.pi) + 0.0j  # np.sinc(y) = sin(pi y)/(pi y)
    elif dist.atoms is not None:
        out = np.exp(1j * np.multiply.outer(x_arr, dist.atoms)) @ dist.probs
    else:
        raise UnsupportedCFError(f"no characteristic function available for kind {dist.kind!r}")
    return complex(out) if np.isscalar(x) else out


# ---------------------------------------------------------------------------
# ensembles and matrix sampling
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class EnsembleSpec:
    entry_dist: EntryDistribution
    convention: str = PAPER_SYMMETRIC
    w2: float = 2.0  # diagonal variance ratio Var{W_jj} = w2 * w^2

    def __post_init__(self):
        if self.convention not in CONVENTIONS:
            raise ContractError(f"unknown convention {self.convention!r}")
        if self.convention in (PAPER_SYMMETRIC, GOE) and self.w2 != 2.0:
            raise ContractError(f"convention {self.convention!r} fixes w2 = 2, got {self.w2}")
        if self.convention == GOE and self.entry_dist.kind != GAUSSIAN:
            raise ContractError("goe convention requires a gaussian entry law")
        if self.w2 <= 0:
            raise ContractError("w2 must be positive")

    @property
    def w(self) -> float:
        return self.entry_dist.w

    @property
    def diag_scale(self) -> float:
        return math.sqrt(2.0) if self.convention in (PAPER_SYMMETRIC, GOE) else math.sqrt(self.w2)

    def descriptor(self) -> dict:
        return {
            "entry_dist": self.entry_dist.descriptor(),
            "convention": self.convention,
            "w2": self.w2,
        }


@lru_cache(maxsize=32)
def _tril_indices(n: int) -> tuple[np.ndarray, np.ndarray]:
    rows, cols = np.tril_indices(n)
    rows.setflags(write=False)
    cols.setflags(write=False)
    return rows, cols


@dataclass(frozen=True, eq=False)
class SymmetricMatrix:
    """Packed lower-triangular storage of M = n^{-1/2} W (row-major rows 0..n-1)."""

    n: int
    data: np.ndarray
    seed: int
    replica_index: int

    def dense(self) -> np.ndarray:
        m = np.zeros((self.n, self.n))
        rows, cols = _tril_indices(self.n)
        m[rows, cols] = self.data
        m[cols, rows] = self.data
        return m

    def diagonal(self) -> np.ndarray:
        i = np.arange(self.n)
        return self.data[i * (i + 3) // 2]


def sample_entries(dist: EntryDistribution, size: int, seed: int,
                   labels: Sequence[int] = ()) -> np.ndarray:
    """i.i.d. scalar draws of the entry law from the (seed, labels) stream."""
    rng = seeding.generator(seed, [seeding.DOMAIN_SCALAR, *labels])
    return _draw(dist, size, rng)


def _draw(dist: EntryDistribution, size: int, rng: np.random.Generator) -> np.ndarray:
    if dist.kind == GAUSSIAN:
        return dist.w * rng.standard_normal(size)
    if dist.kind == UNIFORM:
        a = math.sqrt(3.0) * dist.w
        return rng.uniform(-a, a, size)
    if dist.kind == RADEMACHER:
        return dist.w * (2.0 * rng.integers(0, 2, size=size) - 1.0)
    # general discrete: inverse-CDF on one uniform per entry
    edges = np.cumsum(dist.probs)
    u = rng.random(size)
    return dist.atoms[np.searchsorted(edges, u, side="right").clip(max=dist.atoms.size - 1)]


def sample_matrix(spec: EnsembleSpec, n: int, seed: int, replica: int = 0) -> SymmetricMatrix:
    """Draw one matrix M = n^{-1/2} W.  Deterministic in (spec, n, seed, replica)."""
    if n < 2:
        raise ContractError("matrix size n must be >= 2")
    rng = seeding.generator(seed, [seeding.DOMAIN_MATRIX, n, replica])
    packed = _draw(spec.entry_dist, n * (n + 1) // 2, rng)
    diag_idx = np.arange(n) * (np.arange(n) + 3) // 2
    packed[diag_idx] *= spec.diag_scale
    packed *= 1.0 / math.sqrt(n)
    packed.setflags(write=False)
    return SymmetricMatrix(n=n, data=packed, seed=seed, replica_index=replica)
