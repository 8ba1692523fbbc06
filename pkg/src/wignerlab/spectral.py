"""Symmetric eigendecomposition and spectral-theorem consumers.

From one decomposition M = Q diag(lambda) Q^T per sampled matrix we read off
matrix elements phi(M)_jk = sum_a phi(lambda_a) Q_ja Q_ka, propagator entries
U_jk(t) = sum_a e^{i t lambda_a} Q_ja Q_ka, and the trace/row statistics
v_n, v_n(t1,t2), v_n1, v_n2 whose decay in n the Monte Carlo harness measures.

All indices are 0-based.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .ensembles import SymmetricMatrix
from .errors import ContractError, NumericFailureError


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Eigenvalues ascending; eigenvectors orthonormal in columns."""

    n: int
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def validate(self, m_dense: np.ndarray | None = None) -> dict:
        """Measured invariant defects (max norms), for tests and diagnostics."""
        q = self.eigenvectors
        orth = float(np.max(np.abs(q.T @ q - np.eye(self.n))))
        out = {"orthonormality": orth, "eigenvalue_sorted": bool(np.all(np.diff(self.eigenvalues) >= 0))}
        if m_dense is not None:
            recon = (q * self.eigenvalues) @ q.T
            out["reconstruction"] = float(np.max(np.abs(recon - m_dense)))
        return out


def eigh(m: SymmetricMatrix) -> SpectralDecomposition:
    """Full symmetric eigendecomposition of one sampled matrix.

    Deterministic for fixed input.  A LAPACK convergence failure is re-raised
    with the matrix seed/replica so the offending sample can be regenerated.
    """
    dense = m.dense()
    if not np.all(np.isfinite(dense)):
        raise ContractError("matrix entries must be finite")
    try:
        vals, vecs = np.linalg.eigh(dense)
    except np.linalg.LinAlgError as exc:
        raise NumericFailureError(
            f"eigendecomposition did not converge: {exc}", seed=m.seed, replica=m.replica_index
        ) from exc
    vals.setflags(write=False)
    vecs.setflags(write=False)
    return SpectralDecomposition(n=m.n, eigenvalues=vals, eigenvectors=vecs)


def _check_index(dec_n: int, idx: int, name: str) -> None:
    if not 0 <= idx < dec_n:
        raise ContractError(f"index {name}={idx} out of range 0..{dec_n - 1}")


def matrix_function_entry(dec: SpectralDecomposition, phi: Callable, j: int, k: int) -> float:
    """phi(M)_jk = sum_a phi(lambda_a) Q_ja Q_ka."""
    _check_index(dec.n, j, "j")
    _check_index(dec.n, k, "k")
    q = dec.eigenvectors
    return float(np.sum(phi(dec.eigenvalues) * q[j, :] * q[k, :]))


def polynomial_entry(m: SymmetricMatrix, coefficients: Sequence[float], j: int) -> float:
    """(p(M))_jj by Horner-free power accumulation: u_m = M^m e_j, sum c_m u_m[j].

    Exact for polynomials (no eigendecomposition roundoff); O(deg * n^2).
    """
    _check_index(m.n, j, "j")
    coeffs = np.asarray(coefficients, dtype=float)
    dense = m.dense()
    u = np.zeros(m.n)
    u[j] = 1.0
    total = coeffs[0] if coeffs.size else 0.0
    for c in coeffs[1:]:
        u = dense @ u
        total += c * u[j]
    return float(total)


@dataclass(frozen=True, eq=False)
class PropagatorSample:
    """U_jk(t) on a time grid for requested (j, k) pairs.

    entries has shape (len(pairs), len(t_grid)); |entries| <= 1 and
    U_jj(0) = 1 exactly (U(0) = I structurally, not via roundoff).
    """

    t_grid: np.ndarray
    pairs: tuple[tuple[int, int], ...]
    entries: np.ndarray


def propagator_entries(dec: SpectralDecomposition, pairs: Sequence[tuple[int, int]],
                       t_grid: Sequence[float]) -> PropagatorSample:
    """U_jk(t) = sum_a e^{i t lambda_a} Q_ja Q_ka over the grid."""
    t = np.asarray(t_grid, dtype=float)
    if not np.all(np.isfinite(t)):
        raise ContractError("times must be finite")
    phases = np.exp(1j * np.multiply.outer(t, dec.eigenvalues))  # (T, n)
    q = dec.eigenvectors
    rows = []
    for j, k in pairs:
        _check_index(dec.n, j, "j")
        _check_index(dec.n, k, "k")
        vals = phases @ (q[j, :] * q[k, :])
        vals[t == 0.0] = 1.0 if j == k else 0.0  # U(0) = I is exact by definition
        rows.append(vals)
    entries = np.array(rows)
    entries.setflags(write=False)
    t = t.copy()
    t.setflags(write=False)
    return PropagatorSample(t_grid=t, pairs=tuple((int(j), int(k)) for j, k in pairs), entries=entries)


def _diag_u(dec: SpectralDecomposition, t: float) -> np.ndarray:
    """Vector of U_kk(t) over k."""
    if t == 0.0:
        return np.ones(dec.n, dtype=complex)
    phase = np.exp(1j * t * dec.eigenvalues)
    return (dec.eigenvectors**2) @ phase


def _row_u(dec: SpectralDecomposition, j: int, t: float) -> np.ndarray:
    """Vector of U_jk(t) over k."""
    if t == 0.0:
        row = np.zeros(dec.n, dtype=complex)
        row[j] = 1.0
        return row
    phase = np.exp(1j * t * dec.eigenvalues)
    return dec.eigenvectors @ (dec.eigenvectors[j, :] * phase)


def v_n2_sum(dec: SpectralDecomposition, j: int, t_tuple: Sequence[float]) -> complex:
    """v_n2(t_1..t_l) = sum_k prod_m U_jk(t_m), defined for l >= 3."""
    ts = [float(t) for t in t_tuple]
    if len(ts) < 3:
        raise ContractError(f"v_n2 requires at least 3 times, got {len(ts)}")
    _check_index(dec.n, j, "j")
    prod = np.ones(dec.n, dtype=complex)
    for t in ts:
        prod *= _row_u(dec, j, t)
    return complex(np.sum(prod))


@dataclass(frozen=True)
class LemmaStatistics:
    v_n: complex  # n^-1 Tr U(t1)
    v_n_pair: complex  # n^-1 sum_k U_kk(t1) U_kk(t2)
    v_n1: complex  # n^-1/2 sum_k U_jk(t1) U_kk(t2)
    v_n2: complex | None  # sum_k prod_m U_jk(t_m), only when len(t_tuple) >= 3


def lemma_statistics(dec: SpectralDecomposition, j: int, t_tuple: Sequence[float]) -> LemmaStatistics:
    """The four row/trace statistics at the given times.

    t_tuple needs >= 2 entries; v_n uses t1, the pair statistics use (t1, t2),
    and v_n2 uses the whole tuple when it has >= 3 entries (None otherwise).
    """
    ts = [float(t) for t in t_tuple]
    if len(ts) < 2:
        raise ContractError("t_tuple must contain at least 2 times")
    _check_index(dec.n, j, "j")
    t1, t2 = ts[0], ts[1]
    diag1 = _diag_u(dec, t1)
    diag2 = _diag_u(dec, t2)
    row1 = _row_u(dec, j, t1)
    return LemmaStatistics(
        v_n=complex(np.mean(np.exp(1j * t1 * dec.eigenvalues))) if t1 != 0.0 else 1.0 + 0.0j,
        v_n_pair=complex(np.mean(diag1 * diag2)),
        v_n1=complex(np.sum(row1 * diag2) / np.sqrt(dec.n)),
        v_n2=v_n2_sum(dec, j, ts) if len(ts) >= 3 else None,
    )
