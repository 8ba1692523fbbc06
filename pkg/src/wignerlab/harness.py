"""Monte Carlo experiments against the closed-form limit laws.

run_entry_experiment draws R matrices per size n, forms the centered scaled
diagonal elements y_r = sqrt(n) (phi(M_r)_jj - mean), and estimates variance,
cumulants and the empirical characteristic function with jackknife/analytic
uncertainties; lemma_decay_experiment measures the propagator trace/row
statistics whose means and variances must collapse onto their limits.

Centering uses the cross-replica sample mean rather than the semicircle
integral: the finite-n expectation differs from the limit by O(1/n), which the
sqrt(n) scaling would otherwise turn into an O(n^-1/2) bias.

Replicas are embarrassingly parallel: each one is keyed by (root seed, n,
replica index), results are reduced in replica order, so outputs are
bit-identical for any thread count.
"""

from __future__ import annotations

import hashlib
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.special import ndtr

from .cumulants import _k_stats_from_power_sums, sample_cumulants
from .ensembles import EnsembleSpec, sample_matrix
from .errors import ContractError, ProvenanceError
from .limits import LimitPrediction, cov_limit_wigner, limit_cf, limit_cumulants, var_limit
from .semicircle import POLYNOMIAL, TestFunction, v_of_t
from .spectral import eigh, lemma_statistics, matrix_function_entry

J_POLICIES = ("first", "middle", "last", "explicit")

KS_COEFFICIENT = 1.63  # asymptotic alpha ~ 0.01 quantile; approximate under fitted parameters

FINITE_SIZE_CF_BUDGET = 0.05  # empirical O(n^-1/2) allowance at desk-scale n


def default_threads() -> int:
    env = os.environ.get("WIGNERLAB_THREADS")
    if env:
        return max(1, int(env))
    return min(os.cpu_count() or 1, 8)


def resolve_j(policy: str, n: int, explicit: int | None = None) -> int:
    """0-based diagonal index for a policy; 'middle' is the 1-based ceil(n/2)."""
    if policy == "first":
        return 0
    if policy == "middle":
        return (n - 1) // 2
    if policy == "last":
        return n - 1
    if policy == "explicit":
        if explicit is None or not 0 <= explicit < n:
            raise ContractError(f"explicit j={explicit} out of range 0..{n - 1}")
        return explicit
    raise ContractError(f"unknown j policy {policy!r}")


@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    spec: EnsembleSpec
    phi: TestFunction
    n_list: tuple[int, ...]
    replicas: int
    root_seed: int
    phi2: TestFunction | None = None
    j_policy: str = "first"
    j_explicit: int | None = None
    x_grid: tuple[float, ...] = (0.25, 0.5, 0.75, 1.0)
    t_grid: tuple[float, ...] = (1.0,)
    phi_eval: str = "auto"  # auto | spectral | matvec

    def __post_init__(self):
        if self.replicas < 100:
            raise ContractError(f"replicas must be >= 100, got {self.replicas}")
        if any(n < 16 for n in self.n_list) or not self.n_list:
            raise ContractError("every n must be >= 16")
        if self.j_policy not in J_POLICIES:
            raise ContractError(f"unknown j policy {self.j_policy!r}")
        for name, grid in (("x_grid", self.x_grid), ("t_grid", self.t_grid)):
            if not all(math.isfinite(v) for v in grid):
                raise ContractError(f"{name} must be finite")
        if self.phi_eval not in ("auto", "spectral", "matvec"):
            raise ContractError(f"unknown phi_eval mode {self.phi_eval!r}")
        if self.phi_eval == "matvec" and not self._all_polynomial():
            raise ContractError("matvec evaluation requires polynomial test functions")

    def _all_polynomial(self) -> bool:
        phis = [self.phi] + ([self.phi2] if self.phi2 is not None else [])
        return all(p.kind == POLYNOMIAL for p in phis)

    def use_matvec(self) -> bool:
        if self.phi_eval == "spectral":
            return False
        if self.phi_eval == "matvec":
            return True
        return self._all_polynomial()

    def descriptor(self) -> dict:
        d = {
            "spec": self.spec.descriptor(),
            "phi": self.phi.descriptor(),
            "n_list": list(self.n_list),
            "replicas": self.replicas,
            "root_seed": self.root_seed,
            "j_policy": self.j_policy,
            "x_grid": list(self.x_grid),
            "t_grid": list(self.t_grid),
            "phi_eval": self.phi_eval,
        }
        if self.phi2 is not None:
            d["phi2"] = self.phi2.descriptor()
        if self.j_explicit is not None:
            d["j_explicit"] = self.j_explicit
        return d


# ---------------------------------------------------------------------------
# replica evaluation
# ---------------------------------------------------------------------------


def _parallel_map(fn: Callable[[int], np.ndarray], count: int, threads: int) -> list:
    if threads <= 1:
        return [fn(i) for i in range(count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, range(count)))


def matrix_element_samples(spec: EnsembleSpec, n: int, j: int, phis: Sequence[TestFunction],
                           root_seed: int, replicas: int, use_matvec: bool,
                           threads: int = 1) -> np.ndarray:
    """phi(M_r)_jj for each replica and test function; shape (replicas, len(phis)).

    Polynomial test functions admit an exact power-accumulation route
    (use_matvec) that avoids the O(n^3) decomposition; otherwise each replica
    is diagonalized once and all functions are read off the same spectrum.
    """
    coeff_list = [np.asarray(p.coefficients, dtype=float) for p in phis] if use_matvec else None

    def one_replica(r: int) -> np.ndarray:
        m = sample_matrix(spec, n, root_seed, r)
        if use_matvec:
            dense = m.dense()
            deg = max(c.size for c in coeff_list) - 1
            powers = np.empty(deg + 1)
            powers[0] = 1.0
            u = np.zeros(n)
            u[j] = 1.0
            for k in range(1, deg + 1):
                u = dense @ u
                powers[k] = u[j]
            return np.array([float(c @ powers[: c.size]) for c in coeff_list])
        dec = eigh(m)
        return np.array([matrix_function_entry(dec, p, j, j) for p in phis])

    rows = _parallel_map(one_replica, replicas, threads)
    return np.vstack(rows)


# ---------------------------------------------------------------------------
# estimators
# ---------------------------------------------------------------------------


def empirical_cf(samples: Sequence[float], x_grid: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    """(1/R) sum e^{i x y} with pointwise CI radius 1.96 sqrt((1-|.|^2)/R), capped."""
    y = np.asarray(samples, dtype=float).ravel()
    if y.size < 100:
        raise ContractError("empirical_cf needs at least 100 samples")
    x = np.asarray(x_grid, dtype=float)
    values = np.exp(1j * np.multiply.outer(x, y)).mean(axis=1)
    radius = 1.96 * np.sqrt(np.maximum(1.0 - np.abs(values) ** 2, 0.0) / y.size)
    return values, np.minimum(radius, 1.96 / math.sqrt(y.size))


def gaussian_limit_test(samples: Sequence[float]) -> dict:
    """KS statistic against a Gaussian fitted from the sample.

    pass iff ks <= 1.63/sqrt(R); approximate because the parameters are
    fitted.  A zero-variance sample is reported degenerate, not failed.
    """
    y = np.asarray(samples, dtype=float).ravel()
    if y.size < 500:
        raise ContractError("gaussian_limit_test needs at least 500 samples")
    threshold = KS_COEFFICIENT / math.sqrt(y.size)
    sd = float(np.std(y, ddof=1))
    if sd == 0.0:
        return {"ks_stat": float("nan"), "threshold": threshold, "passed": None, "degenerate": True}
    z = np.sort((y - np.mean(y)) / sd)
    cdf = ndtr(z)
    i = np.arange(1, y.size + 1)
    ks = float(np.max(np.maximum(i / y.size - cdf, cdf - (i - 1) / y.size)))
    return {"ks_stat": ks, "threshold": threshold, "passed": bool(ks <= threshold), "degenerate": False}


def _jackknife_cov(a: np.ndarray, b: np.ndarray) -> tuple[float, float]:
    """(sample covariance, delete-1 jackknife se)."""
    r = a.size
    sa, sb, sab = float(a.sum()), float(b.sum()), float((a * b).sum())
    cov = (sab - sa * sb / r) / (r - 1)
    sa_i, sb_i, sab_i = sa - a, sb - b, sab - a * b
    loo = (sab_i - sa_i * sb_i / (r - 1)) / (r - 2)
    se = math.sqrt((r - 1) / r * float(np.sum((loo - loo.mean()) ** 2)))
    return cov, se


# ---------------------------------------------------------------------------
# entry-element experiment
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class PerNResult:
    n: int
    j: int
    mean_element: float  # sample mean of phi(M)_jj before scaling
    variance: float  # k2 of sqrt(n)-scaled centered elements
    variance_ci: float  # 1.96 * jackknife se
    k_stats: dict  # k2..k4 with jackknife se
    excess_kurtosis: tuple[float, float]  # (k4/k2^2, jackknife se)
    cf: list  # rows (x, Re, Im, ci_radius)
    ks: dict
    covariance: tuple[float, float] | None  # (n * cov, ci) when phi2 present
    samples_hash: str
    samples: np.ndarray = field(repr=False, default=None)

    def to_dict(self) -> dict:
        def clean(v):
            return None if isinstance(v, float) and math.isnan(v) else v

        d = {
            "n": self.n,
            "j": self.j,
            "mean_element": self.mean_element,
            "variance": self.variance,
            "variance_ci": self.variance_ci,
            "k_stats": self.k_stats,
            "excess_kurtosis": [clean(v) for v in self.excess_kurtosis],
            "cf": [[float(v) for v in row] for row in self.cf],
            "ks": {k: clean(v) for k, v in self.ks.items()},
            "samples_hash": self.samples_hash,
        }
        if self.covariance is not None:
            d["covariance"] = list(self.covariance)
        return d


@dataclass(frozen=True, eq=False)
class ExperimentResult:
    config: dict
    per_n: list
    prediction: LimitPrediction
    cov_prediction: float | None
    comparison: dict

    def to_dict(self) -> dict:
        d = {
            "config": self.config,
            "per_n": [p.to_dict() for p in self.per_n],
            "prediction": self.prediction.to_dict(),
            "comparison": self.comparison,
        }
        if self.cov_prediction is not None:
            d["cov_prediction"] = self.cov_prediction
        return d


def _excess_kurtosis_jackknife(y: np.ndarray) -> tuple[float, float]:
    """g2 = k4/k2^2 with delete-1 jackknife se, from leave-one-out power sums."""
    yc = y - y.mean()
    r = yc.size
    powers = [yc, yc**2, yc**3, yc**4]
    s = [float(p.sum()) for p in powers]
    _, k2, _, k4 = _k_stats_from_power_sums(*s, r)
    if k2 == 0.0:
        return float("nan"), 0.0  # degenerate sample: kurtosis undefined
    g2 = k4 / k2**2
    lo = [sp - p for sp, p in zip(s, powers)]
    _, k2i, _, k4i = _k_stats_from_power_sums(*lo, r - 1)
    g2i = k4i / k2i**2
    se = math.sqrt((r - 1) / r * float(np.sum((g2i - g2i.mean()) ** 2)))
    return float(g2), se


def run_entry_experiment(cfg: ExperimentConfig, threads: int | None = None) -> ExperimentResult:
    """Full estimation pipeline for one (phi, ensemble) pair over cfg.n_list."""
    threads = default_threads() if threads is None else threads
    phis = [cfg.phi] + ([cfg.phi2] if cfg.phi2 is not None else [])
    prediction = var_limit(cfg.phi, cfg.spec)
    cov_prediction = (
        float(cov_limit_wigner(cfg.phi, cfg.phi2, cfg.spec)) if cfg.phi2 is not None else None
    )
    per_n: list[PerNResult] = []
    for n in cfg.n_list:
        j = resolve_j(cfg.j_policy, n, cfg.j_explicit)
        elements = matrix_element_samples(
            cfg.spec, n, j, phis, cfg.root_seed, cfg.replicas, cfg.use_matvec(), threads
        )
        raw = elements[:, 0]
        y = math.sqrt(n) * (raw - raw.mean())
        stats = sample_cumulants(y, order=4)
        cf_values, cf_ci = empirical_cf(y, cfg.x_grid)
        ks = gaussian_limit_test(y) if cfg.replicas >= 500 else {
            "ks_stat": float("nan"), "threshold": float("nan"), "passed": None, "degenerate": False,
        }
        covariance = None
        if cfg.phi2 is not None:
            cov, cov_se = _jackknife_cov(elements[:, 0], elements[:, 1])
            covariance = (n * cov, n * 1.96 * cov_se)
        per_n.append(
            PerNResult(
                n=n,
                j=j,
                mean_element=float(raw.mean()),
                variance=stats.k2,
                variance_ci=1.96 * stats.se[1],
                k_stats={
                    "k2": [stats.k2, stats.se[1]],
                    "k3": [stats.k3, stats.se[2]],
                    "k4": [stats.k4, stats.se[3]],
                },
                excess_kurtosis=_excess_kurtosis_jackknife(y),
                cf=[
                    [float(x), float(v.real), float(v.imag), float(c)]
                    for x, v, c in zip(cfg.x_grid, cf_values, cf_ci)
                ],
                ks=ks,
                covariance=covariance,
                samples_hash=hashlib.blake2b(y.tobytes(), digest_size=8).hexdigest(),
                samples=y,
            )
        )
    comparison = compare_with_prediction_rows(per_n, prediction, cfg, cov_prediction)
    return ExperimentResult(
        config=cfg.descriptor(),
        per_n=per_n,
        prediction=prediction,
        cov_prediction=cov_prediction,
        comparison=comparison,
    )


def _safe_z(diff: float, ci: float) -> float:
    if ci == 0.0:
        return 0.0 if diff == 0.0 else math.inf
    return diff / ci


def compare_with_prediction_rows(per_n: Sequence[PerNResult], prediction: LimitPrediction,
                                 cfg: ExperimentConfig, cov_prediction: float | None = None) -> dict:
    """z-scores of every estimate against its limit, one record per n."""
    kappas = limit_cumulants(cfg.phi, cfg.spec, 4)
    cf_pred = limit_cf(cfg.phi, cfg.spec, np.asarray(cfg.x_grid), prediction=prediction)
    rows = []
    for p in per_n:
        z_var = _safe_z(p.variance - prediction.v_w, p.variance_ci)
        z_k3 = _safe_z(p.k_stats["k3"][0] - kappas[2], 1.96 * p.k_stats["k3"][1])
        z_k4 = _safe_z(p.k_stats["k4"][0] - kappas[3], 1.96 * p.k_stats["k4"][1])
        cf_rows = []
        for (x, re, im, ci), zp in zip(p.cf, cf_pred):
            gap = abs(complex(re, im) - zp)
            cf_rows.append({"x": x, "gap": gap, "ci": ci, "within_budget": bool(gap <= ci + FINITE_SIZE_CF_BUDGET)})
        record = {
            "n": p.n,
            "z_variance": z_var,
            "z_k3": z_k3,
            "z_k4": z_k4,
            "cf": cf_rows,
            "variance_ok": bool(abs(z_var) <= 3.0),
            "cf_ok": bool(all(r["within_budget"] for r in cf_rows)),
        }
        if cov_prediction is not None and p.covariance is not None:
            record["z_covariance"] = _safe_z(p.covariance[0] - cov_prediction, p.covariance[1])
        rows.append(record)
    return {
        "per_n": rows,
        "note": "finite-size bias is O(n^-1/2) and is not subtracted from the estimates",
    }


def compare_with_prediction(result: ExperimentResult, prediction: LimitPrediction) -> dict:
    """Re-compare a result against an externally supplied prediction.

    The (phi, ensemble) provenance keys must match the ones the result was
    produced under.
    """
    if prediction.ensemble_ref != result.config["spec"] or prediction.phi_ref != result.config["phi"]:
        raise ProvenanceError("prediction and result were built from different (phi, ensemble) pairs")
    rows = []
    for p in result.per_n:
        z_var = _safe_z(p.variance - prediction.v_w, p.variance_ci)
        rows.append({"n": p.n, "z_variance": z_var, "variance_ok": bool(abs(z_var) <= 3.0)})
    return {"per_n": rows, "note": result.comparison["note"]}


# ---------------------------------------------------------------------------
# propagator decay experiment
# ---------------------------------------------------------------------------

DECAY_STATISTICS = ("U_jj", "v_n", "v_n_pair", "v_n1", "v_n2")


@dataclass(frozen=True, eq=False)
class DecayReport:
    spec: dict
    t_grid: tuple[float, ...]
    replicas: int
    root_seed: int
    rows: list  # records {statistic, t, n, mean, variance, limit, abs_gap}
    slopes: dict  # (statistic, t) -> log-log slope of variance vs n

    def to_rows(self) -> list[dict]:
        out = []
        for r in self.rows:
            key = (r["statistic"], r["t"])
            out.append(
                {
                    "statistic": r["statistic"],
                    "t": r["t"],
                    "n": r["n"],
                    "mean_re": r["mean"].real,
                    "mean_im": r["mean"].imag,
                    "variance": r["variance"],
                    "limit_re": r["limit"].real,
                    "limit_im": r["limit"].imag,
                    "abs_gap": r["abs_gap"],
                    "var_slope": self.slopes[key],
                }
            )
        return out


def lemma_decay_experiment(spec: EnsembleSpec, n_list: Sequence[int], j_policy: str,
                           t_grid: Sequence[float], replicas: int, root_seed: int,
                           threads: int | None = None) -> DecayReport:
    """Means and variances of the propagator statistics across matrix sizes.

    For each t in t_grid the five statistics are evaluated with time tuples
    (t), (t, t), (t, t, t); their replica variances are regressed log-log
    against n, and means are compared with the limiting values.
    """
    sizes = [int(n) for n in n_list]
    if len(sizes) < 4 or max(sizes) < 8 * min(sizes):
        raise ContractError(
            "decay experiments need at least 4 sizes spanning an 8x range"
        )
    threads = default_threads() if threads is None else threads
    ts = [float(t) for t in t_grid]
    w = spec.w

    def one_replica_factory(n: int, j: int) -> Callable[[int], np.ndarray]:
        def run(r: int) -> np.ndarray:
            dec = eigh(sample_matrix(spec, n, root_seed, r))
            out = np.empty(len(ts) * len(DECAY_STATISTICS), dtype=complex)
            for i, t in enumerate(ts):
                stats = lemma_statistics(dec, j, (t, t, t))
                base = i * len(DECAY_STATISTICS)
                out[base + 0] = _u_jj(dec, j, t)
                out[base + 1] = stats.v_n
                out[base + 2] = stats.v_n_pair
                out[base + 3] = stats.v_n1
                out[base + 4] = stats.v_n2
            return out

        return run

    rows = []
    variances: dict[tuple[str, float], dict[int, float]] = {}
    for n in n_list:
        j = resolve_j(j_policy, int(n))
        samples = np.vstack(_parallel_map(one_replica_factory(int(n), j), replicas, threads))
        for i, t in enumerate(ts):
            limits = {
                "U_jj": complex(v_of_t(t, w)),
                "v_n": complex(v_of_t(t, w)),
                "v_n_pair": complex(v_of_t(t, w) ** 2),
                "v_n1": 0.0 + 0.0j,
                "v_n2": complex(v_of_t(t, w) ** 3),
            }
            for s_idx, stat in enumerate(DECAY_STATISTICS):
                col = samples[:, i * len(DECAY_STATISTICS) + s_idx]
                mean = complex(col.mean())
                var = float(np.sum(np.abs(col - mean) ** 2) / (col.size - 1))
                rows.append(
                    {
                        "statistic": stat,
                        "t": t,
                        "n": int(n),
                        "mean": mean,
                        "variance": var,
                        "limit": limits[stat],
                        "abs_gap": abs(mean - limits[stat]),
                    }
                )
                variances.setdefault((stat, t), {})[int(n)] = var
    slopes = {}
    for key, by_n in variances.items():
        ns = np.array(sorted(by_n))
        vs = np.array([by_n[int(n)] for n in ns])
        if np.all(vs > 0):
            slopes[key] = float(np.polyfit(np.log(ns), np.log(vs), 1)[0])
        else:
            slopes[key] = float("nan")
    return DecayReport(
        spec=spec.descriptor(),
        t_grid=tuple(ts),
        replicas=replicas,
        root_seed=root_seed,
        rows=rows,
        slopes=slopes,
    )


def _u_jj(dec, j: int, t: float) -> complex:
    if t == 0.0:
        return 1.0 + 0.0j
    q_row = dec.eigenvectors[j, :]
    return complex(np.sum(q_row * q_row * np.exp(1j * t * dec.eigenvalues)))
