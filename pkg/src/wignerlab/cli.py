"""Command-line entry point, JSON config parsing, and result persistence.

Subcommands: predict, simulate, volterra, lemma, report.  Exit codes: 0 on
success, 2 on validation/usage errors, 3 on numeric failure, 1 otherwise.
Errors are written to stderr as single-line JSON.

Primary outputs (result/prediction JSON, CSV tables) are byte-identical for a
fixed config and seed regardless of --threads; the run manifest records wall
time and is metadata, not a primary output.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from . import semicircle
from .ensembles import CONVENTIONS, KINDS, EnsembleSpec, make_entry_distribution
from .errors import ConfigError, NumericFailureError, WignerLabError
from .harness import (
    ExperimentConfig,
    J_POLICIES,
    default_threads,
    lemma_decay_experiment,
    run_entry_experiment,
)
from .limits import limit_cf, var_limit
from .seeding import derive_seed, splitmix64  # re-exported: the seed-derivation contract lives here
from .volterra import residual_table

__all__ = ["main", "run_cli", "parse_config", "derive_seed", "splitmix64", "config_hash"]


# ---------------------------------------------------------------------------
# config schema
# ---------------------------------------------------------------------------


def _check_keys(obj: dict, allowed: set[str], required: set[str], path: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{path}: expected an object", field=path)
    unknown = set(obj) - allowed
    if unknown:
        raise ConfigError(f"{path}: unknown key(s) {sorted(unknown)}", field=path)
    missing = required - set(obj)
    if missing:
        raise ConfigError(f"{path}: missing required key(s) {sorted(missing)}", field=path)


def _real_number(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{path}: expected a real number, got {value!r}", field=path)
    return float(value)


def _positive_int(value, path: str) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < 0:
        raise ConfigError(f"{path}: expected a nonnegative integer, got {value!r}", field=path)
    return value


def _real_list(values, path: str) -> list[float]:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"{path}: expected a nonempty list", field=path)
    out = []
    for i, v in enumerate(values):
        if isinstance(v, (dict, list)):
            # complex test functions are rejected: the distribution limit laws
            # are stated for real-valued test functions only
            raise ConfigError(
                f"{path}[{i}]: complex values are not supported in experiment configs",
                field=f"{path}[{i}]",
            )
        out.append(_real_number(v, f"{path}[{i}]"))
    return out


def _parse_phi(obj, path: str):
    _check_keys(obj, {"kind", "coefficients", "envelope_width", "grid", "values"}, {"kind"}, path)
    kind = obj["kind"]
    if kind == "polynomial":
        _check_keys(obj, {"kind", "coefficients"}, {"kind", "coefficients"}, path)
        return semicircle.polynomial(_real_list(obj["coefficients"], f"{path}.coefficients"))
    if kind == "gaussian_damped_polynomial":
        _check_keys(obj, {"kind", "coefficients", "envelope_width"}, {"kind", "coefficients"}, path)
        width = _real_number(obj.get("envelope_width", 1.0), f"{path}.envelope_width")
        return semicircle.gaussian_damped(_real_list(obj["coefficients"], f"{path}.coefficients"), width)
    if kind == "tabulated":
        _check_keys(obj, {"kind", "grid", "values"}, {"kind", "grid", "values"}, path)
        return semicircle.tabulated(
            _real_list(obj["grid"], f"{path}.grid"), _real_list(obj["values"], f"{path}.values")
        )
    raise ConfigError(f"{path}.kind: unknown test-function kind {kind!r}", field=f"{path}.kind")


def _parse_spec(obj, path: str) -> EnsembleSpec:
    _check_keys(obj, {"entry_dist", "convention", "w2"}, {"entry_dist"}, path)
    dist_obj = obj["entry_dist"]
    _check_keys(dist_obj, {"kind", "w", "params"}, {"kind", "w"}, f"{path}.entry_dist")
    kind = dist_obj["kind"]
    if kind not in KINDS:
        raise ConfigError(
            f"{path}.entry_dist.kind: unknown kind {kind!r}", field=f"{path}.entry_dist.kind"
        )
    w = _real_number(dist_obj["w"], f"{path}.entry_dist.w")
    if w <= 0:
        raise ConfigError(f"{path}.entry_dist.w: must be positive, got {w}", field=f"{path}.entry_dist.w")
    params = dist_obj.get("params")
    if params is not None:
        _check_keys(params, {"atoms", "probs"}, set(), f"{path}.entry_dist.params")
        params = {
            "atoms": _real_list(params.get("atoms", []), f"{path}.entry_dist.params.atoms"),
            "probs": _real_list(params.get("probs", []), f"{path}.entry_dist.params.probs"),
        }
    convention = obj.get("convention", "paper_symmetric")
    if convention not in CONVENTIONS:
        raise ConfigError(
            f"{path}.convention: unknown convention {convention!r}", field=f"{path}.convention"
        )
    w2 = _real_number(obj.get("w2", 2.0), f"{path}.w2")
    try:
        dist = make_entry_distribution(kind, w, params)
        return EnsembleSpec(entry_dist=dist, convention=convention, w2=w2)
    except WignerLabError as exc:
        raise ConfigError(f"{path}: {exc}", field=path) from exc


_TOP_KEYS = {
    "spec", "phi", "phi2", "n_list", "replicas", "root_seed",
    "j_policy", "j_explicit", "x_grid", "t_grid", "phi_eval",
}


def parse_config(path: str | Path) -> ExperimentConfig:
    """Load and validate an experiment config; unknown keys are rejected."""
    try:
        raw = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    try:
        obj = json.loads(raw)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(obj)


def config_from_dict(obj: dict) -> ExperimentConfig:
    _check_keys(obj, _TOP_KEYS, {"spec", "phi", "n_list", "replicas", "root_seed"}, "config")
    spec = _parse_spec(obj["spec"], "config.spec")
    phi = _parse_phi(obj["phi"], "config.phi")
    phi2 = _parse_phi(obj["phi2"], "config.phi2") if obj.get("phi2") is not None else None
    if not isinstance(obj["n_list"], list) or not obj["n_list"]:
        raise ConfigError("config.n_list: expected a nonempty list", field="config.n_list")
    n_list = tuple(_positive_int(n, f"config.n_list[{i}]") for i, n in enumerate(obj["n_list"]))
    j_policy = obj.get("j_policy", "first")
    if j_policy not in J_POLICIES:
        raise ConfigError(f"config.j_policy: unknown policy {j_policy!r}", field="config.j_policy")
    kwargs = dict(
        spec=spec,
        phi=phi,
        phi2=phi2,
        n_list=n_list,
        replicas=_positive_int(obj["replicas"], "config.replicas"),
        root_seed=_positive_int(obj["root_seed"], "config.root_seed"),
        j_policy=j_policy,
        phi_eval=obj.get("phi_eval", "auto"),
    )
    if obj.get("j_explicit") is not None:
        kwargs["j_explicit"] = _positive_int(obj["j_explicit"], "config.j_explicit")
    if obj.get("x_grid") is not None:
        kwargs["x_grid"] = tuple(_real_list(obj["x_grid"], "config.x_grid"))
    if obj.get("t_grid") is not None:
        kwargs["t_grid"] = tuple(_real_list(obj["t_grid"], "config.t_grid"))
    try:
        return ExperimentConfig(**kwargs)
    except WignerLabError as exc:
        raise ConfigError(f"config: {exc}") from exc


def config_hash(config_descriptor: dict) -> str:
    """64-bit hash of the canonicalized config (sorted keys, repr floats)."""
    canonical = json.dumps(config_descriptor, sort_keys=True, separators=(",", ":"))
    return hashlib.blake2b(canonical.encode(), digest_size=8).hexdigest()


# ---------------------------------------------------------------------------
# output writers
# ---------------------------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row in rows:
            writer.writerow([_fmt(v) for v in row])


def _write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, sort_keys=True, indent=1) + "\n")


def _write_manifest(out_dir: Path, cfg_hash: str, root_seed: int, threads: int,
                    wall: float, outputs: list[Path]) -> Path:
    manifest = {
        "config_hash": cfg_hash,
        "tool_version": __version__,
        "root_seed": root_seed,
        "threads": threads,
        "wall_time_s": wall,
        "outputs": [p.name for p in outputs],
    }
    path = out_dir / "manifest.json"
    _write_json(path, manifest)
    return path


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def _cmd_predict(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = _override_seed(cfg, args.seed)
    started = time.monotonic()
    pred = var_limit(cfg.phi, cfg.spec)
    cf = limit_cf(cfg.phi, cfg.spec, np.asarray(cfg.x_grid), prediction=pred)
    out = pred.to_dict()
    out["cf"] = [[float(x), float(z.real), float(z.imag)] for x, z in zip(cfg.x_grid, cf)]
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "prediction.json"
    _write_json(target, out)
    _write_manifest(out_dir, config_hash(cfg.descriptor()), cfg.root_seed, 1,
                    time.monotonic() - started, [target])
    print(f"wrote {target}")
    return 0


def _cmd_simulate(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = _override_seed(cfg, args.seed)
    threads = args.threads if args.threads is not None else default_threads()
    started = time.monotonic()
    result = run_entry_experiment(cfg, threads=threads)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = [out_dir / "result.json"]
    _write_json(outputs[0], result.to_dict())
    if args.raw:
        rows = []
        for p in result.per_n:
            for r, y in enumerate(p.samples):
                rows.append([p.n, r, p.j, float(y)])
        outputs.append(out_dir / "replicas.csv")
        _write_csv(outputs[-1], ["n", "replica", "j", "y_value"], rows)
    _write_manifest(out_dir, config_hash(cfg.descriptor()), cfg.root_seed, threads,
                    time.monotonic() - started, outputs)
    for p in outputs:
        print(f"wrote {p}")
    return 0


def _cmd_volterra(args) -> int:
    started = time.monotonic()
    h_values = [float(h) for h in args.h.split(",")]
    rows = residual_table(h_values=h_values, w=args.w, kappa4=args.kappa4, t_max=args.t_max)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "volterra_residuals.csv"
    _write_csv(
        target,
        ["case", "h", "residual", "order_estimate"],
        [[r["case"], r["h"], r["residual"], r["order_estimate"]] for r in rows],
    )
    _write_manifest(out_dir, config_hash({"h": h_values, "w": args.w, "kappa4": args.kappa4}),
                    0, 1, time.monotonic() - started, [target])
    print(f"wrote {target}")
    return 0


def _cmd_lemma(args) -> int:
    cfg = parse_config(args.config)
    if args.seed is not None:
        cfg = _override_seed(cfg, args.seed)
    threads = args.threads if args.threads is not None else default_threads()
    started = time.monotonic()
    report = lemma_decay_experiment(
        cfg.spec, cfg.n_list, cfg.j_policy, cfg.t_grid, cfg.replicas, cfg.root_seed, threads
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    target = out_dir / "lemma_decay.csv"
    header = ["statistic", "t", "n", "mean_re", "mean_im", "variance",
              "limit_re", "limit_im", "abs_gap", "var_slope"]
    _write_csv(target, header, [[r[k] for k in header] for r in report.to_rows()])
    _write_manifest(out_dir, config_hash(cfg.descriptor()), cfg.root_seed, threads,
                    time.monotonic() - started, [target])
    print(f"wrote {target}")
    return 0


def _cmd_report(args) -> int:
    for path in args.results:
        obj = json.loads(Path(path).read_text())
        print(f"== {path} ==")
        if "per_n" in obj:
            pred = obj.get("prediction", {})
            print(f"prediction: v_w={pred.get('v_w'):.6g} "
                  f"(goe={pred.get('v_goe'):.6g}, kappa4={pred.get('kappa4_term'):.6g}, "
                  f"diag={pred.get('diag_term'):.6g}), xstar_slope={pred.get('xstar_slope'):.6g}")
            header = f"{'n':>6} {'variance':>12} {'ci':>10} {'z':>8} {'k4':>12} {'ks':>8}"
            print(header)
            comparisons = {c["n"]: c for c in obj.get("comparison", {}).get("per_n", [])}
            for p in obj["per_n"]:
                comp = comparisons.get(p["n"], {})
                ks = p["ks"].get("ks_stat")
                ks_txt = f"{ks:.4f}" if isinstance(ks, float) and not np.isnan(ks) else "-"
                print(f"{p['n']:>6} {p['variance']:>12.6g} {p['variance_ci']:>10.3g} "
                      f"{comp.get('z_variance', float('nan')):>8.2f} "
                      f"{p['k_stats']['k4'][0]:>12.6g} {ks_txt:>8}")
        elif "v_w" in obj:
            print(json.dumps(obj, sort_keys=True, indent=1))
        else:
            print(json.dumps(obj, sort_keys=True)[:2000])
    return 0


def _override_seed(cfg: ExperimentConfig, seed: int) -> ExperimentConfig:
    return dataclasses.replace(cfg, root_seed=seed)


# ---------------------------------------------------------------------------
# argument parsing / dispatch
# ---------------------------------------------------------------------------


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wignerlab")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, config=True):
        if config:
            p.add_argument("--config", required=True, help="experiment config JSON")
            p.add_argument("--seed", type=int, default=None, help="override root seed")
        p.add_argument("--out", default=".", help="output directory")

    p = sub.add_parser("predict", help="closed-form limit prediction")
    common(p)
    p = sub.add_parser("simulate", help="Monte Carlo entry-element experiment")
    common(p)
    p.add_argument("--threads", type=int, default=None)
    p.add_argument("--raw", action="store_true", help="also write per-replica CSV")
    p = sub.add_parser("volterra", help="residual table for the integral-equation suite")
    common(p, config=False)
    p.add_argument("--h", default="0.04,0.02,0.01", help="comma-separated step sizes")
    p.add_argument("--w", type=float, default=1.0)
    p.add_argument("--kappa4", type=float, default=-2.0)
    p.add_argument("--t-max", type=float, default=2.0)
    p = sub.add_parser("lemma", help="propagator decay experiment")
    common(p)
    p.add_argument("--threads", type=int, default=None)
    p = sub.add_parser("report", help="summarize prior JSON outputs")
    p.add_argument("results", nargs="+")
    return parser


_DISPATCH = {
    "predict": _cmd_predict,
    "simulate": _cmd_simulate,
    "volterra": _cmd_volterra,
    "lemma": _cmd_lemma,
    "report": _cmd_report,
}


def _error_json(exc: Exception) -> str:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    field = getattr(exc, "field", None)
    if field:
        payload["field"] = field
    return json.dumps(payload, sort_keys=True)


def run_cli(argv: list[str]) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 2 if exc.code not in (0, None) else 0
    try:
        return _DISPATCH[args.command](args)
    except ConfigError as exc:
        print(_error_json(exc), file=sys.stderr)
        return 2
    except NumericFailureError as exc:
        print(_error_json(exc), file=sys.stderr)
        return 3
    except WignerLabError as exc:
        print(_error_json(exc), file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - the CLI boundary maps everything to exit codes
        print(_error_json(exc), file=sys.stderr)
        return 1


def main() -> None:
    sys.exit(run_cli(sys.argv[1:]))


if __name__ == "__main__":
    main()
