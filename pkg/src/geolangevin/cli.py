"""Command-line interface: ``sample``, ``diagnose``, ``fp`` and ``geocheck``.

Exit codes:
    0  success
    2  config error (nothing is written)
    3  runtime error while sampling
    4  partition, quadrature or transport-solver failure, or an empty trace
    5  Fokker-Planck step-size (CFL) or mass-conservation failure
    6  geocheck threshold breach
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from geolangevin.config import ConfigError, ExperimentConfig, load_config, parse_config
from geolangevin.diagnostics.fokker_planck import fp_evolve
from geolangevin.diagnostics.inequalities import grad_moment_check, lipschitz_estimate, lsi_lower_bound, rate_fit
from geolangevin.diagnostics.report import DiagnosticsReport, trace_series
from geolangevin.errors import (
    CFLViolation,
    EmptyWindow,
    FitDegenerate,
    GeoLangevinError,
    MassLeak,
    PartitionMismatch,
    QuadratureNotConverged,
    SolverInfeasible,
)
from geolangevin.geodesic import exp_ode, exp_sphere, retract_project
from geolangevin.geometry import Sphere
from geolangevin.sampler import read_trace_csv, run_chain, trace_to_csv
from geolangevin.target import normalize, reference_masses

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_DIAGNOSTICS = 4
EXIT_FP = 5
EXIT_GEOCHECK = 6

GEOCHECK_TOL = 1e-6
#: the projection retraction must agree with Exp at least to first order
RETRACTION_MIN_SLOPE = 1.9
RETRACTION_T = (0.1, 0.05, 0.025)
#: below this fraction of H(0) the entropy is at round-off and dH/dt is noise
FP_ENTROPY_FLOOR = 1e-10


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def git_blob_hash(data: bytes) -> str:
    """SHA-1 of ``data`` as ``git hash-object`` computes it."""
    h = hashlib.sha1()
    h.update(b"blob %d\0" % len(data))
    h.update(data)
    return h.hexdigest()


def _write(path: Path, text: str) -> str:
    data = text.encode()
    path.write_bytes(data)
    return git_blob_hash(data)


def _load(args) -> ExperimentConfig:
    if args.config is None:
        raise ConfigError("--config is required")
    return load_config(args.config, seed=args.seed, out=args.out)


def _out_dir(cfg: ExperimentConfig) -> Path:
    if not cfg.output_dir:
        raise ConfigError("no output directory: pass --out or set output.dir")
    return Path(cfg.output_dir)


def trace_name(variant: str, chain_index: int) -> str:
    return f"trace_{variant}_c{chain_index:03d}.csv"


# -- sample ------------------------------------------------------------------


def _sample_job(raw: dict, variant: str, chain_index: int) -> str:
    cfg = parse_config(raw)
    return trace_to_csv(run_chain(cfg.chain_config(variant, chain_index)))


def cmd_sample(args) -> int:
    try:
        cfg = _load(args)
        out = _out_dir(cfg)
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG

    jobs = [(v, c) for v in cfg.variants for c in range(cfg.sampler["n_chains"])]
    t0 = time.perf_counter()
    try:
        if len(jobs) == 1:
            texts = [_sample_job(cfg.raw, *jobs[0])]
        else:
            workers = min(len(jobs), os.cpu_count() or 1)
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_sample_job, cfg.raw, v, c) for v, c in jobs]
                texts = [f.result() for f in futures]
    except (GeoLangevinError, FloatingPointError, ValueError) as exc:
        _err(f"sampling failed: {exc}")
        return EXIT_RUNTIME
    wall = time.perf_counter() - t0

    out.mkdir(parents=True, exist_ok=True)
    entries = []
    for (v, c), text in zip(jobs, texts):
        name = trace_name(v, c)
        entries.append({
            "file": name,
            "variant": v,
            "chain_index": c,
            "epsilon": cfg.sampler["epsilon"],
            "rows": text.count("\n") - 1,
            "hash": _write(out / name, text),
        })
    tree = "".join(f"{e['hash']} {e['file']}\n" for e in entries).encode()
    manifest = {
        "schema": cfg.raw["schema"],
        "config": cfg.raw,
        "traces": entries,
        "content_hash": git_blob_hash(tree),
        "wall_time_s": round(wall, 3),
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    for e in entries:
        print(f"wrote {out / e['file']} ({e['rows']} rows)")
    return EXIT_OK


# -- diagnose ----------------------------------------------------------------


def _trace_epsilon(path: Path, default: float) -> float:
    manifest = path.parent / "manifest.json"
    if manifest.exists():
        for e in json.loads(manifest.read_text()).get("traces", []):
            if e.get("file") == path.name:
                return float(e["epsilon"])
    return default


def _manifest_traces(out: Path) -> list[Path]:
    manifest = out / "manifest.json"
    if not manifest.exists():
        raise ConfigError(f"no traces given and no manifest in {out}")
    return [out / e["file"] for e in json.loads(manifest.read_text())["traces"]]


def diagnose_trace(cfg: ExperimentConfig, trace, eps: float, partition, nu, dist, alpha0, L_hat) -> DiagnosticsReport:
    """DiagnosticsReport for the running histogram of one trace."""
    d = cfg.diagnostics
    if len(trace) == 0:
        raise EmptyWindow("trace has no stored points")
    last = int(trace.iterations[-1])
    cps = [k for k in cfg.checkpoints(last) if trace.iterations[0] <= k <= last]
    if not cps:
        raise EmptyWindow("no checkpoint falls inside the trace")
    series = trace_series(
        trace, cps, partition, nu,
        dist=dist if d["w2"] or d["talagrand"] else None,
        alpha0=alpha0 if d["talagrand"] else None,
    )
    report = DiagnosticsReport(
        kl_series=[(c.iteration, c.kl) for c in series],
        w2_series=[(c.iteration, c.w2) for c in series if c.w2 is not None],
        alpha_lower=alpha0,
        lipschitz_hat=L_hat,
        talagrand_ok=all(c.talagrand_ok is not False for c in series),
    )
    report.notes.append(f"epsilon={eps!r}; samples={len(trace)}; checkpoints={len(series)}")
    if d["rate_fit"]:
        if len(series) >= 8:
            try:
                fit = rate_fit(report.kl_series, eps)
                report.fitted_rate, report.fitted_bias = fit.rate, fit.bias
            except FitDegenerate as exc:
                report.fitted_bias = exc.bias
                report.notes.append(f"rate fit degenerate: {exc}")
        else:
            report.notes.append("rate fit skipped: fewer than 8 checkpoints")
    if d["talagrand"] and not report.talagrand_ok:
        bad = [c.iteration for c in series if c.talagrand_ok is False]
        report.notes.append(f"Talagrand bound violated at iterations {bad}")
    return report


def cmd_diagnose(args) -> int:
    try:
        cfg = _load(args)
        out = _out_dir(cfg)
        paths = [Path(p) for p in args.traces] if args.traces else _manifest_traces(out)
        partition = cfg.partition()
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG

    d = cfg.diagnostics
    m = cfg.manifold
    try:
        traces = []
        for p in paths:
            try:
                tr = read_trace_csv(p)
            except (OSError, ValueError) as exc:
                raise EmptyWindow(f"cannot read trace {p}: {exc}") from exc
            if len(tr) == 0:
                raise EmptyWindow(f"trace {p} is empty")
            if tr.points.shape[1] != m.coord_dim:
                raise PartitionMismatch(f"trace {p} has dimension {tr.points.shape[1]}, manifold needs {m.coord_dim}")
            traces.append(tr)

        Z, _ = normalize(cfg.target, m, d["quadrature_resolution"])
        nu = reference_masses(cfg.target, partition, Z)
        dist = partition.distance_matrix() if d["w2"] or d["talagrand"] else None
        alpha0 = lsi_lower_bound(m.diameter())
        L_hat = float("nan")
        if d["lipschitz"] or d["moments"]:
            rng = np.random.default_rng(cfg.sampler["seed"])
            L_hat = lipschitz_estimate(cfg.target, m, d["lipschitz_pairs"], rng)
        moment = None
        if d["moments"]:
            moment = grad_moment_check(cfg.target, m, nu, L_hat, m.intrinsic_dim)

        reports = []
        for p, tr in zip(paths, traces):
            eps = _trace_epsilon(p, cfg.sampler["epsilon"])
            rep = diagnose_trace(cfg, tr, eps, partition, nu, dist, alpha0, L_hat)
            rep.notes.append(f"Z={Z!r}")
            if moment is not None:
                verdict = "holds" if moment.holds_nu else "VIOLATED"
                rep.notes.append(
                    f"moment bound E_nu|grad f|^2={moment.e_nu:.6g} <= n*L={moment.bound_nu:.6g}: {verdict}"
                )
            reports.append((p, eps, rep))
    except (EmptyWindow, PartitionMismatch, SolverInfeasible, QuadratureNotConverged) as exc:
        _err(str(exc))
        return EXIT_DIAGNOSTICS
    except GeoLangevinError as exc:
        _err(f"diagnostics failed: {exc}")
        return EXIT_RUNTIME

    out.mkdir(parents=True, exist_ok=True)
    for p, eps, rep in reports:
        stem = p.stem
        (out / f"{stem}.report.json").write_text(rep.to_json() + "\n")
        (out / f"{stem}.series.csv").write_text(rep.series_csv())
        print(f"{stem}: final KL={rep.kl_series[-1][1]:.5g} plateau={rep.fitted_bias:.5g}")

    by_eps: dict[float, list[float]] = {}
    for _, eps, rep in reports:
        by_eps.setdefault(eps, []).append(rep.fitted_bias)
    if len(by_eps) >= 2:
        lo, hi = min(by_eps), max(by_eps)
        plateau = {e: float(np.mean(v)) for e, v in sorted(by_eps.items())}
        ratio = plateau[hi] / plateau[lo] if plateau[lo] > 0 else float("inf")
        summary = {
            "plateaus": [[e, plateau[e]] for e in plateau],
            "epsilon_high": hi,
            "epsilon_low": lo,
            "bias_ratio": ratio,
            "epsilon_ratio": hi / lo,
        }
        (out / "bias_ratio.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
        print(f"bias ratio KL plateau(eps={hi})/plateau(eps={lo}) = {ratio:.4g}")
    return EXIT_OK


# -- fp ----------------------------------------------------------------------


def cmd_fp(args) -> int:
    try:
        cfg = _load(args)
        out = _out_dir(cfg)
        if not (isinstance(cfg.manifold, Sphere) and cfg.manifold.n == 3):
            raise ConfigError("the Fokker-Planck solver is implemented on S^2 only")
    except ConfigError as exc:
        _err(str(exc))
        return EXIT_CONFIG

    fp = cfg.fp()
    try:
        res = fp_evolve(
            cfg.target,
            resolution=tuple(fp["resolution"]),
            t_end=fp["t_end"],
            dt=fp["dt"],
            rho0=None if fp["rho0"] == "uniform" else "nu",
            output_dt=fp["output_dt"],
            mass_tol=fp["mass_tol"],
        )
    except (CFLViolation, MassLeak) as exc:
        _err(str(exc))
        return EXIT_FP

    alpha0 = lsi_lower_bound(np.pi)
    rate = res.entropy_rate()
    late = (res.times > 0.05) & (res.fisher > 0) & (res.entropy > FP_ENTROPY_FLOOR * res.entropy[0])
    lemma = np.abs(rate[late] + res.fisher[late]) / res.fisher[late]
    envelope = np.exp(-2 * alpha0 * res.times) * res.entropy[0]
    summary = {
        "alpha0": alpha0,
        "dt": res.dt,
        "n_cells": res.grid.n_cells,
        "max_dissipation_rel_error": float(lemma.max()) if lemma.size else 0.0,
        "dissipation_checked_until": float(res.times[late][-1]) if lemma.size else 0.0,
        "output_dt": fp["output_dt"],
        "entropy_within_lsi_envelope": bool(np.all(res.entropy <= envelope + 1e-15)),
        "max_mass_drift": float(np.max(np.abs(res.mass - 1.0))),
    }
    out.mkdir(parents=True, exist_ok=True)
    lines = ["t,H,fisher,mass\n"]
    lines += [f"{t:.17g},{h:.17g},{i:.17g},{mm:.17g}\n" for t, h, i, mm in zip(res.times, res.entropy, res.fisher, res.mass)]
    (out / "fp.csv").write_text("".join(lines))
    (out / "fp_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    print(f"wrote {out / 'fp.csv'}: H(0)={res.entropy[0]:.5g} H(T)={res.entropy[-1]:.5g}")
    return EXIT_OK


# -- geocheck ----------------------------------------------------------------


def geocheck(n_steps: int = 64, n_samples: int = 1000, seed: int = 0) -> tuple[float, float]:
    """Max ODE-vs-closed-form Exp error and the Exp-vs-retraction log-log slope."""
    rng = np.random.default_rng(seed)
    S = Sphere(3)
    x = S.random_point(rng, n_samples)
    u = S.to_tangent(x, rng.standard_normal((n_samples, 3)))
    u /= np.linalg.norm(u, axis=-1, keepdims=True)
    v = u * rng.uniform(0.0, np.pi - 0.1, (n_samples, 1))
    err = float(np.max(np.linalg.norm(exp_ode(S, x, v, n_steps) - exp_sphere(x, v), axis=-1)))

    ts = np.array(RETRACTION_T)
    dev = [np.max(np.linalg.norm(exp_sphere(x, t * u) - retract_project(S, x, t * u), axis=-1)) for t in ts]
    slope = float(np.polyfit(np.log(ts), np.log(dev), 1)[0])
    return err, slope


def cmd_geocheck(args) -> int:
    if args.n_steps < 1 or args.n_samples < 1:
        _err("--n-steps and --n-samples must be positive")
        return EXIT_CONFIG
    err, slope = geocheck(args.n_steps, args.n_samples, args.seed or 0)
    ok_err = err <= args.tol
    ok_slope = slope >= RETRACTION_MIN_SLOPE
    print(f"max |exp_ode - exp| over {args.n_samples} samples (n_steps={args.n_steps}): {err:.3e} "
          f"[{'ok' if ok_err else 'FAIL'}, tol {args.tol:g}]")
    print(f"retraction deviation log-log slope: {slope:.3f} "
          f"[{'ok' if ok_slope else 'FAIL'}, need >= {RETRACTION_MIN_SLOPE}]")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        data = {"n_steps": args.n_steps, "n_samples": args.n_samples, "max_error": err, "retraction_slope": slope}
        (out / "geocheck.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    return EXIT_OK if ok_err and ok_slope else EXIT_GEOCHECK


# -- entry point ---------------------------------------------------------------


def _u64(text: str) -> int:
    v = int(text, 0)
    if not 0 <= v < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment JSON, or a bundled recipe name (figure1, figure2, figure3)")
    common.add_argument("--out", help="output directory (overrides output.dir)")
    common.add_argument("--seed", type=_u64, help="RNG seed (overrides sampler.seed)")

    parser = argparse.ArgumentParser(prog="geolangevin", description="Geodesic Langevin sampling on closed manifolds.")
    sub = parser.add_subparsers(dest="command", required=True)
    p = sub.add_parser("sample", parents=[common], help="run chains and write trace CSVs")
    p.set_defaults(func=cmd_sample)
    p = sub.add_parser("diagnose", parents=[common], help="KL/W2 diagnostics of trace CSVs")
    p.add_argument("traces", nargs="*", help="trace CSVs (default: those listed in OUT/manifest.json)")
    p.set_defaults(func=cmd_diagnose)
    p = sub.add_parser("fp", parents=[common], help="Fokker-Planck entropy dissipation on S^2")
    p.set_defaults(func=cmd_fp)
    p = sub.add_parser("geocheck", parents=[common], help="geodesic integrator and retraction checks")
    p.add_argument("--n-steps", type=int, default=64, help="RK4 steps of the geodesic ODE")
    p.add_argument("--n-samples", type=int, default=1000)
    p.add_argument("--tol", type=float, default=GEOCHECK_TOL)
    p.set_defaults(func=cmd_geocheck)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
