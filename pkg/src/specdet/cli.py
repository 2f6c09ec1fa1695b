"""Command-line entry point: one binary, grouped subcommands."""

from __future__ import annotations

import json
import sys
import time
from pathlib import Path

import click
import numpy as np

from . import __version__
from .core import (Boundary, ContinuumParams, ModelParams, RandomStream,
                   load_params)
from .harness import (ComparisonReport, ExperimentConfig, emit_curves,
                      run_experiment, validate_all, write_artifacts, _git_describe)


def _write_table(ctx, path: Path, header: str, rows: list) -> Path:
    """Write a table as CSV or JSON per the global --format flag."""
    if ctx.obj["fmt"] == "json":
        path = path.with_suffix(".rows.json")
        cols = header.split(",")
        path.write_text(json.dumps(
            {"columns": cols,
             "rows": [dict(zip(cols, r.split(","))) for r in rows]}, indent=1))
    else:
        path.write_text("\n".join([header] + rows) + "\n")
    return path


def _sidecar(path: Path, payload: dict) -> None:
    payload = dict(payload)
    payload.setdefault("build", _git_describe())
    payload.setdefault("version", __version__)
    payload.setdefault("timestamp", time.strftime("%Y-%m-%dT%H:%M:%S"))
    path.write_text(json.dumps(payload, indent=2, default=str))


def _scale_columns(path: Path, cols, factor: float) -> None:
    lines = path.read_text().splitlines()
    head = lines[0].split(",")
    idx = [head.index(c) for c in cols if c in head]
    out = [lines[0]]
    for line in lines[1:]:
        parts = line.split(",")
        for i in idx:
            parts[i] = repr(float(parts[i]) * factor)
        out.append(",".join(parts))
    path.write_text("\n".join(out) + "\n")


@click.group()
@click.option("--seed", type=int, default=0, show_default=True,
              help="Base seed for all stochastic work.")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Worker processes for ensemble jobs.")
@click.option("--out", "out_dir", type=click.Path(), default="out",
              show_default=True, help="Output directory.")
@click.option("--format", "fmt", type=click.Choice(["csv", "json"]),
              default="csv", show_default=True)
@click.version_option(__version__)
@click.pass_context
def main(ctx, seed, workers, out_dir, fmt):
    """Spectral-determinant moments of random block operators: closed forms,
    chain determinants, and eigenvalue-flow simulation."""
    ctx.ensure_object(dict)
    ctx.obj.update(seed=seed, workers=workers, out=Path(out_dir), fmt=fmt)


# -- analytic ---------------------------------------------------------------

@main.group()
def analytic():
    """Closed-form curves (densities, growth rates, barriers)."""


def _units_option(fn):
    return click.option("--units", type=click.Choice(["raw", "j"]), default="raw",
                        show_default=True,
                        help="Report energies raw or in units of J.")(fn)


@analytic.command("dos")
@click.option("--tilde-j", type=float, default=1.0, show_default=True)
@click.option("--lo", type=float, default=None)
@click.option("--hi", type=float, default=None)
@click.option("--points", type=int, default=500, show_default=True)
@_units_option
@click.pass_context
def analytic_dos(ctx, tilde_j, lo, hi, points, units):
    """Continuum d=1 spectral density rho(alpha)."""
    out = ctx.obj["out"] / "dos.csv"
    kw = dict(tilde_j=tilde_j, points=points)
    if lo is not None:
        kw["lo"] = lo
    if hi is not None:
        kw["hi"] = hi
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_curves("dos", out, **kw)
    if units == "j":
        _scale_columns(out, ["alpha"], 1.0 / tilde_j)
        _scale_columns(out, ["rho"], tilde_j)
    _sidecar(out.with_suffix(".json"), {"kind": "dos", "tilde_j": tilde_j,
                                        "units": units, "seed": ctx.obj["seed"]})
    click.echo(str(out))


@analytic.command("sigma-q")
@click.option("--config", type=click.Path(exists=True), default=None,
              help="Model config (d=0 or lattice); overrides the flags below.")
@click.option("--d", "dim", type=int, default=0, show_default=True)
@click.option("--j", type=float, default=1.0, show_default=True)
@click.option("--mu", type=float, default=0.5, show_default=True)
@click.option("--q-lo", type=float, default=-0.5, show_default=True)
@click.option("--q-hi", type=float, default=1.9, show_default=True)
@click.option("--points", type=int, default=60, show_default=True)
@click.option("--continuum", is_flag=True, help="Use the d=1 continuum closed forms.")
@click.pass_context
def analytic_sigma_q(ctx, config, dim, j, mu, q_lo, q_hi, points, continuum):
    """Moment growth rate sigma(q)."""
    from .pastur import Continuum1D
    if config:
        params, _ = load_params(config)
        grid = None
    else:
        params = ModelParams(d=1 if continuum else dim, N=1,
                             L=1 if (continuum or dim == 0) else 8, J=j, mu=mu)
        grid = Continuum1D() if continuum else None
    out = ctx.obj["out"] / "sigma_q.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_curves("sigma-q", out, params=params, grid=grid, q_lo=q_lo, q_hi=q_hi,
                points=points)
    _sidecar(out.with_suffix(".json"), {"kind": "sigma-q", "seed": ctx.obj["seed"],
                                        "mu": params.mu, "j": params.J, "d": params.d})
    click.echo(str(out))


@analytic.command("rate")
@click.option("--j", type=float, default=1.0, show_default=True)
@click.option("--mu", type=float, default=0.5, show_default=True)
@click.option("--points", type=int, default=100, show_default=True)
@click.pass_context
def analytic_rate(ctx, j, mu, points):
    """Large-deviation rate function phi(e) for the d=0 model."""
    params = ModelParams(d=0, N=1, L=1, J=j, mu=mu)
    out = ctx.obj["out"] / "rate.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_curves("rate", out, params=params, points=points)
    _sidecar(out.with_suffix(".json"), {"kind": "rate", "mu": mu, "j": j,
                                        "seed": ctx.obj["seed"]})
    click.echo(str(out))


@analytic.command("barrier")
@click.option("--beta", type=float, default=2.0, show_default=True)
@click.option("--depth", type=float, default=5.0, show_default=True)
@click.option("--points", type=int, default=200, show_default=True)
@click.pass_context
def analytic_barrier(ctx, beta, depth, points):
    """Barrier height U(E) below the spectral edge."""
    out = ctx.obj["out"] / "barrier.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_curves("barrier", out, beta=beta, depth=depth, points=points)
    _sidecar(out.with_suffix(".json"), {"kind": "barrier", "beta": beta,
                                        "seed": ctx.obj["seed"]})
    click.echo(str(out))


@analytic.command("jconst")
@click.option("--beta", type=float, default=2.0, show_default=True)
@click.option("--lo", type=float, default=-4.0, show_default=True)
@click.option("--hi", type=float, default=3.0, show_default=True)
@click.option("--points", type=int, default=200, show_default=True)
@click.pass_context
def analytic_jconst(ctx, beta, lo, hi, points):
    """Stationary-resolvent integration constant vs energy."""
    out = ctx.obj["out"] / "jconst.csv"
    out.parent.mkdir(parents=True, exist_ok=True)
    emit_curves("jconst", out, beta=beta, lo=lo, hi=hi, points=points)
    _sidecar(out.with_suffix(".json"), {"kind": "jconst", "beta": beta,
                                        "seed": ctx.obj["seed"]})
    click.echo(str(out))


# -- operator ---------------------------------------------------------------

@main.group()
def operator():
    """Disorder ensembles: Monte Carlo moments and spectral histograms."""


@operator.command("mc")
@click.option("--config", type=click.Path(exists=True), required=True)
@click.option("--q", "q_spec", default="0,0.5,1", show_default=True)
@click.option("--samples", type=int, default=10000, show_default=True)
@click.option("--out", "out_name", default="moments.csv", show_default=True)
@click.pass_context
def operator_mc(ctx, config, q_spec, samples, out_name):
    """Reduced-moment growth-rate estimates over disorder realizations."""
    from .operator import moment_mc
    params, file_seed = load_params(config)
    seed = ctx.obj["seed"] or file_seed
    qs = [float(v) for v in q_spec.split(",") if v.strip()]
    t0 = time.time()
    res = moment_mc(params, qs, samples, RandomStream(seed, 0),
                    workers=ctx.obj["workers"])
    base = ctx.obj["out"] / out_name
    base.parent.mkdir(parents=True, exist_ok=True)
    rows = [f"{float(r.q)!r},{float(r.sigma_hat)!r},{float(r.stderr)!r},"
            f"{r.sample_count},{float(r.e_mean)!r},{float(r.e_std)!r}" for r in res]
    out = _write_table(ctx, base, "q,sigma_hat,stderr,samples,e_mean,e_std", rows)
    _sidecar(base.with_name(base.stem + "_meta.json"), {
        "kind": "moments-mc", "seed": seed, "samples": samples, "q": qs,
        "params": {"d": params.d, "n": params.N, "l": params.L, "t": params.t,
                   "j": params.J, "c": params.c, "mu": params.mu, "e": params.E,
                   "boundary": params.boundary.value},
        "wall_time_s": time.time() - t0})
    click.echo(str(out))


@operator.command("dos")
@click.option("--config", type=click.Path(exists=True), required=True)
@click.option("--bins", type=int, default=200, show_default=True)
@click.option("--lo", type=float, required=True)
@click.option("--hi", type=float, required=True)
@click.option("--realizations", type=int, default=20, show_default=True)
@click.option("--out", "out_name", default="dos_mc.csv", show_default=True)
@click.pass_context
def operator_dos(ctx, config, bins, lo, hi, realizations, out_name):
    """Disorder-averaged density of states from exact eigenvalue counting."""
    from .operator import dos_histogram
    params, file_seed = load_params(config)
    seed = ctx.obj["seed"] or file_seed
    t0 = time.time()
    edges = np.linspace(lo, hi, bins + 1)
    dens = dos_histogram(params, edges, realizations, RandomStream(seed, 0),
                         workers=ctx.obj["workers"])
    mid = 0.5 * (edges[1:] + edges[:-1])
    out = ctx.obj["out"] / out_name
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["alpha,rho_per_site"]
    lines += [f"{float(a)!r},{float(r)!r}" for a, r in zip(mid, dens)]
    out.write_text("\n".join(lines) + "\n")
    _sidecar(out.with_suffix(".json"), {"kind": "operator-dos", "seed": seed,
                                        "realizations": realizations,
                                        "wall_time_s": time.time() - t0})
    click.echo(str(out))


# -- riccati ----------------------------------------------------------------

@main.group()
def riccati():
    """Chain-flow determinants, node counts, and Lyapunov spectra."""


@riccati.command("logdet")
@click.option("--config", type=click.Path(exists=True), required=True)
@click.option("--e", "e_val", type=float, default=0.0, show_default=True)
@click.pass_context
def riccati_logdet_cmd(ctx, config, e_val):
    """Flow log-determinant and explosion count for one realization."""
    from .operator import sample_operator
    from .riccati import riccati_logdet
    params, file_seed = load_params(config)
    seed = ctx.obj["seed"] or file_seed
    real = sample_operator(params, RandomStream(seed, 0))
    res = riccati_logdet(real, e_val)
    click.echo(json.dumps({"log_abs_det": res.log_abs_det,
                           "explosions": res.sign_flips, "E": e_val,
                           "seed": seed}))


@riccati.command("lyapunov")
@click.option("--config", type=click.Path(exists=True), required=True)
@click.option("--e", "e_val", type=float, default=0.0, show_default=True)
@click.option("--length", type=int, default=100000, show_default=True)
@click.option("--reorth", type=int, default=10, show_default=True)
@click.option("--out", "out_name", default="lyapunov.csv", show_default=True)
@click.pass_context
def riccati_lyapunov(ctx, config, e_val, length, reorth, out_name):
    """Partial sums of the leading Lyapunov exponents (per site)."""
    from .riccati import lyapunov_sums
    params, file_seed = load_params(config)
    seed = ctx.obj["seed"] or file_seed
    res = lyapunov_sums(params, e_val, length, RandomStream(seed, 0),
                        reorth_interval=reorth)
    out = ctx.obj["out"] / out_name
    out.parent.mkdir(parents=True, exist_ok=True)
    lines = ["n,partial_sum"]
    lines += [f"{i + 1},{float(v)!r}" for i, v in enumerate(res.partial_sums)]
    out.write_text("\n".join(lines) + "\n")
    _sidecar(out.with_suffix(".json"), {"kind": "lyapunov", "seed": seed,
                                        "length": length, "E": e_val})
    click.echo(str(out))


@riccati.command("gle")
@click.option("--config", type=click.Path(exists=True), required=True)
@click.option("--q", type=float, default=1.0, show_default=True)
@click.option("--e", "e_val", type=float, default=0.0, show_default=True)
@click.option("--length", type=int, default=100, show_default=True)
@click.option("--samples", type=int, default=1000, show_default=True)
@click.option("--out", "out_name", default="gle.csv", show_default=True)
@click.pass_context
def riccati_gle(ctx, config, q, e_val, length, samples, out_name):
    """Monte Carlo generalized Lyapunov exponent (per site)."""
    from .riccati import gle_mc
    params, file_seed = load_params(config)
    seed = ctx.obj["seed"] or file_seed
    res = gle_mc(params, q, e_val, length, samples, RandomStream(seed, 0))
    out = ctx.obj["out"] / out_name
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("q,lambda_estimate,stderr\n"
                   f"{float(q)!r},{float(res.sigma_hat)!r},{float(res.stderr)!r}\n")
    _sidecar(out.with_suffix(".json"), {"kind": "gle", "seed": seed, "q": q,
                                        "E": e_val, "length": length,
                                        "samples": samples})
    click.echo(str(out))


# -- dbm --------------------------------------------------------------------

@main.group()
def dbm():
    """Eigenvalue-flow simulation in the cubic potential."""


@dbm.command("run")
@click.option("--n", type=int, default=100, show_default=True)
@click.option("--e", "e_val", type=float, required=True)
@click.option("--beta", type=float, default=2.0, show_default=True)
@click.option("--t", "t_total", type=float, default=1000.0, show_default=True)
@click.option("--dt", type=float, default=1e-3, show_default=True)
@click.option("--c", "c_val", type=float, default=0.0, show_default=True)
@click.option("--out", "out_name", default="dbm", show_default=True)
@click.pass_context
def dbm_run(ctx, n, e_val, beta, t_total, dt, c_val, out_name):
    """One trajectory: stats JSON plus a density CSV."""
    import math as _m
    from .dbm import DbmConfig, dbm_density, dbm_simulate
    cfg = DbmConfig(n=n, e=e_val, tilde_j=_m.sqrt(beta / 2.0), c=c_val, dt=dt,
                    t_total=t_total)
    stats = dbm_simulate(cfg, RandomStream(ctx.obj["seed"], 0))
    out_base = ctx.obj["out"] / out_name
    out_base.parent.mkdir(parents=True, exist_ok=True)
    edges, dens = dbm_density(stats)
    mid = 0.5 * (edges[1:] + edges[:-1])
    csv_path = out_base.with_suffix(".csv")
    csv_path.write_text("lambda,rho\n" + "\n".join(
        f"{float(x)!r},{float(r)!r}" for x, r in zip(mid, dens)) + "\n")
    _sidecar(out_base.with_suffix(".json"), {
        "kind": "dbm-run", "seed": ctx.obj["seed"], "n": n, "E": e_val,
        "beta": beta, "t_total": t_total, "dt": dt,
        "current": stats.measured_current, "current_stderr": stats.current_stderr,
        "trz": stats.trz_mean, "trz_stderr": stats.trz_stderr,
        "crossings": stats.crossings, "reflections": stats.reflections,
        "stationary": stats.stationary})
    click.echo(str(csv_path))


@dbm.command("passage")
@click.option("--n", type=int, default=6, show_default=True)
@click.option("--e", "e_val", type=float, required=True)
@click.option("--beta", type=float, default=2.0, show_default=True)
@click.option("--dt", type=float, default=2e-3, show_default=True)
@click.option("--trials", type=int, default=100, show_default=True)
@click.option("--t-max", type=float, default=1e5, show_default=True)
@click.option("--out", "out_name", default="passage.csv", show_default=True)
@click.pass_context
def dbm_passage(ctx, n, e_val, beta, dt, trials, t_max, out_name):
    """First-passage ensemble from the stationary droplet."""
    import math as _m
    from .dbm import DbmConfig, first_passage_ensemble
    cfg = DbmConfig(n=n, e=e_val, tilde_j=_m.sqrt(beta / 2.0), dt=dt, t_total=10.0)
    times = first_passage_ensemble(cfg, trials, RandomStream(ctx.obj["seed"], 0),
                                   t_max=t_max, workers=ctx.obj["workers"])
    out = ctx.obj["out"] / out_name
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text("trial,time\n" + "\n".join(
        f"{i},{float(t)!r}" for i, t in enumerate(times)) + "\n")
    _sidecar(out.with_suffix(".json"), {"kind": "dbm-passage",
                                        "seed": ctx.obj["seed"], "n": n,
                                        "E": e_val, "beta": beta,
                                        "trials": trials, "t_max": t_max,
                                        "median": float(np.nanmedian(times))})
    click.echo(str(out))


# -- orchestration ----------------------------------------------------------

@main.command("run")
@click.option("--config", type=click.Path(exists=True), required=True)
@click.pass_context
def run_cmd(ctx, config):
    """Run one experiment config and write its report."""
    cfg = ExperimentConfig.from_file(config)
    if ctx.obj["seed"]:
        cfg.seed = ctx.obj["seed"]
    if "workers" not in cfg.options and ctx.obj["workers"] > 1:
        cfg.options["workers"] = str(ctx.obj["workers"])
    report = run_experiment(cfg, ctx.obj["out"], Path(config).read_text())
    for row in report.rows:
        mark = "PASS" if row.passed else "FAIL"
        click.echo(f"[{mark}] {report.name}: {row.label} "
                   f"analytic={row.analytic:.6g} empirical={row.empirical:.6g} "
                   f"tol={row.tolerance:.3g}")
    sys.exit(0 if report.verdict else 1)


@main.command("validate")
@click.option("--only", multiple=True,
              help="Run only configs whose name contains any of these tags.")
@click.pass_context
def validate_cmd(ctx, only):
    """Run the full acceptance suite (exit 0 iff every comparison passes)."""
    reports = validate_all(ctx.obj["out"], only=list(only) or None,
                           seed_override=ctx.obj["seed"] or None)
    ok = True
    for rep in reports:
        mark = "PASS" if rep.verdict else "FAIL"
        click.echo(f"[{mark}] {rep.name} ({rep.kind}, {rep.wall_time:.1f}s)")
        ok = ok and rep.verdict
    sys.exit(0 if ok else 1)


if __name__ == "__main__":
    main()
