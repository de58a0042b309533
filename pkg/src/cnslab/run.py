"""Run orchestration: build the scenario, integrate with diagnostics at the
snapshot cadence, difference twin runs for the stability experiment, and emit
series/summary/checkpoint/plot outputs."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from . import io as cio
from .config import RunConfig, config_hash
from .diagnostics import (
    DiagnosticSeries,
    default_fit_window,
    energy_balance_residual,
    fit_decay,
    beta,
    conlf_rhs,
    make_observer,
)
from .scenarios import build_scenario, stability_difference_norm
from .solver import FlowState, integrate, snapshot_steps, step
from .spectral import make_grid

__all__ = ["execute_run", "run", "resume_run", "run_pair"]


def run(runconfig: RunConfig, outdir=None):
    """Integrate the configured scenario to its horizon and return
    (DiagnosticSeries, summary dict); files are written when outdir is given."""
    return execute_run(runconfig, outdir)


def _fit_summary(series, runconfig, grid):
    window = runconfig.fit_window or default_fit_window(grid)
    fits = {}
    key = runconfig.fit_norm
    try:
        target = beta(runconfig.scenario.p0)
    except ValueError:
        target = None
    try:
        fit = fit_decay(series, key, window, target=target)
        fits[key] = {
            "beta_hat": fit.beta_hat,
            "residual": fit.residual,
            "window": list(fit.window),
            "n_samples": fit.n_samples,
            "target": fit.target,
            "power_law": fit.power_law,
        }
    except ValueError as exc:
        fits[key] = {"error": str(exc), "window": list(window)}
    return fits


def _conlf_witness(series, runconfig):
    """Fitted constants C_hat = max_t mlow(t)/rhs(t) per configured p0."""
    out = {}
    times = np.asarray(series.times)
    mlow = series.column("mlow")
    for p0 in runconfig.diagnostics.p0_list:
        try:
            rhs_vals = np.asarray(
                [conlf_rhs(series, t, p0, runconfig.params) for t in times]
            )
        except ValueError as exc:
            out[f"{p0:g}"] = {"error": str(exc)}
            continue
        ok = rhs_vals > 0
        ratio = np.where(ok, mlow / np.where(ok, rhs_vals, 1.0), 0.0)
        out[f"{p0:g}"] = {
            "C_hat": float(np.max(ratio)),
            "beta": beta(p0),
            "samples": int(len(times)),
        }
    return out


def execute_run(runconfig: RunConfig, outdir=None):
    chash = config_hash(runconfig.raw_text)
    grid = make_grid(runconfig.grid_n, runconfig.grid_L, runconfig.grid_dim)
    built = build_scenario(runconfig.scenario, grid, runconfig.params)

    on_snapshot = None
    if (
        outdir is not None
        and runconfig.checkpoint_every > 0
        and "checkpoint" in runconfig.out_formats
    ):
        ckpt_dir = Path(outdir)
        ckpt_dir.mkdir(parents=True, exist_ok=True)
        counter = {"n": 0}

        def on_snapshot(state, istep):
            if counter["n"] % runconfig.checkpoint_every == 0 and istep > 0:
                cio.write_checkpoint(ckpt_dir / f"step_{istep:08d}.ckpt", state, chash)
            counter["n"] += 1

    if runconfig.scenario.kind == "stability_pair":
        series, summary = _run_stability(runconfig, built, chash)
    else:
        series, summary = _run_single(
            runconfig, built.state, built.records, chash, on_snapshot
        )
    summary["config"] = runconfig.echo()
    summary["config_hash"] = chash
    if outdir is not None:
        _emit(runconfig, series, summary, outdir, chash)
    return series, summary


def _run_single(runconfig, state0, scenario_records, chash, on_snapshot=None):
    series = DiagnosticSeries(metadata={"config_hash": chash})
    series.metadata["scenario"] = dict(scenario_records)
    observe = make_observer(runconfig.params, runconfig.diagnostics, series)
    _, final_state, fault = integrate(
        state0, runconfig.solver, runconfig.params, observe=observe,
        on_snapshot=on_snapshot,
    )
    series.fault = fault
    summary = {
        "scenario_records": _jsonable(scenario_records),
        "fault": fault,
        "final_time": final_state.t,
        "energy_balance": energy_balance_residual(series) if len(series) > 1 else None,
        "fits": _fit_summary(series, runconfig, state0.grid),
        "conlf_witness": _conlf_witness(series, runconfig),
        "lyapunov_constants": series.metadata.get("lyapunov_constants"),
    }
    summary["_final_state"] = final_state  # stripped before JSON emission
    return series, summary


def run_pair(runconfig, ref_state, pert_state, pair_norm_p, pair_R0):
    """Integrate reference and perturbed states in lockstep, recording the
    perturbation-size norm of their difference at the snapshot cadence."""
    cfg, params = runconfig.solver, runconfig.params
    if cfg.strict_mode:
        params.validate_strict()
    series = DiagnosticSeries()
    observe = make_observer(params, runconfig.diagnostics, series)
    diffs = []
    total = int(round(cfg.T / cfg.dt))
    snaps = set(snapshot_steps(cfg))
    fault = None

    def record(ref, pert, istep, diss_cum):
        observe(ref, {"diss_cum": diss_cum, "step": istep})
        parts = stability_difference_norm(
            pert.a - ref.a, pert.u - ref.u, pair_norm_p, pair_R0
        )
        diffs.append((ref.t, parts))

    from .solver import dissipation_rate

    diss_cum = 0.0
    d_prev = dissipation_rate(ref_state, params)
    record(ref_state, pert_state, 0, diss_cum)
    ref, pert = ref_state, pert_state
    from .solver import CFLError
    from .spectral import PositivityFault

    for istep in range(1, total + 1):
        try:
            ref = step(ref, cfg, params)
            pert = step(pert, cfg, params)
        except (PositivityFault, CFLError) as exc:
            fault = {"type": type(exc).__name__, "time": ref.t, "message": str(exc)}
            break
        d_new = dissipation_rate(ref, params)
        diss_cum += 0.5 * cfg.dt * (d_prev + d_new)
        d_prev = d_new
        if istep in snaps:
            record(ref, pert, istep, diss_cum)
    series.fault = fault
    return series, diffs, fault


def _run_stability(runconfig, built, chash):
    base, pert, pert_records = built
    series, diffs, fault = run_pair(
        runconfig, base.state, pert.state, runconfig.scenario.p, runconfig.scenario.R0
    )
    series.metadata["config_hash"] = chash
    diff_totals = [p["total"] for _, p in diffs]
    for name in ("rho", "P", "Q", "total"):
        series.columns[f"twin_diff_{name}"] = [p[name] for _, p in diffs]
    summary = {
        "scenario_records": _jsonable({**base.records, **pert_records}),
        "fault": fault,
        "twin_diff_max": max(diff_totals) if diff_totals else None,
        "twin_diff_final": diff_totals[-1] if diff_totals else None,
        "eps_pert": runconfig.scenario.eps_pert,
        "fits": {},
        "conlf_witness": {},
        "lyapunov_constants": series.metadata.get("lyapunov_constants"),
        "energy_balance": energy_balance_residual(series) if len(series) > 1 else None,
        "final_time": series.times[-1] if series.times else 0.0,
    }
    return series, summary


def _emit(runconfig, series, summary, outdir, chash):
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.txt").write_text(runconfig.raw_text)
    final_state = summary.pop("_final_state", None)
    if "csv" in runconfig.out_formats:
        cio.write_series(outdir / "series.csv", series, chash)
    if "json" in runconfig.out_formats:
        cio.write_summary(outdir / "summary.json", _jsonable(summary))
    if "checkpoint" in runconfig.out_formats and final_state is not None:
        cio.write_checkpoint(outdir / "final.ckpt", final_state, chash)
    if "plots" in runconfig.out_formats or "csv" in runconfig.out_formats:
        key = runconfig.fit_norm
        if key in series.columns:
            cio.write_plot_data(
                outdir / f"plot_{key.replace(':', '_').replace(',', '_')}.dat",
                series.times,
                series.column(key),
                label=f"t  {key}",
                config_hash=chash,
            )


def resume_run(runconfig: RunConfig, checkpoint_path, outdir=None):
    """Continue a checkpointed state to the configured horizon."""
    state, _saved_hash = cio.read_checkpoint(checkpoint_path)
    chash = config_hash(runconfig.raw_text)
    import dataclasses

    remaining = runconfig.solver.T - state.t
    if remaining <= 0:
        raise ValueError(
            f"checkpoint time {state.t:g} already at or beyond horizon {runconfig.solver.T:g}"
        )
    # re-anchor the horizon so snapshot indices count from the resume point
    cfg = dataclasses.replace(runconfig.solver, T=remaining)
    shifted = FlowState(0.0, state.a, state.u, runconfig.params)
    series = DiagnosticSeries(metadata={"config_hash": chash, "resumed_from": float(state.t)})
    observe_inner = make_observer(runconfig.params, runconfig.diagnostics, series)

    t0 = state.t

    def observe(s, extras):
        # present the true absolute time in the records, reusing cached fields
        s_abs = FlowState(t0 + s.t, s.a, s.u, s.params, validate=False)
        s_abs._cache = s._cache
        return observe_inner(s_abs, extras)

    _, final_state, fault = integrate(shifted, cfg, runconfig.params, observe=observe)
    series.fault = fault
    summary = {
        "resumed_from": t0,
        "final_time": t0 + final_state.t,
        "fault": fault,
        "config": runconfig.echo(),
        "config_hash": chash,
    }
    if outdir is not None:
        outdir = Path(outdir)
        outdir.mkdir(parents=True, exist_ok=True)
        cio.write_series(outdir / "series.csv", series, chash)
        cio.write_summary(outdir / "summary.json", _jsonable(summary))
        cio.write_checkpoint(outdir / "final.ckpt",
                             FlowState(t0 + final_state.t, final_state.a,
                                       final_state.u, runconfig.params), chash)
    return series, summary


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items() if not str(k).startswith("_")}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, (bool, int, float, str)) or obj is None:
        return obj
    return str(obj)
