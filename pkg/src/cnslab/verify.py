"""Fast self-check suites behind `cnslab verify`: structural properties that
must hold on any healthy installation. Each check prints one line; a failing
suite maps to exit code 4 at the CLI."""

from __future__ import annotations

import numpy as np

from .diagnostics import (
    DiagnosticSeries,
    energy_balance_residual,
    fit_decay,
)
from .helmholtz import project
from .lp import (
    active_scale_range,
    bony_decompose,
    dyadic_block,
    partition_of_unity_error,
)
from .solver import PhysicalParams, SolverConfig, integrate
from .spectral import (
    Field,
    dealiased_product,
    divergence,
    lebesgue_norm,
    make_grid,
    mean_value,
    random_field,
)

__all__ = ["run_suite", "SUITES"]


def _check(name, ok, detail=""):
    status = "ok" if ok else "FAIL"
    print(f"  [{status}] {name}" + (f"  ({detail})" if detail else ""))
    return bool(ok)


def _suite_lp():
    grid = make_grid(32, 2 * np.pi, 3)
    ok = True
    err = partition_of_unity_error(grid)
    ok &= _check("partition of unity", err <= 1e-12, f"max err {err:.2e}")

    f = random_field(grid, seed=1)
    jmin, jmax = active_scale_range(grid)
    recon = Field.zeros(grid)
    for j in range(jmin, jmax + 1):
        recon = recon + dyadic_block(f, j)
    target = f - mean_value(f) * _one(grid)
    rel = _rel_err(recon, target)
    ok &= _check("block reconstruction", rel <= 1e-10, f"rel err {rel:.2e}")

    b0 = dyadic_block(f, 0)
    b3 = dyadic_block(b0, 3)
    ok &= _check(
        "quasi-orthogonality",
        lebesgue_norm(b3, 2) <= 1e-10 * max(lebesgue_norm(f, 2), 1.0),
    )

    u = random_field(grid, seed=2, band=(0.5, grid.n // 4))
    v = random_field(grid, seed=3, band=(0.5, grid.n // 4))
    u = u - mean_value(u) * _one(grid)
    v = v - mean_value(v) * _one(grid)
    tuv, tvu, rem = bony_decompose(u, v)
    direct = dealiased_product(u, v)
    rel = _rel_err(tuv + tvu + rem, direct)
    ok &= _check("paraproduct reconstruction", rel <= 1e-9, f"rel err {rel:.2e}")
    return ok


def _suite_helmholtz():
    grid = make_grid(32, 2 * np.pi, 3)
    ok = True
    from .spectral import VectorField

    u = VectorField([random_field(grid, seed=s, band=(0.5, 8.0)) for s in (4, 5, 6)])
    spl = project(u)
    div_p = lebesgue_norm(divergence(spl.P), 2)
    ok &= _check("div(Pu) = 0", div_p <= 1e-10 * lebesgue_norm(u, 2), f"{div_p:.2e}")
    p2 = project(spl.P)
    rel = max(_rel_err(a, b) for a, b in zip(p2.P.components, spl.P.components))
    ok &= _check("P idempotent", rel <= 1e-10, f"rel err {rel:.2e}")
    lhs = lebesgue_norm(spl.P, 2) ** 2 + lebesgue_norm(spl.Q, 2) ** 2
    rhs = lebesgue_norm(u, 2) ** 2
    ok &= _check("energy Pythagoras", abs(lhs - rhs) <= 1e-10 * rhs)
    ok &= _check(
        "||Qu|| = ||d||",
        abs(lebesgue_norm(spl.Q, 2) - lebesgue_norm(spl.d, 2))
        <= 1e-10 * max(lebesgue_norm(spl.d, 2), 1e-30),
    )
    return ok


def _suite_energy():
    from .spectral import VectorField

    params = PhysicalParams(mu=1.0, lam=0.0, gamma=1.4)
    # band-limited data: fully resolved at this toy size, so the discrete
    # energy budget is dt-limited rather than resolution-limited
    grid = make_grid(16, 2 * np.pi, 3)
    a0 = 0.01 * random_field(grid, seed=11, band=(0.5, 2.0))
    u0 = VectorField([0.01 * random_field(grid, seed=12 + i, band=(0.5, 2.0))
                      for i in range(3)])
    from .solver import FlowState

    state0 = FlowState(0.0, a0, u0, params)
    cfg = SolverConfig(dt=0.02, T=1.0, scheme="imex2", cadence="uniform:0.05",
                       strict_mode=True)
    series = DiagnosticSeries()

    from .diagnostics import DiagnosticsConfig, make_observer

    observe = make_observer(params, DiagnosticsConfig(p0_list=[1.0]), series)
    _, _, fault = integrate(state0, cfg, params, observe=observe)
    ok = _check("small-data run completes", fault is None)
    res = energy_balance_residual(series)
    ok &= _check("energy balance residual", res["max_rel"] <= 1e-2, f"{res['max_rel']:.2e}")
    x = series.column("X")
    ok &= _check("Lyapunov nonincreasing", bool(np.all(np.diff(x) <= 1e-6 * x[0])))
    return ok


def _suite_decay():
    series = DiagnosticSeries()
    for t in np.linspace(0.0, 60.0, 121):
        series.append(t, {"y": (1.0 + t) ** -0.75, "z": 3.0 * (1.0 + t) ** -0.5,
                          "w": np.exp(-t)})
    f1 = fit_decay(series, "y", (5.0, 50.0))
    ok = _check("exact power law", abs(f1.beta_hat - 0.75) <= 1e-10 and f1.power_law)
    f2 = fit_decay(series, "z", (5.0, 50.0))
    ok &= _check("prefactor invariance", abs(f2.beta_hat - 0.5) <= 1e-10)
    f3 = fit_decay(series, "w", (5.0, 50.0))
    ok &= _check("exponential flagged", not f3.power_law, f"residual {f3.residual:.3g}")
    return ok


def _one(grid):
    from .spectral import constant_field

    return constant_field(grid, 1.0)


def _rel_err(f, g):
    num = lebesgue_norm(f - g, 2)
    den = max(lebesgue_norm(g, 2), 1e-300)
    return num / den


SUITES = {
    "lp": _suite_lp,
    "helmholtz": _suite_helmholtz,
    "energy": _suite_energy,
    "decay": _suite_decay,
}


def run_suite(name: str) -> bool:
    if name == "all":
        ok = True
        for key in SUITES:
            print(f"suite {key}:")
            ok &= SUITES[key]()
        return ok
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}; choose from {['all', *SUITES]}")
    print(f"suite {name}:")
    return SUITES[name]()
