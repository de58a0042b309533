"""Time integration of the barotropic compressible Navier-Stokes system in
velocity form on the periodic box.

The constant-coefficient viscous operator mu*Lap u + (lambda+mu)*grad div u is
integrated exactly per Fourier mode (it splits into mu |k|^2 on the
divergence-free part and (lambda+2mu)|k|^2 on the gradient part); transport,
pressure and the variable-density correction are explicit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import (
    Field,
    VectorField,
    PositivityFault,
    _pdata,
    _sdata,
    dealias,
)

__all__ = [
    "PhysicalParams",
    "SolverConfig",
    "FlowState",
    "CFLError",
    "rhs",
    "admissible_ut",
    "step",
    "integrate",
    "dissipation_rate",
    "snapshot_steps",
]


class CFLError(RuntimeError):
    """Fixed-step mode rejected a step exceeding the CFL bound."""


@dataclass(frozen=True)
class PhysicalParams:
    """Constant viscosities and adiabatic exponent; pressure is rho^gamma."""

    mu: float = 1.0
    lam: float = 0.0
    gamma: float = 1.4

    def __post_init__(self):
        if not self.mu > 0:
            raise ValueError(f"mu must be positive, got {self.mu:g}")
        if not self.lam + 2.0 * self.mu > 0:
            raise ValueError(f"need lambda + 2 mu > 0, got {self.lam + 2 * self.mu:g}")
        if not self.gamma >= 1:
            raise ValueError(f"gamma must be >= 1, got {self.gamma:g}")

    def validate_strict(self):
        """Extra hypothesis for the L^4 energy / Lyapunov machinery."""
        if not self.mu > 0.5 * self.lam:
            raise ValueError(
                f"strict mode requires mu > lambda/2 (mu={self.mu:g}, lambda={self.lam:g})"
            )


@dataclass(frozen=True)
class SolverConfig:
    dt: float = 0.01
    cfl_target: float = 0.4
    scheme: str = "imex2"
    T: float = 1.0
    cadence: str = "geometric"  # or "uniform:<dt_snap>"
    adaptive: bool = True
    strict_mode: bool = False
    linear_only: bool = False  # test hook: freeze a, drop every explicit term

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if self.scheme not in ("imex1", "imex2"):
            raise ValueError(f"unknown scheme {self.scheme!r}")
        if not 0 < self.cfl_target <= 0.5:
            raise ValueError("cfl_target must lie in (0, 0.5]")
        if self.T < 0:
            raise ValueError("horizon T must be nonnegative")


@dataclass
class RhsResult:
    da: Field
    du: VectorField
    conv: VectorField  # (u . grad) u, reused for the material derivative


class FlowState:
    """(a, u) = (rho - 1, velocity) at one instant, with derived fields cached.

    Construction validates density positivity; a violation raises
    PositivityFault carrying the time and the minimum sample.
    """

    __slots__ = ("t", "a", "u", "params", "_cache")

    def __init__(self, t: float, a: Field, u: VectorField, params: PhysicalParams,
                 validate: bool = True):
        self.t = float(t)
        self.a = a
        self.u = u
        self.params = params
        self._cache = {}
        if validate and self.rho_min <= 0.0:
            raise PositivityFault(
                f"density lost positivity at t={self.t:g} (min rho = {self.rho_min:.6g})",
                min_value=self.rho_min,
                time=self.t,
            )

    @property
    def grid(self):
        return self.a.grid

    @property
    def rho_phys(self) -> np.ndarray:
        if "rho" not in self._cache:
            self._cache["rho"] = 1.0 + np.real(_pdata(self.a))
        return self._cache["rho"]

    @property
    def rho_min(self) -> float:
        return float(np.min(self.rho_phys))

    @property
    def rho_max(self) -> float:
        return float(np.max(self.rho_phys))

    @property
    def frak_a(self) -> Field:
        """rho^gamma - 1, evaluated pointwise and truncated."""
        if "frak_a" not in self._cache:
            rho = self.rho_phys
            if np.min(rho) <= 0:
                raise PositivityFault(
                    "cannot evaluate rho^gamma for nonpositive density",
                    min_value=float(np.min(rho)),
                    time=self.t,
                )
            self._cache["frak_a"] = dealias(
                Field.from_physical(self.grid, rho**self.params.gamma - 1.0)
            )
        return self._cache["frak_a"]

    @property
    def split(self):
        if "split" not in self._cache:
            from .helmholtz import project

            self._cache["split"] = project(self.u)
        return self._cache["split"]

    @property
    def rhs(self) -> RhsResult:
        if "rhs" not in self._cache:
            self._cache["rhs"] = rhs_full(self, self.params)
        return self._cache["rhs"]

    @property
    def u_t(self) -> VectorField:
        return self.rhs.du

    @property
    def u_dot(self) -> VectorField:
        """Material derivative u_t + (u . grad) u."""
        if "u_dot" not in self._cache:
            r = self.rhs
            self._cache["u_dot"] = r.du + r.conv
        return self._cache["u_dot"]

    @property
    def mean_a(self) -> float:
        return float(np.real(_sdata(self.a)[(0,) * self.grid.dim]))

    def sound_speed_max(self) -> float:
        g = self.params.gamma
        return math.sqrt(g) * self.rho_max ** ((g - 1.0) / 2.0)


def _fft_forward(grid, samples):
    import scipy.fft as _f

    return _f.fftn(np.asarray(samples, dtype=np.complex128)) / grid.n**grid.dim


def rhs_full(state: FlowState, params: PhysicalParams) -> RhsResult:
    """Nonconservative-form right-hand side with dealiased products:

    da/dt = -div((1+a) u)
    du/dt = -(u.grad)u + (1/rho)(mu Lap u + (lambda+mu) grad div u)
            - (1/rho) grad(rho^gamma)
    """
    grid = state.grid
    mu, lam, gamma = params.mu, params.lam, params.gamma
    mask = grid.dealias_mask
    import scipy.fft as _f

    nfac = grid.n**grid.dim
    a_hat = np.where(mask, _sdata(state.a), 0.0)
    u_hat = [np.where(mask, _sdata(c), 0.0) for c in state.u.components]

    a_p = np.real(_f.ifftn(a_hat)) * nfac
    u_p = [np.real(_f.ifftn(uh)) * nfac for uh in u_hat]
    rho_p = 1.0 + a_p
    if np.min(rho_p) <= 0.0:
        raise PositivityFault(
            f"density lost positivity at t={state.t:g} (min rho = {np.min(rho_p):.6g})",
            min_value=float(np.min(rho_p)),
            time=state.t,
        )

    ik = [1j * np.where(grid.nyquist_free, grid.k[ax], 0.0) for ax in range(grid.dim)]

    # mass equation: -div((1+a) u); spectral divergence has exactly zero mean
    da_hat = np.zeros(grid.shape, dtype=np.complex128)
    for ax in range(grid.dim):
        flux_hat = np.where(mask, _f.fftn(rho_p * u_p[ax]) / nfac, 0.0)
        da_hat -= ik[ax] * flux_hat
    da = Field(grid, da_hat, "spectral")

    # convective term (u.grad)u
    conv = []
    for i in range(grid.dim):
        acc = np.zeros(grid.shape)
        for j in range(grid.dim):
            dju_i = np.real(_f.ifftn(ik[j] * u_hat[i])) * nfac
            acc += u_p[j] * dju_i
        conv.append(Field(grid, np.where(mask, _f.fftn(acc) / nfac, 0.0), "spectral"))
    conv = VectorField(conv)

    # viscous + pressure force, then the 1/rho weight
    k_dot_u = sum(grid.k[ax] * u_hat[ax] for ax in range(grid.dim))
    frak_hat = np.where(mask, _f.fftn(rho_p**gamma - 1.0) / nfac, 0.0)
    inv_rho = 1.0 / rho_p
    du = []
    for i in range(grid.dim):
        force_hat = (
            -mu * grid.k2 * u_hat[i]
            - (lam + mu) * grid.k[i] * k_dot_u
            - ik[i] * frak_hat
        )
        force_p = np.real(_f.ifftn(force_hat)) * nfac
        acc_hat = np.where(mask, _f.fftn(inv_rho * force_p) / nfac, 0.0)
        du.append(Field(grid, acc_hat - _sdata(conv.components[i]), "spectral"))
    return RhsResult(da=da, du=VectorField(du), conv=conv)


def rhs(state: FlowState, params: PhysicalParams):
    """(da/dt, du/dt) at the given state."""
    r = rhs_full(state, params)
    return r.da, r.du


def admissible_ut(a0: Field, u0: VectorField, params: PhysicalParams) -> VectorField:
    """Momentum right-hand side at t=0: the compatibility value of u_t for
    smooth solutions. Identical to rhs(...).du by construction."""
    return FlowState(0.0, a0, u0, params).u_t


# ---------------------------------------------------------------------------
# IMEX stepping

_expfac_cache: dict = {}


def _viscous_exponential(grid, params: PhysicalParams, dt: float):
    key = (grid, params.mu, params.lam, dt)
    got = _expfac_cache.get(key)
    if got is None:
        dec_p = np.exp(-params.mu * grid.k2 * dt)
        dec_q = np.exp(-(params.lam + 2.0 * params.mu) * grid.k2 * dt)
        with np.errstate(divide="ignore", invalid="ignore"):
            inv_k2 = np.where(grid.k2 > 0, 1.0 / np.where(grid.k2 > 0, grid.k2, 1.0), 0.0)
        got = (dec_p, (dec_q - dec_p) * inv_k2)
        _expfac_cache[key] = got
        if len(_expfac_cache) > 64:
            _expfac_cache.pop(next(iter(_expfac_cache)))
    return got


def _apply_viscous_exponential(grid, params, dt, u_hats):
    dec_p, dq = _viscous_exponential(grid, params, dt)
    k_dot_u = sum(grid.k[ax] * u_hats[ax] for ax in range(grid.dim))
    return [dec_p * u_hats[ax] + dq * grid.k[ax] * k_dot_u for ax in range(grid.dim)]


def _linear_viscous_hat(grid, params, u_hats):
    """Spectral image of mu Lap u + (lambda+mu) grad div u."""
    k_dot_u = sum(grid.k[ax] * u_hats[ax] for ax in range(grid.dim))
    return [
        -params.mu * grid.k2 * u_hats[ax] - (params.lam + params.mu) * grid.k[ax] * k_dot_u
        for ax in range(grid.dim)
    ]


def _explicit_parts(state: FlowState, params: PhysicalParams, linear_only: bool):
    """(da_hat, [Nu_hat]) where Nu = du/dt minus the constant-coefficient
    viscous operator. Nu is supported inside the 2/3 ball (as du/dt is), so
    modes outside it see exactly the viscous exponential."""
    grid = state.grid
    if linear_only:
        zero = np.zeros(grid.shape, dtype=np.complex128)
        return zero, [zero.copy() for _ in range(grid.dim)]
    r = state.rhs
    mask = grid.dealias_mask
    u_hats = [np.where(mask, _sdata(c), 0.0) for c in state.u.components]
    lin = _linear_viscous_hat(grid, params, u_hats)
    da_hat = _sdata(r.da)
    nu = [_sdata(r.du.components[ax]) - lin[ax] for ax in range(grid.dim)]
    return da_hat, nu


def _advance(state: FlowState, dt: float, config: SolverConfig, params: PhysicalParams):
    grid = state.grid
    a_hat = _sdata(state.a)
    u_hats = [_sdata(c) for c in state.u.components]

    da1, nu1 = _explicit_parts(state, params, config.linear_only)
    a_star = a_hat + dt * da1
    u_star = _apply_viscous_exponential(
        grid, params, dt, [u_hats[ax] + dt * nu1[ax] for ax in range(grid.dim)]
    )
    if config.scheme == "imex1":
        a_new, u_new = a_star, u_star
    else:
        mid = FlowState(
            state.t + dt,
            Field(grid, a_star, "spectral"),
            VectorField([Field(grid, uh, "spectral") for uh in u_star]),
            params,
        )
        da2, nu2 = _explicit_parts(mid, params, config.linear_only)
        u_n_decayed = _apply_viscous_exponential(grid, params, dt, u_hats)
        a_new = 0.5 * a_hat + 0.5 * (a_star + dt * da2)
        u_new = [
            0.5 * u_n_decayed[ax] + 0.5 * (u_star[ax] + dt * nu2[ax])
            for ax in range(grid.dim)
        ]
    return FlowState(
        state.t + dt,
        Field(grid, a_new, "spectral"),
        VectorField([Field(grid, uh, "spectral") for uh in u_new]),
        params,
    )


def cfl_dt_bound(state: FlowState, config: SolverConfig) -> float:
    umax = float(
        np.max(np.sqrt(sum(np.real(_pdata(c)) ** 2 for c in state.u.components)))
    )
    return config.cfl_target * state.grid.dx / (umax + state.sound_speed_max())


def step(state: FlowState, config: SolverConfig, params: PhysicalParams) -> FlowState:
    """Advance by config.dt; in adaptive mode a CFL violation splits the step
    into equal substeps, in fixed mode it raises CFLError."""
    bound = cfl_dt_bound(state, config)
    if config.dt <= bound * (1.0 + 1e-12):
        return _advance(state, config.dt, config, params)
    if not config.adaptive:
        raise CFLError(
            f"dt={config.dt:g} exceeds CFL bound {bound:.6g} at t={state.t:g}"
        )
    nsub = int(math.ceil(config.dt / bound))
    sub = config.dt / nsub
    for _ in range(nsub):
        state = _advance(state, sub, config, params)
    return state


def dissipation_rate(state: FlowState, params: PhysicalParams) -> float:
    """D = mu ||grad u||_L2^2 + (lambda+mu) ||div u||_L2^2, spectrally."""
    grid = state.grid
    u_hats = [_sdata(c) for c in state.u.components]
    grad_sq = float(grid.k2.flatten() @ np.sum([np.abs(h.flatten()) ** 2 for h in u_hats], axis=0))
    k_dot_u = sum(grid.k[ax] * u_hats[ax] for ax in range(grid.dim))
    div_sq = float(np.sum(np.abs(k_dot_u) ** 2))
    return grid.volume * (params.mu * grad_sq + (params.lam + params.mu) * div_sq)


def snapshot_steps(config: SolverConfig) -> list[int]:
    """Step indices at which snapshots are recorded. Geometric cadence places
    targets at t_n = 2^(n/4) - 1 snapped to the dt grid; 'uniform:<dt>' places
    them every round(dt_snap/dt) steps. Step 0 and the final step are always
    included."""
    total = int(round(config.T / config.dt))
    if total == 0:
        return [0]
    picks = {0, total}
    if config.cadence == "geometric":
        n = 0
        while True:
            t = 2.0 ** (n / 4.0) - 1.0
            if t > config.T:
                break
            picks.add(min(total, int(round(t / config.dt))))
            n += 1
    elif config.cadence.startswith("uniform:"):
        dt_snap = float(config.cadence.split(":", 1)[1])
        stride = max(1, int(round(dt_snap / config.dt)))
        picks.update(range(0, total + 1, stride))
    else:
        raise ValueError(f"unknown cadence {config.cadence!r}")
    return sorted(picks)


def integrate(
    state0: FlowState,
    config: SolverConfig,
    params: PhysicalParams,
    observe=None,
    on_snapshot=None,
):
    """March to the horizon, invoking `observe(state, extras)` at the snapshot
    cadence. Returns (records, final_state, fault); on a runtime fault the
    partial records are returned with the fault descriptor.

    extras carries the per-step accumulated dissipation integral
    (trapezoidal at step boundaries), so energy-balance residuals refine at
    the scheme's order.
    """
    if config.strict_mode:
        params.validate_strict()
    total = int(round(config.T / config.dt))
    snaps = set(snapshot_steps(config))
    records = []
    fault = None
    diss_cum = 0.0
    d_prev = dissipation_rate(state0, params)
    state = state0

    def take(state, istep):
        extras = {"diss_cum": diss_cum, "step": istep, "dt": config.dt}
        if observe is not None:
            records.append(observe(state, extras))
        if on_snapshot is not None:
            on_snapshot(state, istep)

    take(state, 0)
    for istep in range(1, total + 1):
        try:
            state = step(state, config, params)
        except (PositivityFault, CFLError) as exc:
            fault = {
                "type": type(exc).__name__,
                "time": getattr(exc, "time", None) or state.t,
                "message": str(exc),
            }
            break
        d_new = dissipation_rate(state, params)
        diss_cum += 0.5 * config.dt * (d_prev + d_new)
        d_prev = d_new
        if istep in snaps:
            take(state, istep)
    return records, state, fault
