"""Brute-force circuit oracle: full nonlinear ODE/SDE of the oscillator.

State vector ``(phi, v, i_res, q_res)``:

    (phi0 / 2 pi) dphi/dt = v
    cs dv/dt    = ib + I_inj(t) + xi(t) - v/rs - ic sin(phi) - i_res
    L dt(i_res) = v - q_res/c1 - r1 i_res,     L = l1 + lp
    dq_res/dt   = i_res

``xi`` is white Johnson current noise of the bias shunt with one-sided PSD
``4 kB T / rs``; ``T = 0`` disables it and makes runs seed-independent.

Three integration paths share this right-hand side:

* :func:`simulate` - adaptive RK45 (embedded 4/5, dense interpolation onto
  the uniform output grid) for deterministic single runs;
* a compiled fixed-step scalar RK4 used by :func:`iv_curve`, which chains
  bias points adiabatically like an experimental sweep;
* :func:`simulate_batch` - compiled fixed-step RK4, or a stochastic Heun
  scheme when noise is on, integrating many circuits side by side.
  Plain Euler-Maruyama is numerically unstable for this oscillatory
  system at any affordable step (amplitude grows ~(w dt)^2/2 per step,
  faster than the physical damping); Heun's trapezoidal drift removes
  that growth while using the identical noise increments.

Traces are immutable after creation and safe to share between threads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy import integrate as sp_integrate

from .circuit_model import JunctionParams, PhysicalConstants
from .errors import NoPeakError, StepSizeUnderflowError, TooShortError
from .steady_state import ResonatorParams, shapiro_voltage

__all__ = [
    "CircuitState",
    "InjectionTone",
    "SimConfig",
    "TimeTrace",
    "SteadyStateMetrics",
    "BatchSpec",
    "BatchBaseband",
    "simulate",
    "simulate_batch",
    "iv_curve",
    "IVRow",
    "steady_state_metrics",
]

_TWO_PI_OVER_PHI0 = 2.0 * math.pi / PhysicalConstants.phi0


@dataclass(frozen=True)
class CircuitState:
    """Instantaneous circuit state; ``v`` is tied to ``phi`` through the
    AC Josephson relation by construction of the ODE."""

    phi: float
    v: float
    i_res: float
    q_res: float


@dataclass(frozen=True)
class InjectionTone:
    """External tone injected into the junction node as a current
    ``amplitude * sin(2 pi frequency t)``."""

    amplitude: float
    frequency: float

    def __post_init__(self) -> None:
        if self.amplitude < 0.0 or self.frequency <= 0.0:
            raise ValueError("injection tone requires amplitude >= 0 and frequency > 0")


@dataclass(frozen=True)
class SimConfig:
    """Integration settings.

    ``duration`` and ``dt_out`` define the uniform output grid.  ``rtol``
    (and optional per-component ``atol``) control the adaptive solver and
    must lie in [1e-12, 1e-6].  ``noise_temperature`` > 0 switches to the
    fixed-step stochastic path (default step: 1/200 of the expected
    oscillation period); ``fixed_dt`` overrides the internal step of any
    fixed-step run.  ``initial`` selects the starting
    state: "step" seeds the locked branch with the Shapiro voltage of the
    bare resonance, "zero" starts from rest.
    """

    duration: float
    dt_out: float
    rtol: float = 1e-9
    atol: tuple[float, float, float, float] | None = None
    noise_temperature: float = 0.0
    seed: int = 0
    injection: InjectionTone | None = None
    transient_fraction: float = 0.5
    initial: str | CircuitState = "step"
    fixed_dt: float | None = None

    def __post_init__(self) -> None:
        if not (self.duration > 0.0 and self.dt_out > 0.0):
            raise ValueError("duration and dt_out must be > 0")
        if self.dt_out > self.duration:
            raise ValueError("dt_out must not exceed duration")
        if not (1e-12 <= self.rtol <= 1e-6):
            raise ValueError("rtol must lie in [1e-12, 1e-6]")
        if self.noise_temperature < 0.0:
            raise ValueError("noise_temperature must be >= 0")
        if not (0.0 <= self.transient_fraction < 1.0):
            raise ValueError("transient_fraction must lie in [0, 1)")
        if isinstance(self.initial, str) and self.initial not in ("step", "zero"):
            raise ValueError("initial must be 'step', 'zero' or a CircuitState")


@dataclass(frozen=True)
class TimeTrace:
    """Uniformly sampled circuit trajectory with its full provenance."""

    t0: float
    dt: float
    phi: np.ndarray
    v: np.ndarray
    i_res: np.ndarray
    q_res: np.ndarray
    junction: JunctionParams
    resonator: ResonatorParams
    ib: float
    config: SimConfig

    def __post_init__(self) -> None:
        if self.dt <= 0.0:
            raise ValueError("dt must be > 0")
        if len(self.v) == 0:
            raise ValueError("trace must not be empty")
        for arr in (self.phi, self.v, self.i_res, self.q_res):
            arr.setflags(write=False)

    def __len__(self) -> int:
        return len(self.v)

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.dt

    def times(self) -> np.ndarray:
        return self.t0 + self.dt * np.arange(len(self.v))

    def state_at(self, index: int) -> CircuitState:
        return CircuitState(
            phi=float(self.phi[index]),
            v=float(self.v[index]),
            i_res=float(self.i_res[index]),
            q_res=float(self.q_res[index]),
        )


@dataclass(frozen=True)
class SteadyStateMetrics:
    v_dc: float
    f_emit: float
    i1: float


@dataclass(frozen=True)
class IVRow:
    ib: float
    v_dc: float
    error: str | None = None


@dataclass(frozen=True)
class BatchSpec:
    """One column of a batched run: a bias and an optional injected tone."""

    ib: float
    injection: InjectionTone | None = None


@dataclass(frozen=True)
class BatchBaseband:
    """Decimated complex baseband of the resonator current, one row per
    batch column: i_res(t) mixed against exp(-i 2 pi f_ref t) and boxcar
    averaged over the decimation window.  The resonator current is
    DC-free and band-filtered by the loop, so the boxcar's alias spurs
    stay far below the carrier."""

    t0: float
    dt: float
    f_ref: float
    z: np.ndarray  # (n_columns, n_samples) complex

    @property
    def sample_rate(self) -> float:
        return 1.0 / self.dt


def _bare_resonance(j: JunctionParams, r: ResonatorParams) -> float:
    # series combination of c1 with the shunt capacitor sets the loop mode
    c_series = r.c1 * j.cs / (r.c1 + j.cs)
    return 1.0 / math.sqrt((r.l1 + r.lp) * c_series)


def _initial_state(j: JunctionParams, r: ResonatorParams, cfg: SimConfig) -> CircuitState:
    if isinstance(cfg.initial, CircuitState):
        return cfg.initial
    if cfg.initial == "zero":
        return CircuitState(0.0, 0.0, 0.0, 0.0)
    # "step": start at the locked-branch voltage to speed lock acquisition
    return CircuitState(0.0, shapiro_voltage(_bare_resonance(j, r)), 0.0, 0.0)


def _default_atol(j: JunctionParams, r: ResonatorParams, ib: float, rtol: float):
    v_scale = max(shapiro_voltage(_bare_resonance(j, r)), abs(ib) * j.rs, 1e-9)
    i_scale = max(abs(ib), 1e-9)
    q_scale = v_scale * r.c1
    return (1e-9, 0.01 * rtol * v_scale, 0.01 * rtol * i_scale, 0.01 * rtol * q_scale)


def simulate(
    j: JunctionParams, r: ResonatorParams, ib: float, cfg: SimConfig
) -> TimeTrace:
    """Integrate the full circuit and sample it on a uniform grid.

    Deterministic runs use adaptive RK45; runs with
    ``cfg.noise_temperature > 0`` use the fixed-step stochastic path.
    Identical ``(params, seed)`` give bit-identical traces on one
    platform; with noise off the seed is irrelevant.
    """
    n_out = int(round(cfg.duration / cfg.dt_out))
    t_grid = cfg.dt_out * np.arange(n_out)
    y0 = _initial_state(j, r, cfg)

    if cfg.noise_temperature > 0.0:
        spec = BatchSpec(ib=ib, injection=cfg.injection)
        stored = _integrate_batch(
            j, r, [spec], cfg, store_state=True, f_ref=None
        )
        phi, v, i_res, q_res = (stored[k][0] for k in range(4))
        return TimeTrace(
            t0=0.0, dt=cfg.dt_out, phi=phi, v=v, i_res=i_res, q_res=q_res,
            junction=j, resonator=r, ib=ib, config=cfg,
        )

    ic, cs, g_rs = j.ic, j.cs, 1.0 / j.rs
    inv_cs = 1.0 / cs
    inv_c1 = 1.0 / r.c1
    inv_l = 1.0 / (r.l1 + r.lp)
    r1 = r.r1
    if cfg.injection is not None:
        amp = cfg.injection.amplitude
        w_inj = 2.0 * math.pi * cfg.injection.frequency

        def rhs(t, y):
            phi, v, ires, qres = y
            dv = (ib + amp * math.sin(w_inj * t) - v * g_rs - ic * math.sin(phi) - ires) * inv_cs
            return (v * _TWO_PI_OVER_PHI0, dv, (v - qres * inv_c1 - r1 * ires) * inv_l, ires)
    else:

        def rhs(t, y):
            phi, v, ires, qres = y
            dv = (ib - v * g_rs - ic * math.sin(phi) - ires) * inv_cs
            return (v * _TWO_PI_OVER_PHI0, dv, (v - qres * inv_c1 - r1 * ires) * inv_l, ires)

    atol = cfg.atol if cfg.atol is not None else _default_atol(j, r, ib, cfg.rtol)
    sol = sp_integrate.solve_ivp(
        rhs,
        (0.0, cfg.duration),
        [y0.phi, y0.v, y0.i_res, y0.q_res],
        method="RK45",
        t_eval=t_grid,
        rtol=cfg.rtol,
        atol=atol,
        max_step=1.0 / (8.0 * _bare_resonance(j, r) / (2.0 * math.pi)),
    )
    if not sol.success or sol.y.shape[1] != n_out or not np.all(np.isfinite(sol.y)):
        t_reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise StepSizeUnderflowError(
            f"integration failed at t = {t_reached:.3e} s: {sol.message}", t_reached
        )
    return TimeTrace(
        t0=0.0, dt=cfg.dt_out,
        phi=sol.y[0].copy(), v=sol.y[1].copy(),
        i_res=sol.y[2].copy(), q_res=sol.y[3].copy(),
        junction=j, resonator=r, ib=ib, config=cfg,
    )


@njit(cache=True)
def _core_batch(
    y,
    ib,
    inj_amp,
    inj_w,
    dt,
    n_steps,
    decim,
    ic,
    inv_cs,
    g_rs,
    inv_c1,
    inv_l,
    r1,
    a,
    noise_amp,
    seed,
    stored,
    z_out,
    store_state,
    w_ref,
):  # pragma: no cover - exercised through _integrate_batch
    n = y.shape[1]
    if noise_amp > 0.0:
        np.random.seed(seed)
    half = 0.5 * dt
    sixth = dt / 6.0
    acc_re = np.zeros(n)
    acc_im = np.zeros(n)
    out_idx = 0
    for step in range(n_steps):
        t = step * dt
        if noise_amp > 0.0:
            # stochastic Heun: trapezoidal drift, one shared additive
            # noise increment per step (plain Euler-Maruyama grows the
            # oscillation amplitude ~(w dt)^2/2 per step, outrunning the
            # physical damping at any affordable step)
            kick = np.random.standard_normal(n) * noise_amp
            for col in range(n):
                phi = y[0, col]
                v = y[1, col]
                ires = y[2, col]
                qres = y[3, col]
                drv0 = ib[col] + inj_amp[col] * math.sin(inj_w[col] * t)
                drv1 = ib[col] + inj_amp[col] * math.sin(inj_w[col] * (t + dt))
                p1 = v * a
                v1 = (drv0 - v * g_rs - ic * math.sin(phi) - ires) * inv_cs
                i1 = (v - qres * inv_c1 - r1 * ires) * inv_l
                q1 = ires
                phi_p = phi + dt * p1
                v_p = v + dt * v1 + kick[col]
                ires_p = ires + dt * i1
                qres_p = qres + dt * q1
                p2 = v_p * a
                v2 = (drv1 - v_p * g_rs - ic * math.sin(phi_p) - ires_p) * inv_cs
                i2 = (v_p - qres_p * inv_c1 - r1 * ires_p) * inv_l
                q2 = ires_p
                y[0, col] = phi + half * (p1 + p2)
                y[1, col] = v + half * (v1 + v2) + kick[col]
                y[2, col] = ires + half * (i1 + i2)
                y[3, col] = qres + half * (q1 + q2)
        else:
            for col in range(n):
                phi = y[0, col]
                v = y[1, col]
                ires = y[2, col]
                qres = y[3, col]
                amp = inj_amp[col]
                w_i = inj_w[col]
                drv0 = ib[col] + amp * math.sin(w_i * t)
                drv_h = ib[col] + amp * math.sin(w_i * (t + half))
                drv1 = ib[col] + amp * math.sin(w_i * (t + dt))

                p1 = v * a
                v1 = (drv0 - v * g_rs - ic * math.sin(phi) - ires) * inv_cs
                i1 = (v - qres * inv_c1 - r1 * ires) * inv_l
                q1 = ires

                phi_b = phi + half * p1
                v_b = v + half * v1
                ires_b = ires + half * i1
                qres_b = qres + half * q1
                p2 = v_b * a
                v2 = (drv_h - v_b * g_rs - ic * math.sin(phi_b) - ires_b) * inv_cs
                i2 = (v_b - qres_b * inv_c1 - r1 * ires_b) * inv_l
                q2 = ires_b

                phi_b = phi + half * p2
                v_b = v + half * v2
                ires_b = ires + half * i2
                qres_b = qres + half * q2
                p3 = v_b * a
                v3 = (drv_h - v_b * g_rs - ic * math.sin(phi_b) - ires_b) * inv_cs
                i3 = (v_b - qres_b * inv_c1 - r1 * ires_b) * inv_l
                q3 = ires_b

                phi_b = phi + dt * p3
                v_b = v + dt * v3
                ires_b = ires + dt * i3
                qres_b = qres + dt * q3
                p4 = v_b * a
                v4 = (drv1 - v_b * g_rs - ic * math.sin(phi_b) - ires_b) * inv_cs
                i4 = (v_b - qres_b * inv_c1 - r1 * ires_b) * inv_l
                q4 = ires_b

                y[0, col] = phi + sixth * (p1 + 2.0 * (p2 + p3) + p4)
                y[1, col] = v + sixth * (v1 + 2.0 * (v2 + v3) + v4)
                y[2, col] = ires + sixth * (i1 + 2.0 * (i2 + i3) + i4)
                y[3, col] = qres + sixth * (q1 + 2.0 * (q2 + q3) + q4)

        if store_state == 0:
            t_next = t + dt
            c = math.cos(w_ref * t_next)
            s = math.sin(w_ref * t_next)
            for col in range(n):
                acc_re[col] += y[2, col] * c
                acc_im[col] -= y[2, col] * s
        if (step + 1) % decim == 0:
            if store_state == 1:
                for col in range(n):
                    stored[0, col, out_idx] = y[0, col]
                    stored[1, col, out_idx] = y[1, col]
                    stored[2, col, out_idx] = y[2, col]
                    stored[3, col, out_idx] = y[3, col]
            else:
                for col in range(n):
                    z_out[col, out_idx] = complex(acc_re[col], acc_im[col]) / decim
                    acc_re[col] = 0.0
                    acc_im[col] = 0.0
            out_idx += 1


def _integrate_batch(
    j: JunctionParams,
    r: ResonatorParams,
    specs: list[BatchSpec],
    cfg: SimConfig,
    store_state: bool,
    f_ref: float | None,
):
    """Fixed-step core shared by traces and baseband capture.

    Deterministic columns advance with classical RK4; with noise on, a
    stochastic Heun step replaces it.  The compiled kernel integrates all
    columns side by side.  Returns either the decimated state array
    (4, N, M) or a BatchBaseband.
    """
    n_cols = len(specs)
    noisy = cfg.noise_temperature > 0.0
    f_bare = _bare_resonance(j, r) / (2.0 * math.pi)
    if cfg.fixed_dt is not None:
        dt = cfg.fixed_dt
    elif noisy:
        dt = 1.0 / (200.0 * f_bare)
    else:
        dt = 1.0 / (64.0 * f_bare)
    decim = max(1, int(round(cfg.dt_out / dt)))
    dt = cfg.dt_out / decim  # commensurate output grid
    n_out = int(round(cfg.duration / cfg.dt_out))
    n_steps = n_out * decim

    ib = np.array([s.ib for s in specs], dtype=float)
    inj_amp = np.array(
        [s.injection.amplitude if s.injection else 0.0 for s in specs], dtype=float
    )
    inj_w = np.array(
        [2.0 * math.pi * s.injection.frequency if s.injection else 0.0 for s in specs],
        dtype=float,
    )

    y0 = _initial_state(j, r, cfg)
    y = np.empty((4, n_cols), dtype=float)
    y[0] = y0.phi
    y[1] = y0.v
    y[2] = y0.i_res
    y[3] = y0.q_res

    if noisy:
        # white current noise, one-sided PSD 4 kB T / rs, injected on v
        sigma_v = (
            math.sqrt(2.0 * PhysicalConstants.kB * cfg.noise_temperature / j.rs) / j.cs
        )
        noise_amp = sigma_v * math.sqrt(dt)
    else:
        noise_amp = 0.0

    if store_state:
        stored = np.empty((4, n_cols, n_out), dtype=float)
        z_out = np.empty((1, 0), dtype=complex)
        w_ref = 0.0
    else:
        if f_ref is None:
            raise ValueError("baseband capture needs f_ref")
        stored = np.empty((4, 1, 0), dtype=float)
        z_out = np.empty((n_cols, n_out), dtype=complex)
        w_ref = 2.0 * math.pi * f_ref

    _core_batch(
        y,
        ib,
        inj_amp,
        inj_w,
        dt,
        n_steps,
        decim,
        j.ic,
        1.0 / j.cs,
        1.0 / j.rs,
        1.0 / r.c1,
        1.0 / (r.l1 + r.lp),
        r.r1,
        _TWO_PI_OVER_PHI0,
        noise_amp,
        cfg.seed,
        stored,
        z_out,
        1 if store_state else 0,
        w_ref,
    )
    if not np.all(np.isfinite(y)):
        raise StepSizeUnderflowError(
            f"non-finite state at t = {n_steps * dt:.3e} s", n_steps * dt
        )
    if store_state:
        return stored
    return BatchBaseband(t0=0.0, dt=cfg.dt_out, f_ref=f_ref, z=z_out)


def simulate_batch(
    j: JunctionParams,
    r: ResonatorParams,
    specs: list[BatchSpec],
    cfg: SimConfig,
    capture: str = "baseband",
    f_ref: float | None = None,
) -> BatchBaseband | list[TimeTrace]:
    """Integrate many circuits of the same device side by side.

    Columns differ only in bias and injected tone, so a single vectorized
    fixed-step integration advances them together (this is the module's
    parallel evaluation path; results are ordered like ``specs``).
    ``capture="baseband"`` stores the decimated complex envelope of v(t)
    around ``f_ref`` - the memory-sane format for lock detection and
    linewidth work; ``capture="trace"`` stores full decimated states.
    """
    if capture not in ("baseband", "trace"):
        raise ValueError("capture must be 'baseband' or 'trace'")
    if not specs:
        raise ValueError("specs must not be empty")
    if capture == "baseband":
        return _integrate_batch(j, r, specs, cfg, store_state=False, f_ref=f_ref)
    stored = _integrate_batch(j, r, specs, cfg, store_state=True, f_ref=None)
    return [
        TimeTrace(
            t0=0.0, dt=cfg.dt_out,
            phi=stored[0, k].copy(), v=stored[1, k].copy(),
            i_res=stored[2, k].copy(), q_res=stored[3, k].copy(),
            junction=j, resonator=r, ib=specs[k].ib, config=cfg,
        )
        for k in range(len(specs))
    ]


@njit(cache=True)
def _core_iv_point(
    phi, v, ires, qres, ib, dt, n_settle, n_measure, ic, inv_cs, g_rs, inv_c1, inv_l, r1, a
):  # pragma: no cover - exercised through iv_curve
    half = 0.5 * dt
    sixth = dt / 6.0
    sum1 = 0.0
    sum2 = 0.0
    n_half = n_measure // 2
    for step in range(-n_settle, n_measure):
        p1 = v * a
        v1 = (ib - v * g_rs - ic * math.sin(phi) - ires) * inv_cs
        i1_ = (v - qres * inv_c1 - r1 * ires) * inv_l
        q1 = ires

        phi_b = phi + half * p1
        v_b = v + half * v1
        ires_b = ires + half * i1_
        qres_b = qres + half * q1
        p2 = v_b * a
        v2 = (ib - v_b * g_rs - ic * math.sin(phi_b) - ires_b) * inv_cs
        i2_ = (v_b - qres_b * inv_c1 - r1 * ires_b) * inv_l
        q2 = ires_b

        phi_b = phi + half * p2
        v_b = v + half * v2
        ires_b = ires + half * i2_
        qres_b = qres + half * q2
        p3 = v_b * a
        v3 = (ib - v_b * g_rs - ic * math.sin(phi_b) - ires_b) * inv_cs
        i3_ = (v_b - qres_b * inv_c1 - r1 * ires_b) * inv_l
        q3 = ires_b

        phi_b = phi + dt * p3
        v_b = v + dt * v3
        ires_b = ires + dt * i3_
        qres_b = qres + dt * q3
        p4 = v_b * a
        v4 = (ib - v_b * g_rs - ic * math.sin(phi_b) - ires_b) * inv_cs
        i4_ = (v_b - qres_b * inv_c1 - r1 * ires_b) * inv_l
        q4 = ires_b

        phi += sixth * (p1 + 2.0 * (p2 + p3) + p4)
        v += sixth * (v1 + 2.0 * (v2 + v3) + v4)
        ires += sixth * (i1_ + 2.0 * (i2_ + i3_) + i4_)
        qres += sixth * (q1 + 2.0 * (q2 + q3) + q4)

        if step >= 0:
            if step < n_half:
                sum1 += v
            else:
                sum2 += v

    mean1 = sum1 / n_half if n_half > 0 else 0.0
    mean2 = sum2 / (n_measure - n_half) if n_measure > n_half else 0.0
    return phi, v, ires, qres, mean1, mean2


def _rk4_scalar(
    j: JunctionParams,
    r: ResonatorParams,
    ib: float,
    state: tuple[float, float, float, float],
    dt: float,
    n_settle: int,
    n_measure: int,
) -> tuple[tuple[float, float, float, float], float, float]:
    """One chained IV point: settle, then return the final state and the
    mean voltage over the two halves of the measurement window."""
    phi, v, ires, qres, mean1, mean2 = _core_iv_point(
        state[0],
        state[1],
        state[2],
        state[3],
        ib,
        dt,
        n_settle,
        n_measure,
        j.ic,
        1.0 / j.cs,
        1.0 / j.rs,
        1.0 / r.c1,
        1.0 / (r.l1 + r.lp),
        r.r1,
        _TWO_PI_OVER_PHI0,
    )
    return (phi, v, ires, qres), mean1, mean2


def iv_curve(
    j: JunctionParams,
    r: ResonatorParams,
    ib_grid,
    cfg: SimConfig,
    drift_tolerance: float = 1e-3,
) -> list[IVRow]:
    """Time-averaged junction voltage along a bias sweep.

    The state continues adiabatically from one bias point to the next,
    mimicking an experimental sweep; the sweep starts from rest.  The
    transient fraction of each point is discarded and the mean voltage of
    the two halves of the remaining window must agree to
    ``drift_tolerance`` (relative), otherwise the row is flagged.  Flagged
    rows never abort the sweep.
    """
    f_bare = _bare_resonance(j, r) / (2.0 * math.pi)
    dt = 1.0 / (64.0 * f_bare)
    n_total = max(256, int(round(cfg.duration / dt)))
    n_settle = int(n_total * cfg.transient_fraction)
    n_measure = n_total - n_settle
    state = (0.0, 0.0, 0.0, 0.0)
    rows: list[IVRow] = []
    v_floor = 1e-4 * shapiro_voltage(2.0 * math.pi * f_bare)
    for ib in ib_grid:
        state, mean1, mean2 = _rk4_scalar(
            j, r, float(ib), state, dt, n_settle, n_measure
        )
        v_dc = 0.5 * (mean1 + mean2)
        if not all(map(math.isfinite, state)):
            rows.append(IVRow(ib=float(ib), v_dc=math.nan, error="non-finite state"))
            state = (0.0, 0.0, 0.0, 0.0)
            continue
        drift = abs(mean2 - mean1) / max(abs(v_dc), v_floor)
        error = None
        if drift > drift_tolerance:
            error = f"mean voltage drifting: {drift:.2e} relative between halves"
        rows.append(IVRow(ib=float(ib), v_dc=v_dc, error=error))
    return rows


def steady_state_metrics(
    trace: TimeTrace, transient_fraction: float | None = None
) -> SteadyStateMetrics:
    """DC voltage, emission frequency and loop-current amplitude.

    The emission frequency is the dominant periodogram peak refined by
    parabolic interpolation; the DC voltage and the quadrature projection
    of the resonator current are then averaged over an integer number of
    emission periods to suppress leakage.  Requires at least 200 periods
    after the transient and a peak at least 10 dB above the spectral
    median (else :class:`NoPeakError`).
    """
    frac = (
        trace.config.transient_fraction
        if transient_fraction is None
        else transient_fraction
    )
    start = int(len(trace) * frac)
    v = np.asarray(trace.v[start:], dtype=float)
    ires = np.asarray(trace.i_res[start:], dtype=float)
    if len(v) < 16:
        raise TooShortError("too few samples after the transient")

    v_ac = v - v.mean()
    if math.sqrt(float(np.mean(v_ac**2))) < 1e-12:
        raise NoPeakError("voltage trace has no measurable oscillation")

    # peak detection on a segment-averaged periodogram: averaging tames the
    # exponential single-bin statistics that would let plain noise clear a
    # 10 dB-over-median bar
    n_seg = max(4, min(8, len(v_ac) // 256))
    seg = len(v_ac) // n_seg
    segments = v_ac[: n_seg * seg].reshape(n_seg, seg)
    detect = np.mean(np.abs(np.fft.rfft(segments, axis=1)) ** 2, axis=0)
    detect[0] = 0.0
    median = float(np.median(detect[1:]))
    if median <= 0.0 or float(np.max(detect[1:])) < 10.0 * median:
        raise NoPeakError("no spectral peak at least 10 dB above the median")

    # frequency: coarse bin from the full periodogram, parabolic
    # interpolation, then two phase-slope refinements (the projection phase
    # difference between the window halves resolves frequency far below a
    # bin, which the amplitude projection needs over long windows)
    spectrum = np.abs(np.fft.rfft(v_ac)) ** 2
    spectrum[0] = 0.0
    peak = int(np.argmax(spectrum[1:])) + 1
    if 1 <= peak < len(spectrum) - 1:
        la, lb, lc = np.log(spectrum[peak - 1 : peak + 2] + 1e-300)
        denom = la - 2.0 * lb + lc
        delta = 0.5 * (la - lc) / denom if denom != 0.0 else 0.0
        delta = float(np.clip(delta, -0.5, 0.5))
    else:
        delta = 0.0
    f_emit = (peak + delta) / (len(v) * trace.dt)

    t_rel = trace.dt * np.arange(len(v))
    half = len(v) // 2
    for _ in range(2):
        phase = np.exp(-2j * math.pi * f_emit * t_rel)
        z1 = complex(np.mean(v_ac[:half] * phase[:half]))
        z2 = complex(np.mean(v_ac[half:] * phase[half:]))
        if abs(z1) == 0.0 or abs(z2) == 0.0:
            break
        dphi = math.atan2((z2 / z1).imag, (z2 / z1).real)
        f_emit += dphi / (2.0 * math.pi * half * trace.dt)

    n_periods = math.floor(len(v) * trace.dt * f_emit)
    if n_periods < 200:
        raise TooShortError(
            f"only {n_periods} oscillation periods after the transient; need >= 200"
        )
    n_window = min(int(round(n_periods / (f_emit * trace.dt))), len(v))
    v_dc = float(np.mean(v[:n_window]))
    phased = ires[:n_window] * np.exp(-2j * math.pi * f_emit * t_rel[:n_window])
    i1 = 2.0 * abs(complex(np.mean(phased)))
    return SteadyStateMetrics(v_dc=v_dc, f_emit=f_emit, i1=i1)
