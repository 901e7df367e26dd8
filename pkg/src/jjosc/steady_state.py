"""Self-consistent oscillation of the junction/resonator loop.

A series resonator (``l1``, ``c1``, loss ``r1``, parasitic ``lp``) closes
the loop on the junction/shunt block of :mod:`jjosc.circuit_model`.  A
sustained oscillation at ``(omega, I1)`` must satisfy two conditions
simultaneously:

* gain balances loss:       ``Re Z_J(omega, I1, ij) + r1 = 0``
* zero total loop reactance: ``Im Z_J + omega (l1 + lp) - 1/(omega c1) = 0``

with the junction DC current ``ij`` recomputed from the bias at each
frequency (the shunt resistor sits at the locked Shapiro voltage).

The gain-balance equation has a closed-form amplitude: ``Re Z_J`` does not
involve the Bessel factors, so ``I1 = sqrt(hbar omega ij / (e r1))``.
That root is automatically amplitude-stable, ``d(Re Z_J)/dI1 > 0`` for any
``ij > 0``, which is asserted rather than searched for.  The frequency
equation is then a one-dimensional bracketed root problem around the bare
resonance.

Solutions are restricted to reduced drives at or below the first maximum
of ``|J1|``; stronger-drive branches are out of scope.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

from scipy import optimize

from .circuit_model import (
    I1_FLOOR,
    ComplexImpedance,
    JunctionParams,
    PhysicalConstants,
    bessel_j,
    dc_junction_current,
    junction_impedance,
    locking_phase,
    max_abs_j1,
    reduced_drive,
)
from .errors import ConvergenceError, DivergingQError, NoOscillationError

__all__ = [
    "ResonatorParams",
    "BiasRegion",
    "OperatingPoint",
    "SweepRow",
    "shapiro_voltage",
    "solve_operating_point",
    "solve_with_shunt_loading",
    "total_quality_factor",
    "output_power",
    "max_output_power",
    "optimal_load",
    "bias_sweep",
    "frequency_sensitivity",
    "fold_shunt_loss",
]

_REACTANCE_TOL = 1e-9  # ohm, solver residual contract for both equations


@dataclass(frozen=True)
class ResonatorParams:
    """Equivalent series resonator.

    ``l1``/``c1``/``r1`` are the series inductance, capacitance and loss
    resistance; ``lp`` is a parasitic series inductance (bond wires).
    ``qt``/``qe`` are the total and external quality factors used only for
    output-power bookkeeping; both default to the passive resonator value
    ``sqrt(l1/c1)/r1`` so that ``qt/qe = 1`` unless configured.
    """

    l1: float
    c1: float
    r1: float
    lp: float = 0.0
    qt: float | None = None
    qe: float | None = None

    def __post_init__(self) -> None:
        for name in ("l1", "c1", "r1"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"ResonatorParams.{name} must be finite and > 0")
        if self.lp < 0.0:
            raise ValueError("ResonatorParams.lp must be >= 0")
        passive_q = math.sqrt(self.l1 / self.c1) / self.r1
        if self.qt is None:
            object.__setattr__(self, "qt", passive_q)
        if self.qe is None:
            object.__setattr__(self, "qe", self.qt)
        if not (0.0 < self.qt <= self.qe):
            raise ValueError("quality factors must satisfy 0 < qt <= qe")

    @property
    def char_impedance(self) -> float:
        """Characteristic impedance sqrt(l1/c1) (ohm)."""
        return math.sqrt(self.l1 / self.c1)

    @property
    def coupling_efficiency(self) -> float:
        """Fraction qt/qe of generated power delivered to the load."""
        return self.qt / self.qe


class BiasRegion(Enum):
    SUPERCURRENT = "supercurrent"
    SHAPIRO_STEP = "shapiro_step"
    NORMAL = "normal"


@dataclass(frozen=True)
class OperatingPoint:
    """Self-consistent oscillation at one bias point."""

    omega: float
    i1: float
    ij_dc: float
    phic: float
    p_out: float
    p_dc: float
    efficiency: float
    region: BiasRegion
    residual_re: float = 0.0
    residual_im: float = 0.0

    def __post_init__(self) -> None:
        if self.p_out < 0.0:
            raise ValueError("p_out must be >= 0")
        if not (0.0 <= self.efficiency <= 1.0):
            raise ValueError("efficiency must lie in [0, 1]")

    @property
    def f_emit(self) -> float:
        return self.omega / (2.0 * math.pi)


@dataclass(frozen=True)
class SweepRow:
    """One bias point of a sweep; ``error`` flags a per-point solver
    failure without aborting the sweep."""

    ib: float
    region: BiasRegion | None
    v_dc: float
    f_emit: float | None = None
    p_out: float | None = None
    operating_point: OperatingPoint | None = field(default=None, repr=False)
    error: str | None = None


def shapiro_voltage(omega: float) -> float:
    """Locked junction DC voltage ``phi0 omega / (2 pi)`` on the first step."""
    if omega < 0.0:
        raise ValueError("omega must be >= 0")
    return PhysicalConstants.phi0 * omega / (2.0 * math.pi)


def total_quality_factor(r: ResonatorParams, zj: ComplexImpedance) -> float:
    """Signed loaded quality factor ``sqrt(l1/c1) / (Re Z_J + r1)``.

    Diverges at the sustained-oscillation condition ``Re Z_J = -r1``;
    raises :class:`DivergingQError` within 1e-15 ohm of it.
    """
    denom = zj.re + r.r1
    if abs(denom) < 1e-15:
        raise DivergingQError(
            "junction gain cancels the resonator loss; Q_tot diverges"
        )
    return r.char_impedance / denom


def output_power(ij: float, omega: float, qt: float, qe: float) -> float:
    """Delivered RF power ``(qt/qe) * ij * hbar omega / (2 e)``."""
    if ij < 0.0:
        raise ValueError("ij must be >= 0")
    return (qt / qe) * ij * PhysicalConstants.hbar * omega / (2.0 * PhysicalConstants.e)


def max_output_power(ic: float, omega: float) -> float:
    """Upper power bound ``max|J1| * ic * hbar omega / (2 e)``.

    The prefactor is the computed maximum of ``|J1|`` (about 0.582): the
    locking condition caps the junction DC current at ``ic |J1|``.
    """
    if ic < 0.0:
        raise ValueError("ic must be >= 0")
    _, j1_peak = max_abs_j1()
    return j1_peak * ic * PhysicalConstants.hbar * omega / (2.0 * PhysicalConstants.e)


def optimal_load(ic: float, cs: float, omega: float) -> float:
    """Series loss resistance that maximizes deliverable power.

    Obtained by demanding that the gain-balanced amplitude reach the
    maximum of ``|J1|`` exactly when the junction current reaches the
    locking bound: ``r1 = (4 max|J1| / x_peak^2) * pi * ic /
    (phi0 cs^2 omega^3)``.  The computed prefactor ``4 max|J1| / x_peak^2``
    evaluates to about 0.687, i.e. the usual "~0.68 pi" rule of thumb.
    """
    if ic <= 0.0 or cs <= 0.0 or omega <= 0.0:
        raise ValueError("ic, cs, omega must all be > 0")
    x_peak, j1_peak = max_abs_j1()
    prefactor = 4.0 * j1_peak / (x_peak * x_peak)
    return prefactor * math.pi * ic / (PhysicalConstants.phi0 * cs**2 * omega**3)


def fold_shunt_loss(j: JunctionParams, r: ResonatorParams, omega: float) -> ResonatorParams:
    """Resonator with the bias shunt's RF dissipation folded into ``r1``.

    The analytic loop model treats ``rs`` as RF-decoupled, entering only
    the DC bias relation.  In a circuit where ``rs`` hangs directly across
    the shunt capacitor it also loads the oscillation; the standard
    parallel-to-series conversion at the operating frequency adds
    ``rs / (1 + (omega cs rs)^2)`` of series loss to the loop.  Use this
    when comparing the analytic model against such a circuit.
    """
    q_par = omega * j.cs * j.rs
    extra = j.rs / (1.0 + q_par * q_par)
    scale = (r.r1 + extra) / r.r1
    # total loss grows, so the loaded Q drops by the same factor while the
    # external coupling is untouched
    return replace(r, r1=r.r1 + extra, qt=r.qt / scale)


def solve_with_shunt_loading(
    j: JunctionParams,
    r: ResonatorParams,
    ib: float,
    iterations: int = 8,
) -> OperatingPoint:
    """Operating point with the bias shunt's RF loading folded in
    self-consistently.

    :func:`fold_shunt_loss` converts the parallel shunt into series loop
    loss using the bare capacitor reactance; at low drive the junction's
    reactive correction shrinks the node reactance and with it the shunt
    dissipation.  This wrapper iterates solve -> node-reactance bracket ->
    refolded loss to a fixed point (relaxed 50/50 to damp the alternation)
    so the analytic point tracks a circuit in which ``rs`` genuinely loads
    the node, e.g. the :mod:`jjosc.time_domain` oracle.
    """
    omega_guess = 1.0 / math.sqrt((r.l1 + r.lp) * r.c1)
    r_eff = fold_shunt_loss(j, r, omega_guess)
    extra = r_eff.r1 - r.r1
    op = None
    for _ in range(iterations):
        op = solve_operating_point(j, r_eff, ib)
        x = reduced_drive(op.i1, op.omega, j.cs)
        s = op.ij_dc / (j.ic * bessel_j(1, x))
        bracket = 1.0 - (j.ic / op.i1) * (bessel_j(0, x) - bessel_j(2, x)) * math.sqrt(
            max(0.0, 1.0 - s * s)
        )
        x_node = bracket / (op.omega * j.cs)
        new_extra = j.rs * x_node * x_node / (j.rs * j.rs + x_node * x_node)
        extra = 0.5 * (extra + new_extra)
        scale = (r.r1 + extra) / r.r1
        r_eff = replace(r, r1=r.r1 + extra, qt=r.qt / scale)
    return op


def _amplitude_root(
    j: JunctionParams, r1: float, omega: float, ij: float
) -> float | None:
    """Gain-balanced amplitude at fixed frequency, or None when no locked,
    amplitude-stable root exists with reduced drive at or below the |J1|
    peak."""
    if ij <= 0.0:
        return None
    i1 = math.sqrt(
        PhysicalConstants.hbar * omega * ij / (PhysicalConstants.e * r1)
    )
    if i1 < I1_FLOOR:
        return None
    x = reduced_drive(i1, omega, j.cs)
    x_peak, _ = max_abs_j1()
    if x > x_peak * (1.0 + 1e-9):
        return None
    if ij > j.ic * bessel_j(1, x) * (1.0 + 1e-12):
        return None
    # restoring slope: d(Re Z_J + r1)/dI1 = 2 hbar omega ij / (e I1^3) > 0
    return i1


def _loop_reactance(
    j: JunctionParams, r: ResonatorParams, ib: float, omega: float
) -> float | None:
    ij = dc_junction_current(ib, j.rs, omega)
    i1 = _amplitude_root(j, r.r1, omega, ij)
    if i1 is None:
        return None
    z = junction_impedance(j, omega, i1, ij)
    return z.im + omega * (r.l1 + r.lp) - 1.0 / (omega * r.c1)


def solve_operating_point(
    j: JunctionParams,
    r: ResonatorParams,
    ib: float,
    bracket_halfwidth: float = 0.15,
    scan_points: int = 121,
) -> OperatingPoint:
    """Solve both oscillation conditions for ``(omega, I1)`` at bias ``ib``.

    The frequency root is bracketed by scanning around the bare resonance
    ``1/sqrt((l1+lp) c1)``; at each candidate frequency the amplitude is
    the closed-form gain-balance root.  Raises
    :class:`NoOscillationError` when no bracketable locked solution exists
    (bias outside the step region) and :class:`ConvergenceError` if the
    residual contract (1e-9 ohm on both equations) cannot be met.
    """
    omega_bare = 1.0 / math.sqrt((r.l1 + r.lp) * r.c1)
    lo = omega_bare * (1.0 - bracket_halfwidth)
    hi = omega_bare * (1.0 + bracket_halfwidth)
    omegas = [lo + (hi - lo) * k / (scan_points - 1) for k in range(scan_points)]
    values = [_loop_reactance(j, r, ib, w) for w in omegas]

    bracket = None
    for k in range(scan_points - 1):
        va, vb = values[k], values[k + 1]
        if va is None or vb is None:
            continue
        if va == 0.0:
            bracket = (omegas[k], omegas[k])
            break
        if va * vb < 0.0:
            bracket = (omegas[k], omegas[k + 1])
            break
    if bracket is None:
        raise NoOscillationError(
            f"no locked oscillation bracketed around "
            f"{omega_bare / (2 * math.pi):.4e} Hz at ib = {ib:.4e} A"
        )

    if bracket[0] == bracket[1]:
        omega_star = bracket[0]
    else:
        def residual(w: float) -> float:
            value = _loop_reactance(j, r, ib, w)
            if value is None:
                raise ConvergenceError(
                    f"lost the locked branch inside the bracket at "
                    f"{w / (2 * math.pi):.6e} Hz (ib = {ib:.4e} A)"
                )
            return value

        omega_star = optimize.brentq(
            residual, bracket[0], bracket[1], xtol=1e-3, rtol=8.9e-16, maxiter=200
        )

    ij = dc_junction_current(ib, j.rs, omega_star)
    i1 = _amplitude_root(j, r.r1, omega_star, ij)
    if i1 is None:
        raise ConvergenceError("amplitude root vanished at the frequency root")
    z = junction_impedance(j, omega_star, i1, ij)
    res_re = z.re + r.r1
    res_im = z.im + omega_star * (r.l1 + r.lp) - 1.0 / (omega_star * r.c1)
    if abs(res_re) > _REACTANCE_TOL or abs(res_im) > _REACTANCE_TOL:
        raise ConvergenceError(
            f"residuals exceed contract: Re {res_re:.3e} ohm, Im {res_im:.3e} ohm"
        )

    p_out = output_power(ij, omega_star, r.qt, r.qe)
    p_dc = ib * shapiro_voltage(omega_star)
    return OperatingPoint(
        omega=omega_star,
        i1=i1,
        ij_dc=ij,
        phic=locking_phase(ij, j.ic, reduced_drive(i1, omega_star, j.cs)),
        p_out=p_out,
        p_dc=p_dc,
        efficiency=p_out / p_dc,
        region=BiasRegion.SHAPIRO_STEP,
        residual_re=res_re,
        residual_im=res_im,
    )


def _sweep_one(j: JunctionParams, r: ResonatorParams, ib: float) -> SweepRow:
    if ib < j.ic:
        # region I: trivial zero-voltage supercurrent state, no emission
        return SweepRow(ib=ib, region=BiasRegion.SUPERCURRENT, v_dc=0.0)
    try:
        op = solve_operating_point(j, r, ib)
    except NoOscillationError:
        return SweepRow(ib=ib, region=BiasRegion.NORMAL, v_dc=ib * j.rs)
    except ConvergenceError as exc:
        return SweepRow(ib=ib, region=None, v_dc=math.nan, error=str(exc))
    return SweepRow(
        ib=ib,
        region=BiasRegion.SHAPIRO_STEP,
        v_dc=shapiro_voltage(op.omega),
        f_emit=op.f_emit,
        p_out=op.p_out,
        operating_point=op,
    )


def bias_sweep(
    j: JunctionParams,
    r: ResonatorParams,
    ib_grid: Sequence[float],
    max_workers: int | None = None,
) -> list[SweepRow]:
    """Classify each bias point and solve the locked region.

    Points are independent; when ``max_workers`` (or the JJOSC_THREADS
    environment variable) allows it they are evaluated concurrently.
    Output order always follows the input grid.  Per-point solver failures
    are returned as flagged rows, never raised.
    """
    grid = [float(ib) for ib in ib_grid]
    if any(b > a for a, b in zip(grid, grid[1:])) and any(
        b < a for a, b in zip(grid, grid[1:])
    ):
        raise ValueError("ib_grid must be monotone")
    if max_workers is None:
        max_workers = int(os.environ.get("JJOSC_THREADS", "1"))
    if max_workers > 1 and len(grid) > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            return list(pool.map(lambda ib: _sweep_one(j, r, ib), grid))
    return [_sweep_one(j, r, ib) for ib in grid]


def frequency_sensitivity(
    j: JunctionParams, r: ResonatorParams, ib: float, step: float = 1e-9
) -> float:
    """Bias-to-frequency sensitivity d f_emit / d I_b (Hz/A) by central
    difference with a 1 nA default step.  Propagates
    :class:`NoOscillationError` when either stencil point leaves the step
    region."""
    f_plus = solve_operating_point(j, r, ib + step).f_emit
    f_minus = solve_operating_point(j, r, ib - step).f_emit
    return (f_plus - f_minus) / (2.0 * step)
