"""Perturbative model of a capacitively shunted Josephson junction under RF drive.

A junction shunted by a large capacitor ``Cs`` and biased on its first
Shapiro step (average voltage ``phi0 * omega / 2pi``) acts, at the drive
frequency, like a complex impedance whose real part is *negative* whenever
DC current flows through the junction.  That negative resistance is the
gain element that sustains the oscillation treated in
:mod:`jjosc.steady_state`.

For a drive current ``I1 sin(omega t)`` flowing into the junction/shunt
block, with reduced amplitude ``x = 2 pi I1 / (phi0 omega^2 Cs)``, the
block impedance is::

    Re Z = -hbar omega <I_J> / (e I1^2)
    Im Z = -(1 / omega Cs) * (1 - (Ic/I1) [J0(x) - J2(x)] sqrt(1 - s^2))

where ``s = <I_J> / (Ic J1(x))`` and ``<I_J>`` is the DC current through
the junction.  Phase locking requires ``|s| <= 1``; outside that range
there is no locked solution and :class:`jjosc.errors.UnlockedError` is
raised.

All functions here are pure and safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

from .errors import DegenerateError, UnlockedError

__all__ = [
    "PhysicalConstants",
    "JunctionParams",
    "DriveState",
    "ComplexImpedance",
    "DerivedJunctionQuantities",
    "I1_FLOOR",
    "bessel_j",
    "max_abs_j1",
    "reduced_drive",
    "derived_junction_quantities",
    "dc_junction_current",
    "locking_phase",
    "junction_impedance",
    "drive_state",
]


class PhysicalConstants:
    """CODATA 2018 exact values (SI). The flux quantum is derived, never
    stored independently, so ``phi0 == h / (2 e)`` holds to the last bit."""

    e = 1.602176634e-19          # elementary charge (C)
    h = 6.62607015e-34           # Planck constant (J s)
    hbar = h / (2.0 * math.pi)   # reduced Planck constant (J s)
    phi0 = h / (2.0 * e)         # magnetic flux quantum (Wb)
    kB = 1.380649e-23            # Boltzmann constant (J/K)


#: Below this drive amplitude (A) the 1/I1^2 gain term is numerically and
#: physically meaningless; junction_impedance raises DegenerateError.
I1_FLOOR = 1e-12

# Bessel evaluation strategy switches from the ascending power series to
# Miller's downward recurrence here; both are accurate to <1e-12 absolute
# on their side of the cut.
_SERIES_CUTOFF = 8.0
_X_MAX = 50.0


@dataclass(frozen=True)
class JunctionParams:
    """Capacitively shunted junction: critical current ``ic`` (A), shunt
    capacitance ``cs`` (F) and DC shunt resistance ``rs`` (ohm)."""

    ic: float
    cs: float
    rs: float

    def __post_init__(self) -> None:
        for name in ("ic", "cs", "rs"):
            value = getattr(self, name)
            if not (value > 0.0 and math.isfinite(value)):
                raise ValueError(f"JunctionParams.{name} must be finite and > 0, got {value!r}")


@dataclass(frozen=True)
class DriveState:
    """RF drive at angular frequency ``omega`` with current amplitude
    ``i1``, dimensionless amplitude ``i1_reduced`` and locking phase
    ``phic`` (principal branch, |phic| <= pi/2)."""

    omega: float
    i1: float
    i1_reduced: float
    phic: float

    def __post_init__(self) -> None:
        if self.i1_reduced < 0.0:
            raise ValueError("DriveState.i1_reduced must be >= 0")
        if abs(self.phic) > math.pi / 2.0 + 1e-12:
            raise ValueError("DriveState.phic outside the principal branch")


@dataclass(frozen=True)
class ComplexImpedance:
    """Impedance split into resistance ``re`` and reactance ``im`` (ohm)."""

    re: float
    im: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.re) and math.isfinite(self.im)):
            raise ValueError("impedance components must be finite")

    @property
    def as_complex(self) -> complex:
        return complex(self.re, self.im)


@dataclass(frozen=True)
class DerivedJunctionQuantities:
    """Junction inductance ``lj`` (H), plasma angular frequency ``omega_p``
    (rad/s), charging energy ``ec`` (J) and Josephson energy ``ej`` (J)."""

    lj: float
    omega_p: float
    ec: float
    ej: float


def _bessel_series(n: int, x: float) -> float:
    # Ascending series sum_k (-1)^k (x/2)^(n+2k) / (k! (n+k)!); converges
    # quickly for x <= _SERIES_CUTOFF with no damaging cancellation.
    half = 0.5 * x
    term = half**n / math.factorial(n)
    total = term
    for k in range(1, 80):
        term *= -(half * half) / (k * (k + n))
        total += term
        if abs(term) < 1e-18 * max(abs(total), 1e-30):
            break
    return total


def _bessel_miller(n: int, x: float) -> float:
    # Miller's algorithm: downward recurrence from a well-damped starting
    # order, normalized with J0(x) + 2 sum_k J_{2k}(x) = 1.
    m = max(n, int(x)) + 24 + int(4.0 * math.sqrt(x))
    if m % 2:
        m += 1
    j_up = 0.0
    j_cur = 1e-280
    target = 0.0
    norm = 0.0
    for k in range(m, 0, -1):
        j_down = (2.0 * k / x) * j_cur - j_up
        j_up = j_cur
        j_cur = j_down
        order = k - 1
        if order == n:
            target = j_cur
        if order >= 2 and order % 2 == 0:
            norm += 2.0 * j_cur
        if abs(j_cur) > 1e250:
            j_cur *= 1e-250
            j_up *= 1e-250
            target *= 1e-250
            norm *= 1e-250
    norm += j_cur  # j_cur now holds the unnormalized J0
    return target / norm


def bessel_j(n: int, x: float) -> float:
    """Bessel function of the first kind J_n(x) for integer ``n >= 0``.

    Valid for ``|x| < 50`` (the physical range of the reduced drive
    amplitude); absolute error below 1e-12 there.
    """
    if not isinstance(n, int) or isinstance(n, bool):
        raise TypeError("bessel_j order must be an integer")
    if n < 0 or n > 200:
        raise ValueError("bessel_j order must be in [0, 200]")
    if not math.isfinite(x) or abs(x) >= _X_MAX:
        raise ValueError(f"bessel_j argument must satisfy |x| < {_X_MAX}, got {x!r}")
    if x == 0.0:
        return 1.0 if n == 0 else 0.0
    sign = 1.0
    if x < 0.0:
        x = -x
        if n % 2:
            sign = -1.0
    if x <= _SERIES_CUTOFF:
        return sign * _bessel_series(n, x)
    return sign * _bessel_miller(n, x)


@lru_cache(maxsize=1)
def max_abs_j1() -> tuple[float, float]:
    """Location and value of the maximum of |J1|, found numerically.

    Returns ``(x_peak, j1_peak)``.  Dense scan followed by golden-section
    refinement; the value enters the oscillator power and load formulas as
    a computed prefactor, never as a hard-coded literal.
    """
    xs = [1.0 + 2e-3 * i for i in range(1001)]  # scan [1.0, 3.0]
    best = max(xs, key=lambda x: abs(bessel_j(1, x)))
    lo, hi = best - 2e-3, best + 2e-3
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc = abs(bessel_j(1, c))
    fd = abs(bessel_j(1, d))
    for _ in range(80):
        if fc > fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = abs(bessel_j(1, c))
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = abs(bessel_j(1, d))
    x_peak = 0.5 * (a + b)
    return x_peak, abs(bessel_j(1, x_peak))


def reduced_drive(i1: float, omega: float, cs: float) -> float:
    """Dimensionless drive amplitude ``2 pi I1 / (phi0 omega^2 Cs)``."""
    if omega <= 0.0:
        raise ValueError("omega must be > 0")
    return 2.0 * math.pi * i1 / (PhysicalConstants.phi0 * omega * omega * cs)


def derived_junction_quantities(j: JunctionParams) -> DerivedJunctionQuantities:
    """Josephson inductance, plasma frequency and the two junction energies.

    The two standard plasma-frequency expressions, ``1/sqrt(Lj Cs)`` and
    ``sqrt(8 Ej Ec)/hbar``, agree identically; tests pin the agreement to
    a relative 1e-12.
    """
    phi0 = PhysicalConstants.phi0
    lj = phi0 / (2.0 * math.pi * j.ic)
    omega_p = 1.0 / math.sqrt(lj * j.cs)
    ec = PhysicalConstants.e**2 / (2.0 * j.cs)
    ej = phi0 * j.ic / (2.0 * math.pi)
    return DerivedJunctionQuantities(lj=lj, omega_p=omega_p, ec=ec, ej=ej)


def dc_junction_current(ib: float, rs: float, omega: float) -> float:
    """DC current through the junction branch when biased on the first
    Shapiro step: ``ib - phi0 omega / (2 pi rs)``.

    The shunt resistor sits at the locked junction voltage and carries
    ``phi0 omega / (2 pi rs)``; the remainder of the bias current flows
    through the junction.  May be negative; callers decide validity.
    """
    if omega <= 0.0:
        raise ValueError("omega must be > 0")
    if rs <= 0.0:
        raise ValueError("rs must be > 0")
    return ib - PhysicalConstants.phi0 * omega / (2.0 * math.pi * rs)


def locking_phase(ij: float, ic: float, i1_reduced: float) -> float:
    """Locking phase ``arcsin(-ij / (ic J1(x)))`` on the principal branch.

    Raises :class:`UnlockedError` when ``|ij| > ic |J1(x)|``: the junction
    cannot source that much DC current while staying phase locked.
    """
    if ic <= 0.0:
        raise ValueError("ic must be > 0")
    if ij == 0.0:
        return 0.0
    capacity = ic * bessel_j(1, i1_reduced)
    if abs(ij) > abs(capacity) * (1.0 + 1e-12) or capacity == 0.0:
        raise UnlockedError(
            f"junction DC current {ij:.4e} A exceeds the locking capacity "
            f"ic*|J1| = {abs(capacity):.4e} A at reduced drive {i1_reduced:.4f}"
        )
    ratio = max(-1.0, min(1.0, ij / capacity))
    return math.asin(-ratio)


def junction_impedance(
    j: JunctionParams, omega: float, i1: float, ij: float
) -> ComplexImpedance:
    """Impedance of the phase-locked junction/shunt block at ``omega``.

    ``i1`` is the RF current amplitude driving the block, ``ij`` the DC
    current through the junction.  The real part is negative exactly when
    ``ij > 0`` (gain); the imaginary part is the shunt-capacitor reactance
    carrying a Bessel-weighted junction correction.
    """
    if omega <= 0.0:
        raise ValueError("omega must be > 0")
    if i1 < I1_FLOOR:
        raise DegenerateError(
            f"drive amplitude {i1:.3e} A below the {I1_FLOOR:.0e} A floor"
        )
    x = reduced_drive(i1, omega, j.cs)
    if ij == 0.0:
        s_sq = 0.0
    else:
        capacity = j.ic * bessel_j(1, x)
        if abs(ij) > abs(capacity) * (1.0 + 1e-12) or capacity == 0.0:
            raise UnlockedError(
                f"no phase-locked solution: |ij| = {abs(ij):.4e} A exceeds "
                f"ic*|J1| = {abs(capacity):.4e} A"
            )
        s = ij / capacity
        s_sq = min(s * s, 1.0)
    re = -(PhysicalConstants.hbar * omega * ij) / (PhysicalConstants.e * i1 * i1)
    bracket = 1.0 - (j.ic / i1) * (bessel_j(0, x) - bessel_j(2, x)) * math.sqrt(
        1.0 - s_sq
    )
    im = -bracket / (omega * j.cs)
    return ComplexImpedance(re=re, im=im)


def drive_state(j: JunctionParams, omega: float, i1: float, ij: float) -> DriveState:
    """Bundle the drive at ``(omega, i1)`` with its reduced amplitude and
    the locking phase consistent with junction DC current ``ij``."""
    x = reduced_drive(i1, omega, j.cs)
    return DriveState(omega=omega, i1=i1, i1_reduced=x, phic=locking_phase(ij, j.ic, x))
