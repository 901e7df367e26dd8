"""Injection locking: Adler law, lock detection and lock-range maps.

An external tone near the free-running emission entrains the oscillator.
The entrained (locked) frequency window Delta_f grows as the square root
of injected power - the Adler law - with a device- and coupling-dependent
constant that is fitted, not predicted, here.

Injected power is specified in dBm at the sample; the conversion to a
current amplitude uses an explicit ``coupling`` constant (A per sqrt(W)),
a fit/configuration parameter of the measurement chain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .circuit_model import JunctionParams
from .errors import NoPeakError, UnderdeterminedError
from .sigproc import Spectrum, baseband_spectrum, power_spectral_density
from .steady_state import ResonatorParams
from .time_domain import BatchSpec, InjectionTone, SimConfig, TimeTrace, simulate_batch

__all__ = [
    "InjectionSpec",
    "LockResult",
    "AdlerFit",
    "LockingMap",
    "adler_lock_range",
    "fit_adler_constant",
    "detect_lock",
    "locking_map",
]

#: Fraction of band power that must sit within +-2 rbw of the injection
#: tone for the emission to count as locked.
LOCK_POWER_FRACTION = 0.99


@dataclass(frozen=True)
class InjectionSpec:
    """Injection tone described at the instrument plane: frequency,
    power in dBm at the sample and the power-to-current coupling."""

    f_inj: float
    p_inj_dbm: float
    coupling: float  # A per sqrt(W)

    def __post_init__(self) -> None:
        if self.coupling <= 0.0:
            raise ValueError("coupling must be > 0")
        if self.f_inj <= 0.0:
            raise ValueError("f_inj must be > 0")

    @property
    def p_inj_watt(self) -> float:
        return 10.0 ** ((self.p_inj_dbm - 30.0) / 10.0)

    @property
    def current_amplitude(self) -> float:
        return self.coupling * math.sqrt(self.p_inj_watt)

    def tone(self) -> InjectionTone:
        return InjectionTone(amplitude=self.current_amplitude, frequency=self.f_inj)


@dataclass(frozen=True)
class LockResult:
    locked: bool
    pulled_frequency: float
    sideband_fraction: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.sideband_fraction <= 1.0):
            raise ValueError("sideband_fraction must lie in [0, 1]")


@dataclass(frozen=True)
class AdlerFit:
    k: float  # Hz per sqrt(W)
    r_squared: float


@dataclass(frozen=True)
class LockingMap:
    """Per-injection-frequency spectra and lock classification; entries
    are None where the per-point analysis failed (see ``errors``)."""

    f_inj: np.ndarray
    results: list["LockResult | None"]
    spectra: list["Spectrum | None"]
    errors: list[str | None]

    def locked_interval(self) -> tuple[float, float]:
        """Edges of the contiguous locked interval (largest run)."""
        flags = [r is not None and r.locked for r in self.results]
        best: tuple[int, int] | None = None
        start = None
        for idx, flag in enumerate(flags + [False]):
            if flag and start is None:
                start = idx
            elif not flag and start is not None:
                if best is None or idx - start > best[1] - best[0]:
                    best = (start, idx - 1)
                start = None
        if best is None:
            raise NoPeakError("no locked points in the map")
        return float(self.f_inj[best[0]]), float(self.f_inj[best[1]])

    def lock_range(self) -> float:
        lo, hi = self.locked_interval()
        step = float(self.f_inj[1] - self.f_inj[0]) if len(self.f_inj) > 1 else 0.0
        return hi - lo + step  # edges centered on grid points


def adler_lock_range(p_inj: float, k: float) -> float:
    """Adler law: lock range ``k * sqrt(p_inj)`` (Hz for W input)."""
    if p_inj < 0.0:
        raise ValueError("p_inj must be >= 0")
    return k * math.sqrt(p_inj)


def fit_adler_constant(data) -> AdlerFit:
    """Least squares of Delta_f against sqrt(p_inj) through the origin.

    ``data`` is a sequence of ``(p_inj_watt, delta_f_hz)`` pairs; at least
    three are required (:class:`UnderdeterminedError` otherwise).
    """
    pairs = [(float(p), float(d)) for p, d in data]
    if len(pairs) < 3:
        raise UnderdeterminedError(
            f"Adler fit needs >= 3 points, got {len(pairs)}"
        )
    root_p = np.array([math.sqrt(p) for p, _ in pairs])
    df = np.array([d for _, d in pairs])
    k = float(np.dot(root_p, df) / np.dot(root_p, root_p))
    residual = df - k * root_p
    ss_res = float(np.dot(residual, residual))
    ss_tot = float(np.sum((df - df.mean()) ** 2))
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0.0 else 1.0
    return AdlerFit(k=k, r_squared=r_squared)


def _lock_from_spectrum(s: Spectrum, f_inj: float, band: tuple[float, float]) -> LockResult:
    in_band = (s.f >= band[0]) & (s.f <= band[1])
    f = s.f[in_band]
    psd = s.psd[in_band]
    total = float(np.sum(psd))
    if total <= 0.0:
        raise NoPeakError("no power in the emission band")
    peak = int(np.argmax(psd))
    if psd[peak] < 10.0 * float(np.median(psd)):
        raise NoPeakError("no spectral peak at least 10 dB above the median")
    near = np.abs(f - f_inj) <= 2.0 * s.rbw
    fraction = float(np.sum(psd[near])) / total
    return LockResult(
        locked=fraction >= LOCK_POWER_FRACTION,
        pulled_frequency=float(f[peak]),
        sideband_fraction=min(max(1.0 - fraction, 0.0), 1.0),
    )


def detect_lock(
    trace: TimeTrace,
    f_inj: float,
    rbw_target: float | None = None,
) -> LockResult:
    """Classify a trace as injection locked.

    Locked means at least 99% of the emission-band power lies within
    +-2 rbw of the injection frequency.  The emission band is the octave
    around ``f_inj`` (0.5 to 1.5 f_inj), which excludes DC and junction
    harmonics.  ``rbw_target`` forces a resolution bandwidth; otherwise
    the longest segment compatible with the trace is used.
    """
    fs = trace.sample_rate
    if rbw_target is not None:
        nperseg = int(2 ** math.floor(math.log2(1.5 * fs / rbw_target)))
        nperseg = max(256, min(nperseg, len(trace)))
    else:
        nperseg = max(256, min(1 << 14, len(trace) // 4))
    start = int(len(trace) * trace.config.transient_fraction)
    # the resonator current is the emitted signal: DC-free and loop-filtered
    s = power_spectral_density(
        np.asarray(trace.i_res[start:]), nperseg, sample_rate=fs
    )
    return _lock_from_spectrum(s, f_inj, (0.5 * f_inj, 1.5 * f_inj))


def locking_map(
    j: JunctionParams,
    r: ResonatorParams,
    ib: float,
    f_inj_grid,
    p_inj_dbm: float,
    coupling: float,
    cfg: SimConfig,
    segment_fraction: float = 0.25,
) -> LockingMap:
    """Oracle spectra versus injection frequency at fixed injected power.

    All injection frequencies integrate side by side in one vectorized
    batch; the captured complex baseband around the grid center gives each
    point's spectrum.  Per-point analysis failures are recorded, never
    raised.  The measured lock range is the width of the contiguous locked
    interval.
    """
    f_inj = np.asarray(sorted(float(f) for f in f_inj_grid))
    if len(f_inj) < 2:
        raise ValueError("f_inj_grid needs at least two points")
    f_ref = float(np.mean([f_inj[0], f_inj[-1]]))
    specs = [
        BatchSpec(
            ib=ib,
            injection=InjectionSpec(
                f_inj=float(fi), p_inj_dbm=p_inj_dbm, coupling=coupling
            ).tone(),
        )
        for fi in f_inj
    ]
    bb = simulate_batch(j, r, specs, cfg, capture="baseband", f_ref=f_ref)
    discard = int(bb.z.shape[1] * cfg.transient_fraction)
    nperseg = int(2 ** math.floor(math.log2(max(64, (bb.z.shape[1] - discard) * segment_fraction))))

    results: list[LockResult | None] = []
    spectra: list[Spectrum | None] = []
    errors: list[str | None] = []
    span = bb.sample_rate  # full two-sided baseband width
    for row, fi in zip(bb.z, f_inj):
        try:
            s = baseband_spectrum(row[discard:], bb.sample_rate, f_ref, nperseg)
            res = _lock_from_spectrum(
                s, float(fi), (f_ref - 0.5 * span, f_ref + 0.5 * span)
            )
            results.append(res)
            spectra.append(s)
            errors.append(None)
        except NoPeakError as exc:
            results.append(None)
            spectra.append(None)
            errors.append(str(exc))
    return LockingMap(f_inj=f_inj, results=results, spectra=spectra, errors=errors)
