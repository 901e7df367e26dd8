"""Spectral estimation, line fitting and heterodyne IQ analysis.

Conventions: PSDs are one-sided densities on a strictly increasing
frequency grid, in V^2/Hz treated as W/Hz into a unit load.  The
resolution bandwidth of an estimate is the equivalent noise bandwidth of
its window, so integrating a pure tone's peak recovers the tone power
regardless of windowing.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import optimize, signal

from .errors import (
    AliasRiskError,
    EmptyBandError,
    NoPeakError,
    PoorFitError,
    TooShortError,
)

__all__ = [
    "Spectrum",
    "IQCloud",
    "IQHistogram",
    "GaussianPeak",
    "power_spectral_density",
    "baseband_spectrum",
    "integrate_power",
    "fit_gaussian_peak",
    "heterodyne_demodulate",
    "iq_histogram",
    "radial_profile",
]


@dataclass(frozen=True)
class Spectrum:
    """One-sided power spectral density with its resolution bandwidth.

    ``n_avg`` is the number of averaged segments behind the estimate; it
    sets the per-bin statistical uncertainty (psd / sqrt(n_avg)) used when
    judging line fits.
    """

    f: np.ndarray
    psd: np.ndarray
    rbw: float
    n_avg: int = 1

    def __post_init__(self) -> None:
        if len(self.f) != len(self.psd) or len(self.f) < 2:
            raise ValueError("f and psd must be equal-length, len >= 2")
        if np.any(np.diff(self.f) <= 0.0):
            raise ValueError("frequency grid must be strictly increasing")
        if np.any(self.psd < 0.0) or not np.all(np.isfinite(self.psd)):
            raise ValueError("psd must be finite and non-negative")
        self.f.setflags(write=False)
        self.psd.setflags(write=False)


@dataclass(frozen=True)
class IQCloud:
    """Demodulated in-phase/quadrature samples."""

    i: np.ndarray
    q: np.ndarray
    sample_rate: float
    lo_freq: float

    def __post_init__(self) -> None:
        if len(self.i) != len(self.q) or len(self.i) == 0:
            raise ValueError("i and q must be equal-length and non-empty")
        if not (np.all(np.isfinite(self.i)) and np.all(np.isfinite(self.q))):
            raise ValueError("IQ samples must be finite")

    def __len__(self) -> int:
        return len(self.i)

    @property
    def complex_samples(self) -> np.ndarray:
        return self.i + 1j * self.q


@dataclass(frozen=True)
class IQHistogram:
    counts: np.ndarray
    i_edges: np.ndarray
    q_edges: np.ndarray


@dataclass(frozen=True)
class GaussianPeak:
    center: float
    fwhm: float
    area: float
    center_err: float
    fwhm_err: float


_FWHM_PER_SIGMA = 2.0 * math.sqrt(2.0 * math.log(2.0))


def _resolve_samples(trace, sample_rate):
    if hasattr(trace, "v") and hasattr(trace, "sample_rate"):
        return np.asarray(trace.v, dtype=float), trace.sample_rate
    x = np.asarray(trace, dtype=float)
    if sample_rate is None:
        raise ValueError("sample_rate is required for raw sample arrays")
    return x, sample_rate


def _enbw(window: np.ndarray, fs: float) -> float:
    return fs * float(np.sum(window**2)) / float(np.sum(window)) ** 2


def power_spectral_density(
    trace,
    segment_length: int,
    window: str = "hann",
    sample_rate: float | None = None,
) -> Spectrum:
    """Welch-averaged one-sided PSD.

    ``trace`` is a :class:`~jjosc.time_domain.TimeTrace` (its junction
    voltage is analysed) or a plain sample array with ``sample_rate``.
    Segments overlap by half; the mean is removed per segment.
    """
    x, fs = _resolve_samples(trace, sample_rate)
    if segment_length > len(x):
        raise TooShortError(
            f"segment length {segment_length} exceeds trace length {len(x)}"
        )
    win = signal.get_window(window, segment_length)
    f, psd = signal.welch(
        x,
        fs=fs,
        window=win,
        nperseg=segment_length,
        noverlap=segment_length // 2,
        detrend="constant",
        return_onesided=True,
        scaling="density",
    )
    n_avg = 1 + (len(x) - segment_length) // (segment_length - segment_length // 2)
    return Spectrum(f=f, psd=psd, rbw=_enbw(win, fs), n_avg=n_avg)


def baseband_spectrum(
    z: np.ndarray,
    sample_rate: float,
    f_ref: float,
    segment_length: int,
    window: str = "hann",
) -> Spectrum:
    """PSD of a complex baseband record, shifted back to absolute
    frequency around ``f_ref``.  Used for lock detection and linewidth
    analysis of decimated envelopes."""
    z = np.asarray(z, dtype=complex)
    if segment_length > len(z):
        raise TooShortError(
            f"segment length {segment_length} exceeds record length {len(z)}"
        )
    win = signal.get_window(window, segment_length)
    f, psd = signal.welch(
        z,
        fs=sample_rate,
        window=win,
        nperseg=segment_length,
        noverlap=segment_length // 2,
        detrend=False,
        return_onesided=False,
        scaling="density",
    )
    order = np.argsort(f)
    n_avg = 1 + (len(z) - segment_length) // (segment_length - segment_length // 2)
    return Spectrum(
        f=f_ref + f[order], psd=psd[order], rbw=_enbw(win, sample_rate), n_avg=n_avg
    )


def integrate_power(s: Spectrum, band: tuple[float, float]) -> float:
    """Trapezoidal band power; the band must overlap the frequency grid."""
    lo, hi = band
    if hi < lo:
        raise EmptyBandError("band upper edge below lower edge")
    if hi == lo:
        return 0.0
    if hi < s.f[0] or lo > s.f[-1]:
        raise EmptyBandError(
            f"band [{lo:.4e}, {hi:.4e}] Hz outside the spectrum range"
        )
    grid = np.unique(np.concatenate([[max(lo, s.f[0])], s.f[(s.f > lo) & (s.f < hi)], [min(hi, s.f[-1])]]))
    values = np.interp(grid, s.f, s.psd)
    return float(np.trapezoid(values, grid))


def _find_peak(s: Spectrum) -> int:
    idx = int(np.argmax(s.psd))
    median = float(np.median(s.psd))
    if median <= 0.0 or s.psd[idx] < 10.0 * median:
        raise NoPeakError("no spectral peak at least 10 dB above the median")
    return idx


def fit_gaussian_peak(s: Spectrum) -> GaussianPeak:
    """Least-squares Gaussian (plus flat floor) on the linear PSD.

    Reports the fitted center, full width at half maximum with its
    one-sigma covariance estimate, and the peak area.  Raises
    :class:`NoPeakError` without a 10 dB peak and :class:`PoorFitError`
    when the reduced chi-square against the off-peak noise level exceeds
    10.
    """
    idx = _find_peak(s)
    half = s.psd[idx] / 2.0
    left = idx
    while left > 0 and s.psd[left] > half:
        left -= 1
    right = idx
    while right < len(s.psd) - 1 and s.psd[right] > half:
        right += 1
    width_guess = max(s.f[right] - s.f[left], 2.0 * (s.f[1] - s.f[0]))

    window = 8.0 * width_guess
    mask = np.abs(s.f - s.f[idx]) <= window
    if int(np.count_nonzero(mask)) < 7:
        mask = np.zeros(len(s.f), dtype=bool)
        mask[max(0, idx - 3) : idx + 4] = True
    f_fit = s.f[mask]
    p_fit = s.psd[mask]

    def model(f, a, f0, sig, b):
        return a * np.exp(-0.5 * ((f - f0) / sig) ** 2) + b

    p0 = (float(s.psd[idx]), float(s.f[idx]), width_guess / _FWHM_PER_SIGMA, float(np.median(s.psd)))
    try:
        with warnings.catch_warnings():
            # a perfect (noise-free) line makes the covariance singular;
            # the fit itself is still fine
            warnings.simplefilter("ignore", optimize.OptimizeWarning)
            popt, pcov = optimize.curve_fit(model, f_fit, p_fit, p0=p0, maxfev=20000)
    except RuntimeError as exc:
        raise PoorFitError(f"gaussian fit failed to converge: {exc}") from exc
    a, f0, sig, b = popt
    sig = abs(sig)

    # per-bin sigma: off-peak scatter, the Welch estimator's own
    # psd/sqrt(n_avg) spread, and a 2%-of-peak floor (so window-kernel
    # mismatch on clean lines does not masquerade as a bad fit)
    off_peak = s.psd[~mask]
    scatter = float(np.std(off_peak)) if len(off_peak) > 8 else 0.0
    fitted = model(f_fit, *popt)
    sigma = np.maximum(
        np.maximum(scatter, 0.02 * float(s.psd[idx])),
        np.abs(fitted) / math.sqrt(max(s.n_avg, 1)),
    )
    residual = p_fit - fitted
    chi2_red = float(np.sum((residual / sigma) ** 2)) / max(len(f_fit) - 4, 1)
    if chi2_red > 10.0:
        raise PoorFitError(f"reduced chi-square {chi2_red:.1f} exceeds 10")

    err = np.sqrt(np.clip(np.diag(pcov), 0.0, None))
    center_err = float(err[1]) if math.isfinite(err[1]) else math.nan
    fwhm_err = float(_FWHM_PER_SIGMA * err[2]) if math.isfinite(err[2]) else math.nan
    return GaussianPeak(
        center=float(f0),
        fwhm=float(_FWHM_PER_SIGMA * sig),
        area=float(a * sig * math.sqrt(2.0 * math.pi)),
        center_err=center_err,
        fwhm_err=fwhm_err,
    )


def heterodyne_demodulate(
    trace,
    f_lo: float,
    decimation: int,
    sample_rate: float | None = None,
) -> IQCloud:
    """Mix a real trace against quadrature references at ``f_lo``,
    low-pass filter (5th-order Butterworth at 0.4x the decimated Nyquist)
    and decimate.

    A coherent tone detuned from ``f_lo`` appears as a ring rotating at
    the detuning; :class:`AliasRiskError` is raised when the decimated
    rate cannot represent that rotation.
    """
    x, fs = _resolve_samples(trace, sample_rate)
    if decimation < 1:
        raise ValueError("decimation must be >= 1")
    if not 0.0 < f_lo < fs / 2.0:
        raise ValueError("f_lo must lie below the Nyquist frequency")
    fs_dec = fs / decimation

    x_ac = x - x.mean()
    spectrum = np.abs(np.fft.rfft(x_ac)) ** 2
    if np.any(spectrum > 0.0):
        f_dom = float(np.argmax(spectrum)) / (len(x_ac) / fs)
        residual = abs(f_dom - f_lo)
        if spectrum.max() > 100.0 * np.median(spectrum) and fs_dec < 2.0 * residual:
            raise AliasRiskError(
                f"decimated rate {fs_dec:.3e} Hz below twice the residual "
                f"detuning {residual:.3e} Hz"
            )

    t = np.arange(len(x)) / fs
    phase = 2.0 * math.pi * f_lo * t
    i_full = 2.0 * x_ac * np.cos(phase)
    q_full = -2.0 * x_ac * np.sin(phase)
    sos = signal.butter(5, 0.4 * (fs_dec / 2.0), fs=fs, output="sos")
    i_filt = signal.sosfiltfilt(sos, i_full)[::decimation]
    q_filt = signal.sosfiltfilt(sos, q_full)[::decimation]
    return IQCloud(i=i_filt, q=q_filt, sample_rate=fs_dec, lo_freq=f_lo)


def iq_histogram(cloud: IQCloud, bins: int) -> IQHistogram:
    """Two-dimensional occupancy counts over a symmetric IQ window."""
    if bins < 10:
        raise ValueError("bins must be >= 10")
    radius = 1.05 * float(np.max(np.hypot(cloud.i, cloud.q)))
    if radius == 0.0:
        radius = 1.0
    edges = np.linspace(-radius, radius, bins + 1)
    counts, i_edges, q_edges = np.histogram2d(cloud.i, cloud.q, bins=(edges, edges))
    return IQHistogram(counts=counts, i_edges=i_edges, q_edges=q_edges)


def radial_profile(hist: IQHistogram) -> tuple[np.ndarray, np.ndarray]:
    """Radius marginal of the IQ histogram.

    Returns radius-bin centers and the probability density of sample
    radius (unit integral over r).  An origin-centered Gaussian cloud
    gives a Rayleigh shape; a coherent ring gives a peak near its radius
    that approaches a Gaussian at high signal-to-noise.
    """
    ic = 0.5 * (hist.i_edges[:-1] + hist.i_edges[1:])
    qc = 0.5 * (hist.q_edges[:-1] + hist.q_edges[1:])
    rr = np.hypot(ic[:, None], qc[None, :])
    r_max = float(rr.max())
    n_bins = max(8, len(ic) // 2)
    r_edges = np.linspace(0.0, r_max, n_bins + 1)
    which = np.digitize(rr.ravel(), r_edges) - 1
    which = np.clip(which, 0, n_bins - 1)
    sums = np.bincount(which, weights=hist.counts.ravel(), minlength=n_bins)
    total = float(sums.sum())
    dr = r_edges[1] - r_edges[0]
    density = sums / (total * dr) if total > 0.0 else sums
    centers = 0.5 * (r_edges[:-1] + r_edges[1:])
    return centers, density
