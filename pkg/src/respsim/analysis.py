"""Post-processing of response tables: spectra and sampling-interval scans."""

import warnings
from dataclasses import dataclass

import numpy as np

from .continuum import aligned_gaussian, convolve, greens_table_exact


@dataclass(frozen=True)
class Spectrum:
    omega: np.ndarray
    power: np.ndarray
    peak: float
    bin_width: float


def dominant_frequency(series, dt, detrend_degree=3, skip_bins=1):
    """Angular frequency of the strongest spectral line of a real series.

    A low-order polynomial is removed first so that slow decay does not
    swamp the line; a Hann window limits leakage.  The lowest ``skip_bins``
    bins are ignored.
    """
    y = np.asarray(series, dtype=float)
    if y.ndim != 1 or y.size < 8:
        raise ValueError("need a 1-d series with at least 8 samples")
    x = np.arange(y.size)
    if detrend_degree is not None and detrend_degree >= 0:
        y = y - np.polyval(np.polyfit(x, y, detrend_degree), x)
    power = np.abs(np.fft.rfft(y * np.hanning(y.size))) ** 2
    omega = 2 * np.pi * np.fft.rfftfreq(y.size, dt)
    k = skip_bins + int(np.argmax(power[skip_bins:]))
    return Spectrum(omega, power, float(omega[k]), float(omega[1]))


@dataclass(frozen=True)
class AliasingScan:
    dts: np.ndarray
    values: np.ndarray
    reference: float
    scale: float

    @property
    def errors(self):
        """Signed error relative to ``scale`` (the peak population by default)."""
        return (self.values - self.reference) / self.scale

    def local_maxima(self):
        """Scan points where ``|error|`` exceeds both neighbours."""
        a = np.abs(self.errors)
        inner = np.flatnonzero((a[1:-1] > a[:-2]) & (a[1:-1] > a[2:])) + 1
        return self.dts[inner]

    def sign_changes(self):
        """Interpolated zero crossings of the signed error."""
        e = self.errors
        k = np.flatnonzero(np.sign(e[:-1]) * np.sign(e[1:]) < 0)
        return self.dts[k] - e[k] * (self.dts[k + 1] - self.dts[k]) / (e[k + 1] - e[k])


def resonant_intervals(omega_diff, dt_min, dt_max):
    """Sampling intervals ``2 pi k / omega_diff`` and ``2 pi / (k omega_diff)`` in range."""
    base = 2 * np.pi / abs(omega_diff)
    out = set()
    k = 1
    while base / k >= dt_min:
        if base / k <= dt_max:
            out.add(base / k)
        k += 1
    k = 2
    while base * k <= dt_max:
        out.add(base * k)
        k += 1
    return np.array(sorted(out))


def reference_population(model, sigma_t, t0, t, dt=0.5, span=6.0):
    """Converged ``P(t)`` for a Gaussian packet from a fine exact table."""
    wp = aligned_gaussian(sigma_t, t0, dt, t, span)
    reach = t - wp.t_start
    return convolve(greens_table_exact(model, dt, reach, reach), wp, t)


def peak_population(model, sigma_t, t0, times, dt=0.5, span=6.0):
    """Largest ``P(t)`` over ``times`` on the exact fine-grid response."""
    times = np.asarray(times, dtype=float)
    t_last = float(times.max())
    wp = aligned_gaussian(sigma_t, t0, dt, t_last, span)
    reach = t_last - wp.t_start
    table = greens_table_exact(model, dt, reach, reach)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        vals = [convolve(table, aligned_gaussian(sigma_t, t0, dt, s, span), s) for s in times]
    return float(max(vals))


def aliasing_scan(table_for, dts, sigma_t, t0, t, reference, scale, span=6.0):
    """``P(t)`` from coarse tables, one per sampling interval.

    ``table_for(dt, reach)`` returns a Green's table covering ``reach`` in
    both delays.
    """
    dts = np.asarray(dts, dtype=float)
    values = np.empty(dts.size)
    for n, dt in enumerate(dts):
        wp = aligned_gaussian(sigma_t, t0, dt, t, span)
        values[n] = convolve(table_for(dt, t - wp.t_start), wp, t)
    return AliasingScan(dts, values, float(reference), float(scale))
