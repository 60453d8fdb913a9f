"""Exact continuum-field response: two-time Green's functions and convolution.

The Green's function of the measured state ``i`` is

    G(t1, t2) = <<i,i| E(t1) [L^dag . ] E(t2) [ . L] |0,0>> + h.c.

where ``E(t) = exp(K t)`` and ``K`` is the damped generator returned by
:func:`respsim.models.build_continuum_generator` in the frame rotating at the
carrier frequency.  The population after a real single-photon envelope
``eps`` is the ordered double integral of ``eps(t') eps(t'') G(t - t', t' - t'')``.
"""

import warnings
from dataclasses import dataclass, field

import numpy as np

from . import liouville as lv
from .models import build_continuum_generator, carrier_frame, ensure_valid, restrict_model

IMAG_TOL = 1e-9
DEFAULT_MEMORY_BUDGET = 2 * 1024**3


class GridMismatchError(ValueError):
    """Wavepacket samples do not line up with the Green's-function grid."""


@dataclass(frozen=True, eq=False)
class GreensTable:
    """``G(t_m, t_int)`` on ``t_m = j*dt`` (j < M) and ``t_int = k*dt`` (k < K)."""

    dt: float
    values: np.ndarray
    errors: np.ndarray = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        values = np.asarray(self.values, dtype=float)
        if values.ndim != 2:
            raise ValueError("table values must be a 2-d array")
        if not np.all(np.isfinite(values)):
            raise ValueError("table values must be finite")
        errors = np.zeros_like(values) if self.errors is None else np.asarray(self.errors, dtype=float)
        if errors.shape != values.shape or np.any(errors < 0):
            raise ValueError("errors must be non-negative with the same shape as values")
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "errors", errors)

    @property
    def shape(self):
        return self.values.shape

    @property
    def t_m(self):
        return self.dt * np.arange(self.values.shape[0])

    @property
    def t_int(self):
        return self.dt * np.arange(self.values.shape[1])


@dataclass(frozen=True, eq=False)
class Wavepacket:
    """Real photon envelope sampled at ``t_start + n * dt``."""

    t_start: float
    dt: float
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if np.iscomplexobj(values):
            if np.max(np.abs(values.imag), initial=0.0) > 1e-12:
                raise ValueError("complex envelopes are not supported; remove the carrier phase first")
            values = values.real
        object.__setattr__(self, "values", np.asarray(values, dtype=float))

    @property
    def times(self):
        return self.t_start + self.dt * np.arange(len(self.values))

    def norm(self):
        return float(np.sum(self.values**2) * self.dt)

    def sample(self, times, tol=1e-6):
        """Envelope at ``times`` (zero outside the sampled window)."""
        pos = (np.asarray(times, dtype=float) - self.t_start) / self.dt
        idx = np.rint(pos)
        if np.any(np.abs(pos - idx) > tol):
            raise GridMismatchError(
                "evaluation times are not on the wavepacket grid "
                f"(t_start={self.t_start}, dt={self.dt}); use a common dt or an integer ratio"
            )
        idx = idx.astype(int)
        out = np.zeros(idx.shape)
        inside = (idx >= 0) & (idx < len(self.values))
        out[inside] = self.values[idx[inside]]
        return out


@dataclass(frozen=True, eq=False)
class PopulationCurve:
    times: np.ndarray
    values: np.ndarray
    errors: np.ndarray


def _grid_times(grid):
    if isinstance(grid, tuple) and len(grid) == 3:
        t_start, dt, n = grid
        return float(t_start), float(dt), int(n)
    times = np.asarray(grid, dtype=float)
    steps = np.diff(times)
    if times.size < 2 or np.max(np.abs(steps - steps[0])) > 1e-9 * max(1.0, abs(steps[0])):
        raise ValueError("wavepacket grid must be uniform with at least two points")
    return float(times[0]), float(steps[0]), times.size


def gaussian_wavepacket(sigma_t, t0, grid):
    """Gaussian envelope whose intensity ``|eps|^2`` has standard deviation ``sigma_t``.

    ``grid`` is ``(t_start, dt, n)`` or a uniform array of times.  The
    samples are rescaled so that ``sum |eps|^2 dt == 1``.
    """
    if not sigma_t > 0:
        raise ValueError("sigma_t must be positive")
    t_start, dt, n = _grid_times(grid)
    if sigma_t < 2 * dt:
        warnings.warn(f"grid spacing {dt} is coarse for sigma_t={sigma_t}", stacklevel=2)
    t = t_start + dt * np.arange(n)
    eps = np.exp(-((t - t0) ** 2) / (4 * sigma_t**2))
    total = np.sum(eps**2) * dt
    if total == 0:
        raise ValueError("wavepacket grid misses the pulse entirely")
    return Wavepacket(t_start, dt, eps / np.sqrt(total))


def aligned_gaussian(sigma_t, t0, dt, t_eval, span=6.0):
    """Gaussian sampled on the ``dt`` grid through ``t_eval``, covering ``t0 +- span*sigma_t``."""
    lo = t_eval - dt * np.ceil((t_eval - (t0 - span * sigma_t)) / dt)
    hi = t_eval + dt * np.ceil(max(0.0, (t0 + span * sigma_t) - t_eval) / dt)
    n = int(round((hi - lo) / dt)) + 1
    return gaussian_wavepacket(sigma_t, t0, (lo, dt, n))


# ------------------------------------------------------------------ oracle


class _Continuum:
    """Restricted generator plus the vectors the Green's function needs."""

    def __init__(self, model):
        ensure_valid(model)
        m = carrier_frame(model)
        if max(m.grading) > 1:
            m = restrict_model(m, cap=1)
        self.model = m
        self.generator, _ = build_continuum_generator(m)
        eye = np.eye(m.dim)
        rho0 = m.ground_density()
        l_dag = lv.dag(m.coupling)
        # bra excited first, then ket; and the mirrored ordering (the h.c. term)
        self.start = lv.vectorize(rho0 @ m.coupling)
        self.start_hc = lv.vectorize(l_dag @ rho0)
        self.second = lv.sandwich(l_dag, eye)
        self.second_hc = lv.sandwich(eye, l_dag)
        self.readout = lv.population_functional(m.measured_projector())

    def propagator(self, t):
        return lv.matrix_exponential(self.generator, t)


def greens_exact(model, t1, t2):
    """``G(t1, t2)`` by direct exponentiation (no caching)."""
    if t1 < 0 or t2 < 0:
        raise ValueError(f"times must be non-negative, got ({t1}, {t2})")
    c = _Continuum(model)
    e1, e2 = c.propagator(t1), c.propagator(t2)
    a = c.readout @ e1 @ c.second @ e2 @ c.start
    b = c.readout @ e1 @ c.second_hc @ e2 @ c.start_hc
    value = a + b
    if abs(value.imag) > IMAG_TOL:
        raise ArithmeticError(f"Green's function has imaginary residue {value.imag:.3g}")
    return float(value.real)


def grid_count(t_max, dt):
    n = t_max / dt
    if abs(n - round(n)) > 1e-9 * max(1.0, n):
        raise ValueError(f"t_max={t_max} is not a multiple of dt={dt}")
    return int(round(n)) + 1


def greens_table_exact(model, dt, t_max_m, t_max_int, memory_budget=DEFAULT_MEMORY_BUDGET):
    """Tabulate ``G`` on a uniform grid from one cached step propagator.

    ``exp(K dt)`` is formed once; every ``t_int`` column is advanced by
    repeated multiplication, then all columns are stepped together in ``t_m``.
    """
    if not dt > 0:
        raise ValueError("dt must be positive")
    M, K = grid_count(t_max_m, dt), grid_count(t_max_int, dt)
    c = _Continuum(model)
    d2 = c.generator.shape[0]
    needed = 16 * (2 * d2 * d2 + 4 * d2 * K)
    if needed > memory_budget:
        raise MemoryError(f"Green's table needs about {needed} bytes, budget is {memory_budget}")
    step = c.propagator(dt)

    def columns(start, second):
        w = np.empty((d2, K), dtype=complex)
        w[:, 0] = start
        for k in range(1, K):
            w[:, k] = step @ w[:, k - 1]
        return second @ w

    w = np.hstack([columns(c.start, c.second), columns(c.start_hc, c.second_hc)])
    raw = np.empty((M, 2 * K), dtype=complex)
    raw[0] = c.readout @ w
    for j in range(1, M):
        w = step @ w
        raw[j] = c.readout @ w
    value = raw[:, :K] + raw[:, K:]
    residue = np.max(np.abs(value.imag))
    if residue > IMAG_TOL:
        raise ArithmeticError(f"Green's table has imaginary residue {residue:.3g}")
    return GreensTable(dt, value.real, metadata={"provenance": "exact", "model": model.name})


# ------------------------------------------------------------- convolution


def quadrature_weights(M, K, quadrature="trapezoid"):
    """Weights of the ordered double sum over ``(t_m index, t_int index)``.

    ``"riemann"`` weights every node 1.  ``"trapezoid"`` halves the
    same-time diagonal (``t_int = 0``) and the ``t' = t`` edge (``t_m = 0``).
    """
    w = np.ones((M, K))
    if quadrature == "riemann":
        return w
    if quadrature != "trapezoid":
        raise ValueError(f"unknown quadrature {quadrature!r}")
    w[0, :] *= 0.5
    w[:, 0] *= 0.5
    return w


def _envelope_pairs(table, wp, t):
    M, K = table.shape
    dt = table.dt
    ratio = dt / wp.dt
    if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio):
        raise GridMismatchError(f"table dt={dt} is not an integer multiple of wavepacket dt={wp.dt}")
    times = t - dt * np.arange(M + K - 1)
    e = wp.sample(times)
    # only envelope samples up to t act; both delays must reach back to the earliest one
    live = wp.times[(wp.values**2 * wp.dt > 1e-10) & (wp.times <= t + 1e-9 * dt)]
    if live.size and t - live[0] > dt * (min(M, K) - 1) + 1e-9 * dt:
        warnings.warn("wavepacket extends beyond the Green's table domain; response is truncated", stacklevel=3)
    idx = np.arange(M)[:, None] + np.arange(K)[None, :]
    return e[:M, None] * e[idx]


def convolve(table, wp, t, quadrature="trapezoid"):
    """Population at time ``t`` driven by envelope ``wp``."""
    pairs = _envelope_pairs(table, wp, t)
    w = quadrature_weights(*table.shape, quadrature)
    return float(table.dt**2 * np.sum(w * pairs * table.values))


def convolve_curve(table, wp, times, quadrature="trapezoid"):
    """:func:`convolve` over many times, with propagated table errors."""
    from .sampling import sigma_population

    times = np.asarray(times, dtype=float)
    values = np.array([convolve(table, wp, t, quadrature) for t in times])
    errors = np.array([sigma_population(wp, table, t, quadrature) for t in times])
    return PopulationCurve(times, values, errors)
