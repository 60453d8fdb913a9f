"""Single-mode pulse-pair experiment and Green's-function reconstruction.

The mode starts with one photon, the matter and aux qubit in their ground
states.  Square coupling pulses of width ``t_gamma`` and area ``n_gamma``
(``gamma = n_gamma / t_gamma`` while on) are centred at ``-t_int`` and ``0``;
the measured population is read at ``t_m``.  Between pulse edges the
Liouvillian is constant, so evolution is a product of cached propagators.
"""

import hashlib
import json
from dataclasses import dataclass, field

import numpy as np

from . import liouville as lv
from .continuum import GreensTable, grid_count

# the two same-time (single-pulse) terms enter the pulse-pair population with this weight
SAME_TIME_COEFF = 0.5


@dataclass(frozen=True)
class Pulse:
    center: float
    width: float
    area: float

    def __post_init__(self):
        if not self.width > 0:
            raise ValueError(f"pulse width must be positive, got {self.width}")
        if not np.isfinite(self.area / self.width) or not np.isfinite(self.center):
            raise ValueError("pulse parameters must be finite")

    @property
    def gamma(self):
        return self.area / self.width

    @property
    def start(self):
        return self.center - 0.5 * self.width

    @property
    def stop(self):
        return self.center + 0.5 * self.width


@dataclass(frozen=True)
class PulseSchedule:
    """Pulses in time order plus the absolute measurement time.

    Overlapping pulses are rejected unless ``allow_overlap`` is set, in which
    case their couplings add where they overlap.
    """

    pulses: tuple = ()
    measure_at: float = 0.0
    allow_overlap: bool = False

    def __post_init__(self):
        pulses = tuple(sorted(self.pulses, key=lambda p: p.center))
        object.__setattr__(self, "pulses", pulses)
        if not np.isfinite(self.measure_at):
            raise ValueError("measurement time must be finite")
        if not self.allow_overlap:
            for a, b in zip(pulses, pulses[1:]):
                if b.start < a.stop - 1e-12:
                    raise ValueError(f"pulses at {a.center} and {b.center} overlap")

    @property
    def start(self):
        return min([p.start for p in self.pulses] + [0.0])

    def segments(self, until=None):
        """``(duration, gamma)`` pieces from :attr:`start` to ``until``."""
        until = self.measure_at if until is None else until
        edges = {self.start, until}
        for p in self.pulses:
            edges.update((p.start, p.stop))
        edges = sorted(e for e in edges if self.start <= e <= until)
        out = []
        for a, b in zip(edges, edges[1:]):
            if b - a <= 0:
                continue
            mid = 0.5 * (a + b)
            gamma = sum(p.gamma for p in self.pulses if p.start <= mid < p.stop)
            out.append((b - a, gamma))
        return out


def _key(x):
    return float(np.round(x, 12))


class ProtocolSimulator:
    """Evolves a :class:`~respsim.models.CompositeModel` through pulse schedules.

    Step propagators are memoised by ``(gamma, duration)`` and shared by every
    schedule run through the same simulator.
    """

    def __init__(self, composite):
        self.composite = composite
        self._cache = {}
        self._generators = {}
        self.readout = lv.population_functional(composite.measured_projector())
        self.initial = lv.vectorize(composite.initial_state())

    def generator(self, gamma):
        g = _key(gamma)
        if g not in self._generators:
            self._generators[g] = self.composite.generator(g)
        return self._generators[g]

    def propagator(self, gamma, duration):
        key = (_key(gamma), _key(duration))
        if key not in self._cache:
            self._cache[key] = lv.matrix_exponential(self.generator(gamma), duration)
        return self._cache[key]

    @property
    def cache_size(self):
        return len(self._cache)

    def evolve_vec(self, schedule, until=None, vec=None):
        v = self.initial if vec is None else vec
        for duration, gamma in schedule.segments(until):
            v = self.propagator(gamma, duration) @ v
        return v

    def evolve(self, schedule):
        """Density matrix at ``schedule.measure_at``."""
        return lv.devectorize(self.evolve_vec(schedule))

    def population(self, vec):
        return float(np.real(self.readout @ vec))

    def advance(self, states, t_from, times):
        """Populations at uniform ``times >= t_from`` for coupling-free evolution.

        ``states`` holds one vectorized state per column, all at ``t_from``.
        """
        times = np.asarray(times, dtype=float)
        out = np.empty((times.size, states.shape[1]))
        if times.size == 0:
            return out
        v = self.propagator(0.0, times[0] - t_from) @ states
        out[0] = np.real(self.readout @ v)
        for j in range(1, times.size):
            v = self.propagator(0.0, times[j] - times[j - 1]) @ v
            out[j] = np.real(self.readout @ v)
        return out


def measure_population(rho, composite):
    """Measured-state population, traced over env, mode and aux factors."""
    rho = lv.as_operator(rho)
    if rho.shape != (composite.dim, composite.dim):
        raise ValueError(f"density matrix shape {rho.shape} does not match composite dim {composite.dim}")
    return float(np.real(np.trace(composite.measured_projector() @ rho)))


def evolve_schedule(composite, schedule, simulator=None):
    sim = simulator or ProtocolSimulator(composite)
    return sim.evolve(schedule)


def two_pulse_schedule(t_int, t_m, t_gamma, n_gamma, allow_overlap=False):
    pulses = (Pulse(-t_int, t_gamma, n_gamma), Pulse(0.0, t_gamma, n_gamma))
    return PulseSchedule(pulses, t_m, allow_overlap)


def run_two_pulse(composite, t_int, t_m, t_gamma, n_gamma, simulator=None, allow_overlap=False):
    """``P_sm(t_m, t_int)`` for pulses centred at ``-t_int`` and ``0``."""
    sim = simulator or ProtocolSimulator(composite)
    schedule = two_pulse_schedule(t_int, t_m, t_gamma, n_gamma, allow_overlap)
    return sim.population(sim.evolve_vec(schedule))


def run_single_pulse(composite, t_m, t_gamma, n_gamma, simulator=None):
    sim = simulator or ProtocolSimulator(composite)
    schedule = PulseSchedule((Pulse(0.0, t_gamma, n_gamma),), t_m)
    return sim.population(sim.evolve_vec(schedule))


def readout_times(t_m, t_gamma):
    """Readout instants for nominal delays ``t_m`` after the last pulse centre.

    A delay shorter than half a pulse would read out mid-pulse, where only part
    of the pulse area has acted; such points are read out at the pulse edge.
    """
    return np.maximum(np.asarray(t_m, dtype=float), 0.5 * t_gamma)


def single_pulse_grid(sim, dt, count, t_gamma, n_gamma):
    """``P_one(j*dt)`` for ``j < count``, pulse centred at 0."""
    half = 0.5 * t_gamma
    end = sim.evolve_vec(PulseSchedule((Pulse(0.0, t_gamma, n_gamma),), half))
    return sim.advance(end[:, None], half, readout_times(dt * np.arange(count), t_gamma))[:, 0]


def two_pulse_grid(sim, dt, M, K, t_gamma, n_gamma):
    """``P_two`` on ``t_m = j*dt`` (j < M), ``t_int = k*dt`` (k < K).

    Columns with ``t_int < t_gamma`` overlap; their couplings add.  Readout
    follows :func:`readout_times`.
    """
    t_m = dt * np.arange(M)
    t_int = dt * np.arange(K)
    half = 0.5 * t_gamma
    d2 = sim.initial.shape[0]
    at_end = np.empty((d2, K), dtype=complex)

    separate = t_int >= t_gamma - 1e-12
    if np.any(separate):
        ks = np.flatnonzero(separate)
        after_first = sim.propagator(n_gamma / t_gamma, t_gamma) @ sim.initial
        gaps = t_int[ks] - t_gamma
        before_second = np.empty((d2, ks.size), dtype=complex)
        v = sim.propagator(0.0, gaps[0]) @ after_first
        before_second[:, 0] = v
        for n in range(1, ks.size):
            v = sim.propagator(0.0, gaps[n] - gaps[n - 1]) @ v
            before_second[:, n] = v
        at_end[:, ks] = sim.propagator(n_gamma / t_gamma, t_gamma) @ before_second
    for k in np.flatnonzero(~separate):
        schedule = two_pulse_schedule(t_int[k], half, t_gamma, n_gamma, allow_overlap=True)
        at_end[:, k] = sim.evolve_vec(schedule)

    return sim.advance(at_end, half, readout_times(t_m, t_gamma))


def small_parameter(coupling, n_gamma):
    """``||L||^2 n_gamma^2`` with the spectral norm; the expansion needs it << 1."""
    return float(np.linalg.norm(coupling, 2) ** 2 * n_gamma**2)


def reconstruct_greens(p_two, p_one, n_gamma, dt, same_time_coeff=SAME_TIME_COEFF, coupling=None, metadata=None):
    """Invert the pulse-pair expansion for ``G(t_m, t_int)``.

    ``G(t_m, 0) = 2 P_one(t_m) / n^2`` comes from the single-pulse channel and
    ``G(t_m, t_int) = P_two / n^2 - c [G(t_m, 0) + G(t_m + t_int, 0)]``.
    ``p_one`` must reach ``t_m + t_int`` for every grid point.
    """
    if n_gamma == 0:
        raise ValueError("n_gamma must be non-zero")
    p_two = np.asarray(p_two, dtype=float)
    p_one = np.asarray(p_one, dtype=float)
    M, K = p_two.shape
    if p_one.shape[0] < M + K - 1:
        raise ValueError(
            f"single-pulse grid has {p_one.shape[0]} points; need {M + K - 1} to cover t_m + t_int"
        )
    g0 = 2.0 * p_one / n_gamma**2
    idx = np.arange(M)[:, None] + np.arange(K)[None, :]
    g = p_two / n_gamma**2 - same_time_coeff * (g0[:M, None] + g0[idx])
    g[:, 0] = g0[:M]
    meta = {"provenance": "reconstructed", "n_gamma": n_gamma, "same_time_coeff": same_time_coeff}
    if coupling is not None:
        eps = small_parameter(coupling, n_gamma)
        meta.update(small_parameter=eps, expansion_valid=bool(eps < 0.1))
    meta.update(metadata or {})
    return GreensTable(dt, g, metadata=meta)


@dataclass(frozen=True, eq=False)
class ProtocolConfig:
    composite: object
    dt: float
    t_max_m: float
    t_max_int: float
    t_gamma: float = 1.0
    n_gamma: float = 1.0
    same_time_coeff: float = SAME_TIME_COEFF

    def describe(self):
        c = self.composite
        return {
            "model": c.matter.name,
            "model_fingerprint": model_fingerprint(c.matter),
            "chi": None if c.aux is None else c.aux.chi,
            "manifold_cap": c.manifold_cap,
            "n_max": c.mode.n_max,
            "dt": self.dt,
            "t_max_m": self.t_max_m,
            "t_max_int": self.t_max_int,
            "t_gamma": self.t_gamma,
            "n_gamma": self.n_gamma,
            "same_time_coeff": self.same_time_coeff,
        }

    def hash(self):
        blob = json.dumps(self.describe(), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


def model_fingerprint(model):
    h = hashlib.sha256()
    for op in (model.hamiltonian, model.coupling, *model.dissipators, model.env_initial):
        h.update(np.ascontiguousarray(op).tobytes())
    h.update(json.dumps([model.grading, model.omega0, model.frame, model.measured_state]).encode())
    return h.hexdigest()[:16]


@dataclass(frozen=True, eq=False)
class ProtocolResult:
    p_two: np.ndarray
    p_one: np.ndarray
    reconstruction: GreensTable
    metadata: dict = field(default_factory=dict)


def protocol_run(config, simulator=None):
    """Single-pulse sweep, pulse-pair sweep and reconstruction for one config."""
    sim = simulator or ProtocolSimulator(config.composite)
    M, K = grid_count(config.t_max_m, config.dt), grid_count(config.t_max_int, config.dt)
    p_one = single_pulse_grid(sim, config.dt, M + K - 1, config.t_gamma, config.n_gamma)
    p_two = two_pulse_grid(sim, config.dt, M, K, config.t_gamma, config.n_gamma)
    meta = {"config_hash": config.hash(), **config.describe()}
    table = reconstruct_greens(
        p_two,
        p_one,
        config.n_gamma,
        config.dt,
        config.same_time_coeff,
        coupling=config.composite.matter.coupling,
        metadata=meta,
    )
    return ProtocolResult(p_two, p_one, table, meta)
