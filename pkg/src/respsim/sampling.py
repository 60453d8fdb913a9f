"""Shot-noise emulation and error budgets for the pulse-pair protocol.

Populations are estimated from ``N`` projective measurements, so each
estimate is ``k / N`` with ``k ~ Binomial(N, p)``.  Random streams come from
numpy's ``PCG64`` seeded through ``SeedSequence(master, spawn_key=...)``, so
any grid point can be regenerated on its own.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from .continuum import GreensTable, _envelope_pairs, quadrature_weights
from .protocol import SAME_TIME_COEFF, ProtocolResult, reconstruct_greens

RNG_ALGORITHM = "numpy.random.PCG64/SeedSequence"

# channel tags folded into per-point seeds
_SINGLE, _PAIR = 1, 2


@dataclass(frozen=True)
class SampledEstimate:
    mean: float
    stderr: float
    N: int
    seed: int


@dataclass(frozen=True)
class Budget:
    """Trial counts needed for a target population error.

    ``N_per_point`` is the conservative count from the single-pulse branch of
    the error formula (the largest per-point ``sigma_G``); ``N_leading`` keeps
    only the binomial term of the pulse-pair branch.
    """

    target_sigma_p: float
    dt: float
    domain: float
    p_typical: float
    n_gamma: float
    sigma_g_target: float
    N_per_point: int
    N_leading: int
    intervals: int
    grid_points: int
    per_interval_total: int
    per_interval_total_leading: int
    per_grid_point_total: int
    notes: dict = field(default_factory=dict)


def _rng(seed, *key):
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=key)))


def _check_probability(p):
    p = np.asarray(p, dtype=float)
    if np.any((p < 0) | (p > 1)) or not np.all(np.isfinite(p)):
        raise ValueError("probabilities must lie in [0, 1]")
    return p


def sample_population(p, N, seed):
    """Binomial estimate of a single population."""
    p = float(_check_probability(p))
    if N < 1:
        raise ValueError("N must be at least 1")
    k = _rng(seed).binomial(N, p)
    mean = k / N
    return SampledEstimate(mean, float(np.sqrt(mean * (1 - mean) / N)), N, seed)


def sample_grid(p, N, seed, channel=0):
    """Estimates for an array of populations, one derived stream per entry."""
    p = np.clip(_check_probability(p), 0.0, 1.0)
    out = np.empty(p.shape)
    for idx in np.ndindex(p.shape):
        out[idx] = _rng(seed, channel, *idx).binomial(N, p[idx]) / N
    return out


def binomial_sigma(p, N):
    p = np.clip(np.asarray(p, dtype=float), 0.0, 1.0)
    return np.sqrt(p * (1 - p) / N)


def sigma_greens_single(p_one, n_gamma, N):
    """Error of ``G(t_m, 0) = 2 P_one / n^2``."""
    if n_gamma == 0:
        raise ValueError("n_gamma must be non-zero")
    return 2.0 / n_gamma**2 * binomial_sigma(p_one, N)


def sigma_greens(p_two, p_one_a, p_one_b, n_gamma, N, same_time_coeff=SAME_TIME_COEFF):
    """Propagated error of a reconstructed ``G(t_m, t_int)``.

    ``p_one_a`` and ``p_one_b`` are the single-pulse populations at ``t_m``
    and ``t_m + t_int``.  The coefficient is the one used in the
    reconstruction; ``0.25`` gives the ``1/16`` weighting.
    """
    if n_gamma == 0:
        raise ValueError("n_gamma must be non-zero")
    for p in (p_two, p_one_a, p_one_b):
        _check_probability(p)
    s_a = sigma_greens_single(p_one_a, n_gamma, N)
    s_b = sigma_greens_single(p_one_b, n_gamma, N)
    pair = binomial_sigma(p_two, N) ** 2 / n_gamma**4
    return np.sqrt(pair + same_time_coeff**2 * (s_a**2 + s_b**2))


def sigma_table(p_two, p_one, n_gamma, N, same_time_coeff=SAME_TIME_COEFF):
    """``sigma_G`` on the whole grid; column 0 uses the single-pulse branch."""
    p_two = np.asarray(p_two, dtype=float)
    p_one = np.asarray(p_one, dtype=float)
    M, K = p_two.shape
    idx = np.arange(M)[:, None] + np.arange(K)[None, :]
    s = sigma_greens(
        np.clip(p_two, 0, 1), np.clip(p_one[:M, None], 0, 1), np.clip(p_one[idx], 0, 1), n_gamma, N, same_time_coeff
    )
    s[:, 0] = sigma_greens_single(np.clip(p_one[:M], 0, 1), n_gamma, N)
    return s


def sigma_population(wp, table, t, quadrature="trapezoid"):
    """Population error from independent per-point ``sigma_G`` (full sum)."""
    pairs = _envelope_pairs(table, wp, t)
    w = quadrature_weights(*table.shape, quadrature)
    return float(table.dt**2 * np.sqrt(np.sum((w * pairs * table.errors) ** 2)))


def sigma_population_approx(sigma_g, dt):
    """Constant-``sigma_G`` shortcut: ``sigma_P ~ dt * sigma_G``."""
    return dt * sigma_g


def plan_budget(target_sigma_p, dt, domain, p_typical, n_gamma, N_cap=10**12):
    """Trials per grid point and in total for a target ``sigma_P``."""
    for name, v in [("target_sigma_p", target_sigma_p), ("dt", dt), ("domain", domain), ("n_gamma", n_gamma)]:
        if not v > 0:
            raise ValueError(f"{name} must be positive")
    _check_probability(p_typical)
    var = p_typical * (1 - p_typical)
    sigma_g = target_sigma_p / dt
    n_single = int(np.ceil(4 * var / (n_gamma**4 * sigma_g**2) - 1e-9))
    n_leading = int(np.ceil(var / (n_gamma**4 * sigma_g**2) - 1e-9))
    if n_single > N_cap:
        raise ValueError(f"target sigma_P={target_sigma_p} needs {n_single} trials per point (cap {N_cap})")
    intervals = int(round(domain / dt))
    points = (intervals + 1) ** 2
    return Budget(
        target_sigma_p=target_sigma_p,
        dt=dt,
        domain=domain,
        p_typical=p_typical,
        n_gamma=n_gamma,
        sigma_g_target=sigma_g,
        N_per_point=n_single,
        N_leading=n_leading,
        intervals=intervals,
        grid_points=points,
        per_interval_total=n_single * intervals,
        per_interval_total_leading=n_leading * intervals,
        per_grid_point_total=n_single * points,
        notes={
            "per_interval": "N x domain/dt",
            "per_grid_point": "N x (t_m points) x (t_int points)",
        },
    )


def sampled_protocol_run(result, N, seed, exact=False, same_time_coeff=None):
    """Add shot noise to an exact :class:`ProtocolResult` and re-reconstruct.

    With ``exact=True`` the exact populations are kept but the error bars
    for ``N`` trials are still attached.
    """
    meta = dict(result.metadata)
    table = result.reconstruction
    n_gamma = table.metadata["n_gamma"]
    coeff = table.metadata.get("same_time_coeff", SAME_TIME_COEFF) if same_time_coeff is None else same_time_coeff
    if exact:
        p_two, p_one = result.p_two, result.p_one
    else:
        p_one = sample_grid(np.clip(result.p_one, 0, 1), N, seed, _SINGLE)
        p_two = sample_grid(np.clip(result.p_two, 0, 1), N, seed, _PAIR)
    errors = sigma_table(p_two, p_one, n_gamma, N, coeff)
    meta.update(
        provenance="exact" if exact else f"sampled(N={N}, seed={seed})",
        N=N,
        seed=seed,
        rng=RNG_ALGORITHM,
    )
    rec = reconstruct_greens(p_two, p_one, n_gamma, table.dt, coeff, metadata=meta)
    rec = GreensTable(rec.dt, rec.values, errors, {**table.metadata, **rec.metadata})
    return replace(result, p_two=p_two, p_one=p_one, reconstruction=rec, metadata=meta)
