"""Engineered nonlocal decay from a fast-decaying auxiliary qubit.

A matter lowering operator ``J`` is coupled coherently to an aux qubit that
decays with amplitude ``chi``.  For large ``chi`` the aux can be eliminated,
leaving the matter dissipator ``D[2 J / chi]``.  This module builds both
pictures and measures how far apart they are.
"""

from dataclasses import dataclass

import numpy as np

from . import liouville as lv
from .models import carrier_frame, ensure_valid


@dataclass(frozen=True, eq=False)
class EliminationReport:
    chis: np.ndarray
    times: np.ndarray
    errors: np.ndarray  # (len(chis), len(times)) trace distances
    probe_time: float
    probe_errors: np.ndarray
    max_errors: np.ndarray
    exponent: float  # slope of log(probe error) against log(chi)


def _coupling(model, J, chi):
    if J is None:
        return 0.5 * chi * model.coupling
    if callable(J):
        return lv.as_operator(J(chi))
    return lv.as_operator(J)


def _check_lowering(model, J):
    grading = model.full_grading()
    rows, cols = np.nonzero(np.abs(J) > 1e-14)
    if np.any(grading[rows] - grading[cols] != -1):
        raise ValueError("J must strictly lower the matter excitation grading")


def coupled_space(model, cap=1):
    """Retained indices of ``matter (x) aux`` with at most ``cap`` excitations."""
    grading = (model.full_grading()[:, None] + np.arange(2)[None, :]).reshape(-1)
    return np.flatnonzero(grading <= cap) if cap is not None else np.arange(grading.size)


def build_coupled(model, J, chi, cap=1):
    """Generator on ``matter (x) aux``: coherent ``J sigma_x^+ + h.c.`` plus ``D[chi sigma_x^-]``.

    The aux transition is taken resonant with the carrier, so it carries no
    energy in the rotating frame.  Returns ``(generator, kept_indices)``.
    """
    if not chi > 0:
        raise ValueError("chi must be positive")
    ensure_valid(model)
    m = carrier_frame(model)
    J = _coupling(m, J, chi)
    _check_lowering(m, J)
    eye_a = np.eye(2)
    sx = np.kron(np.eye(m.dim), lv.SIGMA_MINUS)
    hmx = np.kron(J, eye_a) @ lv.dag(sx)
    h = np.kron(m.hamiltonian, eye_a) + hmx + lv.dag(hmx)
    kept = coupled_space(m, cap)
    cut = lambda op: op[np.ix_(kept, kept)]  # noqa: E731
    return lv.lindbladian(cut(h), [chi * cut(sx)]), kept


def effective_generator(model, J, chi):
    """Matter-only generator ``-i[H_M, .] + D[2 J / chi]``."""
    if not chi > 0:
        raise ValueError("chi must be positive")
    m = carrier_frame(model)
    J = _coupling(m, J, chi)
    return lv.lindbladian(m.hamiltonian, [2.0 * J / chi])


def reduce_aux(vec, model_dim, kept):
    """Partial trace over the aux qubit of a (restricted) coupled state."""
    n = 2 * model_dim
    rho_k = lv.devectorize(vec)
    rho = np.zeros((n, n), dtype=complex)
    rho[np.ix_(kept, kept)] = rho_k
    return np.einsum("iaja->ij", rho.reshape(model_dim, 2, model_dim, 2))


def compare_elimination(model, J=None, chis=(np.sqrt(0.5), np.sqrt(5.0), np.sqrt(50.0)), times=None, initial=None, probe_time=None, cap=1):
    """Trace distance between coupled-then-reduced and effective matter dynamics.

    ``J`` is an operator, a callable ``chi -> operator`` or ``None`` for
    ``chi * L / 2``.  ``initial`` is a matter density matrix (default: the
    measured state fully populated); the aux starts in its ground state.
    """
    m = carrier_frame(model)
    times = np.linspace(0.0, 100.0, 11) if times is None else np.asarray(times, dtype=float)
    probe_time = float(times[-1]) if probe_time is None else float(probe_time)
    if initial is None:
        initial = np.zeros((m.dim, m.dim), dtype=complex)
        s = m.measured_state * m.env_dim
        initial[s, s] = 1.0
    initial = lv.as_operator(initial)
    chis = np.asarray(chis, dtype=float)
    all_times = np.unique(np.append(times, probe_time))
    errors = np.zeros((chis.size, all_times.size))
    for a, chi in enumerate(chis):
        gen_c, kept = build_coupled(m, J, chi, cap)
        gen_e = effective_generator(m, J, chi)
        rho_c = np.kron(initial, np.diag([1.0, 0.0]))
        v_c = lv.vectorize(rho_c[np.ix_(kept, kept)])
        v_e = lv.vectorize(initial)
        for b, t in enumerate(all_times):
            red = reduce_aux(lv.matrix_exponential(gen_c, t) @ v_c, m.dim, kept)
            eff = lv.devectorize(lv.matrix_exponential(gen_e, t) @ v_e)
            errors[a, b] = lv.trace_distance(red, eff)
    on_grid = np.isin(all_times, times)
    probe = errors[:, np.searchsorted(all_times, probe_time)]
    positive = probe > 0
    exponent = float("nan")
    if np.count_nonzero(positive) >= 2:
        exponent = float(np.polyfit(np.log(chis[positive]), np.log(probe[positive]), 1)[0])
    return EliminationReport(
        chis=chis,
        times=all_times[on_grid],
        errors=errors[:, on_grid],
        probe_time=probe_time,
        probe_errors=probe,
        max_errors=errors[:, on_grid].max(axis=1),
        exponent=exponent,
    )
