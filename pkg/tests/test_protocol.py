import numpy as np
import pytest

from respsim import liouville as lv
from respsim import protocol as pr
from respsim.continuum import greens_exact, greens_table_exact
from respsim.models import AuxSpec, CompositeModel, ModeSpec, preset_example1, single_emitter
from oracles import random_density, single_pulse_perturbative

CHI = np.sqrt(5.0)


@pytest.fixture(scope="module")
def ex1():
    return CompositeModel(preset_example1(), ModeSpec(), AuxSpec(CHI))


def _matter_ground_population(rho, composite):
    ground = [n for n, lab in enumerate(composite.basis_labels()) if lab[0] == composite.matter.ground_state]
    return float(np.real(sum(rho[n, n] for n in ground)))


def test_empty_and_zero_area_schedules(ex1):
    sim = pr.ProtocolSimulator(ex1)
    rho = sim.evolve(pr.PulseSchedule((), 123.0))
    assert _matter_ground_population(rho, ex1) == pytest.approx(1.0, abs=1e-10)
    assert pr.measure_population(rho, ex1) == pytest.approx(0.0, abs=1e-12)
    zero = pr.two_pulse_schedule(30.0, 50.0, 1.0, 0.0)
    assert np.allclose(sim.evolve(zero), rho, atol=1e-12)


def test_single_pulse_perturbative_limit():
    c = CompositeModel(single_emitter(l_sq=0.0036), ModeSpec())
    for n in (0.05, 0.1):
        p = pr.run_single_pulse(c, 0.005, 0.01, n)
        assert p == pytest.approx(single_pulse_perturbative(0.0036, n), rel=2 * 0.0036 * n**2 + 1e-3)


def test_measure_population_cases(ex1):
    assert pr.measure_population(ex1.initial_state(), ex1) == 0.0
    labels = ex1.basis_labels()
    pure = np.zeros((ex1.dim, ex1.dim), dtype=complex)
    k = labels.index((1, 0, 0, 0))
    pure[k, k] = 1.0
    assert pr.measure_population(pure, ex1) == 1.0
    rho = random_density(ex1.dim, np.random.default_rng(5))
    p = pr.measure_population(rho, ex1)
    direct = sum(rho[n, n].real for n, lab in enumerate(labels) if lab[0] == 1)
    assert 0 <= p <= 1 and p == pytest.approx(direct, abs=1e-14)


def test_two_pulses_far_apart_add():
    c = CompositeModel(single_emitter(l_sq=0.0036), ModeSpec(), AuxSpec(CHI))
    n, t_m, t_int = 0.5, 5.0, 4000.0
    p2 = pr.run_two_pulse(c, t_int, t_m, 1.0, n)
    p_sum = pr.run_single_pulse(c, t_m, 1.0, n) + pr.run_single_pulse(c, t_m + t_int, 1.0, n)
    assert p2 == pytest.approx(p_sum, rel=4 * 0.0036 * n**2)


def test_single_pulse_equals_degenerate_pair(ex1):
    sim = pr.ProtocolSimulator(ex1)
    sched = pr.PulseSchedule((pr.Pulse(-40.0, 1.0, 0.5), pr.Pulse(0.0, 1.0, 0.0)), 30.0)
    single = pr.run_single_pulse(ex1, 70.0, 1.0, 0.5, sim)
    assert sim.population(sim.evolve_vec(sched)) == pytest.approx(single, abs=1e-14)


def test_overlap_guard(ex1):
    with pytest.raises(ValueError, match="overlap"):
        pr.run_two_pulse(ex1, 0.5, 10.0, 1.0, 0.5)
    p = pr.run_two_pulse(ex1, 0.5, 10.0, 1.0, 0.5, allow_overlap=True)
    assert 0 < p < 1
    with pytest.raises(ValueError):
        pr.Pulse(0.0, 0.0, 1.0)


def test_single_pulse_limit_of_greens():
    # a fast aux keeps the elimination error below the n^2 term being probed
    m = single_emitter(l_sq=0.0036)
    c = CompositeModel(m, ModeSpec(), AuxSpec(np.sqrt(500.0)))
    errs = []
    for n in (0.4, 0.2, 0.1):
        p = pr.single_pulse_grid(pr.ProtocolSimulator(c), 20.0, 4, 0.01, n)
        g = np.array([greens_exact(m, 20.0 * j, 0.0) for j in range(4)])
        errs.append(np.max(np.abs(2 * p / n**2 - g) / g))
    assert errs[0] > errs[1] > errs[2]
    assert errs[0] / errs[1] > 3.0


def test_immediate_readout_calibration(ex1):
    n = 0.1
    p = pr.single_pulse_grid(pr.ProtocolSimulator(ex1), 1.0, 1, 0.1, n)[0]
    g00 = greens_exact(ex1.matter, 0.0, 0.0)
    assert p / (n**2 * abs(ex1.matter.coupling[0, 1]) ** 2) == pytest.approx(g00 / (2 * 0.0036), rel=1e-2)


def test_readout_times_clamped():
    assert np.allclose(pr.readout_times([0.0, 0.2, 3.0], 1.0), [0.5, 0.5, 3.0])


def test_reconstruction_inverts_synthetic_data():
    rng = np.random.default_rng(2)
    M, K, n, c = 6, 5, 0.3, 0.5
    g0 = rng.uniform(0.001, 0.01, M + K - 1)
    g = rng.uniform(-0.01, 0.01, (M, K))
    g[:, 0] = g0[:M]
    idx = np.arange(M)[:, None] + np.arange(K)[None, :]
    p_two = n**2 * (g + c * (g0[:M, None] + g0[idx]))
    p_one = n**2 * g0 / 2
    rec = pr.reconstruct_greens(p_two, p_one, n, 1.0, c)
    assert np.allclose(rec.values, g, atol=1e-15)
    assert np.array_equal(pr.reconstruct_greens(np.zeros((M, K)), np.zeros(M + K), n, 1.0).values, np.zeros((M, K)))
    with pytest.raises(ValueError, match="single-pulse grid"):
        pr.reconstruct_greens(p_two, p_one[:3], n, 1.0)
    with pytest.raises(ValueError):
        pr.reconstruct_greens(p_two, p_one, 0.0, 1.0)


def test_grid_matches_scalar_runs(ex1):
    sim = pr.ProtocolSimulator(ex1)
    grid = pr.two_pulse_grid(sim, 5.0, 4, 4, 1.0, 0.5)
    for j, k in [(1, 1), (2, 3), (3, 2)]:
        assert grid[j, k] == pytest.approx(pr.run_two_pulse(ex1, 5.0 * k, 5.0 * j, 1.0, 0.5, sim), abs=1e-14)
    # first column overlaps fully: one pulse of twice the area
    assert grid[2, 0] == pytest.approx(pr.run_single_pulse(ex1, 10.0, 1.0, 1.0, sim), abs=1e-14)
    ones = pr.single_pulse_grid(sim, 5.0, 4, 1.0, 0.5)
    assert ones[3] == pytest.approx(pr.run_single_pulse(ex1, 15.0, 1.0, 0.5, sim), abs=1e-14)


def test_cache_matches_direct_exponentiation(ex1):
    sim = pr.ProtocolSimulator(ex1)
    sched = pr.two_pulse_schedule(40.0, 60.0, 2.0, 0.7)
    cached = sim.evolve_vec(sched)
    sim.evolve_vec(sched)
    v = lv.vectorize(ex1.initial_state())
    for duration, gamma in sched.segments():
        v = lv.matrix_exponential(ex1.generator(gamma), duration) @ v
    assert np.max(np.abs(cached - v)) < 1e-9
    assert sim.cache_size == len({(round(g, 12), round(d, 12)) for d, g in sched.segments()})


@pytest.fixture(scope="module")
def ex1_grids(ex1):
    sim = pr.ProtocolSimulator(ex1)
    exact = greens_table_exact(ex1.matter, 10.0, 1000.0, 1000.0)
    out = {}
    for n in (1.0, 0.25):
        out[n] = pr.protocol_run(pr.ProtocolConfig(ex1, 10.0, 1000.0, 1000.0, 1.0, n), sim)
    return exact, out


def test_full_grid_converges(ex1_grids):
    exact, runs = ex1_grids
    dev = {n: np.max(np.abs(r.reconstruction.values - exact.values)) / np.max(np.abs(exact.values)) for n, r in runs.items()}
    assert dev[0.25] < 0.02
    assert dev[1.0] > dev[0.25]


def test_run_metadata(ex1_grids):
    _, runs = ex1_grids
    meta = runs[0.25].reconstruction.metadata
    assert len(meta["config_hash"]) == 64
    assert meta["expansion_valid"] is True
    assert runs[1.0].reconstruction.metadata["small_parameter"] == pytest.approx(0.01, rel=1e-9)


def test_excitation_decays_only_through_aux():
    m = single_emitter(l_sq=0.0036)
    times = np.arange(0.0, 3000.0, 100.0)
    for aux, decays in ((AuxSpec(CHI), True), (None, False)):
        sim = pr.ProtocolSimulator(CompositeModel(m, ModeSpec(), aux))
        end = sim.evolve_vec(pr.PulseSchedule((pr.Pulse(0.0, 1.0, 0.5),), 0.5))
        pops = sim.advance(end[:, None], 0.5, times + 0.5)[:, 0]
        if decays:
            assert pops[-1] < 0.01 * pops[0]
        else:
            assert np.allclose(pops, pops[0], rtol=1e-9)


def test_small_parameter():
    assert pr.small_parameter(preset_example1().coupling, 1.0) == pytest.approx(0.01)
