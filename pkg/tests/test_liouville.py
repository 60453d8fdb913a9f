import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from respsim import liouville as lv
from oracles import lindblad_rhs, random_density, random_hermitian, random_matrix, taylor_expm

seeds = st.integers(min_value=0, max_value=2**32 - 1)
dims = st.integers(min_value=1, max_value=5)


def test_vectorize_basis_ordering():
    assert np.array_equal(lv.vectorize(np.diag([1.0, 0.0])), [1, 0, 0, 0])
    e01 = np.array([[0, 1], [0, 0]])
    assert np.array_equal(lv.vectorize(e01), [0, 1, 0, 0])


@given(seeds, dims)
def test_vectorize_round_trip(seed, d):
    rho = random_density(d, np.random.default_rng(seed))
    assert np.array_equal(lv.devectorize(lv.vectorize(rho)), rho)


def test_vectorize_rejects_non_square():
    with pytest.raises(ValueError):
        lv.vectorize(np.zeros((2, 3)))
    with pytest.raises(ValueError):
        lv.devectorize(np.zeros(5))


def test_sandwich_identity_and_lowering():
    assert np.array_equal(lv.sandwich(np.eye(3), np.eye(3)), np.eye(9))
    excited = np.diag([0.0, 1.0])
    out = lv.apply(lv.sandwich(lv.SIGMA_MINUS, lv.SIGMA_MINUS), excited)
    assert np.allclose(out, np.diag([1.0, 0.0]), atol=0)


@settings(max_examples=50)
@given(seeds, dims)
def test_superoperators_match_direct_products(seed, d):
    rng = np.random.default_rng(seed)
    x, y, rho = random_matrix(d, rng), random_matrix(d, rng), random_matrix(d, rng)
    tol = 1e-11 * max(1.0, np.abs(x).max() * np.abs(y).max() * np.abs(rho).max())
    assert np.max(np.abs(lv.apply(lv.sandwich(x, y), rho) - x @ rho @ y.conj().T)) < tol
    assert np.max(np.abs(lv.apply(lv.commutator_super(x), rho) - (x @ rho - rho @ x))) < tol
    assert np.max(np.abs(lv.apply(lv.anticommutator_super(x), rho) - (x @ rho + rho @ x))) < tol
    direct = x @ rho @ x.conj().T - 0.5 * (x.conj().T @ x @ rho + rho @ x.conj().T @ x)
    assert np.max(np.abs(lv.apply(lv.dissipator_super(x), rho) - direct)) < 10 * tol


def test_commutator_trivial_cases():
    assert np.array_equal(lv.commutator_super(np.eye(3)), np.zeros((9, 9)))
    rho = np.array([[0, 1], [0, 0]], dtype=complex)
    assert np.allclose(lv.apply(lv.commutator_super(lv.SIGMA_Z), rho), 2 * rho)


def test_anticommutator_trivial_cases():
    assert np.array_equal(lv.anticommutator_super(np.eye(3)), 2 * np.eye(9))
    p1 = np.diag([0.0, 1.0])
    assert np.allclose(lv.apply(lv.anticommutator_super(p1), p1), 2 * p1)


def test_dissipator_vacuum_and_decay():
    ground = np.diag([1.0, 0.0])
    assert np.allclose(lv.apply(lv.dissipator_super(lv.SIGMA_MINUS), ground), 0)
    rate = 0.3
    gen = lv.dissipator_super(np.sqrt(rate) * lv.SIGMA_MINUS)
    for t in (0.5, 2.0, 7.0):
        rho = lv.devectorize(lv.matrix_exponential(gen, t) @ lv.vectorize(np.diag([0.0, 1.0])))
        assert abs(rho[1, 1] - np.exp(-rate * t)) < 1e-12


@given(seeds, st.integers(min_value=1, max_value=4))
def test_dissipator_annihilates_trace(seed, d):
    rng = np.random.default_rng(seed)
    x, rho = random_matrix(d, rng), random_matrix(d, rng)
    assert abs(np.trace(lv.apply(lv.dissipator_super(x), rho))) < 1e-12 * max(1, np.abs(x).max() ** 2 * np.abs(rho).max())


def test_expm_zero_and_rotation():
    assert np.array_equal(lv.matrix_exponential(np.zeros((4, 4))), np.eye(4))
    assert np.array_equal(lv.matrix_exponential(np.ones((4, 4)), 0.0), np.eye(4))
    prop = lv.matrix_exponential(-1j * lv.commutator_super(lv.SIGMA_Z), np.pi / 2)
    rho = np.array([[0, 1], [0, 0]], dtype=complex)
    assert np.allclose(lv.devectorize(prop @ lv.vectorize(rho)), -rho, atol=1e-14)


@settings(max_examples=30)
@given(seeds, st.integers(min_value=1, max_value=9))
def test_expm_matches_taylor_series(seed, n):
    rng = np.random.default_rng(seed)
    s = random_matrix(n, rng)
    s *= 0.5 / max(np.linalg.norm(s, 2), 1e-300)
    assert np.max(np.abs(lv.matrix_exponential(s) - taylor_expm(s))) < 1e-10


def test_expm_rejects_nonfinite():
    with pytest.raises(ValueError):
        lv.matrix_exponential(np.array([[np.nan]]))


def test_kron_cases():
    assert np.array_equal(lv.kron(np.eye(2), np.eye(2)), np.eye(4))
    state = np.kron([0, 1], [1, 0])
    assert np.array_equal(lv.kron(lv.SIGMA_MINUS, np.eye(2)) @ state, np.kron([1, 0], [1, 0]))


@given(seeds)
def test_kron_associative(seed):
    rng = np.random.default_rng(seed)
    a, b, c = random_matrix(2, rng), random_matrix(3, rng), random_matrix(2, rng)
    assert np.max(np.abs(lv.kron(lv.kron(a, b), c) - lv.kron(a, lv.kron(b, c)))) < 1e-13 * max(1, np.abs(a).max() * np.abs(b).max() * np.abs(c).max())


@settings(max_examples=25, deadline=None)
@given(seeds, st.integers(min_value=2, max_value=4), st.floats(min_value=0.1, max_value=5.0))
def test_lindblad_propagator_preserves_states(seed, d, t):
    rng = np.random.default_rng(seed)
    h = random_hermitian(d, rng)
    cs = [random_matrix(d, rng, 0.4) for _ in range(2)]
    prop = lv.matrix_exponential(lv.lindbladian(h, cs), t)
    rho = lv.devectorize(prop @ lv.vectorize(random_density(d, rng)))
    assert abs(np.trace(rho) - 1) < 1e-9
    assert lv.check_density_matrix(rho) == []


def test_lindbladian_matches_matrix_rhs():
    rng = np.random.default_rng(3)
    h, c = random_hermitian(3, rng), random_matrix(3, rng)
    rho = random_density(3, rng)
    assert np.allclose(lv.apply(lv.lindbladian(h, [c]), rho), lindblad_rhs(h, [c])(rho), atol=1e-12)


def test_population_functional_and_trace():
    rng = np.random.default_rng(0)
    rho = random_density(4, rng)
    p = np.diag([0, 0, 1, 0])
    assert abs(lv.population_functional(p) @ lv.vectorize(rho) - rho[2, 2]) < 1e-15
    assert abs(lv.trace_of_vec(lv.vectorize(rho)) - 1) < 1e-14


def test_trace_distance_and_checks():
    a, b = np.diag([1.0, 0.0]), np.diag([0.0, 1.0])
    assert lv.trace_distance(a, b) == pytest.approx(1.0)
    assert lv.trace_distance(a, a) == 0
    assert "not Hermitian" in lv.check_density_matrix(np.array([[1, 1], [0, 0]]))
    assert any("negative" in p for p in lv.check_density_matrix(np.diag([1.5, -0.5])))
    assert lv.is_hermitian(np.eye(2)) and not lv.is_hermitian(lv.SIGMA_MINUS)
