import numpy as np
import pytest

from respsim import liouville as lv
from respsim import models
from respsim.models import (
    AuxSpec,
    CompositeModel,
    MatterModel,
    ModeSpec,
    build_continuum_generator,
    preset_example1,
    preset_example2,
    restrict_manifold,
    rotating_frame,
    single_emitter,
    validate,
)
from oracles import jaynes_cummings_excited, two_level_amplitudes


def test_example1_is_valid_with_expected_spectrum():
    m = preset_example1()
    assert validate(m) == []
    assert np.allclose(np.sort(np.linalg.eigvalsh(m.hamiltonian)), [0.0, 0.8, 1.0])
    assert np.allclose(np.abs(m.coupling[0, 1:]) ** 2, [0.0036, 0.0064])


def test_validate_names_violations():
    m = preset_example1()
    bad_h = m.hamiltonian.copy()
    bad_h[1, 2] = 0.1
    problems = validate(MatterModel(bad_h, m.coupling, m.grading, omega0=1.0))
    assert any("H_M" in p and "Hermitian" in p for p in problems)
    raising = m.coupling.T.copy()
    assert any("grading" in p for p in validate(MatterModel(m.hamiltonian, raising, m.grading, omega0=1.0)))
    assert any("measured_state" in p for p in validate(MatterModel(m.hamiltonian, m.coupling, m.grading, measured_state=0)))
    assert any("shape" in p for p in validate(MatterModel(np.eye(2), m.coupling, m.grading)))
    with pytest.raises(ValueError):
        models.ensure_valid(MatterModel(bad_h, m.coupling, m.grading))


def test_rotating_frame():
    m = preset_example1()
    r = rotating_frame(m)
    assert np.allclose(np.diag(r.hamiltonian).real, [0.0, 0.0, -0.2])
    assert rotating_frame(m, 0.0) is m
    back = rotating_frame(rotating_frame(m, 0.7), -0.7)
    assert np.allclose(back.hamiltonian, m.hamiltonian) and back.frame == 0.0


def test_continuum_generator_cases():
    h = np.diag([0.0, 1.0, 0.5]).astype(complex)
    m = MatterModel(h, np.zeros((3, 3)), (0, 1, 1))
    gen, _ = build_continuum_generator(m)
    assert np.allclose(gen, -1j * lv.commutator_super(h))
    vec = lv.vectorize(np.diag([0.2, 0.5, 0.3]))
    assert abs(lv.trace_of_vec(lv.matrix_exponential(gen, 3.0) @ vec) - 1) < 1e-12

    e = single_emitter(l_sq=0.01)
    gen, _ = build_continuum_generator(e)
    rho = lv.devectorize(lv.matrix_exponential(gen, 20.0) @ lv.vectorize(np.diag([0.0, 1.0])))
    assert rho[1, 1].real == pytest.approx(np.exp(-0.01 * 20.0), rel=1e-12)


def test_example1_block_matches_closed_form():
    m = models.carrier_frame(preset_example1())
    gen, _ = build_continuum_generator(m)
    amp = two_level_amplitudes([1.0, 0.8], [0.06, 0.08], 1.0)
    for t in (0.0, 3.0, 40.0, 250.0):
        prop = lv.matrix_exponential(gen, t)
        for a in (1, 2):
            # |a><0| evolves as U(t)|a><0| in the no-feed generator
            start = np.zeros((3, 3), dtype=complex)
            start[a, 0] = 1.0
            out = lv.devectorize(prop @ lv.vectorize(start))
            assert np.allclose(out[1:, 0], amp(t)[:, a - 1], atol=1e-10)


def test_restrict_manifold_counts():
    op = np.arange(16.0).reshape(4, 4)
    same, kept = restrict_manifold(op, [0, 1, 1, 2], 2)
    assert np.array_equal(same, op) and list(kept) == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        restrict_manifold(op, [0, 1], 1)


def test_composite_dimensions_and_labels():
    c = CompositeModel(preset_example1(), ModeSpec(), AuxSpec(np.sqrt(5.0)))
    assert c.dim == 5
    assert sorted(c.basis_labels()) == sorted([(0, 0, 0, 0), (1, 0, 0, 0), (2, 0, 0, 0), (0, 0, 1, 0), (0, 0, 0, 1)])
    assert CompositeModel(single_emitter(), ModeSpec()).dim == 3
    assert CompositeModel(single_emitter(), ModeSpec()).generator(0.2).shape == (9, 9)
    m2, fluct = preset_example2()
    assert m2.dim == 64 and len(fluct) == 2
    assert CompositeModel(m2, ModeSpec(), AuxSpec(np.sqrt(5.0))).dim == 28
    assert models.restrict_model(m2).dim == 5 * 4
    with pytest.raises(ValueError):
        CompositeModel(single_emitter(), ModeSpec(n_max=2, initial_fock=2), manifold_cap=1)


def test_example2_structure():
    m, _ = preset_example2()
    assert validate(m) == []
    assert m.measured_state == 0b0001
    assert lv.is_hermitian(m.hamiltonian)
    mixed, _ = preset_example2(env_initial="mixed")
    assert np.allclose(mixed.env_initial, np.eye(4) / 4)
    with pytest.raises(ValueError):
        preset_example2(env_initial="hot")


def test_free_composite_is_trace_preserving_block_diagonal():
    c = CompositeModel(preset_example1(), ModeSpec())
    gen = c.generator(0.0)
    prop = lv.matrix_exponential(gen, 10.0)
    out = lv.devectorize(prop @ lv.vectorize(c.initial_state()))
    assert abs(np.trace(out) - 1) < 1e-12
    # no coupling: the photon stays put and matter stays in its ground state
    assert np.allclose(out, c.initial_state(), atol=1e-12)


def test_jaynes_cummings_rabi():
    m = MatterModel(np.zeros((2, 2)), lv.SIGMA_MINUS, (0, 1))
    c = CompositeModel(m, ModeSpec())
    gamma = 0.3
    gen = c.generator(gamma)
    readout = lv.population_functional(c.measured_projector())
    v0 = lv.vectorize(c.initial_state())
    for t in np.linspace(0, 12, 7):
        p = np.real(readout @ lv.matrix_exponential(gen, t) @ v0)
        assert p == pytest.approx(jaynes_cummings_excited(gamma, t), abs=1e-12)


def test_aux_coupling_default():
    m = preset_example1()
    aux = AuxSpec(2.0)
    assert np.allclose(aux.coupling_operator(m), m.coupling)
    with pytest.raises(ValueError):
        AuxSpec(0.0)
