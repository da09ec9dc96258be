import numpy as np
import pytest
from numpy.testing import assert_allclose

from api.solver_client import (Block, ConicProblem, LinearEquality, PsdImage, SolverClient, Status, clarabel_cone_bytes,
                               real_embedding, write_sdpa)
from qops.superops import vec
from utils.config import get_settings
from utils.errors import BadParameter, DimMismatch


def trace_row(side):
    return vec(np.eye(side)).reshape(1, -1)


def max_eigenvalue_problem(h, trace=1.0):
    """max Tr(H X) subject to Tr X = trace, X ⪰ 0."""
    side = h.shape[0]
    return ConicProblem(blocks=(Block('X', side),),
                        equalities=(LinearEquality({'X': trace_row(side)}, [trace], label='trace'),),
                        objective={'X': h}, name='lambda-max')


def random_hermitian(rng, side):
    a = rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))
    return (a + a.conj().T) / 2


def test_real_embedding_doubles_spectrum(rng):
    h = random_hermitian(rng, 3)
    expected = np.sort(np.repeat(np.linalg.eigvalsh(h), 2))
    assert_allclose(np.sort(np.linalg.eigvalsh(real_embedding(h))), expected, atol=1e-12)


def test_largest_eigenvalue(rng):
    """The SDP value is λ_max and the optimal block is the top eigenprojector"""
    h = random_hermitian(rng, 4)
    solution = SolverClient().solve(max_eigenvalue_problem(h))
    assert solution.ok
    top = np.linalg.eigvalsh(h)[-1]
    assert solution.primal_value == pytest.approx(top, abs=1e-6)
    assert solution.dual_value == pytest.approx(top, abs=1e-6)
    x = solution.block_values['X']
    assert np.trace(x).real == pytest.approx(1.0, abs=1e-6)
    assert np.min(np.linalg.eigvalsh((x + x.conj().T) / 2)) > -1e-6


def test_minimization_sense(rng):
    h = random_hermitian(rng, 3)
    problem = max_eigenvalue_problem(h).with_objective({'X': h}, 'min')
    solution = SolverClient().solve(problem)
    assert solution.primal_value == pytest.approx(np.linalg.eigvalsh(h)[0], abs=1e-6)
    assert solution.dual_value == pytest.approx(np.linalg.eigvalsh(h)[0], abs=1e-6)
    assert solution.lower_certificate <= solution.primal_value + 1e-6


def test_infeasible_status():
    """A negative trace on a PSD block is reported, not returned as a value"""
    solution = SolverClient().solve(max_eigenvalue_problem(np.eye(2), trace=-1.0))
    assert solution.status == Status.INFEASIBLE
    assert not solution.ok


def test_contradictory_constant_equality():
    problem = ConicProblem(blocks=(Block('X', 2),),
                           equalities=(LinearEquality({'X': np.zeros((1, 4))}, [1.0], label='zero'),))
    assert SolverClient().solve(problem).status == Status.INFEASIBLE


def test_psd_image_constraint():
    """X ⪯ Y through the image Y - X, with Tr Y = 1 capping Tr X"""
    side = 2
    identity_map = np.eye(side * side)
    slack = ConicProblem(
        blocks=(Block('X', side), Block('S', side)),
        equalities=(LinearEquality({'X': identity_map, 'S': identity_map}, vec(np.eye(side) / 2),
                                   hermitian_side=side, label='slack'),),
        objective={'X': np.eye(side)}, name='capped')
    assert SolverClient().solve(slack).primal_value == pytest.approx(1.0, abs=1e-6)

    imaged = ConicProblem(blocks=(Block('X', side), Block('Y', side)),
                          images=(PsdImage('gap', side, {'Y': identity_map, 'X': -identity_map}),),
                          equalities=(LinearEquality({'Y': trace_row(side)}, [1.0], label='trace'),),
                          objective={'X': np.eye(side)}, name='imaged')
    assert SolverClient().solve(imaged).primal_value == pytest.approx(1.0, abs=1e-6)


def test_parametric_reuses_constraints(rng):
    problem = max_eigenvalue_problem(np.eye(3))
    solve = SolverClient().parametric(problem)
    for _ in range(3):
        h = random_hermitian(rng, 3)
        assert solve.solve({'X': h}).primal_value == pytest.approx(np.linalg.eigvalsh(h)[-1], abs=1e-6)


def test_problem_validation():
    with pytest.raises(BadParameter):
        ConicProblem(blocks=())
    with pytest.raises(BadParameter):
        ConicProblem(blocks=(Block('X', 2),), objective={'X': np.array([[0, 1], [0, 0]])})
    with pytest.raises(DimMismatch):
        LinearEquality({'X': np.zeros((2, 4))}, [1.0])


def test_write_sdpa(tmp_path):
    path = tmp_path / 'problem.dat-s'
    write_sdpa(max_eigenvalue_problem(np.diag([1.0, 2.0])), path)
    lines = path.read_text().splitlines()
    assert lines[0].startswith('"lambda-max')
    assert lines[1] == '1'
    assert lines[2] == '1'
    assert lines[3] == '4'
    for entry in lines[5:]:
        matno, blkno, i, j, _ = entry.split()
        assert int(blkno) == 1 and 1 <= int(i) <= int(j) <= 4
        assert int(matno) in (0, 1)


def test_dump_dir(tmp_path):
    client = SolverClient(dump_dir=str(tmp_path))
    client.solve(max_eigenvalue_problem(np.eye(2)))
    assert len(list(tmp_path.glob('*.dat-s'))) == 1


def test_dual_sign_follows_sense(rng):
    """Parametric solves in either sense report a dual that matches the primal"""
    h = random_hermitian(rng, 3)
    solve = SolverClient().parametric(max_eigenvalue_problem(np.eye(3)))
    low = solve.solve({'X': h}, 'min')
    high = solve.solve({'X': h}, 'max')
    assert low.ok and high.ok
    assert low.dual_value == pytest.approx(np.linalg.eigvalsh(h)[0], abs=1e-6)
    assert high.dual_value == pytest.approx(np.linalg.eigvalsh(h)[-1], abs=1e-6)


def test_no_equalities_means_no_dual():
    problem = ConicProblem(blocks=(Block('X', 2),), objective={'X': np.eye(2)}, sense='min', name='bare')
    solution = SolverClient().solve(problem)
    assert solution.ok
    assert np.isnan(solution.dual_value)
    assert solution.upper_certificate == pytest.approx(solution.primal_value)
    assert solution.primal_value == pytest.approx(0.0, abs=1e-6)


def test_large_cones_fall_back_to_scs(rng):
    small = max_eigenvalue_problem(np.eye(4))
    large = max_eigenvalue_problem(np.eye(64))
    assert clarabel_cone_bytes(large) == (128 * 129 // 2) ** 2 * 8
    client = SolverClient()
    assert client.backend_for(small) == 'CLARABEL'
    assert client.backend_for(large) == 'SCS'

    capped = SolverClient(get_settings().with_overrides(clarabel_max_bytes=1))
    h = random_hermitian(rng, 3)
    solution = capped.solve(max_eigenvalue_problem(h))
    assert solution.solver == 'SCS'
    assert solution.primal_value == pytest.approx(np.linalg.eigvalsh(h)[-1], abs=1e-5)
    scs_only = SolverClient(get_settings().with_overrides(solver='SCS'))
    assert scs_only.backend_for(small) == 'SCS'
