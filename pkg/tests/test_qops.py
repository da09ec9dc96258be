import numpy as np
import pytest
from numpy.testing import assert_allclose

from channels.families import amplitude_damping, haar_unitary, maximally_entangled, unitary_channel
from qops.choi import KrausChannel, apply_choi, choi, link_product
from qops.operators import (LabeledOperator, SystemLabel, identity, is_psd, labels, min_eigenvalue, partial_trace,
                            partial_transpose, permute_systems, relabel, tensor, trace_and_replace)
from qops.superops import (partial_trace_map, partial_transpose_map, permutation_map, sandwich_map,
                           tensor_identity_map, unvec, vec)
from qops.symmetric import permutation_unitary, symmetric_dimension, symmetric_isometry, symmetric_projector
from utils.errors import BadPermutation, DimMismatch, DuplicateSystem, SizeOverflow, UnknownSystem


def random_operator(rng, side):
    return rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))


def random_state(rng, side):
    a = random_operator(rng, side)
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_labeled_operator_rejects_bad_shapes():
    """Matrix side must match the product of the system dimensions"""
    with pytest.raises(DimMismatch):
        LabeledOperator(labels(('A', 2), ('B', 3)), np.eye(5))
    with pytest.raises(DuplicateSystem):
        LabeledOperator(labels(('A', 2), ('A', 2)), np.eye(4))


def test_partial_trace_of_product(rng):
    """Tracing B out of X ⊗ Y leaves Tr(Y) X"""
    a, b = labels(('A', 2), ('B', 3))
    x, y = random_operator(rng, 2), random_operator(rng, 3)
    xy = tensor(LabeledOperator((a,), x), LabeledOperator((b,), y))
    assert_allclose(partial_trace(xy, 'B').matrix, np.trace(y) * x, atol=1e-12)
    assert_allclose(partial_trace(xy, 'A').matrix, np.trace(x) * y, atol=1e-12)


def test_partial_trace_unknown_system():
    with pytest.raises(UnknownSystem):
        partial_trace(identity(labels(('A', 2))), 'B')


def test_permute_systems_round_trip(rng):
    """Permuting to a new order and back is the identity"""
    systems = labels(('A', 2), ('B', 3), ('C', 2))
    x = LabeledOperator(systems, random_operator(rng, 12))
    moved = permute_systems(x, ['C', 'A', 'B'])
    assert moved.names == ('C', 'A', 'B')
    assert_allclose(permute_systems(moved, ['A', 'B', 'C']).matrix, x.matrix)
    with pytest.raises(BadPermutation):
        permute_systems(x, ['A', 'B'])


def test_permute_matches_kronecker_swap(rng):
    a, b = labels(('A', 2), ('B', 3))
    x, y = random_operator(rng, 2), random_operator(rng, 3)
    swapped = permute_systems(tensor(LabeledOperator((a,), x), LabeledOperator((b,), y)), ['B', 'A'])
    assert_allclose(swapped.matrix, np.kron(y, x), atol=1e-12)


def test_partial_transpose_detects_entanglement():
    """The partial transpose of the maximally entangled operator is the swap"""
    a, b = labels(('A', 2), ('B', 2))
    phi = maximally_entangled(a, b)
    assert min_eigenvalue(partial_transpose(phi, 'B')) == pytest.approx(-1.0)
    assert is_psd(partial_transpose(identity((a, b)), 'A'))


def test_relabel_keeps_entries(rng):
    x = LabeledOperator(labels(('A', 2)), random_operator(rng, 2))
    y = relabel(x, {'A': 'Z'})
    assert y.names == ('Z',)
    assert_allclose(y.matrix, x.matrix)


def test_trace_and_replace_kills_product_with_identity(rng):
    """Ω_O(σ ⊗ 1) = 0 and Ω_O is idempotent"""
    i, o = labels(('I', 2), ('O', 3))
    sigma = LabeledOperator((i,), random_state(rng, 2))
    product = tensor(sigma, identity((o,)))
    assert np.max(np.abs(trace_and_replace(product, 'O').matrix)) < 1e-12
    x = LabeledOperator((i, o), random_operator(rng, 6))
    once = trace_and_replace(x, 'O')
    assert_allclose(trace_and_replace(once, 'O').matrix, once.matrix, atol=1e-12)


def test_superop_matrices_match_dense_operations(rng):
    """Sparse maps reproduce partial trace, partial transpose and permutation"""
    systems = labels(('A', 2), ('B', 3), ('C', 2))
    dims = (2, 3, 2)
    x = LabeledOperator(systems, random_operator(rng, 12))
    v = vec(x.matrix)

    assert_allclose(unvec(partial_trace_map(dims, [1]) @ v, 4), partial_trace(x, 'B').matrix, atol=1e-12)
    assert_allclose(unvec(partial_trace_map(dims, [0, 2]) @ v, 3), partial_trace(x, {'A', 'C'}).matrix, atol=1e-12)
    assert_allclose(unvec(partial_transpose_map(dims, [2]) @ v, 12), partial_transpose(x, 'C').matrix, atol=1e-12)
    assert_allclose(unvec(permutation_map(dims, [2, 0, 1]) @ v, 12), permute_systems(x, ['C', 'A', 'B']).matrix,
                    atol=1e-12)


def test_tensor_identity_and_sandwich_maps(rng):
    x = random_operator(rng, 3)
    assert_allclose(unvec(tensor_identity_map(3, 2) @ vec(x), 6), np.kron(x, np.eye(2)), atol=1e-12)
    left, right = random_operator(rng, 3), random_operator(rng, 3)
    assert_allclose(unvec(sandwich_map(left, right) @ vec(x), 3), left @ x @ right, atol=1e-12)


def test_vec_is_column_major():
    m = np.array([[1, 2], [3, 4]])
    assert list(vec(m)) == [1, 3, 2, 4]


@pytest.mark.parametrize('d, k', [(2, 2), (2, 3), (3, 2), (3, 3)])
def test_symmetric_isometry(d, k):
    """V†V = 1 on Sym^k and VV† is invariant under every transposition"""
    v = symmetric_isometry(d, k)
    assert v.shape == (d ** k, symmetric_dimension(d, k))
    assert_allclose(v.conj().T @ v, np.eye(v.shape[1]), atol=1e-12)
    projector = symmetric_projector(d, k)
    for j in range(k - 1):
        sigma = list(range(k))
        sigma[j], sigma[j + 1] = sigma[j + 1], sigma[j]
        u = permutation_unitary(d, k, sigma)
        assert_allclose(u @ projector, projector, atol=1e-12)


def test_two_copy_symmetric_projector_is_half_identity_plus_swap():
    swap = permutation_unitary(3, 2, (1, 0))
    assert_allclose(symmetric_projector(3, 2), (np.eye(9) + swap) / 2, atol=1e-12)


def test_symmetric_isometry_size_guard():
    with pytest.raises(SizeOverflow):
        symmetric_isometry(4, 6, max_side=1000)


def test_choi_of_identity_is_maximally_entangled():
    ch = unitary_channel(np.eye(3))
    assert_allclose(choi(ch).matrix, maximally_entangled(*choi(ch).systems).matrix)


def test_choi_has_input_dimension_trace():
    d = choi(amplitude_damping(0.3))
    assert d.trace() == pytest.approx(2.0)
    assert_allclose(partial_trace(d, 'O').matrix, np.eye(2), atol=1e-12)


def test_apply_choi_matches_kraus_action(rng):
    ch = amplitude_damping(0.4)
    rho = random_state(rng, 2)
    out = apply_choi(choi(ch), LabeledOperator((ch.input,), rho))
    assert out.names == ('O',)
    assert_allclose(out.matrix, ch.apply(rho), atol=1e-12)


def test_link_product_composes_channels(rng):
    """choi(A) * choi(B) = choi(B ∘ A) on random unitary and damping channels"""
    i, m, o = SystemLabel('I', 2), SystemLabel('M', 2), SystemLabel('O', 2)
    for _ in range(100):
        first = KrausChannel(i, m, (haar_unitary(2, rng),))
        damping = amplitude_damping(rng.random())
        second = KrausChannel(m, o, damping.kraus_ops)
        linked = link_product(choi(first), choi(second))
        assert linked.names == ('I', 'O')
        assert_allclose(linked.matrix, choi(first.then(second)).matrix, atol=1e-10)


def test_link_product_dimension_mismatch():
    x = identity(labels(('A', 2), ('E', 2)))
    y = identity(labels(('E', 3), ('B', 2)))
    with pytest.raises(DimMismatch):
        link_product(x, y)
