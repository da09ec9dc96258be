"""Sparse matrices of linear maps acting on column-stacked operators.

vec(X)[i + n*j] = X[i, j] (Fortran order). A map L is stored as the matrix S
with vec(L(X)) = S @ vec(X).
"""
import string

import numpy as np
import scipy.sparse as sp

from utils.errors import BadParameter, DimMismatch

_LETTERS = string.ascii_letters


def vec(m):
    return np.asarray(m).reshape(-1, order='F')


def unvec(v, side):
    return np.asarray(v).reshape((side, side), order='F')


def _side(dims):
    return int(np.prod(dims, dtype=np.int64)) if len(dims) else 1


def _index_tensor(dims):
    n = _side(dims)
    return np.arange(n * n, dtype=np.int64).reshape((n, n), order='F').reshape(tuple(dims) + tuple(dims))


def _gather(source, in_len):
    """Selection matrix whose output vec entry p reads input entry source[p]."""
    cols = np.asarray(source, dtype=np.int64).reshape(-1, order='F')
    rows = np.arange(cols.size)
    return sp.csr_matrix((np.ones(cols.size), (rows, cols)), shape=(cols.size, in_len))


def identity_map(side):
    return sp.identity(side * side, format='csr')


def permutation_map(dims, perm):
    """Reorder tensor factors: output factor k is input factor perm[k]."""
    dims = tuple(dims)
    perm = list(perm)
    if sorted(perm) != list(range(len(dims))):
        raise BadParameter(f"{perm} is not a permutation of {len(dims)} factors")
    n = _side(dims)
    idx = _index_tensor(dims).transpose(perm + [len(dims) + p for p in perm]).reshape(n, n)
    return _gather(idx, n * n)


def partial_transpose_map(dims, positions):
    dims = tuple(dims)
    k = len(dims)
    axes = list(range(2 * k))
    for p in positions:
        axes[p], axes[k + p] = k + p, p
    n = _side(dims)
    idx = _index_tensor(dims).transpose(axes).reshape(n, n)
    return _gather(idx, n * n)


def partial_trace_map(dims, positions):
    """Tr over the factors at the given positions."""
    dims = tuple(dims)
    k = len(dims)
    positions = set(positions)
    rows = list(_LETTERS[:k])
    cols = list(_LETTERS[k:2 * k])
    for p in positions:
        cols[p] = rows[p]
    keep = [p for p in range(k) if p not in positions]
    traced = sorted(positions)
    out = ''.join(rows[p] for p in keep) + ''.join(cols[p] for p in keep) + ''.join(rows[p] for p in traced)
    diag = np.einsum(''.join(rows) + ''.join(cols) + '->' + out, _index_tensor(dims))
    n_keep = _side([dims[p] for p in keep])
    n_tr = _side([dims[p] for p in traced])
    sources = diag.reshape(n_keep, n_keep, n_tr)
    targets = np.arange(n_keep * n_keep).reshape((n_keep, n_keep), order='F')
    targets = np.broadcast_to(targets[:, :, None], sources.shape)
    n = _side(dims)
    return sp.csr_matrix((np.ones(sources.size), (targets.reshape(-1), sources.reshape(-1))),
                         shape=(n_keep * n_keep, n * n))


def tensor_identity_map(n, m):
    """X (n×n) ↦ X ⊗ 1_m."""
    i, j, a = np.meshgrid(np.arange(n), np.arange(n), np.arange(m), indexing='ij')
    side = n * m
    rows = (i * m + a) + side * (j * m + a)
    cols = i + n * j
    return sp.csr_matrix((np.ones(rows.size), (rows.reshape(-1), cols.reshape(-1))), shape=(side * side, n * n))


def identity_tensor_map(m, n):
    """X (n×n) ↦ 1_m ⊗ X."""
    a, i, j = np.meshgrid(np.arange(m), np.arange(n), np.arange(n), indexing='ij')
    side = n * m
    rows = (a * n + i) + side * (a * n + j)
    cols = i + n * j
    return sp.csr_matrix((np.ones(rows.size), (rows.reshape(-1), cols.reshape(-1))), shape=(side * side, n * n))


def sandwich_map(left, right):
    """X ↦ L X R."""
    left = sp.csr_matrix(left)
    right = sp.csr_matrix(right)
    return sp.kron(right.T, left, format='csr')


def conjugation_map(v):
    """X ↦ V X V†."""
    v = sp.csr_matrix(v)
    return sp.kron(v.conj(), v, format='csr')


def trace_row(side):
    return sp.csr_matrix(vec(np.eye(side)).reshape(1, -1).astype(complex))


def _block_order(n_rest, n_party):
    """Reindex vec(X) on (rest, party) into contiguous party blocks.

    Output position (i + n_rest*j) * n_party² + (b + n_party*b') holds X[(i,b),(j,b')].
    """
    i, j, b, c = np.meshgrid(np.arange(n_rest), np.arange(n_rest), np.arange(n_party), np.arange(n_party),
                             indexing='ij')
    big = n_rest * n_party
    src = (i * n_party + b) + big * (j * n_party + c)
    dst = (i + n_rest * j) * n_party * n_party + (b + n_party * c)
    return sp.csr_matrix((np.ones(src.size), (dst.reshape(-1), src.reshape(-1))), shape=(big * big, big * big))


def lift_map(n_rest, action, n_party):
    """(id_rest ⊗ Ψ) for Ψ given as a matrix on vec of the party operator.

    The output holds, for each entry (i, j) of the rest (pair index i + n_rest*j),
    the vector Ψ(X_ij) of length m.
    """
    action = sp.csr_matrix(action)
    if action.shape[1] != n_party * n_party:
        raise DimMismatch(f"Party map acts on {action.shape[1]} entries, expected {n_party * n_party}")
    blocks = sp.kron(sp.identity(n_rest * n_rest, format='csr'), action, format='csr')
    return blocks @ _block_order(n_rest, n_party)


def tensor_target_map(n_rest, target):
    """X_rest ↦ X_rest ⊗ target in the layout of lift_map."""
    target = np.asarray(target, dtype=complex).reshape(-1, 1)
    return sp.kron(sp.identity(n_rest * n_rest, format='csr'), sp.csr_matrix(target), format='csr')
