"""Symmetric subspace of (C^d)^{⊗k} and the permutation representation."""
import itertools
from math import comb, factorial

import numpy as np
import scipy.sparse as sp

from utils.config import get_settings
from utils.errors import BadParameter, BadPermutation, SizeOverflow


def symmetric_dimension(d, k):
    return comb(d + k - 1, k)


def _check_size(d, k, max_side):
    if d < 1 or k < 1:
        raise BadParameter(f"Need d >= 1 and k >= 1, got d={d}, k={k}")
    cap = get_settings().max_tensor_side if max_side is None else max_side
    if d ** k > cap:
        raise SizeOverflow(d ** k, cap)


def symmetric_isometry(d, k, sparse=False, max_side=None):
    """Isometry V onto Sym^k(C^d): V†V = 1 and VV† is the symmetric projector.

    Columns follow the sorted multisets of range(d) of size k; every row has
    exactly one nonzero entry.
    """
    _check_size(d, k, max_side)
    multisets = list(itertools.combinations_with_replacement(range(d), k))
    column_of = {m: c for c, m in enumerate(multisets)}
    counts = np.array([factorial(k) // np.prod([factorial(m.count(s)) for s in set(m)]) for m in multisets])

    words = np.indices((d,) * k).reshape(k, -1).T
    cols = np.array([column_of[tuple(sorted(w))] for w in words], dtype=np.int64)
    rows = np.arange(d ** k)
    data = 1.0 / np.sqrt(counts[cols])
    v = sp.csr_matrix((data, (rows, cols)), shape=(d ** k, len(multisets)))
    return v if sparse else v.toarray()


def permutation_unitary(d, k, sigma, sparse=False):
    """U_σ sending v_1⊗...⊗v_k to v_{σ⁻¹(1)}⊗...⊗v_{σ⁻¹(k)}.

    sigma lists images of 0..k-1 (0-based): sigma[j] = σ(j).
    """
    sigma = list(sigma)
    if sorted(sigma) != list(range(k)):
        raise BadPermutation(f"{sigma} is not a permutation of 0..{k - 1}")
    inverse = np.argsort(sigma)
    words = np.indices((d,) * k).reshape(k, -1)
    images = words[inverse, :]
    rows = np.ravel_multi_index(tuple(images), (d,) * k)
    cols = np.arange(d ** k)
    u = sp.csr_matrix((np.ones(d ** k), (rows, cols)), shape=(d ** k, d ** k))
    return u if sparse else u.toarray()


def symmetric_projector(d, k):
    v = symmetric_isometry(d, k, sparse=True)
    return (v @ v.T).toarray()
