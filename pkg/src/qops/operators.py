"""Dense operators on labeled tensor-product systems.

Row and column indices use the Kronecker convention: the first system is the
most significant digit of the multi-index.
"""
import string
from dataclasses import dataclass
from functools import reduce

import numpy as np

from utils.config import get_settings
from utils.errors import BadParameter, BadPermutation, DimMismatch, DuplicateSystem, UnknownSystem

_LETTERS = string.ascii_letters


@dataclass(frozen=True)
class SystemLabel:
    name: str
    dim: int

    def __post_init__(self):
        if not self.name:
            raise BadParameter("System name must be non-empty")
        if int(self.dim) != self.dim or self.dim < 1:
            raise BadParameter(f"System {self.name!r} needs a positive integer dimension, got {self.dim}")

    def __repr__(self):
        return f"{self.name}({self.dim})"


def labels(*pairs):
    """Build a tuple of SystemLabel from (name, dim) pairs."""
    return tuple(SystemLabel(name, int(dim)) for name, dim in pairs)


@dataclass(frozen=True, eq=False)
class LabeledOperator:
    """Square complex matrix with an ordered list of named subsystems."""
    systems: tuple
    matrix: np.ndarray

    def __post_init__(self):
        systems = tuple(self.systems)
        names = [s.name for s in systems]
        if len(set(names)) != len(names):
            raise DuplicateSystem(f"Duplicate system names in {names}")
        matrix = np.asarray(self.matrix, dtype=complex)
        side = int(np.prod([s.dim for s in systems], dtype=np.int64)) if systems else 1
        if matrix.shape != (side, side):
            raise DimMismatch(f"Matrix of shape {matrix.shape} does not match systems {systems} (side {side})")
        object.__setattr__(self, 'systems', systems)
        object.__setattr__(self, 'matrix', matrix)

    @property
    def names(self):
        return tuple(s.name for s in self.systems)

    @property
    def dims(self):
        return tuple(s.dim for s in self.systems)

    @property
    def side(self):
        return self.matrix.shape[0]

    def index(self, name):
        try:
            return self.names.index(name)
        except ValueError:
            raise UnknownSystem(f"No system {name!r} in {self.names}") from None

    def label(self, name):
        return self.systems[self.index(name)]

    def trace(self):
        return complex(np.trace(self.matrix))

    def dagger(self):
        return LabeledOperator(self.systems, self.matrix.conj().T)

    def transpose(self):
        return LabeledOperator(self.systems, self.matrix.T)

    def with_matrix(self, matrix):
        return LabeledOperator(self.systems, matrix)

    def tensor_view(self):
        """Matrix reshaped to one row axis and one column axis per system."""
        return self.matrix.reshape(self.dims + self.dims)

    def _compatible(self, other):
        if not isinstance(other, LabeledOperator):
            return NotImplemented
        if other.systems != self.systems:
            other = permute_systems(other, self.names) if set(other.names) == set(self.names) else None
            if other is None or other.systems != self.systems:
                raise DimMismatch("Operators live on different systems")
        return other

    def __add__(self, other):
        other = self._compatible(other)
        return self.with_matrix(self.matrix + other.matrix)

    def __sub__(self, other):
        other = self._compatible(other)
        return self.with_matrix(self.matrix - other.matrix)

    def __matmul__(self, other):
        other = self._compatible(other)
        return self.with_matrix(self.matrix @ other.matrix)

    def __mul__(self, scalar):
        return self.with_matrix(self.matrix * scalar)

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return self.with_matrix(self.matrix / scalar)

    def __neg__(self):
        return self.with_matrix(-self.matrix)

    def __repr__(self):
        return f"LabeledOperator(systems={list(self.systems)})"


def _names_of(over):
    if isinstance(over, str):
        return {over}
    return set(over)


def _check_known(x, names):
    for name in names:
        x.index(name)


def identity(systems):
    """Identity operator on the given labels."""
    systems = tuple(systems)
    side = int(np.prod([s.dim for s in systems], dtype=np.int64)) if systems else 1
    return LabeledOperator(systems, np.eye(side))


def projector(system, index):
    """|index><index| on a single system."""
    if not 0 <= index < system.dim:
        raise BadParameter(f"Basis index {index} outside 0..{system.dim - 1}")
    m = np.zeros((system.dim, system.dim))
    m[index, index] = 1.0
    return LabeledOperator((system,), m)


def pure(systems, vector):
    """Rank-one operator |v><v| on the given labels."""
    v = np.asarray(vector, dtype=complex).reshape(-1)
    return LabeledOperator(tuple(systems), np.outer(v, v.conj()))


def tensor(*ops):
    """Kronecker product, concatenating system lists."""
    if not ops:
        raise BadParameter("tensor needs at least one operator")

    def pair(x, y):
        clash = set(x.names) & set(y.names)
        if clash:
            raise DuplicateSystem(f"Systems {sorted(clash)} appear on both factors")
        return LabeledOperator(x.systems + y.systems, np.kron(x.matrix, y.matrix))

    return reduce(pair, ops)


def partial_trace(x, over):
    """Trace out the named systems."""
    over = _names_of(over)
    _check_known(x, over)
    n = len(x.systems)
    rows = list(_LETTERS[:n])
    cols = list(_LETTERS[n:2 * n])
    keep = [k for k, name in enumerate(x.names) if name not in over]
    for k, name in enumerate(x.names):
        if name in over:
            cols[k] = rows[k]
    subscripts = ''.join(rows) + ''.join(cols) + '->' + ''.join(rows[k] for k in keep) + ''.join(cols[k] for k in keep)
    reduced = np.einsum(subscripts, x.tensor_view())
    kept = tuple(x.systems[k] for k in keep)
    side = int(np.prod([s.dim for s in kept], dtype=np.int64)) if kept else 1
    return LabeledOperator(kept, reduced.reshape(side, side))


def partial_transpose(x, over):
    """Transpose the named tensor factors only."""
    over = _names_of(over)
    _check_known(x, over)
    n = len(x.systems)
    axes = list(range(2 * n))
    for k, name in enumerate(x.names):
        if name in over:
            axes[k], axes[n + k] = n + k, k
    return x.with_matrix(x.tensor_view().transpose(axes).reshape(x.side, x.side))


def permute_systems(x, new_order):
    """Reorder the tensor factors to new_order (a list of names)."""
    new_order = list(new_order)
    if len(new_order) != len(x.names) or set(new_order) != set(x.names):
        raise BadPermutation(f"{new_order} is not a permutation of {list(x.names)}")
    perm = [x.names.index(name) for name in new_order]
    if perm == list(range(len(perm))):
        return x
    n = len(perm)
    moved = x.tensor_view().transpose(perm + [n + p for p in perm])
    systems = tuple(x.systems[p] for p in perm)
    return LabeledOperator(systems, moved.reshape(x.side, x.side))


def relabel(x, mapping):
    """Rename systems; dimensions and entries are untouched."""
    _check_known(x, mapping)
    systems = tuple(SystemLabel(mapping.get(s.name, s.name), s.dim) for s in x.systems)
    return LabeledOperator(systems, x.matrix)


def trace_and_replace(x, name):
    """X - Tr_O(X) ⊗ 1_O / d_O, with the original system order."""
    label = x.label(name)
    rest = partial_trace(x, {name})
    if rest.systems:
        replaced = tensor(rest, identity((label,)) / label.dim)
    else:
        replaced = identity((label,)) * (rest.trace() / label.dim)
    return x - permute_systems(replaced, x.names)


def is_hermitian(x, tol=None):
    tol = get_settings().psd_tol if tol is None else tol
    m = x.matrix if isinstance(x, LabeledOperator) else np.asarray(x)
    return bool(np.max(np.abs(m - m.conj().T), initial=0.0) <= tol)


def min_eigenvalue(x):
    m = x.matrix if isinstance(x, LabeledOperator) else np.asarray(x)
    return float(np.linalg.eigvalsh((m + m.conj().T) / 2)[0])


def is_psd(x, tol=None):
    tol = get_settings().psd_tol if tol is None else tol
    return is_hermitian(x, tol) and min_eigenvalue(x) >= -tol


def hermitian_part(m):
    m = np.asarray(m, dtype=complex)
    return (m + m.conj().T) / 2
