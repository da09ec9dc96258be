"""Constrained separability problems: parties, affine maps and cost operators."""
import string
from dataclasses import dataclass
from functools import cached_property, reduce

import numpy as np
import scipy.sparse as sp
from scipy.linalg import null_space

from qops.operators import LabeledOperator, SystemLabel, permute_systems
from qops.superops import lift_map, partial_trace_map, permutation_map, tensor_target_map, trace_row, vec
from utils.errors import BadParameter, DimMismatch

_LETTERS = string.ascii_letters
NULL_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class AffineMap:
    """Constraint Φ(ρ) = target with Φ acting on vec(ρ) (column-major).

    A map with no rows leaves only the unit-trace condition.
    """
    action: object
    target: np.ndarray
    hermitian_side: int = None

    def __post_init__(self):
        action = sp.csr_matrix(self.action, dtype=complex)
        target = np.asarray(self.target, dtype=complex).reshape(-1)
        if action.shape[0] != target.size:
            raise DimMismatch(f"Affine map has {action.shape[0]} rows but target has {target.size} entries")
        object.__setattr__(self, 'action', action)
        object.__setattr__(self, 'target', target)

    @classmethod
    def trace_only(cls, dim):
        return cls(sp.csr_matrix((0, dim * dim), dtype=complex), np.zeros(0))

    @property
    def rows(self):
        return self.action.shape[0]

    def __call__(self, rho):
        return self.action @ vec(rho)

    def residual(self, rho):
        if not self.rows:
            return 0.0
        return float(np.max(np.abs(self(rho) - self.target)))


@dataclass(frozen=True, eq=False)
class Party:
    """One factor of a constrained separable decomposition."""
    name: str
    dim: int
    constraint: AffineMap = None
    factor_dims: tuple = None
    internal_ppt: bool = False

    def __post_init__(self):
        if self.dim < 1:
            raise BadParameter(f"Party {self.name!r} needs a positive dimension")
        constraint = self.constraint if self.constraint is not None else AffineMap.trace_only(self.dim)
        if constraint.action.shape[1] != self.dim * self.dim:
            raise DimMismatch(f"Constraint of party {self.name!r} acts on {constraint.action.shape[1]} entries")
        object.__setattr__(self, 'constraint', constraint)
        if self.factor_dims is not None and int(np.prod(self.factor_dims)) != self.dim:
            raise DimMismatch(f"Factor dimensions {self.factor_dims} do not multiply to {self.dim}")

    @property
    def label(self):
        return SystemLabel(self.name, self.dim)

    @property
    def is_trace_only(self):
        return self.constraint.rows == 0

    @cached_property
    def hermitian_basis(self):
        """Orthonormal hermitian basis of d×d matrices, as columns of vec."""
        d = self.dim
        columns = []
        for i in range(d):
            for j in range(d):
                e = np.zeros((d, d), dtype=complex)
                if i == j:
                    e[i, i] = 1.0
                elif i < j:
                    e[i, j] = e[j, i] = 1 / np.sqrt(2)
                else:
                    e[j, i], e[i, j] = 1j / np.sqrt(2), -1j / np.sqrt(2)
                columns.append(vec(e))
        return np.array(columns).T

    @cached_property
    def _linear_system(self):
        basis = self.hermitian_basis
        rows = [trace_row(self.dim) @ basis]
        rhs = [np.ones(1)]
        if self.constraint.rows:
            rows.append(self.constraint.action @ basis)
            rhs.append(self.constraint.target)
        m = np.vstack([np.asarray(r) for r in rows])
        b = np.concatenate(rhs)
        return np.vstack([m.real, m.imag]), np.concatenate([b.real, b.imag])

    @cached_property
    def directions(self):
        """Orthonormal hermitian directions spanning the constrained affine space, shape (r, d, d)."""
        m, _ = self._linear_system
        q = null_space(m, rcond=NULL_TOL)
        mats = (self.hermitian_basis @ q).T
        return np.array([m_.reshape((self.dim, self.dim), order='F') for m_ in mats]).reshape(-1, self.dim, self.dim)

    @property
    def is_degenerate(self):
        return len(self.directions) == 0

    @cached_property
    def fixed_point(self):
        """The unique feasible operator of a degenerate party."""
        m, b = self._linear_system
        coefficients = np.linalg.lstsq(m, b, rcond=None)[0]
        return (self.hermitian_basis @ coefficients).reshape((self.dim, self.dim), order='F')

    def residuals(self, rho):
        rho = np.asarray(rho, dtype=complex)
        hermitian = (rho + rho.conj().T) / 2
        return {
            'trace': abs(np.trace(rho) - 1.0),
            'constraint': self.constraint.residual(rho),
            'hermitian': float(np.max(np.abs(rho - rho.conj().T))),
            'psd': max(0.0, -float(np.linalg.eigvalsh(hermitian)[0])),
        }


@dataclass(frozen=True, eq=False)
class ConstrainedSepProblem:
    """Maximize Tr(F ρ) over constrained separable ρ on the ordered parties."""
    F: LabeledOperator
    parties: tuple
    name: str = 'csep'

    def __post_init__(self):
        parties = tuple(self.parties)
        if not 2 <= len(parties) <= 3:
            raise BadParameter(f"Need 2 or 3 parties, got {len(parties)}")
        labels = tuple(p.label for p in parties)
        f = self.F
        if f.names != tuple(lbl.name for lbl in labels):
            if set(f.names) == {lbl.name for lbl in labels}:
                f = permute_systems(f, [lbl.name for lbl in labels])
            else:
                f = LabeledOperator(labels, f.matrix)
        if f.systems != labels:
            raise DimMismatch(f"Cost lives on {f.systems}, parties are {labels}")
        if np.max(np.abs(f.matrix - f.matrix.conj().T), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(f.matrix))):
            raise BadParameter("Cost operator is not hermitian")
        object.__setattr__(self, 'F', f.with_matrix((f.matrix + f.matrix.conj().T) / 2))
        object.__setattr__(self, 'parties', parties)

    @property
    def dims(self):
        return tuple(p.dim for p in self.parties)

    def party_index(self, name):
        for k, p in enumerate(self.parties):
            if p.name == name:
                return k
        raise BadParameter(f"No party {name!r}")


def evaluate(p, factors):
    """Tr(F ⊗_q ρ_q)."""
    product = reduce(np.kron, [np.asarray(f, dtype=complex) for f in factors])
    return float(np.real(np.sum(p.F.matrix.T * product)))


def reduced_cost(p, party, factors):
    """Operator G on one party with Tr(G ρ) = Tr(F (ρ ⊗ others))."""
    n = len(p.parties)
    rows = list(_LETTERS[:n])
    cols = list(_LETTERS[n:2 * n])
    operands = [p.F.matrix.reshape(p.dims + p.dims)]
    subscripts = [''.join(rows) + ''.join(cols)]
    for q in range(n):
        if q != party:
            operands.append(np.asarray(factors[q], dtype=complex))
            subscripts.append(cols[q] + rows[q])
    out = rows[party] + cols[party]
    g = np.einsum(','.join(subscripts) + '->' + out, *operands)
    return (g + g.conj().T) / 2


def constraint_residuals(p, factors):
    """Per-party feasibility residuals of a product point."""
    return [party.residuals(f) for party, f in zip(p.parties, factors)]


def _lifted_rows(d_rest, party, rest_first):
    """Rows of (id ⊗ Φ)(Z) - Tr_party(Z) ⊗ a for Z on two factors."""
    d_p = party.dim
    if rest_first:
        dims, reorder, party_pos = (d_rest, d_p), None, 1
    else:
        dims, reorder, party_pos = (d_p, d_rest), permutation_map((d_p, d_rest), [1, 0]), 0
    lifted = lift_map(d_rest, party.constraint.action, d_p)
    if reorder is not None:
        lifted = lifted @ reorder
    marginal = tensor_target_map(d_rest, party.constraint.target) @ partial_trace_map(dims, [party_pos])
    return (lifted - marginal).tocsr()


def merge_parties(p, i, j, internal_ppt=True):
    """Combine adjacent parties i, j = i + 1 into one composite party.

    The composite keeps both affine constraints in lifted form, so every
    product ρ_i ⊗ ρ_j remains feasible; the merged problem is a relaxation.
    """
    if j != i + 1:
        raise BadParameter("Only adjacent parties can be merged")
    a, b = p.parties[i], p.parties[j]
    blocks = []
    if a.constraint.rows:
        blocks.append(_lifted_rows(b.dim, a, rest_first=False))
    if b.constraint.rows:
        blocks.append(_lifted_rows(a.dim, b, rest_first=True))
    dim = a.dim * b.dim
    if blocks:
        action = sp.vstack(blocks, format='csr')
        constraint = AffineMap(action, np.zeros(action.shape[0]))
    else:
        constraint = AffineMap.trace_only(dim)
    merged = Party(f"{a.name}+{b.name}", dim, constraint, factor_dims=(a.dim, b.dim), internal_ppt=internal_ppt)
    parties = p.parties[:i] + (merged,) + p.parties[j + 1:]
    f = LabeledOperator(tuple(q.label for q in parties), p.F.matrix)
    return ConstrainedSepProblem(f, parties, name=p.name)
