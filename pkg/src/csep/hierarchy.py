"""PPT-constrained symmetric extension hierarchy for constrained separability.

Level k looks for ρ on A^k ⊗ B whose A copies are exchangeable, whose marginal
on one copy of A and B is the candidate state, and whose lifted party
constraints hold. Bosonic mode supports ρ on Sym^k(A) ⊗ B through the
isometry V, so the variable is X with ρ = (V ⊗ 1) X (V ⊗ 1)†.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from api.solver_client import ConicProblem, LinearEquality, PsdImage, SolverClient, Status
from csep.problem import merge_parties
from qops.operators import LabeledOperator, permute_systems
from qops.superops import (conjugation_map, identity_map, lift_map, partial_trace_map, partial_transpose_map,
                           permutation_map, sandwich_map, tensor_target_map, trace_row, unvec, vec)
from qops.symmetric import symmetric_dimension, symmetric_isometry
from utils.config import get_settings
from utils.errors import BadParameter, SizeOverflow

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class HierarchyResult:
    value: float
    status: Status
    k: int
    ppt: bool
    bosonic: bool
    extend_party: int
    extension: np.ndarray = None
    marginal: LabeledOperator = None
    solution: object = None

    @property
    def ok(self):
        return self.status == Status.OPTIMAL


def _isometry(d, k, bosonic):
    if k == 0:
        return sp.identity(1, format='csr')
    if bosonic:
        return symmetric_isometry(d, k, sparse=True)
    return sp.identity(d ** k, format='csr')


def default_extend_party(p):
    """Lowest-dimensional party, lowest index on ties."""
    return int(np.argmin(p.dims))


class SymmetricExtension:
    """Linear maps and constraints of one hierarchy level for a two-party problem."""

    def __init__(self, p, k=1, ppt=True, extend_party=None, bosonic=True, size_cap=None):
        if k < 1:
            raise BadParameter(f"Hierarchy level must be >= 1, got {k}")
        if len(p.parties) == 3:
            logger.info("Merging parties %s and %s for the upper bound", p.parties[1].name, p.parties[2].name)
            p = merge_parties(p, 1, 2)
        self.problem = p
        self.k = k
        self.ppt = ppt
        self.bosonic = bosonic
        self.extend_party = default_extend_party(p) if extend_party is None else int(extend_party)
        if self.extend_party not in (0, 1):
            raise BadParameter(f"extend_party must be 0 or 1, got {extend_party}")
        self.a = p.parties[self.extend_party]
        self.b = p.parties[1 - self.extend_party]
        self.size_cap = size_cap or get_settings().size_cap

        d_a, d_b = self.a.dim, self.b.dim
        self.d_sym = symmetric_dimension(d_a, k) if bosonic else d_a ** k
        self.side = self.d_sym * d_b
        if self.side > self.size_cap:
            raise SizeOverflow(self.side, self.size_cap)
        self.full_dims = (d_a,) * k + (d_b,)
        self.v = _isometry(d_a, k, bosonic)
        logger.debug("Level %d (%s, ppt=%s): block side %d", k, 'bosonic' if bosonic else 'perm', ppt, self.side)

    def _to_full(self):
        if not self.bosonic:
            return identity_map(self.side)
        return conjugation_map(sp.kron(self.v, sp.identity(self.b.dim), format='csr'))

    def marginal_map(self):
        """vec(X) ↦ vec of the (A, B) marginal, A being the first copy."""
        if self.k == 1:
            return self._to_full()
        return partial_trace_map(self.full_dims, range(1, self.k)) @ self._to_full()

    def objective(self):
        """Coefficient G on X with Tr(G X) = Tr(F_AB r_AB)."""
        names = [self.a.name, self.b.name]
        f = permute_systems(self.problem.F, names).matrix
        g = unvec(self.marginal_map().T @ vec(f.T), self.side).T
        return (g + g.conj().T) / 2

    def _symmetry(self):
        if self.bosonic or self.k == 1:
            return []
        rows = []
        for j in range(self.k - 1):
            perm = list(range(self.k + 1))
            perm[j], perm[j + 1] = perm[j + 1], perm[j]
            rows.append(permutation_map(self.full_dims, perm) - identity_map(self.side))
        return [LinearEquality({'X': m}, np.zeros(m.shape[0]), hermitian_side=self.side, label=f"symmetry-{j}")
                for j, m in enumerate(rows)]

    def _b_constraint(self):
        b = self.b
        if not b.constraint.rows:
            return []
        m = (lift_map(self.d_sym, b.constraint.action, b.dim)
             - tensor_target_map(self.d_sym, b.constraint.target) @ partial_trace_map((self.d_sym, b.dim), [1]))
        return [LinearEquality({'X': m}, np.zeros(m.shape[0]), label='lifted-b')]

    def _a_constraint(self):
        a = self.a
        if not a.constraint.rows:
            return []
        trace_b = partial_trace_map((self.d_sym, self.b.dim), [1])
        if self.bosonic and self.k > 1:
            q = sp.kron(_isometry(a.dim, self.k - 1, True), sp.identity(a.dim), format='csr').conj().T @ self.v
            to_last = sandwich_map(q, q.conj().T) @ trace_b
            rest = symmetric_dimension(a.dim, self.k - 1)
        else:
            to_last = trace_b
            rest = a.dim ** (self.k - 1)
        m = (lift_map(rest, a.constraint.action, a.dim)
             - tensor_target_map(rest, a.constraint.target) @ partial_trace_map((rest, a.dim), [1])) @ to_last
        return [LinearEquality({'X': m}, np.zeros(m.shape[0]), label='lifted-a')]

    def _ppt_images(self):
        images = []
        d_a, d_b = self.a.dim, self.b.dim
        if self.ppt:
            to_full = self._to_full()
            for level in range(1, self.k + 1):
                transpose = partial_transpose_map(self.full_dims, range(level))
                if self.bosonic:
                    c = sp.kron(sp.kron(_isometry(d_a, level, True), _isometry(d_a, self.k - level, True)),
                                sp.identity(d_b), format='csr')
                    m = conjugation_map(c.conj().T) @ transpose @ to_full
                    side = c.shape[1]
                else:
                    m = transpose
                    side = self.side
                if side > self.size_cap:
                    raise SizeOverflow(side, self.size_cap)
                images.append(PsdImage(f"ppt-{level}", side, {'X': m}))
        factors = self.b.factor_dims
        if self.b.internal_ppt and factors:
            m = partial_transpose_map((self.d_sym,) + tuple(factors), [len(factors)])
            images.append(PsdImage('ppt-internal', self.side, {'X': m}))
        factors = self.a.factor_dims
        if self.a.internal_ppt and factors:
            # on the (A1, B) marginal
            m = partial_transpose_map(tuple(factors) + (d_b,), [len(factors) - 1]) @ self.marginal_map()
            images.append(PsdImage('ppt-internal-extended', d_a * d_b, {'X': m}))
        return images

    def conic_problem(self, objective=True, extra=()):
        """The level-k SDP; extra holds (matrix on vec r_AB, rhs) marginal equalities."""
        equalities = [LinearEquality({'X': trace_row(self.side)}, np.ones(1), label='trace')]
        equalities += self._symmetry() + self._b_constraint() + self._a_constraint()
        if extra:
            marginal = self.marginal_map()
            for n, (m, rhs) in enumerate(extra):
                equalities.append(LinearEquality({'X': sp.csr_matrix(m) @ marginal}, rhs, label=f"pinned-{n}"))
        cost = {'X': self.objective()} if objective else {}
        name = f"{self.problem.name}-k{self.k}{'-ppt' if self.ppt else ''}"
        return ConicProblem((('X', self.side),), tuple(equalities), cost, 'max', tuple(self._ppt_images()), name)

    def marginal(self, x):
        m = unvec(self.marginal_map() @ vec(x), self.a.dim * self.b.dim)
        return LabeledOperator((self.a.label, self.b.label), m)


def upper_bound(p, k=1, ppt=True, extend_party=None, bosonic=True, client=None, size_cap=None):
    """Level-k relaxation value r_k ≥ r_opt, nonincreasing in k."""
    ext = SymmetricExtension(p, k, ppt, extend_party, bosonic, size_cap)
    client = client or SolverClient()
    solution = client.solve(ext.conic_problem())
    result = HierarchyResult(float('nan'), solution.status, k, ppt, bosonic, ext.extend_party, solution=solution)
    if solution.block_values:
        result.extension = solution.block_values['X']
        result.marginal = ext.marginal(result.extension)
    if solution.ok:
        result.value = solution.upper_certificate
    logger.info("Upper bound k=%d ppt=%s: %s %.10f", k, ppt, solution.status.value, result.value)
    return result


def extension_feasibility(p, k=1, ppt=True, extra=(), extend_party=None, bosonic=True, client=None, size_cap=None):
    """Feasibility of a level-k extension whose marginal meets the extra equalities."""
    ext = SymmetricExtension(p, k, ppt, extend_party, bosonic, size_cap)
    client = client or SolverClient()
    return client.check_feasibility(ext.conic_problem(objective=False, extra=extra))
