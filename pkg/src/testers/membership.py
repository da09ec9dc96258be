"""Class membership of a given tester, with certificates.

Single-copy, parallel and adaptive membership are decided by feasibility SDPs
on the comb constraints. Classically adaptive membership is only certified:
feed-forward blocks or product structure show membership, a PPT violation
across the round cut or an infeasible hierarchy level shows non-membership,
and anything else is inconclusive.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from api.solver_client import ConicProblem, LinearEquality, SolverClient, Status
from csep.hierarchy import extension_feasibility
from csep.problem import ConstrainedSepProblem
from qops.operators import LabeledOperator, min_eigenvalue, partial_trace, partial_transpose, permute_systems, tensor
from qops.superops import partial_trace_map, sandwich_map, tensor_identity_map, trace_row, vec
from scenarios.compile import classically_adaptive_parties
from testers.tester import VALID_TOL, TesterKind, validate
from utils.errors import BadParameter, DimMismatch

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    MEMBER = 'member'
    NON_MEMBER = 'non-member'
    INCONCLUSIVE = 'inconclusive'


@dataclass(eq=False)
class MembershipResult:
    verdict: Verdict
    certificate: str
    details: dict = field(default_factory=dict)

    @property
    def is_member(self):
        return self.verdict == Verdict.MEMBER


def _side(group):
    return int(np.prod([s.dim for s in group]))


def _names(group):
    return [s.name for s in group]


def _verdict_from(solution, certificate):
    if solution.status == Status.OPTIMAL:
        return MembershipResult(Verdict.MEMBER, certificate, {'status': solution.status.value})
    if solution.status == Status.INFEASIBLE:
        return MembershipResult(Verdict.NON_MEMBER, certificate, {'status': solution.status.value})
    return MembershipResult(Verdict.INCONCLUSIVE, certificate, {'status': solution.status.value})


def _comb_feasibility(t, inputs, outputs, client, name):
    """Find σ with W = σ ⊗ 1_out on (inputs, outputs), Tr σ = 1."""
    w = permute_systems(t.W, _names(inputs) + _names(outputs)).matrix
    d_in, d_out = _side(inputs), _side(outputs)
    side = d_in * d_out
    equalities = (
        LinearEquality({'sigma': tensor_identity_map(d_in, d_out)}, vec(w), hermitian_side=side, label='marginal'),
        LinearEquality({'sigma': trace_row(d_in)}, np.ones(1), label='normalization'),
    )
    problem = ConicProblem((('sigma', d_in),), equalities, name=name)
    return client.check_feasibility(problem)


def _adaptive_feasibility(t, client):
    """Find R, σ with W = R ⊗ 1_{O2}, Tr_{I2} R = σ ⊗ 1_{O1}, Tr σ = 1."""
    (in1, out1), (in2, out2) = t.slots
    d_i1, d_o1, d_i2, d_o2 = (_side(g) for g in (in1, out1, in2, out2))
    side = d_i1 * d_o1 * d_i2 * d_o2
    r_side = d_i1 * d_o1 * d_i2
    equalities = (
        LinearEquality({'R': tensor_identity_map(r_side, d_o2)}, vec(t.W.matrix), hermitian_side=side,
                       label='second-round'),
        LinearEquality({'R': partial_trace_map((d_i1 * d_o1, d_i2), [1]), 'sigma': -tensor_identity_map(d_i1, d_o1)},
                       np.zeros((d_i1 * d_o1) ** 2), hermitian_side=d_i1 * d_o1, label='first-round'),
        LinearEquality({'sigma': trace_row(d_i1)}, np.ones(1), label='normalization'),
    )
    problem = ConicProblem((('R', r_side), ('sigma', d_i1)), equalities, name='adaptive-membership')
    return client.check_feasibility(problem)


def product_split(t, tol=VALID_TOL):
    """(X, [Z^i]) with T^i = X ⊗ Z^i across the round cut, or None.

    X = Tr_{I2 O2} W and Z^i = Tr_{I1 O1} T^i / Tr X.
    """
    (in1, out1), (in2, out2) = t.slots
    first, second = _names(in1 + out1), _names(in2 + out2)
    x = partial_trace(t.W, second)
    total = float(np.real(x.trace()))
    if total <= tol:
        return None
    parts = [partial_trace(e, first) / total for e in t.elements]
    for z, element in zip(parts, t.elements):
        rebuilt = permute_systems(tensor(x, z), element.names)
        if np.max(np.abs(rebuilt.matrix - element.matrix)) > tol * max(1.0, total):
            return None
    return x, parts


def ppt_cut_eigenvalue(t):
    """Smallest eigenvalue over the elements partially transposed on the second round."""
    (in2, out2) = t.slots[1]
    second = _names(in2 + out2)
    return min(min_eigenvalue(partial_transpose(e, second)) for e in t.elements)


def _first_round_selector(L, j, first_side):
    """<j|_{L'} ⊗ 1_{I1 O1}."""
    row = sp.csr_matrix(([1.0], ([0], [j])), shape=(1, L))
    return sp.kron(row, sp.identity(first_side), format='csr')


def _second_round_selector(L, n, j, i, second_side):
    """<j|_L ⊗ <i|_N ⊗ 1_{I2 O2}."""
    row = sp.csr_matrix(([1.0], ([0], [j * n + i])), shape=(1, L * n))
    return sp.kron(row, sp.identity(second_side), format='csr')


def classically_adaptive_feasibility(t, L, k=1, ppt=True, client=None):
    """Level-k extension feasibility of the classically adaptive geometry with the tester pinned.

    The marginal lives on (R, S) = (L', I1, O1, L, N, I2, O2); each element is
    T^i = L d_{O2} d_{O1} Σ_j (<j| ⊗ 1 ⊗ <j,i| ⊗ 1) r (|j> ⊗ 1 ⊗ |j,i> ⊗ 1).
    """
    _two_slot_only(t, TesterKind.CLASSICALLY_ADAPTIVE)
    if L < 1:
        raise BadParameter(f"Register size must be at least 1, got {L}")
    (in1, out1), (in2, out2) = t.slots
    dims = tuple(_side(g) for g in (in1, out1, in2, out2))
    d_i1, d_o1, d_i2, d_o2 = dims
    n = t.size
    second, first = classically_adaptive_parties(n, L, dims)
    p = ConstrainedSepProblem(LabeledOperator((second.label, first.label), np.zeros((second.dim * first.dim,) * 2)),
                              (second, first), name=f"classically-adaptive-membership-L{L}")
    norm = L * d_o2 * d_o1
    extra = []
    for i, element in enumerate(t.elements):
        m = None
        for j in range(L):
            q = sp.kron(_first_round_selector(L, j, d_i1 * d_o1),
                        _second_round_selector(L, n, j, i, d_i2 * d_o2), format='csr')
            term = sandwich_map(q, q.conj().T)
            m = term if m is None else m + term
        extra.append((norm * m, vec(element.matrix)))
    return extension_feasibility(p, k, ppt, extra=extra, extend_party=1, client=client)


def _two_slot_only(t, cls):
    if len(t.slots) != 2:
        raise DimMismatch(f"{cls.value} membership needs a two-slot tester, got {len(t.slots)} slot(s)")


def _classically_adaptive(t, L, k, client, tol):
    adaptive = _verdict_from(_adaptive_feasibility(t, client), 'adaptive-comb')
    if adaptive.verdict == Verdict.NON_MEMBER:
        return MembershipResult(Verdict.NON_MEMBER, 'not-adaptive', adaptive.details)

    if t.feed_forward is not None and t.feed_forward.register_size <= L and validate(t).passed(tol):
        return MembershipResult(Verdict.MEMBER, 'feed-forward', {'register_size': t.feed_forward.register_size})

    if adaptive.verdict == Verdict.MEMBER and product_split(t, tol) is not None:
        return MembershipResult(Verdict.MEMBER, 'product', {})

    eigenvalue = ppt_cut_eigenvalue(t)
    if eigenvalue < -tol:
        return MembershipResult(Verdict.NON_MEMBER, 'ppt-cut', {'min_eigenvalue': eigenvalue})

    solution = classically_adaptive_feasibility(t, L, k, client=client)
    details = {'status': solution.status.value, 'k': k, 'L': L, 'min_eigenvalue': eigenvalue}
    if solution.status == Status.INFEASIBLE:
        return MembershipResult(Verdict.NON_MEMBER, f"hierarchy-k{k}", details)
    return MembershipResult(Verdict.INCONCLUSIVE, f"hierarchy-k{k}", details)


def membership(t, cls, L=None, k=1, client=None, tol=VALID_TOL):
    """Decide or certify whether t belongs to the tester class cls.

    L is the classical register size for the classically adaptive class and
    defaults to the number of outcomes.
    """
    cls = TesterKind(cls)
    client = client or SolverClient()
    negative = min(min_eigenvalue(e) for e in t.elements)
    if negative < -tol:
        return MembershipResult(Verdict.NON_MEMBER, 'negative-element', {'min_eigenvalue': negative})

    if cls == TesterKind.SINGLE_COPY:
        if len(t.slots) != 1:
            raise DimMismatch("single_copy membership needs a single-slot tester")
        result = _verdict_from(_comb_feasibility(t, t.inputs, t.outputs, client, 'single-copy-membership'), 'comb')
    elif cls == TesterKind.PARALLEL:
        _two_slot_only(t, cls)
        result = _verdict_from(_comb_feasibility(t, t.inputs, t.outputs, client, 'parallel-membership'), 'comb')
    elif cls == TesterKind.ADAPTIVE:
        _two_slot_only(t, cls)
        result = _verdict_from(_adaptive_feasibility(t, client), 'adaptive-comb')
    else:
        _two_slot_only(t, cls)
        result = _classically_adaptive(t, t.size if L is None else L, k, client, tol)
    logger.info("%s membership: %s (%s)", cls.value, result.verdict.value, result.certificate)
    return result
