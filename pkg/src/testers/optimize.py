"""Exact SDPs for testers with unrestricted memory."""
import logging

import numpy as np
import scipy.sparse as sp

from api.solver_client import ConicProblem, LinearEquality, SolverClient
from qops.operators import LabeledOperator, permute_systems
from qops.superops import partial_trace_map, tensor_identity_map, trace_row
from testers.tester import Tester, TesterKind
from utils.errors import InvalidEnsemble, SolverFailure

logger = logging.getLogger(__name__)


def _side(systems):
    return int(np.prod([s.dim for s in systems]))


def _element_blocks(n, side):
    return [(f"T{i}", side) for i in range(n)]


def _sum_terms(n, side):
    return {f"T{i}": sp.identity(side * side, format='csr') for i in range(n)}


def _objective(e, order):
    return {f"T{i}": q * permute_systems(c, order).matrix for i, (q, c) in enumerate(e.members)}


def _solve(problem, client, e, systems, slots, kind):
    client = client or SolverClient()
    solution = client.solve(problem)
    if not solution.ok:
        raise SolverFailure(solution.status, problem.name)
    blocks = [solution.block_values[f"T{i}"] for i in range(e.size)]
    elements = tuple(LabeledOperator(systems, (m + m.conj().T) / 2) for m in blocks)
    value = solution.upper_certificate
    logger.info("%s optimum %.10f", problem.name, value)
    return value, Tester(elements, slots, kind)


def comb_problem(e, inputs, outputs, name):
    """max Σ q_i Tr(T^i C^i) subject to Σ T^i = σ ⊗ 1_O, Tr σ = 1."""
    systems = tuple(inputs) + tuple(outputs)
    d_in, d_out = _side(inputs), _side(outputs)
    side = d_in * d_out
    equalities = (
        LinearEquality({**_sum_terms(e.size, side), 'sigma': -tensor_identity_map(d_in, d_out)},
                       np.zeros(side * side), hermitian_side=side, label='marginal'),
        LinearEquality({'sigma': trace_row(d_in)}, np.ones(1), label='normalization'),
    )
    blocks = tuple(_element_blocks(e.size, side)) + (('sigma', d_in),)
    return ConicProblem(blocks, equalities, _objective(e, [s.name for s in systems]), 'max', name=name), systems


def optimal_single_copy(e, client=None):
    """Optimal single-copy tester; memory of the input dimension suffices."""
    if e.copies != 1:
        raise InvalidEnsemble("optimal_single_copy expects a single-slot ensemble")
    problem, systems = comb_problem(e, e.inputs, e.outputs, 'single-copy')
    return _solve(problem, client, e, systems, ((e.inputs, e.outputs),), TesterKind.SINGLE_COPY)


def optimal_parallel(e2, client=None):
    """Single-copy SDP over the joint inputs and outputs of a two-copy ensemble."""
    if e2.copies != 2:
        raise InvalidEnsemble("optimal_parallel expects a two-copy ensemble")
    problem, _ = comb_problem(e2, e2.inputs, e2.outputs, 'parallel')
    return _solve(problem, client, e2, tuple(e2.inputs) + tuple(e2.outputs), e2.slots, TesterKind.PARALLEL)


def optimal_adaptive(e2, client=None):
    """max Σ q_i Tr(T^i C^i) over two-slot combs.

    W = R ⊗ 1_{O2} and Tr_{I2} R = σ ⊗ 1_{O1}, Tr σ = 1.
    """
    if e2.copies != 2:
        raise InvalidEnsemble("optimal_adaptive expects a two-copy ensemble")
    (in1, out1), (in2, out2) = e2.slots
    systems = tuple(in1) + tuple(out1) + tuple(in2) + tuple(out2)
    d_i1, d_o1, d_i2, d_o2 = (_side(g) for g in (in1, out1, in2, out2))
    side = d_i1 * d_o1 * d_i2 * d_o2
    r_side = d_i1 * d_o1 * d_i2
    equalities = (
        LinearEquality({**_sum_terms(e2.size, side), 'R': -tensor_identity_map(r_side, d_o2)},
                       np.zeros(side * side), hermitian_side=side, label='second-round'),
        LinearEquality({'R': partial_trace_map((d_i1 * d_o1, d_i2), [1]), 'sigma': -tensor_identity_map(d_i1, d_o1)},
                       np.zeros((d_i1 * d_o1) ** 2), hermitian_side=d_i1 * d_o1, label='first-round'),
        LinearEquality({'sigma': trace_row(d_i1)}, np.ones(1), label='normalization'),
    )
    blocks = tuple(_element_blocks(e2.size, side)) + (('R', r_side), ('sigma', d_i1))
    problem = ConicProblem(blocks, equalities, _objective(e2, [s.name for s in systems]), 'max', name='adaptive')
    return _solve(problem, client, e2, systems, e2.slots, TesterKind.ADAPTIVE)
