"""Compile memory-constrained discrimination scenarios into constrained separability problems.

Every compiled problem carries tester blocks rescaled to unit trace; the cost
operator absorbs the scale, so Tr(F ρ) at a product point equals the success
probability of the tester that point encodes.
"""
import logging
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
import scipy.sparse as sp

from channels.ensemble import ChannelEnsemble, lift_two_copy, merge_slots, tensor_with_identity, two_copy
from csep.problem import AffineMap, ConstrainedSepProblem, Party
from qops.operators import LabeledOperator, SystemLabel, permute_systems
from qops.superops import identity_map, partial_trace_map, sandwich_map, tensor_identity_map, trace_row, vec
from testers.tester import ClassicalFeedForward, Tester, TesterKind
from utils.config import get_settings
from utils.errors import BadParameter, DimMismatch, InvalidEnsemble, SizeOverflow

logger = logging.getLogger(__name__)


class ScenarioKind(str, Enum):
    MEMORYLESS = 'memoryless'
    MEMORY = 'memory'
    PARALLEL = 'parallel'
    ADAPTIVE = 'adaptive'
    ADAPTIVE_CLASSICAL = 'adaptive_classical'
    CLASSICALLY_ADAPTIVE = 'classically_adaptive'


TWO_COPY_KINDS = (ScenarioKind.PARALLEL, ScenarioKind.ADAPTIVE, ScenarioKind.ADAPTIVE_CLASSICAL,
                  ScenarioKind.CLASSICALLY_ADAPTIVE)


@dataclass(frozen=True, eq=False)
class Scenario:
    """A discrimination task: the single-copy ensemble plus memory resources."""
    kind: ScenarioKind
    ensemble: ChannelEnsemble
    d_E: int = 1
    d_E1: int = 1
    d_E2: int = 1
    L: int = None

    def __post_init__(self):
        object.__setattr__(self, 'kind', ScenarioKind(self.kind))
        if self.ensemble.copies != 1:
            raise InvalidEnsemble("Scenarios take the single-copy ensemble; copies are built on compile")
        if min(self.d_E, self.d_E1, self.d_E2) < 1:
            raise BadParameter("Memory dimensions must be at least 1")
        if self.L is not None and self.L < 1:
            raise BadParameter(f"Register size must be at least 1, got {self.L}")

    @property
    def register_size(self):
        if self.kind == ScenarioKind.ADAPTIVE:
            return 1
        return self.L if self.L is not None else self.ensemble.size


@dataclass(eq=False)
class CompiledScenario:
    kind: ScenarioKind
    ensemble: ChannelEnsemble
    problem: ConstrainedSepProblem
    layout: dict = field(default_factory=dict)

    @property
    def N(self):
        return self.ensemble.size

    @property
    def L(self):
        return self.layout.get('L', 1)


def _dim(group):
    return int(np.prod([s.dim for s in group]))


def _composite_chois(e, names):
    """Choi matrices on one label per slot group: single slot (I, O), two slots (I1, I2, O1, O2)."""
    groups = [ins for ins, _ in e.slots] + [outs for _, outs in e.slots]
    systems = tuple(SystemLabel(name, _dim(g)) for name, g in zip(names, groups))
    return [LabeledOperator(systems, c.matrix) for c in e.chois]


def _projector(d, j):
    p = np.zeros((d, d))
    p[j, j] = 1.0
    return p


def _check_side(side):
    cap = get_settings().size_cap
    if side > cap:
        raise SizeOverflow(side, cap)


def _flagged_cost(e, chois, flags, assignments, order, norm):
    """norm · Σ q_i (flag projectors) ⊗ C^i, reordered to order.

    assignments yields (flag basis indices, member index i).
    """
    systems = tuple(flags) + chois[0].systems
    side = int(np.prod([s.dim for s in systems]))
    _check_side(side)
    total = np.zeros((side, side), dtype=complex)
    for indices, i in assignments:
        block = np.ones((1, 1))
        for flag, n in zip(flags, indices):
            block = np.kron(block, _projector(flag.dim, n))
        total += e.weights[i] * np.kron(block, chois[i].matrix)
    return permute_systems(LabeledOperator(systems, norm * total), order).matrix


def _affine(action, target, hermitian_side=None):
    return AffineMap(sp.csr_matrix(action), vec(target), hermitian_side)


def _register_projector(l_dim, j, rest):
    return sp.kron(sp.csr_matrix(_projector(l_dim, j)), sp.identity(rest), format='csr')


def compile_memoryless_single_copy(e):
    """Party M = ⊕_i M'^i / d_O on (N, O) with Tr_N = 1_O / d_O; party rho on I."""
    if e.copies != 1:
        raise InvalidEnsemble("Expected a single-slot ensemble")
    n, d_in, d_out = e.size, e.input_dim, e.output_dim
    chois = _composite_chois(e, ('I', 'O'))
    flag = SystemLabel('N', n)
    f = _flagged_cost(e, chois, [flag], (((i,), i) for i in range(n)), ['N', 'O', 'I'], d_out)
    povm = Party('M', n * d_out, _affine(partial_trace_map((n, d_out), [0]), np.eye(d_out) / d_out, d_out),
                 factor_dims=(n, d_out))
    state = Party('rho', d_in)
    problem = ConstrainedSepProblem(LabeledOperator((povm.label, state.label), f), (povm, state), name='memoryless')
    layout = {'d_in': d_in, 'd_out': d_out, 'norm': d_out}
    logger.debug("Compiled memoryless problem: parties %s", problem.dims)
    return CompiledScenario(ScenarioKind.MEMORYLESS, e, problem, layout)


def compile_memory_dE(e, d_E):
    """Single copy with a d_E-dimensional memory: the memoryless problem of C ⊗ id_E."""
    compiled = compile_memoryless_single_copy(tensor_with_identity(e, d_E))
    compiled.kind = ScenarioKind.MEMORYLESS if d_E == 1 else ScenarioKind.MEMORY
    compiled.layout['d_E'] = d_E
    return compiled


def compile_parallel(e, d_E=1):
    """Two parallel uses as one composite channel with memory d_E."""
    compiled = compile_memoryless_single_copy(tensor_with_identity(merge_slots(two_copy(e)), d_E))
    compiled.kind = ScenarioKind.PARALLEL
    compiled.layout['d_E'] = d_E
    return compiled


def _per_register(dims, l_dim, block):
    """Stack block @ (P_j X P_j) over register values j of the first factor."""
    side = int(np.prod(dims))
    rest = side // l_dim
    rows = []
    for j in range(l_dim):
        p = _register_projector(l_dim, j, rest)
        rows.append(block @ sandwich_map(p, p))
    return sp.vstack(rows, format='csr')


def compile_adaptive(e2, d_E1=1, d_E2=1, L=1):
    """Three parties: M = ⊕_{j,i} M'^{i|j} on (L, N, O2), K = ⊕_j K'^j on (L', O1, I2), rho on I1."""
    if e2.copies != 2:
        raise InvalidEnsemble("compile_adaptive expects a two-copy ensemble")
    if L < 1:
        raise BadParameter(f"Register size must be at least 1, got {L}")
    e2 = lift_two_copy(e2, d_E1, d_E2)
    n = e2.size
    (in1, out1), (in2, out2) = e2.slots
    d_i1, d_o1, d_i2, d_o2 = (_dim(g) for g in (in1, out1, in2, out2))
    chois = _composite_chois(e2, ('I1', 'I2', 'O1', 'O2'))
    flags = [SystemLabel('L', L), SystemLabel('N', n), SystemLabel('Lp', L)]
    assignments = (((j, i, j), i) for j in range(L) for i in range(n))
    order = ['L', 'N', 'O2', 'Lp', 'O1', 'I2', 'I1']
    f = _flagged_cost(e2, chois, flags, assignments, order, L * d_o2 * d_o1)

    m_dims = (L, n, d_o2)
    m_action = _per_register(m_dims, L, partial_trace_map(m_dims, [0, 1]))
    m_target = np.concatenate([vec(np.eye(d_o2) / (L * d_o2))] * L)
    measure = Party('M', L * n * d_o2, AffineMap(m_action, m_target), factor_dims=m_dims)
    k_dims = (L, d_o1, d_i2)
    instrument = Party('K', L * d_o1 * d_i2,
                       _affine(partial_trace_map(k_dims, [0, 2]), np.eye(d_o1) / d_o1, d_o1), factor_dims=k_dims)
    state = Party('rho', d_i1)
    parties = (measure, instrument, state)
    problem = ConstrainedSepProblem(LabeledOperator(tuple(p.label for p in parties), f), parties, name=f"adaptive-L{L}")
    layout = {'L': L, 'd_E1': d_E1, 'd_E2': d_E2, 'dims': (d_i1, d_o1, d_i2, d_o2), 'norm': L * d_o2 * d_o1}
    kind = ScenarioKind.ADAPTIVE if L == 1 else ScenarioKind.ADAPTIVE_CLASSICAL
    return CompiledScenario(kind, e2, problem, layout)


def _trace_and_replace_map(dims, position):
    """Ω on the factor at position: X - Tr_pos(X) ⊗ 1 / d, for a trailing factor."""
    if position != len(dims) - 1:
        raise BadParameter("Only the last factor can be replaced")
    side = int(np.prod(dims))
    d = dims[position]
    return identity_map(side) - tensor_identity_map(side // d, d) @ partial_trace_map(dims, [position]) / d


def classically_adaptive_parties(n, L, dims):
    """Parties S on (L, N, I2, O2) and R on (L', I1, O1) with their comb constraints."""
    d_i1, d_o1, d_i2, d_o2 = dims
    s_dims = (L, n, d_i2, d_o2)
    s_side = int(np.prod(s_dims))
    omega = _trace_and_replace_map(s_dims, 3)
    s_action = sp.vstack([
        _per_register(s_dims, L, partial_trace_map(s_dims, [0, 1]) @ omega),
        _per_register(s_dims, L, trace_row(s_side)),
    ], format='csr')
    s_target = np.concatenate([np.zeros(L * (d_i2 * d_o2) ** 2), np.full(L, 1.0 / L)])
    second = Party('S', s_side, AffineMap(s_action, s_target), factor_dims=s_dims)

    r_dims = (L, d_i1, d_o1)
    r_action = partial_trace_map(r_dims, [0]) @ _trace_and_replace_map(r_dims, 2)
    first = Party('R', int(np.prod(r_dims)), _affine(r_action, np.zeros((d_i1 * d_o1, d_i1 * d_o1)), d_i1 * d_o1),
                  factor_dims=r_dims)
    return second, first


def compile_classically_adaptive(e2, L=None):
    """Two parties: S = ⊕_{j,i} S^{i|j} on (L, N, I2, O2) and R = ⊕_j R^j on (L', I1, O1)."""
    if e2.copies != 2:
        raise InvalidEnsemble("compile_classically_adaptive expects a two-copy ensemble")
    n = e2.size
    L = n if L is None else L
    if L < 1:
        raise BadParameter(f"Register size must be at least 1, got {L}")
    (in1, out1), (in2, out2) = e2.slots
    d_i1, d_o1, d_i2, d_o2 = (_dim(g) for g in (in1, out1, in2, out2))
    chois = _composite_chois(e2, ('I1', 'I2', 'O1', 'O2'))
    flags = [SystemLabel('L', L), SystemLabel('N', n), SystemLabel('Lp', L)]
    assignments = (((j, i, j), i) for j in range(L) for i in range(n))
    order = ['L', 'N', 'I2', 'O2', 'Lp', 'I1', 'O1']
    f = _flagged_cost(e2, chois, flags, assignments, order, L * d_o2 * d_o1)

    parties = classically_adaptive_parties(n, L, (d_i1, d_o1, d_i2, d_o2))
    problem = ConstrainedSepProblem(LabeledOperator(tuple(p.label for p in parties), f), parties,
                                    name=f"classically-adaptive-L{L}")
    layout = {'L': L, 'dims': (d_i1, d_o1, d_i2, d_o2), 'norm': L * d_o2 * d_o1}
    return CompiledScenario(ScenarioKind.CLASSICALLY_ADAPTIVE, e2, problem, layout)


def compile_scenario(s):
    """Dispatch on the scenario kind."""
    if s.kind == ScenarioKind.MEMORYLESS:
        return compile_memoryless_single_copy(s.ensemble)
    if s.kind == ScenarioKind.MEMORY:
        return compile_memory_dE(s.ensemble, s.d_E)
    if s.kind == ScenarioKind.PARALLEL:
        return compile_parallel(s.ensemble, s.d_E)
    if s.kind in (ScenarioKind.ADAPTIVE, ScenarioKind.ADAPTIVE_CLASSICAL):
        return compile_adaptive(two_copy(s.ensemble), s.d_E1, s.d_E2, s.register_size)
    return compile_classically_adaptive(two_copy(s.ensemble), s.register_size)


def _block(x, index, size):
    return np.asarray(x)[index * size:(index + 1) * size, index * size:(index + 1) * size]


def _slot_labels(e):
    return [s for ins, outs in e.slots for s in ins + outs]


def tester_from_factors(compiled, factors):
    """The tester encoded by a product point of the compiled problem."""
    e = compiled.ensemble
    n = e.size
    if len(factors) != len(compiled.problem.parties):
        raise DimMismatch(f"Expected {len(compiled.problem.parties)} factors, got {len(factors)}")
    if len(compiled.problem.parties) == 2 and compiled.kind != ScenarioKind.CLASSICALLY_ADAPTIVE:
        x_m, rho = factors
        d_out = compiled.layout['d_out']
        elements = tuple(LabeledOperator(e.systems, np.kron(rho, d_out * _block(x_m, i, d_out))) for i in range(n))
        return Tester(elements, e.slots, TesterKind.SINGLE_COPY)

    d_i1, d_o1, d_i2, d_o2 = compiled.layout['dims']
    L = compiled.L
    systems = tuple(_slot_labels(e))
    if compiled.kind == ScenarioKind.CLASSICALLY_ADAPTIVE:
        x_s, x_r = factors
        (in1, out1), (in2, out2) = e.slots
        first_systems, second_systems = tuple(in1 + out1), tuple(in2 + out2)
        first = tuple(LabeledOperator(first_systems, d_o1 * _block(x_r, j, d_i1 * d_o1)) for j in range(L))
        second = tuple(tuple(LabeledOperator(second_systems, L * d_o2 * _block(x_s, j * n + i, d_i2 * d_o2))
                             for i in range(n)) for j in range(L))
        ff = ClassicalFeedForward(first, second)
        return Tester(ff.compose(), e.slots, TesterKind.CLASSICALLY_ADAPTIVE, ff)

    x_m, x_k, rho = factors
    elements = []
    for i in range(n):
        total = np.zeros((d_i1 * d_o1 * d_i2 * d_o2,) * 2, dtype=complex)
        for j in range(L):
            k = d_o1 * _block(x_k, j, d_o1 * d_i2)
            m = L * d_o2 * _block(x_m, j * n + i, d_o2)
            total += np.kron(np.kron(rho, k), m)
        elements.append(LabeledOperator(systems, total))
    return Tester(tuple(elements), e.slots, TesterKind.ADAPTIVE)


def _direct_sum(blocks, scale):
    size = blocks[0].shape[0]
    out = np.zeros((len(blocks) * size,) * 2, dtype=complex)
    for n, b in enumerate(blocks):
        out[n * size:(n + 1) * size, n * size:(n + 1) * size] = np.asarray(b) * scale
    return out


def memoryless_factors(compiled, rho, povm):
    """Product point for state rho and tester-side POVM elements M'^i = (M^i)^T."""
    return _direct_sum(povm, 1.0 / compiled.layout['d_out']), np.asarray(rho, dtype=complex)


def adaptive_factors(compiled, rho, instrument, measurements):
    """instrument[j] = K'^j on (O1, I2); measurements[j][i] = M'^{i|j} on O2."""
    d_o1, d_o2 = compiled.layout['dims'][1], compiled.layout['dims'][3]
    L = compiled.L
    x_m = _direct_sum([m for row in measurements for m in row], 1.0 / (L * d_o2))
    x_k = _direct_sum(instrument, 1.0 / d_o1)
    return x_m, x_k, np.asarray(rho, dtype=complex)


def classically_adaptive_factors(compiled, first, second):
    """first[j] = R^j on (I1, O1); second[j][i] = S^{i|j} on (I2, O2)."""
    d_o1, d_o2 = compiled.layout['dims'][1], compiled.layout['dims'][3]
    L = compiled.L
    x_s = _direct_sum([s for row in second for s in row], 1.0 / (L * d_o2))
    x_r = _direct_sum(first, 1.0 / d_o1)
    return x_s, x_r
