"""Testers: collections of PSD operators assigning outcome probabilities to channels."""
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from channels.ensemble import weighted_sum
from channels.families import clock_shift_family
from qops.operators import (LabeledOperator, SystemLabel, identity, min_eigenvalue, partial_trace, permute_systems,
                            tensor)
from utils.errors import DimMismatch, NotATester

logger = logging.getLogger(__name__)

VALID_TOL = 1e-9


class TesterKind(str, Enum):
    SINGLE_COPY = 'single_copy'
    PARALLEL = 'parallel'
    ADAPTIVE = 'adaptive'
    CLASSICALLY_ADAPTIVE = 'classically_adaptive'


@dataclass(frozen=True, eq=False)
class ClassicalFeedForward:
    """First-round elements R^j and second-round elements S^{i|j} (indexed [j][i])."""
    first: tuple
    second: tuple

    def __post_init__(self):
        first = tuple(self.first)
        second = tuple(tuple(row) for row in self.second)
        if len(first) != len(second):
            raise DimMismatch(f"{len(first)} first-round elements but {len(second)} second-round testers")
        object.__setattr__(self, 'first', first)
        object.__setattr__(self, 'second', second)

    @property
    def register_size(self):
        return len(self.first)

    def compose(self):
        """T^i = Σ_j R^j ⊗ S^{i|j}."""
        elements = []
        for i in range(len(self.second[0])):
            total = tensor(self.first[0], self.second[0][i])
            for r, row in zip(self.first[1:], self.second[1:]):
                total = total + tensor(r, row[i])
            elements.append(total)
        return tuple(elements)


@dataclass(frozen=True, eq=False)
class Tester:
    """Elements T^i over the slots' systems.

    slots lists (inputs, outputs) per channel use, in causal order; a
    single-copy tester has one slot.
    """
    elements: tuple
    slots: tuple
    kind: TesterKind = TesterKind.SINGLE_COPY
    feed_forward: ClassicalFeedForward = None

    def __post_init__(self):
        slots = tuple((tuple(ins), tuple(outs)) for ins, outs in self.slots)
        elements = tuple(self.elements)
        if not elements:
            raise NotATester("A tester needs at least one element")
        names = [s.name for ins, outs in slots for s in ins + outs]
        ordered = []
        for k, t in enumerate(elements):
            if set(t.names) != set(names):
                raise DimMismatch(f"Element {k} lives on {t.names}, expected {names}")
            ordered.append(permute_systems(t, names))
        kind = TesterKind(self.kind)
        if (kind == TesterKind.SINGLE_COPY) != (len(slots) == 1):
            raise NotATester(f"A {kind.value} tester cannot have {len(slots)} slots")
        object.__setattr__(self, 'slots', slots)
        object.__setattr__(self, 'elements', tuple(ordered))
        object.__setattr__(self, 'kind', kind)

    @property
    def size(self):
        return len(self.elements)

    @property
    def systems(self):
        return self.elements[0].systems

    @property
    def inputs(self):
        return tuple(s for ins, _ in self.slots for s in ins)

    @property
    def outputs(self):
        return tuple(s for _, outs in self.slots for s in outs)

    @property
    def W(self):
        return LabeledOperator(self.systems, sum(t.matrix for t in self.elements))

    def permuted(self, order):
        """Elements reordered to the given system names."""
        return [permute_systems(t, order) for t in self.elements]

    def scaled(self, c):
        return Tester(tuple(t * c for t in self.elements), self.slots, self.kind)

    def with_kind(self, kind):
        return Tester(self.elements, self.slots, kind, self.feed_forward)


def success_probability(t, e):
    """Σ_i q_i Tr(T^i C^i)."""
    if t.size != e.size:
        raise DimMismatch(f"Tester has {t.size} outcomes, ensemble has {e.size} members")
    if {s.name for s in t.systems} != {s.name for s in e.systems}:
        raise DimMismatch(f"Tester systems {t.systems} do not match ensemble systems {e.systems}")
    return weighted_sum(e, t.elements)


@dataclass(eq=False)
class ValidationReport:
    kind: TesterKind
    residuals: dict
    min_eigenvalue: float

    def passed(self, tol=VALID_TOL):
        return self.min_eigenvalue >= -tol and all(r <= tol for r in self.residuals.values())

    def failures(self, tol=VALID_TOL):
        return {name: r for name, r in self.residuals.items() if r > tol}


def _names(group):
    return {s.name for s in group}


def _comb_residual(w, out, label):
    """W - Tr_out(W) ⊗ 1_out / d_out; returns (residual, Tr_out W / d_out)."""
    d_out = int(np.prod([s.dim for s in out]))
    marginal = partial_trace(w, _names(out)) / d_out
    rebuilt = permute_systems(tensor(marginal, identity(out)), w.names)
    residual = float(np.max(np.abs(rebuilt.matrix - w.matrix)))
    logger.debug("%s residual %.3g", label, residual)
    return residual, marginal


def comb_residuals(w, slots):
    """Residuals of the nested marginal conditions of a comb over the slots.

    W = R_n ⊗ 1_{O_n}, Tr_{I_n} R_n = R_{n-1} ⊗ 1_{O_{n-1}}, ..., Tr R_0 = 1.
    """
    residuals = {}
    current = w
    for n in range(len(slots) - 1, -1, -1):
        ins, outs = slots[n]
        residuals[f"marginal_{n + 1}"], current = _comb_residual(current, outs, f"slot {n + 1}")
        current = partial_trace(current, _names(ins)) if n > 0 else current
    residuals['normalization'] = abs(float(np.real(current.trace())) - 1.0)
    return residuals


def validate(t):
    """Per-constraint residuals; never raises on an invalid tester."""
    min_eig = min(min_eigenvalue(x) for x in t.elements)
    herm = max(float(np.max(np.abs(x.matrix - x.matrix.conj().T))) for x in t.elements)
    if t.kind == TesterKind.PARALLEL:
        slots = ((t.inputs, t.outputs),)
    else:
        slots = t.slots
    residuals = {'hermitian': herm}
    residuals.update(comb_residuals(t.W, slots))
    if t.kind == TesterKind.CLASSICALLY_ADAPTIVE and t.feed_forward is not None:
        residuals.update(_feed_forward_residuals(t))
    return ValidationReport(t.kind, residuals, min_eig)


def _feed_forward_residuals(t):
    ff = t.feed_forward
    first_slot, second_slot = t.slots
    first_w = LabeledOperator(ff.first[0].systems, sum(r.matrix for r in ff.first))
    residuals = {'first_round_' + k: v for k, v in comb_residuals(first_w, (first_slot,)).items()}
    worst = 0.0
    for row in ff.second:
        w = LabeledOperator(row[0].systems, sum(s.matrix for s in row))
        worst = max(worst, max(comb_residuals(w, (second_slot,)).values()))
    residuals['second_round'] = worst
    negative = min(min(min_eigenvalue(r) for r in ff.first), min(min_eigenvalue(s) for row in ff.second for s in row))
    residuals['feed_forward_psd'] = max(0.0, -negative)
    composed = ff.compose()
    residuals['feed_forward_match'] = max(
        float(np.max(np.abs(permute_systems(c, x.names).matrix - x.matrix))) for c, x in zip(composed, t.elements))
    return residuals


def check_tester(t, tol=VALID_TOL):
    report = validate(t)
    if not report.passed(tol):
        raise NotATester(f"{t.kind.value} tester violates {report.failures(tol)} "
                         f"(min eigenvalue {report.min_eigenvalue:.3g})")
    return report


def single_slot(input_label, output_label):
    return (((input_label,), (output_label,)),)


def two_slots(d_in=2, d_out=2):
    """Slots (I1 -> O1), (I2 -> O2)."""
    i1, o1 = SystemLabel('I1', d_in), SystemLabel('O1', d_out)
    i2, o2 = SystemLabel('I2', d_in), SystemLabel('O2', d_out)
    return (((i1,), (o1,)), ((i2,), (o2,)))


def _bell_states(d=2):
    """Generalized Bell vectors |φ^{ab}> = (1 ⊗ X^a Z^b)|φ+>, index a*d + b."""
    phi = np.eye(d).reshape(-1) / np.sqrt(d)
    return [np.kron(np.eye(d), u) @ phi for u in clock_shift_family(d)]


def bell_tester(d=2):
    """|φ+><φ+|_{I1 I2} ⊗ |φ^j><φ^j|_{O1 O2}: parallel, entangled across the two rounds."""
    slots = two_slots(d, d)
    (i1,), (o1,) = slots[0]
    (i2,), (o2,) = slots[1]
    bells = _bell_states(d)
    state = LabeledOperator((i1, i2), np.outer(bells[0], bells[0].conj()))
    elements = tuple(tensor(state, LabeledOperator((o1, o2), np.outer(b, b.conj()))) for b in bells)
    return Tester(elements, slots, TesterKind.PARALLEL)


def feed_forward_tester(d=2):
    """Σ_j |0><0|_{I1} ⊗ |j><j|_{O1} ⊗ |j><j|_{I2} ⊗ |i><i|_{O2}: classically adaptive, not parallel."""
    slots = two_slots(d, d)
    (i1,), (o1,) = slots[0]
    (i2,), (o2,) = slots[1]

    def ket(label, n):
        m = np.zeros((label.dim, label.dim))
        m[n, n] = 1.0
        return LabeledOperator((label,), m)

    first = tuple(tensor(ket(i1, 0), ket(o1, j)) for j in range(d))
    second = tuple(tuple(tensor(ket(i2, j), ket(o2, i)) for i in range(d)) for j in range(d))
    ff = ClassicalFeedForward(first, second)
    return Tester(ff.compose(), slots, TesterKind.CLASSICALLY_ADAPTIVE, ff)
