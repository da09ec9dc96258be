"""Physical realizations of single-copy and adaptive testers.

A single-copy tester with Σ T^i = σ ⊗ 1_O is realized by the purification
ρ_IE of σ and POVM elements M^i on (E, O) with ρ * (M^i)^T = T^i. An adaptive
tester additionally needs the intermediate channel K from (E1, O1) to (I2, E2).
"""
import logging
from dataclasses import dataclass

import numpy as np

from qops.choi import link_product
from qops.operators import LabeledOperator, SystemLabel, identity, partial_trace, permute_systems, tensor
from testers.tester import VALID_TOL, Tester, TesterKind, check_tester, success_probability
from utils.errors import NotATester

logger = logging.getLogger(__name__)

PINV_RTOL = 1e-10


@dataclass(frozen=True, eq=False)
class Realization:
    """A preparation, optional intermediate channel and final measurement.

    state lives on (I, E) or (I1, E1), processing on (E1, O1, I2, E2) and the
    POVM elements on (E, O) or (E2, O2).
    """
    state: LabeledOperator
    povm: tuple
    slots: tuple
    processing: LabeledOperator = None

    @property
    def kind(self):
        return TesterKind.SINGLE_COPY if self.processing is None else TesterKind.ADAPTIVE

    def reproduce(self):
        """Rebuild the tester by linking state, processing and transposed POVM elements."""
        head = self.state if self.processing is None else link_product(self.state, self.processing)
        names = [s.name for ins, outs in self.slots for s in ins + outs]
        elements = tuple(permute_systems(link_product(head, m.transpose()), names) for m in self.povm)
        return Tester(elements, self.slots, self.kind)

    def residuals(self):
        """Deviations from the invariants: POVM completeness, state trace and channel trace."""
        total = sum(m.matrix for m in self.povm)
        out = {
            'povm_completeness': float(np.max(np.abs(total - np.eye(total.shape[0])))),
            'state_trace': abs(float(np.real(self.state.trace())) - 1.0),
        }
        if self.processing is not None:
            second_inputs = {s.name for s in self.slots[1][0]}
            reduced = partial_trace(self.processing, second_inputs | {self.processing.names[-1]})
            out['channel_trace'] = float(np.max(np.abs(reduced.matrix - np.eye(reduced.side))))
        return out


def _sqrt_and_pinv(m):
    """(√m, √m⁺, projector onto ker m) for a PSD matrix."""
    m = (m + m.conj().T) / 2
    w, v = np.linalg.eigh(m)
    w = np.clip(w, 0.0, None)
    cutoff = PINV_RTOL * max(w.max(initial=0.0), PINV_RTOL)
    kept = w > cutoff
    root = (v * np.sqrt(w)) @ v.conj().T
    inverse = (v[:, kept] / np.sqrt(w[kept])) @ v[:, kept].conj().T
    kernel = v[:, ~kept] @ v[:, ~kept].conj().T
    return root, inverse, kernel


def _measurement(elements, inverse, kernel, memory, outputs):
    """M^i = [(√X⁺ ⊗ 1) T^i (√X⁺ ⊗ 1) + δ_{i0} Π_ker ⊗ 1]^T on (memory, outputs)."""
    d_out = int(np.prod([s.dim for s in outputs]))
    left = np.kron(inverse, np.eye(d_out))
    povm = []
    for n, t in enumerate(elements):
        n_i = left @ t @ left
        if n == 0:
            n_i = n_i + np.kron(kernel, np.eye(d_out))
        n_i = (n_i + n_i.conj().T) / 2
        povm.append(LabeledOperator((memory,) + tuple(outputs), n_i.T))
    return tuple(povm)


def _composite(name, group):
    return SystemLabel(name, int(np.prod([s.dim for s in group])))


def realize_single_copy(t, tol=VALID_TOL):
    """(ρ_IE, {M^i}) with a memory of the input dimension."""
    if t.kind != TesterKind.SINGLE_COPY:
        raise NotATester(f"Expected a single-copy tester, got {t.kind.value}")
    check_tester(t, tol)
    inputs, outputs = t.slots[0]
    d_out = int(np.prod([s.dim for s in outputs]))
    sigma = partial_trace(t.W, {s.name for s in outputs}).matrix / d_out
    root, inverse, kernel = _sqrt_and_pinv(sigma)
    memory = _composite('E', inputs)
    purification = root.reshape(-1)
    state = LabeledOperator(tuple(inputs) + (memory,), np.outer(purification, purification.conj()))
    povm = _measurement([e.matrix for e in t.elements], inverse, kernel, memory, outputs)
    logger.debug("Single-copy realization: memory dimension %d, rank(σ) = %d", memory.dim,
                 memory.dim - int(round(np.real(np.trace(kernel)))))
    return Realization(state, povm, t.slots)


def realize_adaptive(t, tol=VALID_TOL):
    """(ρ_{I1 E1}, K, {M^i}) with E1 of dimension d_{I1} and E2 of dimension d_{I1} d_{O1} d_{I2}.

    R = Tr_{O2} W / d_{O2}, σ = Tr_{O1 I2} R / d_{O1}, and
    K = (√σ⁺ ⊗ 1)|√R>><<√R|(√σ⁺ ⊗ 1) + Π_ker(σ) ⊗ 1_{O1} ⊗ |0><0|_{I2} ⊗ |0><0|_{E2}.
    """
    if t.kind != TesterKind.ADAPTIVE:
        raise NotATester(f"Expected an adaptive tester, got {t.kind.value}")
    check_tester(t, tol)
    (in1, out1), (in2, out2) = t.slots
    d_i1, d_o1, d_i2, d_o2 = (int(np.prod([s.dim for s in g])) for g in (in1, out1, in2, out2))
    r = partial_trace(t.W, {s.name for s in out2}).matrix / d_o2
    sigma = partial_trace(LabeledOperator(tuple(in1) + tuple(out1) + tuple(in2), r),
                          {s.name for s in out1 + in2}).matrix / d_o1
    root_s, inverse_s, kernel_s = _sqrt_and_pinv(sigma)
    root_r, inverse_r, kernel_r = _sqrt_and_pinv(r)

    e1 = _composite('E1', in1)
    e2 = SystemLabel('E2', d_i1 * d_o1 * d_i2)
    purification = root_s.reshape(-1)
    state = LabeledOperator(tuple(in1) + (e1,), np.outer(purification, purification.conj()))

    w = root_r.reshape(-1)
    left = np.kron(inverse_s, np.eye(d_o1 * d_i2 * e2.dim))
    zero_i2 = np.zeros((d_i2, d_i2))
    zero_i2[0, 0] = 1.0
    zero_e2 = np.zeros((e2.dim, e2.dim))
    zero_e2[0, 0] = 1.0
    k = left @ np.outer(w, w.conj()) @ left
    k = k + np.kron(np.kron(np.kron(kernel_s, np.eye(d_o1)), zero_i2), zero_e2)
    processing = LabeledOperator((e1,) + tuple(out1) + tuple(in2) + (e2,), (k + k.conj().T) / 2)

    povm = _measurement([e.matrix for e in t.elements], inverse_r, kernel_r, e2, out2)
    return Realization(state, povm, t.slots, processing)


def realization_residual(t, realization):
    """Largest entrywise deviation between t and the reproduced tester."""
    rebuilt = realization.reproduce()
    return max(float(np.max(np.abs(a.matrix - b.matrix))) for a, b in zip(t.elements, rebuilt.elements))


def realized_success(realization, e):
    """Success probability of the realized strategy on an ensemble."""
    return success_probability(realization.reproduce(), e)


def product_tester(rho, povm, inputs, outputs):
    """Memoryless tester T^i = ρ ⊗ (M^i)^T on one slot."""
    state = LabeledOperator(tuple(inputs), rho)
    elements = tuple(tensor(state, LabeledOperator(tuple(outputs), np.asarray(m).T)) for m in povm)
    return Tester(elements, ((tuple(inputs), tuple(outputs)),), TesterKind.SINGLE_COPY)


def trivial_tester(inputs, outputs, n):
    """ρ = 1/d_I, M^i = 1/n: random guessing."""
    d_in = int(np.prod([s.dim for s in inputs]))
    state = identity(inputs) / d_in
    elements = tuple(tensor(state, identity(outputs) / n) for _ in range(n))
    return Tester(elements, ((tuple(inputs), tuple(outputs)),), TesterKind.SINGLE_COPY)
