"""Weighted channel ensembles and their transformations."""
import logging
from dataclasses import dataclass

import numpy as np

from channels.families import check_unitary, maximally_entangled, unitary_channel
from qops.choi import choi
from qops.operators import LabeledOperator, SystemLabel, min_eigenvalue, partial_trace, permute_systems, relabel, tensor
from utils.errors import DimMismatch, InvalidEnsemble

logger = logging.getLogger(__name__)

WEIGHT_TOL = 1e-12
CHOI_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class ChannelEnsemble:
    """Discrimination instance {q_i, C^i}.

    slots lists (input labels, output labels) per channel use; a single-copy
    ensemble has one slot, two_copy ensembles have two. Every Choi matrix is
    ordered as all slot inputs followed by all slot outputs.
    """
    slots: tuple
    weights: tuple
    chois: tuple
    base: object = None

    def __post_init__(self):
        slots = tuple((tuple(ins), tuple(outs)) for ins, outs in self.slots)
        object.__setattr__(self, 'slots', slots)
        weights = tuple(float(w) for w in self.weights)
        if len(weights) != len(self.chois) or not weights:
            raise InvalidEnsemble("Need one weight per Choi matrix and at least one member")
        if min(weights) < 0 or abs(sum(weights) - 1.0) > WEIGHT_TOL:
            raise InvalidEnsemble(f"Weights must be non-negative and sum to 1, got {weights}")
        object.__setattr__(self, 'weights', weights)

        names = [s.name for s in self.systems]
        chois = []
        for k, c in enumerate(self.chois):
            if set(c.names) != set(names):
                raise InvalidEnsemble(f"Member {k} lives on {c.names}, expected {names}")
            c = permute_systems(c, names)
            if c.systems != self.systems:
                raise InvalidEnsemble(f"Member {k} has dimensions {c.dims}, expected {self.dims}")
            if min_eigenvalue(c) < -CHOI_TOL or np.max(np.abs(c.matrix - c.matrix.conj().T)) > CHOI_TOL:
                raise InvalidEnsemble(f"Member {k} is not positive semidefinite")
            marginal = partial_trace(c, {s.name for s in self.outputs})
            if np.max(np.abs(marginal.matrix - np.eye(marginal.side))) > CHOI_TOL:
                raise InvalidEnsemble(f"Member {k} is not trace preserving")
            chois.append(c)
        object.__setattr__(self, 'chois', tuple(chois))

    @property
    def inputs(self):
        return tuple(s for ins, _ in self.slots for s in ins)

    @property
    def outputs(self):
        return tuple(s for _, outs in self.slots for s in outs)

    @property
    def systems(self):
        return self.inputs + self.outputs

    @property
    def dims(self):
        return tuple(s.dim for s in self.systems)

    @property
    def input_dim(self):
        return int(np.prod([s.dim for s in self.inputs]))

    @property
    def output_dim(self):
        return int(np.prod([s.dim for s in self.outputs]))

    @property
    def size(self):
        return len(self.chois)

    @property
    def copies(self):
        return len(self.slots)

    @property
    def members(self):
        return list(zip(self.weights, self.chois))

    def __repr__(self):
        return f"ChannelEnsemble(N={self.size}, inputs={list(self.inputs)}, outputs={list(self.outputs)})"


def ensemble_from_chois(chois, weights=None, inputs=None, outputs=None):
    """Single-slot ensemble from Choi matrices ordered (inputs..., outputs...)."""
    chois = tuple(chois)
    if not chois:
        raise InvalidEnsemble("Empty ensemble")
    first = chois[0]
    if inputs is None or outputs is None:
        if len(first.systems) != 2:
            raise InvalidEnsemble("Give inputs and outputs explicitly for multi-system Choi matrices")
        inputs, outputs = first.systems[:1], first.systems[1:]
    weights = tuple(weights) if weights is not None else (1.0 / len(chois),) * len(chois)
    return ChannelEnsemble(slots=((tuple(inputs), tuple(outputs)),), weights=weights, chois=chois)


def ensemble_from_channels(channels, weights=None):
    channels = list(channels)
    chois = [choi(ch) for ch in channels]
    return ensemble_from_chois(chois, weights, (channels[0].input,), (channels[0].output,))


def uniform_unitary_ensemble(unitaries, input_name='I', output_name='O'):
    """Conjugation channels with weights 1/N."""
    unitaries = [check_unitary(u) for u in unitaries]
    if len({u.shape for u in unitaries}) != 1:
        raise DimMismatch("Unitaries have different dimensions")
    return ensemble_from_channels([unitary_channel(u, input_name, output_name) for u in unitaries])


def tensor_with_identity(e, d_E, input_name='Ei', output_name='Eo'):
    """Members C ⊗ id_E on the enlarged systems; d_E = 1 returns e unchanged."""
    if d_E < 1:
        raise InvalidEnsemble(f"Memory dimension must be >= 1, got {d_E}")
    if d_E == 1:
        return e
    if e.copies != 1:
        raise InvalidEnsemble("tensor_with_identity expects a single-slot ensemble")
    e_in, e_out = SystemLabel(input_name, d_E), SystemLabel(output_name, d_E)
    ident = maximally_entangled(e_in, e_out)
    inputs = e.inputs + (e_in,)
    outputs = e.outputs + (e_out,)
    order = [s.name for s in inputs + outputs]
    chois = tuple(permute_systems(tensor(c, ident), order) for c in e.chois)
    return ChannelEnsemble(slots=((inputs, outputs),), weights=e.weights, chois=chois)


def _suffixed(e, suffix):
    mapping = {s.name: s.name + suffix for s in e.systems}
    slot = tuple(tuple(SystemLabel(s.name + suffix, s.dim) for s in group) for group in e.slots[0])
    return slot, [relabel(c, mapping) for c in e.chois]


def product_ensemble(first, second):
    """Members C_i ⊗ D_i, first copy suffixed 1 and second suffixed 2."""
    if first.size != second.size or not np.allclose(first.weights, second.weights, atol=WEIGHT_TOL):
        raise InvalidEnsemble("Both copies must carry the same weights")
    if first.copies != 1 or second.copies != 1:
        raise InvalidEnsemble("Copies must be single-slot ensembles")
    slot1, chois1 = _suffixed(first, '1')
    slot2, chois2 = _suffixed(second, '2')
    order = [s.name for s in slot1[0] + slot2[0] + slot1[1] + slot2[1]]
    chois = tuple(permute_systems(tensor(a, b), order) for a, b in zip(chois1, chois2))
    return ChannelEnsemble(slots=(slot1, slot2), weights=first.weights, chois=chois, base=(first, second))


def two_copy(e):
    """Members C_i ⊗ C_i over I1 I2 → O1 O2, same weights."""
    return product_ensemble(e, e)


def lift_two_copy(e2, d_E1, d_E2):
    """Two-copy ensemble whose first copy carries memory E1 and second copy E2."""
    if e2.base is None:
        raise InvalidEnsemble("Memory lifting needs an ensemble produced by two_copy")
    first, second = e2.base
    if d_E1 == 1 and d_E2 == 1:
        return e2
    logger.debug("Lifting two-copy ensemble with memories %d and %d", d_E1, d_E2)
    return product_ensemble(tensor_with_identity(first, d_E1), tensor_with_identity(second, d_E2))


def merge_slots(e):
    """View every channel use as one composite channel (inputs..., outputs...)."""
    if e.copies == 1:
        return e
    return ChannelEnsemble(slots=((e.inputs, e.outputs),), weights=e.weights, chois=e.chois)


def weighted_sum(e, operators):
    """Σ_i q_i Tr(X_i C_i) for operators aligned with the ensemble systems."""
    total = 0.0
    for q, c, x in zip(e.weights, e.chois, operators):
        x = permute_systems(x, c.names) if isinstance(x, LabeledOperator) else x
        matrix = x.matrix if isinstance(x, LabeledOperator) else np.asarray(x)
        total += q * float(np.real(np.sum(matrix.T * c.matrix)))
    return total
