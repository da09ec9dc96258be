"""Kraus channels, Choi matrices and the link product."""
import string
from dataclasses import dataclass

import numpy as np

from qops.operators import LabeledOperator, SystemLabel
from utils.errors import BadParameter, DimMismatch

_LETTERS = string.ascii_letters
KRAUS_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class KrausChannel:
    """Completely positive trace-preserving map given by Kraus operators."""
    input: SystemLabel
    output: SystemLabel
    kraus_ops: tuple

    def __post_init__(self):
        ops = tuple(np.asarray(k, dtype=complex) for k in self.kraus_ops)
        if not ops:
            raise BadParameter("A channel needs at least one Kraus operator")
        for k in ops:
            if k.shape != (self.output.dim, self.input.dim):
                raise DimMismatch(f"Kraus operator of shape {k.shape}, expected {(self.output.dim, self.input.dim)}")
        completeness = sum(k.conj().T @ k for k in ops)
        if np.max(np.abs(completeness - np.eye(self.input.dim))) > KRAUS_TOL:
            raise BadParameter("Kraus operators are not trace preserving")
        object.__setattr__(self, 'kraus_ops', ops)

    def apply(self, rho):
        """Σ_k K ρ K† on a plain matrix."""
        rho = np.asarray(rho, dtype=complex)
        return sum(k @ rho @ k.conj().T for k in self.kraus_ops)

    def then(self, other):
        """Sequential composition: self first, then other."""
        if other.input.dim != self.output.dim:
            raise DimMismatch("Output of the first channel does not feed the second")
        ops = tuple(b @ a for b in other.kraus_ops for a in self.kraus_ops)
        return KrausChannel(self.input, other.output, ops)


def choi(ch):
    """D = Σ_ij |i><j| ⊗ C(|i><j|) on (input, output); Tr D = d_input."""
    vectors = [k.T.reshape(-1) for k in ch.kraus_ops]
    matrix = sum(np.outer(v, v.conj()) for v in vectors)
    return LabeledOperator((ch.input, ch.output), matrix)


def link_product(x, y):
    """Tr_E[(X^{T_E} ⊗ 1)(1 ⊗ Y)] over the systems E shared by name.

    The result carries the private systems of x followed by those of y.
    """
    shared = [name for name in x.names if name in y.names]
    for name in shared:
        if x.label(name).dim != y.label(name).dim:
            raise DimMismatch(f"System {name!r} has dimension {x.label(name).dim} vs {y.label(name).dim}")

    names = list(dict.fromkeys(x.names + y.names))
    if 2 * len(names) > len(_LETTERS):
        raise DimMismatch("Too many systems for a single contraction")
    row = {name: _LETTERS[2 * k] for k, name in enumerate(names)}
    col = {name: _LETTERS[2 * k + 1] for k, name in enumerate(names)}

    x_subs = ''.join(row[n] for n in x.names) + ''.join(col[n] for n in x.names)
    y_subs = ''.join(row[n] for n in y.names) + ''.join(col[n] for n in y.names)
    private = [n for n in x.names if n not in shared] + [n for n in y.names if n not in shared]
    out = ''.join(row[n] for n in private) + ''.join(col[n] for n in private)

    product = np.einsum(f'{x_subs},{y_subs}->{out}', x.tensor_view(), y.tensor_view())
    systems = tuple(x.label(n) if n in x.names else y.label(n) for n in private)
    side = int(np.prod([s.dim for s in systems], dtype=np.int64)) if systems else 1
    return LabeledOperator(systems, product.reshape(side, side))


def apply_choi(d, rho):
    """Channel action recovered from its Choi matrix: ρ * D."""
    return link_product(rho, d)
