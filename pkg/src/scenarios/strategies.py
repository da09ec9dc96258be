"""Explicit strategies with known success probabilities."""
import numpy as np

from qops.operators import LabeledOperator
from testers.tester import ClassicalFeedForward, Tester, TesterKind, two_slots
from utils.errors import BadParameter


def fourier_vector(d, m):
    """|ψ_m> = Σ_k ω^{mk} |k> / √d."""
    return np.exp(2j * np.pi * m * np.arange(d) / d) / np.sqrt(d)


def _ket(d, n):
    v = np.zeros(d, dtype=complex)
    v[n] = 1.0
    return v


def _operator(systems, *vectors):
    v = vectors[0]
    for w in vectors[1:]:
        v = np.kron(v, w)
    return LabeledOperator(systems, np.outer(v, v.conj()))


def perfect_clock_shift_strategy(d):
    """Classically adaptive tester with register size d discriminating X^a Z^b ⊗ X^a Z^b perfectly.

    Round one sends |0> and reads a in the computational basis; round two
    sends |ψ_0> and reads b in the Fourier basis. Outcome index is a·d + b.
    """
    if d < 2:
        raise BadParameter(f"Need d >= 2, got {d}")
    slots = two_slots(d, d)
    (i1,), (o1,) = slots[0]
    (i2,), (o2,) = slots[1]
    first = tuple(_operator((i1, o1), _ket(d, 0), _ket(d, j)) for j in range(d))
    zero = np.zeros((d * d, d * d))
    second = tuple(
        tuple(_operator((i2, o2), fourier_vector(d, 0), fourier_vector(d, b)) if a == j
              else LabeledOperator((i2, o2), zero)
              for a in range(d) for b in range(d))
        for j in range(d))
    ff = ClassicalFeedForward(first, second)
    return Tester(ff.compose(), slots, TesterKind.CLASSICALLY_ADAPTIVE, ff)


def perfect_clock_shift_adaptive_factors(d):
    """The same strategy as (rho, K'^j, M'^{i|j}) for the adaptive compile with L = d."""
    rho = np.outer(_ket(d, 0), _ket(d, 0))
    instrument = [np.kron(np.outer(_ket(d, j), _ket(d, j)), np.outer(fourier_vector(d, 0), fourier_vector(d, 0).conj()))
                  for j in range(d)]
    zero = np.zeros((d, d))
    measurements = [[np.outer(fourier_vector(d, b), fourier_vector(d, b).conj()) if a == j else zero
                     for a in range(d) for b in range(d)] for j in range(d)]
    return rho, instrument, measurements
