"""Closed-form success probabilities used to cross-check the numerics."""
import itertools
import logging

import numpy as np

from channels.families import check_unitary
from utils.errors import BadParameter, NotAGroup, NotIrreducible

logger = logging.getLogger(__name__)

GROUP_TOL = 1e-9


def _positive(**values):
    for name, v in values.items():
        if int(v) != v or v < 1:
            raise BadParameter(f"{name} must be a positive integer, got {v}")


def oracle_clock_shift(d, d_E):
    """min{1, d_E / d} for the uniform clock-shift ensemble."""
    _positive(d_E=d_E)
    if d < 2:
        raise BadParameter(f"Clock-shift ensembles need d >= 2, got {d}")
    return min(1.0, d_E / d)


def oracle_werner_holevo(d, d_E):
    """1/2 + min{d_E, d} / (2d) for the symmetric/antisymmetric pair."""
    _positive(d=d, d_E=d_E)
    return 0.5 + min(d_E, d) / (2 * d)


def oracle_adaptive_no_cc_cap(N, d_O, d_E2):
    """min{d_O d_E2 / N, 1}: two-copy adaptive testers without a classical register."""
    _positive(N=N, d_O=d_O, d_E2=d_E2)
    return min(d_O * d_E2 / N, 1.0)


def _proportional(a, b, tol=GROUP_TOL):
    """True when a = e^{iθ} b for unitaries of the same dimension."""
    return abs(abs(np.trace(b.conj().T @ a)) - a.shape[0]) <= tol * a.shape[0]


def check_group(unitaries, tol=GROUP_TOL):
    """Raise NotAGroup unless the set is closed under products up to a global phase."""
    for a, b in itertools.product(unitaries, repeat=2):
        product = a @ b
        if not any(_proportional(product, u, tol) for u in unitaries):
            raise NotAGroup("Set is not closed under multiplication up to a phase")


def schur_sum(unitaries):
    """(1/N) Σ |Tr U|²; equals 1 exactly for an irreducible (projective) representation."""
    return float(sum(abs(np.trace(u)) ** 2 for u in unitaries) / len(unitaries))


def oracle_group_uniform(unitaries, d_E, tol=GROUP_TOL):
    """(1/N) d min{d, d_E} for a uniform ensemble forming an irreducible group up to phase."""
    _positive(d_E=d_E)
    unitaries = [check_unitary(u) for u in unitaries]
    check_group(unitaries, tol)
    total = schur_sum(unitaries)
    if abs(total - 1.0) > tol:
        raise NotIrreducible(f"Representation is reducible (Schur sum {total:.6f})")
    d = unitaries[0].shape[0]
    value = d * min(d, d_E) / len(unitaries)
    logger.debug("Group oracle: N=%d, d=%d, d_E=%d -> %.10f", len(unitaries), d, d_E, value)
    return value
