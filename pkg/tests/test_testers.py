import numpy as np
import pytest
from numpy.testing import assert_allclose

from channels.ensemble import tensor_with_identity, two_copy
from channels.presets import preset
from qops.operators import LabeledOperator, tensor
from testers.membership import (Verdict, classically_adaptive_feasibility, membership, ppt_cut_eigenvalue,
                                product_split)
from testers.optimize import optimal_adaptive, optimal_parallel, optimal_single_copy
from testers.realization import (product_tester, realization_residual, realize_adaptive, realize_single_copy,
                                 realized_success, trivial_tester)
from testers.tester import (Tester, TesterKind, bell_tester, check_tester, feed_forward_tester, success_probability,
                            two_slots, validate)
from utils.errors import DimMismatch, NotATester

SOLVER_TOL = 1e-6


def random_psd(rng, side):
    a = rng.normal(size=(side, side)) + 1j * rng.normal(size=(side, side))
    return a @ a.conj().T


def random_povm(rng, side, n):
    parts = [random_psd(rng, side) for _ in range(n)]
    w, v = np.linalg.eigh(sum(parts))
    inverse_root = (v / np.sqrt(w)) @ v.conj().T
    return [inverse_root @ p @ inverse_root for p in parts]


def random_single_copy_tester(rng, d_in, d_out, n=3):
    """T^i = (√σ ⊗ 1) N^i (√σ ⊗ 1) for a random state σ and POVM N."""
    (inputs, outputs), _ = two_slots(d_in, d_out)
    sigma = random_psd(rng, d_in)
    sigma /= np.trace(sigma)
    w, v = np.linalg.eigh(sigma)
    left = np.kron((v * np.sqrt(w)) @ v.conj().T, np.eye(d_out))
    elements = tuple(LabeledOperator(inputs + outputs, left @ n_i @ left)
                     for n_i in random_povm(rng, d_in * d_out, n))
    return Tester(elements, ((inputs, outputs),))


def product_of_rounds(rng, d):
    """Two memoryless rounds; outcome (a, b) flattened to a·2 + b."""
    (i1, o1), (i2, o2) = two_slots(d, d)
    first = product_tester(np.eye(d) / d, random_povm(rng, d, 2), i1, o1)
    second = product_tester(np.diag(np.arange(1, d + 1) / (d * (d + 1) / 2)), random_povm(rng, d, 2), i2, o2)
    elements = tuple(tensor(a, b) for a in first.elements for b in second.elements)
    return Tester(elements, two_slots(d, d), TesterKind.ADAPTIVE)


def split_rounds(rng, d):
    """A fixed first round followed by a measured second round."""
    (i1, o1), (i2, o2) = two_slots(d, d)
    first = LabeledOperator(i1 + o1, np.kron(np.eye(d) / d, np.eye(d)))
    second = product_tester(np.eye(d) / d, random_povm(rng, d, 2), i2, o2)
    return Tester(tuple(tensor(first, b) for b in second.elements), two_slots(d, d), TesterKind.ADAPTIVE)


def test_superdense_coding_value(pauli):
    """With unrestricted memory the four Pauli channels are perfectly distinguishable"""
    value, tester = optimal_single_copy(pauli)
    assert value == pytest.approx(1.0, abs=SOLVER_TOL)
    assert validate(tester).passed(SOLVER_TOL)
    assert success_probability(tester, pauli) == pytest.approx(1.0, abs=SOLVER_TOL)


def test_superdense_realization(pauli):
    _, tester = optimal_single_copy(pauli)
    realization = realize_single_copy(tester, tol=SOLVER_TOL)
    assert realization.kind == TesterKind.SINGLE_COPY
    assert realization_residual(tester, realization) < 1e-5
    assert max(realization.residuals().values()) < 1e-8
    assert realized_success(realization, pauli) == pytest.approx(1.0, abs=1e-5)


def test_memory_of_input_dimension_suffices():
    e = preset('adc_bf_id')
    unrestricted, _ = optimal_single_copy(e)
    lifted, _ = optimal_single_copy(tensor_with_identity(e, 2))
    assert lifted == pytest.approx(unrestricted, abs=SOLVER_TOL)


def test_trivial_tester(pauli):
    t = trivial_tester(pauli.inputs, pauli.outputs, pauli.size)
    check_tester(t)
    assert success_probability(t, pauli) == pytest.approx(0.25)


def test_validate_reports_scaling(pauli):
    """A rescaled tester fails normalization but keeps the comb shape"""
    t = trivial_tester(pauli.inputs, pauli.outputs, pauli.size).scaled(2.0)
    report = validate(t)
    assert report.residuals['normalization'] == pytest.approx(1.0)
    assert report.residuals['marginal_1'] < 1e-12
    assert not report.passed()
    with pytest.raises(NotATester):
        check_tester(t)


def test_success_probability_checks_systems(pauli, clock_shift_3):
    t = trivial_tester(pauli.inputs, pauli.outputs, pauli.size)
    with pytest.raises(DimMismatch):
        success_probability(t, clock_shift_3)


@pytest.mark.parametrize('d', [2, 3])
def test_random_single_copy_round_trip(rng, d):
    for _ in range(5):
        t = random_single_copy_tester(rng, d, d)
        check_tester(t, 1e-9)
        realization = realize_single_copy(t)
        assert realization_residual(t, realization) < 1e-8
        assert max(realization.residuals().values()) < 1e-8


def test_product_tester_realization_is_exact(rng):
    (inputs, outputs), _ = two_slots(2, 2)
    rho = np.diag([0.7, 0.3])
    t = product_tester(rho, random_povm(rng, 2, 3), inputs, outputs)
    realization = realize_single_copy(t)
    assert realization_residual(t, realization) < 1e-10


def test_realize_rejects_wrong_kind(rng):
    with pytest.raises(NotATester):
        realize_single_copy(product_of_rounds(rng, 2))
    with pytest.raises(NotATester):
        realize_adaptive(random_single_copy_tester(rng, 2, 2))


@pytest.mark.parametrize('d', [2, 3])
def test_adaptive_round_trip(rng, d):
    """Two memoryless rounds realize through the intermediate channel"""
    t = product_of_rounds(rng, d)
    check_tester(t)
    realization = realize_adaptive(t)
    assert realization.kind == TesterKind.ADAPTIVE
    assert realization_residual(t, realization) < 1e-8
    assert max(realization.residuals().values()) < 1e-8


def test_adaptive_sqrt_pauli_is_perfect(sqrt_pauli):
    e2 = two_copy(sqrt_pauli)
    value, tester = optimal_adaptive(e2)
    assert value == pytest.approx(1.0, abs=SOLVER_TOL)
    realization = realize_adaptive(tester, tol=SOLVER_TOL)
    assert realized_success(realization, e2) == pytest.approx(1.0, abs=1e-5)


def test_parallel_never_beats_adaptive(pauli):
    e2 = two_copy(pauli)
    parallel, _ = optimal_parallel(e2)
    adaptive, _ = optimal_adaptive(e2)
    assert parallel <= adaptive + 1e-7


def test_bell_tester_membership():
    """Entangled across the round cut: parallel but not classically adaptive"""
    t = bell_tester(2)
    check_tester(t)
    assert membership(t, 'parallel').verdict == Verdict.MEMBER
    assert membership(t, 'adaptive').verdict == Verdict.MEMBER
    result = membership(t, 'classically_adaptive')
    assert result.verdict == Verdict.NON_MEMBER
    assert result.certificate == 'ppt-cut'
    assert ppt_cut_eigenvalue(t) < -1e-3


def test_feed_forward_tester_membership():
    """Classical feed-forward: classically adaptive but not parallel"""
    t = feed_forward_tester(2)
    check_tester(t)
    result = membership(t, 'classically_adaptive')
    assert result.is_member and result.certificate == 'feed-forward'
    assert membership(t, 'parallel').verdict == Verdict.NON_MEMBER
    assert membership(t, 'adaptive').verdict == Verdict.MEMBER


def test_product_tester_is_member_everywhere(rng):
    t = split_rounds(rng, 2)
    assert product_split(t) is not None
    for cls in ('parallel', 'adaptive', 'classically_adaptive'):
        assert membership(t, cls).is_member
    (inputs, outputs), _ = two_slots(2, 2)
    single = product_tester(np.eye(2) / 2, random_povm(rng, 2, 2), inputs, outputs)
    assert membership(single, 'single_copy').is_member


def test_negative_elements_are_rejected(pauli):
    t = trivial_tester(pauli.inputs, pauli.outputs, pauli.size)
    broken = Tester((t.elements[0] * -1.0,) + t.elements[1:], t.slots)
    result = membership(broken, 'single_copy')
    assert result.verdict == Verdict.NON_MEMBER
    assert result.certificate == 'negative-element'


def test_membership_slot_mismatch(pauli):
    t = trivial_tester(pauli.inputs, pauli.outputs, pauli.size)
    with pytest.raises(DimMismatch):
        membership(t, 'parallel')


def test_classically_adaptive_extension_of_product(rng):
    """A product of two rounds is reachable with a single register value"""
    t = split_rounds(rng, 2)
    solution = classically_adaptive_feasibility(t, L=1)
    assert solution.ok


def test_feed_forward_composition_matches():
    t = feed_forward_tester(3)
    composed = t.feed_forward.compose()
    for a, b in zip(composed, t.elements):
        assert_allclose(a.matrix, b.matrix)
    assert validate(t).residuals['feed_forward_match'] == 0.0


def test_feed_forward_needs_a_large_enough_register():
    """A register of size 2 does not certify membership at register size 1"""
    t = feed_forward_tester(2)
    assert t.feed_forward.register_size == 2
    result = membership(t, 'classically_adaptive', L=1)
    assert not result.is_member
    assert result.certificate == 'hierarchy-k1'
    assert membership(t, 'classically_adaptive', L=2).certificate == 'feed-forward'
