"""Published values, reproduced end to end. Slow; run with -m slow."""
import pytest

from channels.ensemble import two_copy
from channels.presets import preset
from csep.hierarchy import upper_bound
from csep.seesaw import seesaw
from scenarios.compile import Scenario, ScenarioKind, compile_classically_adaptive, compile_scenario
from scenarios.oracles import oracle_clock_shift, oracle_werner_holevo
from testers.optimize import optimal_parallel, optimal_single_copy
from utils.errors import SizeOverflow

pytestmark = pytest.mark.slow

SANDWICH_GAP = 2e-3


def problem(name, d_E=1):
    kind = ScenarioKind.MEMORYLESS if d_E == 1 else ScenarioKind.MEMORY
    return compile_scenario(Scenario(kind, preset(name), d_E=d_E)).problem


def sandwich(p, restarts=20, max_k=3):
    """Seesaw value and the first hierarchy value within SANDWICH_GAP of it, climbing k up to max_k."""
    low = seesaw(p, restarts=restarts, seed=0, workers=1)
    high = None
    for k in range(1, max_k + 1):
        try:
            result = upper_bound(p, k=k, ppt=True)
        except SizeOverflow:
            break
        assert result.ok
        high = result.value
        if high - low.value <= SANDWICH_GAP:
            break
    assert high is not None
    return low.value, high


def test_sqrt_clock_shift_qutrit_bounds():
    p = problem('sqrt_clock_shift:3')
    low = seesaw(p, restarts=200, seed=0, workers=1)
    assert low.value >= 0.3262
    high = upper_bound(p, k=4, ppt=True, extend_party=1)
    assert high.value <= 0.3274 + 5e-4
    assert low.value <= high.value + 1e-7


def test_sqrt_clock_shift_qutrit_unrestricted_memory():
    value, _ = optimal_single_copy(preset('sqrt_clock_shift:3'))
    assert value == pytest.approx(0.70126, abs=1e-4)


def test_sqrt_clock_shift_qutrit_qubit_memory():
    p = problem('sqrt_clock_shift:3', d_E=2)
    low = seesaw(p, restarts=200, seed=0, workers=1)
    high = upper_bound(p, k=1, ppt=True)
    assert low.value >= 0.5941
    assert high.value <= 0.6016 + 5e-4
    assert low.value <= high.value + 1e-7


def test_ppt_relaxation_is_not_memoryless():
    """On the damping/flip/identity triple the level-one PPT value sits strictly above the seesaw value"""
    p = problem('adc_bf_id')
    low = seesaw(p, restarts=30, seed=0, workers=1)
    high = upper_bound(p, k=1, ppt=True)
    assert low.value == pytest.approx(0.556, abs=1e-3)
    assert high.value == pytest.approx(0.562, abs=1e-3)
    assert high.value - low.value >= 3e-3


def test_parallel_values():
    parallel, _ = optimal_parallel(two_copy(preset('adc_bf_id')))
    assert parallel == pytest.approx(0.80697, abs=1e-4)
    parallel, _ = optimal_parallel(two_copy(preset('sqrt_pauli')))
    assert parallel == pytest.approx(0.9571, abs=1e-3)


def test_classically_adaptive_beats_parallel_on_triple():
    compiled = compile_classically_adaptive(two_copy(preset('adc_bf_id')), L=3)
    low = seesaw(compiled.problem, restarts=30, seed=0, workers=1)
    assert low.value >= 0.8118 - 1e-3


def test_classically_adaptive_upper_bound_on_sqrt_pauli():
    compiled = compile_classically_adaptive(two_copy(preset('sqrt_pauli')))
    high = upper_bound(compiled.problem, k=1, ppt=True)
    assert high.value <= 0.8980 + 1e-3
    low = seesaw(compiled.problem, restarts=5, seed=0, workers=1)
    assert low.value <= high.value + 1e-6


@pytest.mark.parametrize('d, d_E', [(d, d_E) for d in (2, 3, 4) for d_E in range(1, d + 1)])
def test_clock_shift_sandwich(d, d_E):
    expected = oracle_clock_shift(d, d_E)
    low, high = sandwich(problem(f'clock_shift:{d}', d_E))
    assert low <= high + 1e-7
    assert low == pytest.approx(expected, abs=SANDWICH_GAP)
    assert high - low <= SANDWICH_GAP


@pytest.mark.parametrize('d, d_E', [(d, d_E) for d in (2, 3) for d_E in range(1, d + 1)])
def test_werner_holevo_sandwich(d, d_E):
    expected = oracle_werner_holevo(d, d_E)
    low, high = sandwich(problem(f'werner_holevo:{d}', d_E))
    assert low <= high + 1e-7
    assert low == pytest.approx(expected, abs=SANDWICH_GAP)
    assert high - low <= SANDWICH_GAP
