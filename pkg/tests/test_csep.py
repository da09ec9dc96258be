import numpy as np
import pytest
from numpy.testing import assert_allclose

from channels.ensemble import two_copy
from channels.presets import preset
from csep.hierarchy import SymmetricExtension, default_extend_party, upper_bound
from csep.party import PartyOptimizer, check_party, party_problem
from csep.polytope import (Polytope, approximation_radius, bloch_cube, bloch_tetrahedron, certify, f_tau,
                           pauli_octahedron, polytope_lower_bound, seesaw_error_bound)
from csep.problem import AffineMap, ConstrainedSepProblem, Party, constraint_residuals, evaluate, merge_parties, reduced_cost
from csep.seesaw import seesaw
from qops.operators import LabeledOperator, labels
from qops.superops import trace_row, unvec, vec
from scenarios.compile import Scenario, ScenarioKind, adaptive_factors, compile_adaptive, compile_scenario
from scenarios.strategies import perfect_clock_shift_adaptive_factors
from utils.errors import BadParameter, BadRadius, DegenerateReference, DimMismatch, InfeasibleParty, SizeOverflow


def bell_problem():
    """F = |φ+><φ+| on two unconstrained qubits."""
    phi = np.eye(2).reshape(-1) / np.sqrt(2)
    f = LabeledOperator(labels(('A', 2), ('B', 2)), np.outer(phi, phi))
    return ConstrainedSepProblem(f, (Party('A', 2), Party('B', 2)), name='bell')


def memoryless(name):
    return compile_scenario(Scenario(ScenarioKind.MEMORYLESS, preset(name)))


def random_state(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def test_affine_map_shape_check():
    with pytest.raises(DimMismatch):
        AffineMap(np.zeros((2, 4)), np.zeros(3))
    with pytest.raises(DimMismatch):
        Party('A', 2, AffineMap(np.zeros((1, 9)), np.zeros(1)))


def test_trace_only_party_directions():
    party = Party('A', 3)
    assert party.is_trace_only
    assert party.directions.shape == (8, 3, 3)
    gram = np.einsum('aij,bji->ab', party.directions, party.directions)
    assert_allclose(gram, np.eye(8), atol=1e-10)


def test_degenerate_party_fixed_point():
    """Fixing every entry leaves a single feasible state"""
    target = np.diag([0.25, 0.75])
    party = Party('A', 2, AffineMap(np.eye(4), target.reshape(-1, order='F')))
    assert party.is_degenerate
    assert_allclose(party.fixed_point, target, atol=1e-10)
    check_party(party)


def test_infeasible_party():
    party = Party('A', 2, AffineMap(trace_row(2), [2.0]))
    with pytest.raises(InfeasibleParty):
        check_party(party)


def test_problem_rejects_bad_cost():
    with pytest.raises(BadParameter):
        ConstrainedSepProblem(LabeledOperator(labels(('A', 2), ('B', 2)), np.triu(np.ones((4, 4)))),
                              (Party('A', 2), Party('B', 2)))
    with pytest.raises(BadParameter):
        ConstrainedSepProblem(LabeledOperator(labels(('A', 2)), np.eye(2)), (Party('A', 2),))


def test_reduced_cost_matches_evaluate(rng):
    p = memoryless('pauli').problem
    factors = [None, random_state(rng, 2)]
    party = p.parties[0]
    rho_m = np.kron(np.eye(4) / 4, np.eye(2) / 2)
    assert max(party.residuals(rho_m).values()) < 1e-12
    factors[0] = rho_m
    for q in range(2):
        g = reduced_cost(p, q, factors)
        assert np.real(np.trace(g @ factors[q])) == pytest.approx(evaluate(p, factors))


def test_party_optimizer_on_constrained_party(rng):
    """A constrained party's SDP optimum is never below a known feasible point"""
    party = memoryless('pauli').problem.parties[0]
    g = rng.normal(size=(8, 8))
    g = g + g.T
    value, rho = PartyOptimizer(party).maximize(g)
    assert max(party.residuals(rho).values()) < 1e-6
    feasible = np.kron(np.eye(4) / 4, np.eye(2) / 2)
    assert value >= np.trace(g @ feasible) - 1e-6
    assert party_problem(party).name == 'party-M'


def test_bell_ppt_bound_is_half():
    """PPT at level one is exact for two qubits"""
    result = upper_bound(bell_problem(), k=1, ppt=True)
    assert result.ok
    assert result.value == pytest.approx(0.5, abs=1e-6)
    assert result.marginal.names == ('A', 'B')


def test_bell_without_ppt_is_trivial():
    result = upper_bound(bell_problem(), k=1, ppt=False)
    assert result.value == pytest.approx(1.0, abs=1e-6)


def test_bell_seesaw_is_half():
    result = seesaw(bell_problem(), restarts=3, seed=7, workers=1)
    assert result.value == pytest.approx(0.5, abs=1e-8)
    assert all(max(r.values()) < 1e-8 for r in constraint_residuals(bell_problem(), result.factors))
    assert all(b >= a - 1e-12 for a, b in zip(result.history, result.history[1:]))


def test_seesaw_is_reproducible():
    first = seesaw(bell_problem(), restarts=2, seed=3, workers=1)
    second = seesaw(bell_problem(), restarts=2, seed=3, workers=1)
    assert first.restart == second.restart
    assert_allclose(first.factors[0], second.factors[0])


def test_seesaw_needs_a_restart():
    with pytest.raises(BadParameter):
        seesaw(bell_problem(), restarts=0)


def test_memoryless_pauli_sandwich():
    """Seesaw reaches 1/2 and the level-one relaxation sits above it"""
    p = memoryless('pauli').problem
    low = seesaw(p, restarts=3, seed=0, workers=1)
    assert low.value == pytest.approx(0.5, abs=1e-6)
    assert all(max(r.values()) < 1e-6 for r in constraint_residuals(p, low.factors))
    high = upper_bound(p, k=1, ppt=True)
    assert high.ok
    assert high.value >= low.value - 1e-6


@pytest.mark.slow
def test_hierarchy_tightens_on_clock_shift():
    p = memoryless('clock_shift:2').problem
    values = [upper_bound(p, k=k, ppt=True).value for k in (1, 2, 3)]
    assert all(b <= a + 1e-7 for a, b in zip(values, values[1:]))
    assert values[-1] == pytest.approx(0.5, abs=1e-4)


@pytest.mark.slow
def test_bosonic_at_least_as_tight():
    p = bell_problem()
    bosonic = upper_bound(p, k=2, ppt=False, bosonic=True).value
    permutation = upper_bound(p, k=2, ppt=False, bosonic=False).value
    assert bosonic <= permutation + 1e-7


@pytest.mark.slow
def test_seesaw_clock_shift_three():
    result = seesaw(memoryless('clock_shift:3').problem, restarts=5, seed=0, workers=1)
    assert result.value == pytest.approx(1 / 3, abs=1e-6)


def test_extension_size_guard():
    with pytest.raises(SizeOverflow):
        SymmetricExtension(bell_problem(), k=2, size_cap=4)
    with pytest.raises(BadParameter):
        SymmetricExtension(bell_problem(), k=0)


def test_default_extend_party_prefers_smaller():
    assert default_extend_party(memoryless('pauli').problem) == 1
    assert default_extend_party(bell_problem()) == 0


def test_merge_parties_keeps_products_feasible():
    """Merging K and rho of the adaptive problem keeps the perfect strategy feasible"""
    compiled = compile_adaptive(two_copy(preset('clock_shift:2')), L=2)
    factors = adaptive_factors(compiled, *perfect_clock_shift_adaptive_factors(2))
    assert evaluate(compiled.problem, factors) == pytest.approx(1.0, abs=1e-10)
    merged = merge_parties(compiled.problem, 1, 2)
    assert len(merged.parties) == 2
    joint = np.kron(factors[1], factors[2])
    assert max(merged.parties[1].residuals(joint).values()) < 1e-10
    assert evaluate(merged, [factors[0], joint]) == pytest.approx(1.0, abs=1e-10)
    with pytest.raises(BadParameter):
        merge_parties(compiled.problem, 0, 2)


@pytest.mark.parametrize('polytope, expected', [
    (pauli_octahedron(), 1 / np.sqrt(3)),
    (bloch_cube(), 1 / np.sqrt(3)),
    (bloch_tetrahedron(), 1 / 3),
])
def test_approximation_radius(polytope, expected):
    assert approximation_radius(polytope, Party('A', 2), workers=1) == pytest.approx(expected, abs=1e-8)


def test_polytope_checks():
    octahedron = pauli_octahedron()
    with pytest.raises(BadParameter):
        Polytope(tuple(2 * v for v in octahedron.vertices), octahedron.reference).check(Party('A', 2))
    on_vertex = Polytope(octahedron.vertices, octahedron.vertices[0])
    with pytest.raises(DegenerateReference):
        approximation_radius(on_vertex, Party('A', 2), workers=1)


def test_seesaw_error_bound():
    assert seesaw_error_bound(0.4, 1.0, 0.1) == (0.4, pytest.approx(0.4))
    assert seesaw_error_bound(0.5, 0.5, 0.0) == (0.5, pytest.approx(1.0))
    uppers = [seesaw_error_bound(0.5, l, 0.2)[1] for l in np.linspace(0.1, 1.0, 10)]
    assert all(b <= a + 1e-12 for a, b in zip(uppers, uppers[1:]))
    with pytest.raises(BadRadius):
        seesaw_error_bound(0.5, 0.0, 0.0)


def test_f_tau_bounds():
    p = bell_problem()
    assert f_tau(p, np.eye(2) / 2, 1) == pytest.approx(0.25, abs=1e-10)
    zero = ConstrainedSepProblem(p.F.with_matrix(np.zeros((4, 4))), p.parties)
    assert f_tau(zero, np.eye(2) / 2, 1) == pytest.approx(0.0)


def test_certificate_brackets_memoryless_pauli():
    """The polytope interval contains the optimum 1/2"""
    p = memoryless('pauli').problem
    value, vertex, _ = polytope_lower_bound(p, pauli_octahedron(), party_index=1)
    assert vertex is not None and value == pytest.approx(0.5, abs=1e-6)
    cert = certify(p, pauli_octahedron(), party_index=1, workers=1)
    low, high = cert.interval
    assert low <= 0.5 + 1e-6 <= high + 2e-6
    assert cert.l_tau == pytest.approx(1 / np.sqrt(3), abs=1e-8)


def test_merged_party_keeps_internal_ppt_when_extended():
    """The perfect adaptive strategy satisfies the internal PPT image of the extended merged party"""
    compiled = compile_adaptive(two_copy(preset('clock_shift:2')), L=2)
    factors = adaptive_factors(compiled, *perfect_clock_shift_adaptive_factors(2))
    ext = SymmetricExtension(compiled.problem, k=1, extend_party=1)
    images = {image.name: image for image in ext.conic_problem().images}
    assert 'ppt-internal-extended' in images
    assert 'ppt-internal' not in images
    x = np.kron(np.kron(factors[1], factors[2]), factors[0])
    image = images['ppt-internal-extended']
    z = unvec(image.terms['X'] @ vec(x), image.side)
    assert np.min(np.linalg.eigvalsh((z + z.conj().T) / 2)) > -1e-10
    assert 'ppt-internal' in {image.name for image in SymmetricExtension(compiled.problem, k=1,
                                                                           extend_party=0).conic_problem().images}


def test_party_optimizer_reports_attained_value(rng):
    """Without bound=True the value is Tr(G ρ) at the returned state"""
    party = memoryless('pauli').problem.parties[0]
    g = rng.normal(size=(8, 8))
    g = g + g.T
    optimizer = PartyOptimizer(party)
    value, rho = optimizer.maximize(g)
    assert value == pytest.approx(float(np.real(np.trace(g @ rho))), abs=1e-12)
    certified, _ = optimizer.maximize(g, bound=True)
    assert certified >= value - 1e-6


def test_polytope_lower_bound_is_attained():
    p = memoryless('pauli').problem
    value, vertex, rho = polytope_lower_bound(p, pauli_octahedron(), party_index=1)
    factors = [rho, pauli_octahedron().vertices[vertex]]
    assert value == pytest.approx(evaluate(p, factors), abs=1e-10)
