"""Linear optimization over one party's constrained state space."""
import logging

import numpy as np

from api.solver_client import ConicProblem, LinearEquality, SolverClient, Status
from qops.superops import trace_row
from utils.errors import InfeasibleParty, SolverFailure

logger = logging.getLogger(__name__)


def party_problem(party, objective=None, sense='max'):
    """{ρ ⪰ 0, Tr ρ = 1, Φ(ρ) = a} as a conic problem on one block."""
    equalities = [LinearEquality({'rho': trace_row(party.dim)}, np.ones(1), label='trace')]
    if party.constraint.rows:
        equalities.append(LinearEquality({'rho': party.constraint.action}, party.constraint.target,
                                         hermitian_side=party.constraint.hermitian_side, label='constraint'))
    objective = {'rho': objective} if objective is not None else {}
    return ConicProblem((('rho', party.dim),), tuple(equalities), objective, sense, name=f"party-{party.name}")


def check_party(party, client=None):
    """Raise InfeasibleParty when the party's state space is empty."""
    if party.is_trace_only:
        return
    client = client or SolverClient()
    if party.is_degenerate:
        point = party.fixed_point
        residuals = party.residuals(point)
        if max(residuals.values()) > 1e-8:
            raise InfeasibleParty(f"Party {party.name!r} admits no state")
        return
    solution = client.check_feasibility(party_problem(party))
    if solution.status == Status.INFEASIBLE:
        raise InfeasibleParty(f"Party {party.name!r} admits no state")


def _hermitian(m):
    m = np.asarray(m, dtype=complex)
    return (m + m.conj().T) / 2


class PartyOptimizer:
    """Maximizes or minimizes Tr(G ρ) over one party, closed form when possible.

    The SDP for a constrained party is canonicalized once and reused with
    each new cost.
    """

    def __init__(self, party, client=None):
        self.party = party
        self.client = client or SolverClient()
        self._solve = None

    def _parametric(self):
        if self._solve is None:
            zero = np.zeros((self.party.dim, self.party.dim))
            self._solve = self.client.parametric(party_problem(self.party, zero))
        return self._solve

    def optimize(self, g, sense='max', bound=False):
        """Return (value, ρ), value = Tr(G ρ) at the returned state.

        With bound=True a constrained party reports the solver's one-sided
        certificate instead: an upper bound for 'max', a lower bound for 'min'.
        """
        g = _hermitian(g)
        if self.party.is_degenerate:
            rho = self.party.fixed_point
            return float(np.real(np.trace(g @ rho))), rho
        if self.party.is_trace_only:
            values, vectors = np.linalg.eigh(g)
            k = -1 if sense == 'max' else 0
            v = vectors[:, k]
            return float(values[k]), np.outer(v, v.conj())
        solution = self._parametric().solve({'rho': g}, sense)
        if not solution.ok:
            raise SolverFailure(solution.status, f"party {self.party.name!r}")
        rho = _hermitian(solution.block_values['rho'])
        if bound:
            return (solution.upper_certificate if sense == 'max' else solution.lower_certificate), rho
        return float(np.real(np.trace(g @ rho))), rho

    def maximize(self, g, bound=False):
        return self.optimize(g, 'max', bound)

    def minimize(self, g, bound=False):
        return self.optimize(g, 'min', bound)

    def closest_to(self, psi):
        """Feasible state of largest overlap with the pure state psi."""
        psi = np.asarray(psi, dtype=complex).reshape(-1)
        return self.maximize(np.outer(psi, psi.conj()))[1]
