"""Alternating per-party optimization over product points (lower bounds)."""
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import unitary_group

from api.solver_client import SolverClient, Status
from csep.party import PartyOptimizer, check_party
from csep.problem import evaluate, reduced_cost
from utils.config import get_settings
from utils.errors import BadParameter, SolverFailure

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SeesawResult:
    value: float
    factors: tuple
    restart: int
    values: list = field(default_factory=list)
    history: list = field(default_factory=list)
    failures: list = field(default_factory=list)


def _haar_pure(d, rng):
    if d == 1:
        return np.ones(1, dtype=complex)
    return unitary_group.rvs(d, random_state=rng)[:, 0]


def _run_restart(p, restart, seed, max_iters, conv_tol, start_factor, settings):
    """One seesaw trajectory; returns (value, factors, history)."""
    rng = np.random.default_rng([seed, restart])
    client = SolverClient(settings)
    optimizers = [PartyOptimizer(party, client) for party in p.parties]
    n = len(p.parties)
    first = 1 if start_factor is not None else 0

    factors = [None] * n
    if start_factor is not None:
        factors[0] = np.asarray(start_factor, dtype=complex)
    for q in range(n):
        if q == first or factors[q] is not None:
            continue
        psi = _haar_pure(p.parties[q].dim, rng)
        if p.parties[q].is_trace_only:
            factors[q] = np.outer(psi, psi.conj())
        else:
            factors[q] = optimizers[q].closest_to(psi)
    order = [(first + s) % n for s in range(n)]

    history = []
    previous = -np.inf
    for _ in range(max_iters):
        for q in order:
            g = reduced_cost(p, q, factors)
            _, candidate = optimizers[q].maximize(g)
            # keep the incumbent unless the candidate is at least as good
            if factors[q] is None or np.real(np.trace(g @ candidate)) >= np.real(np.trace(g @ factors[q])):
                factors[q] = candidate
        value = evaluate(p, factors)
        history.append(value)
        if value - previous < conv_tol:
            break
        previous = value
    return value, tuple(factors), history


def seesaw(p, restarts=20, seed=0, max_iters=200, conv_tol=1e-9, vertices=None, workers=None, settings=None):
    """Best product point over independent restarts.

    With vertices for party 0, restart r starts from vertex r and the sweep
    begins at party 1. Ties go to the lowest restart index.
    """
    if restarts < 1:
        raise BadParameter(f"Need at least one restart, got {restarts}")
    settings = settings or get_settings()
    workers = settings.workers if workers is None else workers
    client = SolverClient(settings)
    for party in p.parties:
        check_party(party, client)
    if vertices is not None:
        vertices = list(vertices)
        restarts = len(vertices)

    jobs = [(p, r, seed, max_iters, conv_tol, vertices[r] if vertices is not None else None, settings)
            for r in range(restarts)]
    outcomes = [None] * restarts
    failures = []
    if workers > 1 and restarts > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [pool.submit(_run_restart, *job) for job in jobs]
            for r, future in enumerate(futures):
                try:
                    outcomes[r] = future.result()
                except SolverFailure as exc:
                    failures.append((r, str(exc)))
    else:
        for r, job in enumerate(jobs):
            try:
                outcomes[r] = _run_restart(*job)
            except SolverFailure as exc:
                failures.append((r, str(exc)))
    for r, message in failures:
        logger.error("Seesaw restart %d failed: %s", r, message)

    best = None
    values = []
    for r, outcome in enumerate(outcomes):
        if outcome is None:
            values.append(float('nan'))
            continue
        values.append(outcome[0])
        if best is None or outcome[0] > outcomes[best][0]:
            best = r
    if best is None:
        raise SolverFailure(Status.NUMERICAL_TROUBLE, 'every seesaw restart failed')
    value, factors, history = outcomes[best]
    logger.info("Seesaw: best value %.10f from restart %d of %d", value, best, restarts)
    return SeesawResult(value, factors, best, values, history, failures)
