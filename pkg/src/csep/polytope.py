"""Inner polytope approximations, approximation radii and the seesaw error interval."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from api.solver_client import SolverClient
from channels.families import pauli_matrices
from csep.party import PartyOptimizer
from csep.problem import reduced_cost
from utils.config import get_settings
from utils.errors import BadParameter, BadRadius, DegenerateReference, GeometryError

logger = logging.getLogger(__name__)

VERTEX_TOL = 1e-9
INTERIOR_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class Polytope:
    vertices: tuple
    reference: np.ndarray

    def __post_init__(self):
        vertices = tuple(np.asarray(v, dtype=complex) for v in self.vertices)
        if not vertices:
            raise BadParameter("A polytope needs at least one vertex")
        object.__setattr__(self, 'vertices', vertices)
        object.__setattr__(self, 'reference', np.asarray(self.reference, dtype=complex))

    @property
    def dim(self):
        return self.vertices[0].shape[0]

    def check(self, party):
        """Every vertex and the reference must be feasible states of the party."""
        for name, rho in [(f"vertex {n}", v) for n, v in enumerate(self.vertices)] + [('reference', self.reference)]:
            if rho.shape != (party.dim, party.dim):
                raise BadParameter(f"{name} has shape {rho.shape}, party {party.name!r} has dimension {party.dim}")
            residuals = party.residuals(rho)
            if max(residuals.values()) > VERTEX_TOL:
                raise BadParameter(f"{name} is not a feasible state of party {party.name!r}: {residuals}")


@dataclass(frozen=True)
class SeesawCertificate:
    r_V: float
    l_tau: float
    f_tau: float
    upper_from_bound: float

    @property
    def interval(self):
        return self.r_V, self.upper_from_bound


def polytope_from_bloch(vectors, reference=None):
    """Qubit polytope with vertices (1 + r·σ)/2; reference defaults to 1/2."""
    identity, sx, sy, sz = pauli_matrices()
    vertices = [(identity + r[0] * sx + r[1] * sy + r[2] * sz) / 2 for r in np.asarray(vectors, dtype=float)]
    return Polytope(tuple(vertices), identity / 2 if reference is None else reference)


def pauli_octahedron():
    """The six Pauli eigenstates."""
    axes = np.vstack([np.eye(3), -np.eye(3)])
    return polytope_from_bloch(axes)


def bloch_cube():
    signs = np.array([[x, y, z] for x in (1, -1) for y in (1, -1) for z in (1, -1)], dtype=float)
    return polytope_from_bloch(signs / np.sqrt(3))


def bloch_tetrahedron():
    corners = np.array([[1, 1, 1], [1, -1, -1], [-1, 1, -1], [-1, -1, 1]], dtype=float)
    return polytope_from_bloch(corners / np.sqrt(3))


def _coordinates(party, matrices, reference):
    directions = party.directions
    return np.array([[np.real(np.trace(e @ (m - reference))) for e in directions] for m in matrices])


def _facets(points):
    """Unique facet inequalities h·x ≤ c of the hull of points (rows)."""
    n, dim = points.shape
    if dim == 1:
        return np.array([[1.0], [-1.0]]), np.array([points.max(), -points.min()])
    try:
        hull = ConvexHull(points)
    except QhullError as exc:
        raise GeometryError(f"Facet enumeration failed: {exc}") from None
    normals, offsets = hull.equations[:, :-1], -hull.equations[:, -1]
    keys = np.round(np.hstack([normals, offsets[:, None]]), 9)
    _, unique = np.unique(keys, axis=0, return_index=True)
    return normals[np.sort(unique)], offsets[np.sort(unique)]


def approximation_radius(polytope, party, client=None, workers=None):
    """Largest t with t·Y + (1 - t)·τ inside the polytope, Y the party's state space."""
    polytope.check(party)
    if party.is_degenerate:
        return 1.0
    points = _coordinates(party, polytope.vertices, polytope.reference)
    if len(points) <= points.shape[1]:
        raise GeometryError(f"{len(points)} vertices cannot span {points.shape[1]} dimensions")
    normals, offsets = _facets(points)
    if np.min(offsets) <= INTERIOR_TOL:
        raise DegenerateReference("Reference state is not strictly inside the polytope")

    client = client or SolverClient()
    shared = PartyOptimizer(party, client)
    workers = get_settings().workers if workers is None else workers
    threaded = workers > 1 and not party.is_trace_only

    def support(h):
        operator = np.einsum('k,kij->ij', h, party.directions)
        optimizer = PartyOptimizer(party, client) if threaded else shared
        value, _ = optimizer.maximize(operator, bound=True)
        return value - float(np.real(np.trace(operator @ polytope.reference)))

    if threaded:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            supports = list(pool.map(support, normals))
    else:
        supports = [support(h) for h in normals]

    radius = 1.0
    for c, m in zip(offsets, supports):
        if m > c:
            radius = min(radius, c / m)
    logger.info("Approximation radius over %d facets: %.10f", len(offsets), radius)
    return radius


def f_tau(p, tau, other_party, client=None):
    """min over the other party of Tr(F (τ ⊗ ρ))."""
    if len(p.parties) != 2:
        raise BadParameter("f_tau needs a two-party problem")
    tau_party = 1 - other_party
    factors = [None, None]
    factors[tau_party] = np.asarray(tau, dtype=complex)
    g = reduced_cost(p, other_party, factors)
    value, _ = PartyOptimizer(p.parties[other_party], client or SolverClient()).minimize(g, bound=True)
    return value


def seesaw_error_bound(r_V, l, f):
    """Interval [r_V, r_V/l + (l - 1)/l · f] containing the optimum."""
    if not 0 < l <= 1:
        raise BadRadius(f"Approximation radius must lie in (0, 1], got {l}")
    return r_V, r_V / l + (l - 1) / l * f


def polytope_lower_bound(p, polytope, party_index=0, client=None):
    """Exact optimum over the other party at every vertex; returns (r_V, vertex index, partner state)."""
    if len(p.parties) != 2:
        raise BadParameter("polytope_lower_bound needs a two-party problem")
    polytope.check(p.parties[party_index])
    other = 1 - party_index
    optimizer = PartyOptimizer(p.parties[other], client or SolverClient())
    best = (-np.inf, None, None)
    for n, vertex in enumerate(polytope.vertices):
        factors = [None, None]
        factors[party_index] = vertex
        value, rho = optimizer.maximize(reduced_cost(p, other, factors))
        if value > best[0]:
            best = (value, n, rho)
    return best


def certify(p, polytope, party_index=0, client=None, workers=None):
    """r_V, l_τ, f_τ and the resulting upper endpoint for one polytope."""
    client = client or SolverClient()
    r_v, _, _ = polytope_lower_bound(p, polytope, party_index, client)
    radius = approximation_radius(polytope, p.parties[party_index], client, workers)
    f = f_tau(p, polytope.reference, 1 - party_index, client)
    _, upper = seesaw_error_bound(r_v, radius, f)
    return SeesawCertificate(r_v, radius, f, upper)
