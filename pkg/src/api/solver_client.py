"""Conic normal form and the cvxpy-backed solver client.

Problems are stated over complex hermitian PSD blocks with complex linear
equalities. The client realizes each block through the real embedding
[[Re, -Im], [Im, Re]], parameterized by the upper triangle of Re and the
strict upper triangle of Im, so conjugate-duplicate rows collapse.
"""
import logging
import os
import time
from dataclasses import dataclass, field
from enum import Enum

import cvxpy as cp
import numpy as np
import scipy.sparse as sp

from qops.superops import vec
from utils.config import get_settings
from utils.errors import BadParameter, DimMismatch

logger = logging.getLogger(__name__)

ZERO_ENTRY = 1e-14


class Status(str, Enum):
    OPTIMAL = 'optimal'
    INFEASIBLE = 'infeasible'
    UNBOUNDED = 'unbounded'
    NUMERICAL_TROUBLE = 'numerical_trouble'


@dataclass(frozen=True)
class Tolerances:
    feas: float = 1e-8
    gap: float = 1e-8

    @classmethod
    def from_settings(cls, settings=None):
        settings = settings or get_settings()
        return cls(feas=settings.feas_tol, gap=settings.gap_tol)


@dataclass(frozen=True)
class Block:
    name: str
    side: int


@dataclass(frozen=True, eq=False)
class LinearEquality:
    """Σ_b M_b vec(X_b) = rhs, with M_b complex sparse of shape (m, side_b²).

    hermitian_side marks equalities whose left side is a hermitian matrix of
    that side (stacked column-major); only its upper triangle is kept.
    """
    terms: dict
    rhs: np.ndarray
    hermitian_side: int = None
    label: str = ''

    def __post_init__(self):
        terms = {name: sp.csr_matrix(m, dtype=complex) for name, m in self.terms.items()}
        rhs = np.atleast_1d(np.asarray(self.rhs, dtype=complex)).reshape(-1)
        for name, m in terms.items():
            if m.shape[0] != rhs.size:
                raise DimMismatch(f"Equality {self.label!r}: term {name!r} has {m.shape[0]} rows, rhs has {rhs.size}")
        if self.hermitian_side is not None and self.hermitian_side ** 2 != rhs.size:
            raise DimMismatch(f"Equality {self.label!r}: hermitian side {self.hermitian_side} vs {rhs.size} rows")
        object.__setattr__(self, 'terms', terms)
        object.__setattr__(self, 'rhs', rhs)


@dataclass(frozen=True, eq=False)
class PsdImage:
    """Slack block Z = Σ_b M_b vec(X_b) constrained to be PSD."""
    name: str
    side: int
    terms: dict

    def __post_init__(self):
        terms = {name: sp.csr_matrix(m, dtype=complex) for name, m in self.terms.items()}
        for name, m in terms.items():
            if m.shape[0] != self.side ** 2:
                raise DimMismatch(f"Image {self.name!r}: term {name!r} has {m.shape[0]} rows, expected {self.side ** 2}")
        object.__setattr__(self, 'terms', terms)


@dataclass(frozen=True, eq=False)
class ConicProblem:
    blocks: tuple
    equalities: tuple = ()
    objective: dict = field(default_factory=dict)
    sense: str = 'max'
    images: tuple = ()
    name: str = 'problem'

    def __post_init__(self):
        blocks = tuple(b if isinstance(b, Block) else Block(*b) for b in self.blocks)
        if not blocks:
            raise BadParameter("A conic problem needs at least one block")
        sides = {b.name: b.side for b in blocks}
        if len(sides) != len(blocks):
            raise BadParameter("Block names must be unique")
        if self.sense not in ('max', 'min'):
            raise BadParameter(f"Unknown sense {self.sense!r}")
        for eq in self.equalities:
            self._check_terms(eq.terms, sides, eq.label)
        for image in self.images:
            self._check_terms(image.terms, sides, image.name)
        objective = {}
        for name, coefficient in self.objective.items():
            c = np.asarray(coefficient, dtype=complex)
            if name not in sides or c.shape != (sides[name], sides[name]):
                raise DimMismatch(f"Objective coefficient for {name!r} has shape {c.shape}")
            if np.max(np.abs(c - c.conj().T), initial=0.0) > 1e-9 * max(1.0, np.max(np.abs(c), initial=0.0)):
                raise BadParameter(f"Objective coefficient for {name!r} is not hermitian")
            objective[name] = c
        object.__setattr__(self, 'blocks', blocks)
        object.__setattr__(self, 'equalities', tuple(self.equalities))
        object.__setattr__(self, 'images', tuple(self.images))
        object.__setattr__(self, 'objective', objective)

    @staticmethod
    def _check_terms(terms, sides, label):
        for name, m in terms.items():
            if name not in sides:
                raise BadParameter(f"{label!r} refers to unknown block {name!r}")
            if m.shape[1] != sides[name] ** 2:
                raise DimMismatch(f"{label!r}: term {name!r} acts on {m.shape[1]} entries, block has {sides[name] ** 2}")

    @property
    def largest_side(self):
        return max([b.side for b in self.blocks] + [im.side for im in self.images])

    def with_objective(self, objective, sense=None):
        return ConicProblem(self.blocks, self.equalities, objective, sense or self.sense, self.images, self.name)


@dataclass(eq=False)
class Solution:
    status: Status
    primal_value: float = float('nan')
    dual_value: float = float('nan')
    block_values: dict = field(default_factory=dict)
    solver: str = ''
    solve_time: float = 0.0
    residual: float = float('nan')

    @property
    def ok(self):
        return self.status == Status.OPTIMAL

    @property
    def upper_certificate(self):
        return float(np.fmax(self.primal_value, self.dual_value))

    @property
    def lower_certificate(self):
        return float(np.fmin(self.primal_value, self.dual_value))

    def __repr__(self):
        return f"Solution(status={self.status.value}, primal={self.primal_value:.10g}, dual={self.dual_value:.10g})"


def clarabel_cone_bytes(problem):
    """Dense storage Clarabel keeps per PSD cone: (m(m+1)/2)² doubles for real side m = 2·side."""
    total = 0
    for side in [b.side for b in problem.blocks] + [im.side for im in problem.images]:
        m = 2 * side
        total += (m * (m + 1) // 2) ** 2 * 8
    return total


def real_embedding(h):
    """[[Re H, -Im H], [Im H, Re H]]; spectrum of H with every eigenvalue doubled."""
    h = np.asarray(h, dtype=complex)
    return np.block([[h.real, -h.imag], [h.imag, h.real]])


class _BlockEmbedding:
    """Real parameters of one hermitian block and their expansion to vec(X)."""

    def __init__(self, side):
        self.side = n = side
        ai, aj = np.triu_indices(n)
        bi, bj = np.triu_indices(n, 1)
        self.a_index = (ai, aj)
        self.b_index = (bi, bj)
        self.na = ai.size
        self.nb = bi.size
        rows = np.concatenate([ai + n * aj, aj + n * ai])
        cols = np.concatenate([np.arange(self.na)] * 2)
        data = np.ones(rows.size)
        off = ai != aj
        keep = np.concatenate([np.ones(self.na, bool), off])
        self.ua = sp.csr_matrix((data[keep], (rows[keep], cols[keep])), shape=(n * n, self.na))
        rows = np.concatenate([bi + n * bj, bj + n * bi])
        cols = np.concatenate([np.arange(self.nb)] * 2)
        data = np.concatenate([np.ones(self.nb), -np.ones(self.nb)])
        self.ub = sp.csr_matrix((data, (rows, cols)), shape=(n * n, self.nb))

    @property
    def size(self):
        return self.na + self.nb

    def real_rows(self, m):
        """Real rows for Re and Im of m @ vec(X) over the parameters [a; b]."""
        m = sp.csr_matrix(m, dtype=complex)
        mr, mi = sp.csr_matrix(m.real), sp.csr_matrix(m.imag)
        re = sp.hstack([mr @ self.ua, -(mi @ self.ub)], format='csr')
        im = sp.hstack([mi @ self.ua, mr @ self.ub], format='csr')
        return re, im

    def matrix(self, params):
        a, b = params[:self.na], params[self.na:]
        re = (self.ua @ a).reshape((self.side, self.side), order='F')
        im = (self.ub @ b).reshape((self.side, self.side), order='F')
        return re + 1j * im


class _Assembly:
    """Real-embedded data of a ConicProblem, shared by solving and dumping."""

    def __init__(self, problem):
        self.problem = problem
        self.embeddings = {}
        self.offsets = {}
        offset = 0
        for block in problem.blocks:
            emb = _BlockEmbedding(block.side)
            self.embeddings[block.name] = emb
            self.offsets[block.name] = offset
            offset += emb.size
        self.n_vars = offset
        self.rows, self.rhs, self.contradiction = self._equalities()
        self.images = [(image, *self._stack(image.terms, image.side ** 2)) for image in problem.images]

    def _stack(self, terms, n_rows):
        """Global real matrices (re, im) for Σ_b M_b vec(X_b)."""
        re_parts, im_parts = [], []
        for block in self.problem.blocks:
            emb = self.embeddings[block.name]
            if block.name in terms:
                re, im = emb.real_rows(terms[block.name])
            else:
                re = im = sp.csr_matrix((n_rows, emb.size))
            re_parts.append(re)
            im_parts.append(im)
        return sp.hstack(re_parts, format='csr'), sp.hstack(im_parts, format='csr')

    def _equalities(self):
        blocks_re, blocks_im, rhs = [], [], []
        for eq in self.problem.equalities:
            re, im = self._stack(eq.terms, eq.rhs.size)
            keep_re = keep_im = np.arange(eq.rhs.size)
            if eq.hermitian_side is not None:
                h = eq.hermitian_side
                i, j = keep_re % h, keep_re // h
                keep_re, keep_im = keep_re[i <= j], keep_re[i < j]
            blocks_re.append(re[keep_re])
            blocks_im.append(im[keep_im])
            rhs.extend([eq.rhs.real[keep_re], eq.rhs.imag[keep_im]])
        if not blocks_re:
            return sp.csr_matrix((0, self.n_vars)), np.zeros(0), False
        rows = sp.vstack(blocks_re + blocks_im, format='csr')
        rhs = np.concatenate([rhs[k] for k in range(0, len(rhs), 2)] + [rhs[k] for k in range(1, len(rhs), 2)])
        rows.data[np.abs(rows.data) < ZERO_ENTRY] = 0.0
        rows.eliminate_zeros()
        nonzero = np.diff(rows.indptr) > 0
        contradiction = bool(np.any(np.abs(rhs[~nonzero]) > ZERO_ENTRY))
        return rows[nonzero], rhs[nonzero], contradiction

    def objective_vector(self, objective):
        c = np.zeros(self.n_vars)
        for name, coefficient in objective.items():
            emb = self.embeddings[name]
            row = sp.csr_matrix(vec(np.asarray(coefficient).T).reshape(1, -1))
            re, _ = emb.real_rows(row)
            start = self.offsets[name]
            c[start:start + emb.size] = re.toarray().ravel()
        return c

    def block_slice(self, name):
        start = self.offsets[name]
        return slice(start, start + self.embeddings[name].size)

    def block_values(self, x):
        return {name: self.embeddings[name].matrix(x[self.block_slice(name)]) for name in self.embeddings}


def _embedded_psd(re, im):
    top = cp.hstack([re, -im])
    bottom = cp.hstack([im, re])
    y = cp.vstack([top, bottom])
    return (y + y.T) / 2 >> 0


class _Model:
    """cvxpy program for an assembly; the objective vector may be a Parameter."""

    def __init__(self, assembly, parametric=False):
        self.assembly = assembly
        self.x = cp.Variable(assembly.n_vars)
        constraints = []
        self.equality = None
        if assembly.rows.shape[0]:
            self.equality = cp.Constant(assembly.rows) @ self.x == assembly.rhs
            constraints.append(self.equality)
        for name, emb in assembly.embeddings.items():
            params = self.x[assembly.block_slice(name)]
            side = emb.side
            re = cp.reshape(cp.Constant(emb.ua) @ params[:emb.na], (side, side), order='F')
            im = (cp.reshape(cp.Constant(emb.ub) @ params[emb.na:], (side, side), order='F')
                  if emb.nb else np.zeros((side, side)))
            constraints.append(_embedded_psd(re, im))
        for image, g_re, g_im in assembly.images:
            re = cp.reshape(cp.Constant(g_re) @ self.x, (image.side, image.side), order='F')
            im = cp.reshape(cp.Constant(g_im) @ self.x, (image.side, image.side), order='F')
            constraints.append(_embedded_psd(re, im))
        self.constraints = constraints
        self.cost = cp.Parameter(assembly.n_vars) if parametric else None
        self._programs = {}

    def program(self, sense, c=None):
        if self.cost is not None and sense in self._programs:
            return self._programs[sense]
        expression = self.cost @ self.x if self.cost is not None else cp.Constant(c) @ self.x
        objective = cp.Maximize(expression) if sense == 'max' else cp.Minimize(expression)
        program = cp.Problem(objective, self.constraints)
        if self.cost is not None:
            self._programs[sense] = program
        return program


_STATUS = {
    cp.OPTIMAL: Status.OPTIMAL,
    cp.OPTIMAL_INACCURATE: Status.NUMERICAL_TROUBLE,
    cp.INFEASIBLE: Status.INFEASIBLE,
    cp.INFEASIBLE_INACCURATE: Status.INFEASIBLE,
    cp.UNBOUNDED: Status.UNBOUNDED,
    cp.UNBOUNDED_INACCURATE: Status.UNBOUNDED,
}


class SolverClient:
    """Solves ConicProblems with Clarabel or SCS through cvxpy."""

    def __init__(self, settings=None, dump_dir=None):
        self.settings = settings or get_settings()
        self.tolerances = Tolerances.from_settings(self.settings)
        self.dump_dir = dump_dir
        self._dumped = 0

    def backend_for(self, problem):
        """Configured solver, or SCS when Clarabel's dense cone blocks would not fit in memory."""
        if self.settings.solver == 'CLARABEL':
            needed = clarabel_cone_bytes(problem)
            if needed > self.settings.clarabel_max_bytes:
                logger.warning("%s: Clarabel would need about %.1f GiB for its cone blocks, using SCS",
                               problem.name, needed / 2 ** 30)
                return 'SCS'
        return self.settings.solver

    @staticmethod
    def _solver_options(tol, backend):
        if backend == 'SCS':
            return {'solver': cp.SCS, 'eps_abs': tol.feas, 'eps_rel': tol.gap, 'max_iters': 200000}
        return {'solver': cp.CLARABEL, 'tol_feas': tol.feas, 'tol_gap_abs': tol.gap, 'tol_gap_rel': tol.gap}

    def solve(self, problem, tol=None):
        """Solve a problem; failures come back as a status, never as a silent value."""
        tol = tol or self.tolerances
        if self.dump_dir:
            self._dump(problem)
        assembly = _Assembly(problem)
        logger.debug("Solving %s: %d blocks (largest side %d), %d real equalities, %d variables",
                     problem.name, len(problem.blocks), problem.largest_side, assembly.rows.shape[0], assembly.n_vars)
        model = _Model(assembly)
        return self._run(model, model.program(problem.sense, assembly.objective_vector(problem.objective)),
                         problem, tol, self.backend_for(problem))

    def check_feasibility(self, problem, tol=None):
        """Solve with a zero objective; the status tells feasible from infeasible."""
        return self.solve(problem.with_objective({}, 'max'), tol)

    def parametric(self, problem, tol=None):
        """Reusable solve of problem's constraints with a changing objective."""
        return ParametricSolve(self, problem, tol or self.tolerances)

    def _run(self, model, program, problem, tol, backend, sense=None):
        assembly = model.assembly
        if assembly.contradiction:
            logger.info("%s: contradictory constant equality, infeasible", problem.name)
            return Solution(Status.INFEASIBLE, solver='presolve')
        options = self._solver_options(tol, backend)
        start = time.perf_counter()
        try:
            program.solve(**options)
        except cp.error.SolverError as exc:
            logger.error("%s: solver error: %s", problem.name, exc)
            return Solution(Status.NUMERICAL_TROUBLE, solver=backend,
                            solve_time=time.perf_counter() - start)
        elapsed = time.perf_counter() - start
        status = _STATUS.get(program.status, Status.NUMERICAL_TROUBLE)
        solution = Solution(status, solver=backend, solve_time=elapsed)
        if model.x.value is None or status in (Status.INFEASIBLE, Status.UNBOUNDED):
            logger.info("%s: %s", problem.name, status.value)
            return solution

        x = np.asarray(model.x.value)
        primal = float(program.value)
        solution.primal_value = primal
        solution.dual_value = self._dual_value(model, sense or problem.sense)
        solution.block_values = assembly.block_values(x)
        solution.residual = self._residual(assembly, x)
        if status == Status.OPTIMAL:
            scale = 1.0 + abs(primal)
            if solution.residual > 1e3 * tol.feas * (1.0 + np.max(np.abs(assembly.rhs), initial=0.0)):
                logger.warning("%s: equality residual %.3g above tolerance", problem.name, solution.residual)
                solution.status = Status.NUMERICAL_TROUBLE
            elif np.isfinite(solution.dual_value) and abs(primal - solution.dual_value) > 1e3 * tol.gap * scale:
                logger.warning("%s: duality gap %.3g above tolerance", problem.name, abs(primal - solution.dual_value))
                solution.status = Status.NUMERICAL_TROUBLE
        logger.info("%s: %s, value %.10f (%.2fs)", problem.name, solution.status.value, primal, elapsed)
        return solution

    @staticmethod
    def _dual_value(model, sense):
        """Dual objective from the equality multipliers y; NaN when there are none.

        cvxpy attaches y with Lagrangian f + y·(Ax - b) to the minimization it
        solves, and a maximization is solved as min -f with y unchanged, so the
        dual objective is b·y for 'max' and -b·y for 'min'. Block and image
        cones carry no constant term and add nothing.
        """
        if model.equality is None or model.equality.dual_value is None:
            return float('nan')
        value = float(np.dot(model.assembly.rhs, np.asarray(model.equality.dual_value).reshape(-1)))
        return value if sense == 'max' else -value

    @staticmethod
    def _residual(assembly, x):
        if not assembly.rows.shape[0]:
            return 0.0
        return float(np.max(np.abs(assembly.rows @ x - assembly.rhs)))

    def _dump(self, problem):
        os.makedirs(self.dump_dir, exist_ok=True)
        self._dumped += 1
        path = os.path.join(self.dump_dir, f"{problem.name}-{self._dumped:04d}.dat-s")
        write_sdpa(problem, path)
        logger.info("Wrote %s", path)


class ParametricSolve:
    """Fixed constraints, objective coefficient supplied per call."""

    def __init__(self, client, problem, tol):
        self.client = client
        self.problem = problem
        self.tol = tol
        self.model = _Model(_Assembly(problem), parametric=True)
        self.backend = client.backend_for(problem)

    def solve(self, objective, sense=None):
        sense = sense or self.problem.sense
        self.model.cost.value = self.model.assembly.objective_vector(objective)
        program = self.model.program(sense)
        return self.client._run(self.model, program, self.problem, self.tol, self.backend, sense)


def _sdpa_entries(matno, blkno, emb, cols, values):
    """Upper-triangle SDPA entries for a real row over one block's parameters."""
    n = emb.side
    ai, aj = emb.a_index
    bi, bj = emb.b_index
    for t, c in zip(cols, values):
        if t < emb.na:
            i, j = ai[t], aj[t]
            w = c / 2 if i == j else c / 4
            yield matno, blkno, i + 1, j + 1, w
            yield matno, blkno, n + i + 1, n + j + 1, w
        else:
            i, j = bi[t - emb.na], bj[t - emb.na]
            yield matno, blkno, j + 1, n + i + 1, c / 4
            yield matno, blkno, i + 1, n + j + 1, -c / 4


def write_sdpa(problem, path):
    """Dump the real-embedded problem in SDPA sparse format.

    The problem maps onto SDPA's dual form: maximize Tr(F0 Y) subject to
    Tr(Fi Y) = ci, Y PSD, where Y stacks the embedded blocks and one
    embedded slack block per PSD image.
    """
    assembly = _Assembly(problem)
    names = [b.name for b in problem.blocks]
    starts = np.array([assembly.offsets[name] for name in names])
    sign = 1.0 if problem.sense == 'max' else -1.0
    block_sides = [b.side for b in problem.blocks] + [im.side for im, _, _ in assembly.images]
    constants = list(assembly.rhs)
    lines = []

    def emit_row(matno, row):
        row = sp.csr_matrix(row)
        cols, values = row.indices, row.data
        owner = np.searchsorted(starts, cols, side='right') - 1
        for k in np.unique(owner):
            mask = owner == k
            emb = assembly.embeddings[names[k]]
            lines.extend(_sdpa_entries(matno, k + 1, emb, cols[mask] - starts[k], values[mask]))

    emit_row(0, sign * assembly.objective_vector(problem.objective).reshape(1, -1))
    for r in range(assembly.rows.shape[0]):
        emit_row(r + 1, assembly.rows[r])
    matno = assembly.rows.shape[0]
    for k, (image, g_re, g_im) in enumerate(assembly.images):
        emb = _BlockEmbedding(image.side)
        blkno = len(problem.blocks) + k + 1
        h = image.side
        for g, (ii, jj), base in ((g_re, emb.a_index, 0), (g_im, emb.b_index, emb.na)):
            for t, (i, j) in enumerate(zip(ii, jj)):
                matno += 1
                lines.extend(_sdpa_entries(matno, blkno, emb, [base + t], [1.0]))
                emit_row(matno, -g[i + h * j])
                constants.append(0.0)

    with open(path, 'w') as f:
        f.write(f'"{problem.name}: real embedding, sense {problem.sense}"\n')
        f.write(f"{len(constants)}\n{len(block_sides)}\n")
        f.write(' '.join(str(2 * s) for s in block_sides) + '\n')
        f.write(' '.join(f"{c:.17g}" for c in constants) + '\n')
        for matno, blkno, i, j, value in lines:
            if abs(value) > ZERO_ENTRY:
                f.write(f"{matno} {blkno} {i} {j} {value:.17g}\n")
