"""Batch runs: parse a run configuration, compute the requested bounds, write a report."""
import json
import logging
import platform
import time
from importlib.metadata import PackageNotFoundError, version
from pathlib import Path

from pydantic import ValidationError

from api.solver_client import SolverClient, Status
from channels.ensemble import two_copy
from channels.presets import parse_preset, preset_unitaries
from csep.hierarchy import upper_bound
from csep.polytope import bloch_cube, bloch_tetrahedron, certify, pauli_octahedron
from csep.seesaw import seesaw
from models.report import Bound, BoundReport, Failure, RunConfig, SeesawCertificateReport, factor_set, round_value
from scenarios.compile import ScenarioKind, compile_scenario
from scenarios.oracles import oracle_adaptive_no_cc_cap, oracle_clock_shift, oracle_group_uniform, oracle_werner_holevo
from testers.optimize import optimal_adaptive, optimal_parallel, optimal_single_copy
from utils.config import get_settings, set_settings
from utils.errors import ConfigError, CsepError, NotAGroup, NotIrreducible, SizeOverflow, SolverFailure

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILED = 1
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_SIZE = 4

CONSISTENCY_TOL = 1e-6

POLYTOPES = {
    'octahedron': pauli_octahedron,
    'cube': bloch_cube,
    'tetrahedron': bloch_tetrahedron,
}


def exit_code_for(exc):
    if isinstance(exc, SizeOverflow):
        return EXIT_SIZE
    if isinstance(exc, ValueError):
        return EXIT_CONFIG
    return EXIT_SOLVER


def _validation_message(exc):
    parts = []
    for error in exc.errors():
        location = '.'.join(str(p) for p in error['loc']) or '<root>'
        parts.append(f"{location}: {error['msg']}")
    return '; '.join(parts)


def load_config(path):
    """Parse a JSON run configuration; errors name the line/column or the field path."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"Cannot read {path}: {exc.strerror}") from None
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(f"{path}: {_validation_message(exc)}") from None


def package_versions():
    versions = {'python': platform.python_version()}
    for name in ('numpy', 'scipy', 'cvxpy', 'pydantic'):
        try:
            versions[name] = version(name)
        except PackageNotFoundError:
            versions[name] = 'unknown'
    return versions


def _exact_solver(kind, s):
    """The unrestricted-memory SDP matching the scenario, or ConfigError when memory is restricted."""
    e = s.ensemble
    d_in, d_out = e.input_dim, e.output_dim
    if kind in (ScenarioKind.MEMORYLESS, ScenarioKind.MEMORY) and s.d_E >= d_in:
        return lambda client: optimal_single_copy(e, client)
    if kind == ScenarioKind.PARALLEL and s.d_E >= d_in ** 2:
        return lambda client: optimal_parallel(two_copy(e), client)
    if kind == ScenarioKind.ADAPTIVE and s.d_E1 >= d_in and s.d_E2 >= d_in * d_out * d_in:
        return lambda client: optimal_adaptive(two_copy(e), client)
    raise ConfigError(f"exact_sdp needs unrestricted memory; {kind.value} with the given memory is not covered")


class Runner:
    """Computes the bounds one configuration asks for; failed subtasks are recorded, not raised."""

    def __init__(self, config, settings=None, workers=None, dump_dir=None, seed=None):
        self.config = config
        self.settings = config.settings(settings or get_settings())
        if workers is not None:
            self.settings = self.settings.with_overrides(workers=workers)
        self.seed = config.seed if seed is None else seed
        self.client = SolverClient(self.settings, dump_dir=dump_dir)
        self.report = BoundReport(config=config if seed is None else config.model_copy(update={'seed': seed}))
        self._compiled = None

    @property
    def scenario(self):
        return self.config.scenario.scenario()

    @property
    def compiled(self):
        if self._compiled is None:
            self._compiled = compile_scenario(self.scenario)
        return self._compiled

    def _subtask(self, name, fn):
        try:
            fn()
        except CsepError as exc:
            code = exit_code_for(exc)
            logger.error("%s failed: %s", name, exc)
            self.report.failures.append(Failure(task=name, error=str(exc), exit_code=code))

    def run(self):
        start = time.perf_counter()
        set_settings(self.settings)
        method = self.config.method
        logger.info("Running %s on %s", method, self.config.scenario.preset or 'explicit ensemble')
        if method == 'exact_sdp':
            self._subtask('exact_sdp', self._exact)
        elif method == 'hierarchy':
            self._subtask('hierarchy', self._hierarchy)
        elif method == 'seesaw':
            self._subtask('seesaw', self._seesaw)
        elif method == 'sandwich':
            self._subtask('seesaw', self._seesaw)
            self._subtask('hierarchy', self._hierarchy)
            if self.config.polytope is not None:
                self._subtask('polytope', self._polytope)
            self._check_sandwich()
        else:
            self._subtask('oracle', self._oracle)
        self.report.timing.wall_time = round(time.perf_counter() - start, 3)
        self.report.versions = package_versions()
        return self.report

    def _exact(self):
        s = self.scenario
        value, tester = _exact_solver(s.kind, s)(self.client)
        self.report.exact = Bound(value=round_value(value), status=Status.OPTIMAL.value,
                                  certificate={'solver': self.settings.solver})
        self.report.factors = factor_set('tester', [t.matrix for t in tester.elements], tester.kind.value)

    def _hierarchy(self):
        c = self.config
        result = upper_bound(self.compiled.problem, c.k, c.ppt, c.extend_party, c.bosonic, self.client,
                             self.settings.size_cap)
        certificate = {'k': c.k, 'ppt': c.ppt, 'bosonic': c.bosonic, 'extend_party': result.extend_party}
        self.report.upper = Bound(value=round_value(result.value), status=result.status.value, certificate=certificate)
        if not result.ok:
            raise SolverFailure(result.status, f"hierarchy k={c.k}")

    def _seesaw(self):
        c = self.config
        result = seesaw(self.compiled.problem, c.restarts, self.seed, c.max_iters, c.conv_tol,
                        workers=self.settings.workers, settings=self.settings)
        certificate = {'restart': result.restart, 'restarts': c.restarts, 'failed_restarts': len(result.failures),
                       'seed': self.seed}
        self.report.lower = Bound(value=round_value(result.value), status=Status.OPTIMAL.value, certificate=certificate)
        self.report.factors = factor_set('product', result.factors)

    def _polytope(self):
        spec = self.config.polytope
        problem = self.compiled.problem
        if problem.parties[spec.party].dim != 2 or len(problem.parties) != 2:
            raise ConfigError("Polytope certificates need a two-party problem with a qubit party")
        cert = certify(problem, POLYTOPES[spec.name](), spec.party, self.client, self.settings.workers)
        self.report.seesaw_certificate = SeesawCertificateReport(
            r_V=round_value(cert.r_V), l_tau=round_value(cert.l_tau), f_tau=round_value(cert.f_tau),
            interval=(round_value(cert.interval[0]), round_value(cert.interval[1])), polytope=spec.name,
            party=spec.party)

    def _check_sandwich(self):
        lower, upper = self.report.lower, self.report.upper
        if lower is None or upper is None or lower.value is None or upper.value is None:
            return
        if lower.value > upper.value + CONSISTENCY_TOL:
            message = f"lower bound {lower.value} exceeds upper bound {upper.value}"
            logger.error(message)
            self.report.failures.append(Failure(task='consistency', error=message, exit_code=EXIT_SOLVER))

    def _oracle(self):
        s = self.scenario
        if self.config.scenario.preset is None:
            raise ConfigError("The oracle method needs a preset ensemble")
        family, d = parse_preset(self.config.scenario.preset)
        if s.kind == ScenarioKind.ADAPTIVE:
            value = oracle_adaptive_no_cc_cap(s.ensemble.size, s.ensemble.output_dim, s.d_E2)
            self.report.oracle = Bound(value=round_value(value), status='closed-form',
                                       certificate={'formula': 'adaptive_no_cc_cap', 'upper_only': True})
            return
        if s.kind not in (ScenarioKind.MEMORYLESS, ScenarioKind.MEMORY):
            raise ConfigError(f"No closed form for {s.kind.value} scenarios")
        if family == 'werner_holevo':
            value, formula = oracle_werner_holevo(d, s.d_E), 'werner_holevo'
        elif family in ('clock_shift', 'pauli'):
            value, formula = oracle_clock_shift(d or 2, s.d_E), 'clock_shift'
        else:
            unitaries = preset_unitaries(self.config.scenario.preset)
            if unitaries is None:
                raise ConfigError(f"No closed form for preset {self.config.scenario.preset!r}")
            try:
                value, formula = oracle_group_uniform(unitaries, s.d_E), 'group_uniform'
            except (NotAGroup, NotIrreducible) as exc:
                raise ConfigError(f"No closed form for preset {self.config.scenario.preset!r}: {exc}") from None
        self.report.oracle = Bound(value=round_value(value), status='closed-form', certificate={'formula': formula})


def write_report(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.model_dump_json(indent=2) + '\n')
    logger.info("Report written to %s", path)


def run(config_path, out=None, workers=None, dump_dir=None, seed=None):
    """Load, run and write; returns (report, exit code)."""
    config = load_config(config_path)
    if dump_dir is not None:
        Path(dump_dir).mkdir(parents=True, exist_ok=True)
    report = Runner(config, workers=workers, dump_dir=dump_dir, seed=seed).run()
    target = out or config.output
    if target is not None:
        write_report(report, target)
    return report, report.exit_code
