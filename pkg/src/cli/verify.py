"""Offline re-verification of a bound report without re-solving."""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path

from pydantic import ValidationError

from channels.ensemble import two_copy
from csep.problem import constraint_residuals, evaluate
from models.report import BoundReport, decode_matrix, digest
from qops.operators import LabeledOperator
from scenarios.compile import compile_scenario
from testers.tester import Tester, TesterKind, success_probability, validate
from utils.config import get_settings, set_settings
from utils.errors import BadReport, DimMismatch

logger = logging.getLogger(__name__)

VERIFY_TOL = 1e-6


@dataclass(eq=False)
class VerifyResult:
    checks: dict = field(default_factory=dict)
    messages: list = field(default_factory=list)

    @property
    def passed(self):
        return not self.messages

    def check(self, name, value, tol):
        self.checks[name] = float(value)
        if not value <= tol:
            self.messages.append(f"{name}: {value:.3g} exceeds {tol:.1g}")


def load_report(path):
    path = Path(path)
    try:
        data = json.loads(path.read_text())
        return BoundReport.model_validate(data)
    except (OSError, json.JSONDecodeError, ValidationError) as exc:
        raise BadReport(f"{path}: corrupt report ({exc.__class__.__name__}: {exc})") from None


def _verify_product(report, result, tol):
    compiled = compile_scenario(report.config.scenario.scenario())
    factors = [decode_matrix(m) for m in report.factors.matrices]
    if [f.shape[0] for f in factors] != list(compiled.problem.dims):
        raise BadReport(f"Factor sides {[f.shape[0] for f in factors]} do not match {compiled.problem.dims}")
    residuals = constraint_residuals(compiled.problem, factors)
    for name in ('trace', 'constraint', 'hermitian', 'psd'):
        result.check(name, max(float(r[name]) for r in residuals), tol)
    if report.lower is not None and report.lower.value is not None:
        result.check('objective', abs(evaluate(compiled.problem, factors) - report.lower.value), tol)


def _verify_tester(report, result, tol):
    e = report.config.scenario.ensemble()
    kind = TesterKind(report.factors.tester_kind)
    if kind != TesterKind.SINGLE_COPY:
        e = two_copy(e)
    systems = tuple(s for ins, outs in e.slots for s in ins + outs)
    try:
        elements = tuple(LabeledOperator(systems, decode_matrix(m)) for m in report.factors.matrices)
    except DimMismatch as exc:
        raise BadReport(f"Tester elements do not fit the ensemble: {exc}") from None
    tester = Tester(elements, e.slots, kind)
    validation = validate(tester)
    result.check('tester_constraints', max(validation.residuals.values()), tol)
    result.check('psd', max(0.0, -validation.min_eigenvalue), tol)
    if report.exact is not None and report.exact.value is not None:
        result.check('objective', abs(success_probability(tester, e) - report.exact.value), tol)


def verify_report(report, tol=VERIFY_TOL):
    """Digest, feasibility residuals and objective of the stored factors."""
    result = VerifyResult()
    set_settings(report.config.settings(get_settings()))
    lower, upper = report.lower, report.upper
    if lower is not None and upper is not None and None not in (lower.value, upper.value):
        result.check('sandwich', max(0.0, lower.value - upper.value), tol)
    if report.factors is None:
        logger.info("Report carries no factors; only bound consistency checked")
        return result
    if digest(report.factors.matrices) != report.factors.digest:
        result.messages.append('digest: stored factors do not match their digest')
        return result
    if report.factors.kind == 'product':
        _verify_product(report, result, tol)
    else:
        _verify_tester(report, result, tol)
    return result


def verify(path, tol=VERIFY_TOL):
    report = load_report(path)
    result = verify_report(report, tol)
    for message in result.messages:
        logger.error("verify %s: %s", path, message)
    return result
