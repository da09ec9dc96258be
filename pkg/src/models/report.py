"""Run configuration and bound report schemas.

Matrices are stored row-major as lists of [re, im] pairs. Report values are
rounded to 1e-9 and matrix entries to 1e-12 so that repeated runs with the
same seed produce identical numeric fields.
"""
import hashlib
import json
from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from channels.ensemble import ensemble_from_chois
from channels.presets import parse_preset, preset
from qops.operators import LabeledOperator, SystemLabel
from scenarios.compile import Scenario, ScenarioKind

SCHEMA_VERSION = 1
VALUE_DIGITS = 9
ENTRY_DIGITS = 12

Matrix = List[List[Tuple[float, float]]]

METHODS = ('exact_sdp', 'hierarchy', 'seesaw', 'sandwich', 'oracle')


def round_value(v):
    if v is None or not np.isfinite(v):
        return None
    return round(float(v), VALUE_DIGITS) + 0.0


def encode_matrix(m):
    m = np.asarray(m, dtype=complex)
    return [[(round(float(z.real), ENTRY_DIGITS) + 0.0, round(float(z.imag), ENTRY_DIGITS) + 0.0) for z in row]
            for row in m]


def decode_matrix(rows):
    return np.array([[complex(re, im) for re, im in row] for row in rows], dtype=complex)


def digest(matrices):
    """SHA-256 over the canonical JSON of encoded matrices."""
    payload = json.dumps(matrices, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


class ScenarioConfig(BaseModel):
    """A preset name or explicit Choi matrices, plus the memory resources."""
    model_config = ConfigDict(extra='forbid')

    kind: ScenarioKind = ScenarioKind.MEMORYLESS
    preset: Optional[str] = None
    chois: Optional[List[Matrix]] = None
    weights: Optional[List[float]] = None
    input_dim: Optional[int] = Field(default=None, ge=1)
    output_dim: Optional[int] = Field(default=None, ge=1)
    d_E: int = Field(default=1, ge=1)
    d_E1: int = Field(default=1, ge=1)
    d_E2: int = Field(default=1, ge=1)
    L: Optional[int] = Field(default=None, ge=1)

    @field_validator('preset')
    @classmethod
    def known_preset(cls, v):
        if v is not None:
            parse_preset(v)
        return v

    @model_validator(mode='after')
    def one_source(self):
        if (self.preset is None) == (self.chois is None):
            raise ValueError("give exactly one of 'preset' or 'chois'")
        if self.chois is not None and (self.input_dim is None or self.output_dim is None):
            raise ValueError("explicit 'chois' need 'input_dim' and 'output_dim'")
        if self.weights is not None and self.chois is not None and len(self.weights) != len(self.chois):
            raise ValueError("'weights' and 'chois' differ in length")
        return self

    def ensemble(self):
        if self.preset is not None:
            return preset(self.preset)
        systems = (SystemLabel('I', self.input_dim), SystemLabel('O', self.output_dim))
        chois = [LabeledOperator(systems, decode_matrix(m)) for m in self.chois]
        return ensemble_from_chois(chois, self.weights)

    def scenario(self):
        return Scenario(self.kind, self.ensemble(), self.d_E, self.d_E1, self.d_E2, self.L)


class PolytopeConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    name: Literal['octahedron', 'cube', 'tetrahedron']
    party: int = Field(default=0, ge=0, le=1)


class RunConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    scenario: ScenarioConfig
    method: Literal['exact_sdp', 'hierarchy', 'seesaw', 'sandwich', 'oracle']
    k: int = Field(default=1, ge=1)
    ppt: bool = True
    bosonic: bool = True
    extend_party: Optional[int] = Field(default=None, ge=0, le=1)
    restarts: int = Field(default=20, ge=1)
    seed: Optional[int] = Field(default=None, ge=0)
    max_iters: int = Field(default=200, ge=1)
    conv_tol: float = Field(default=1e-9, gt=0)
    solver: Optional[Literal['CLARABEL', 'SCS']] = None
    feas_tol: Optional[float] = Field(default=None, gt=0)
    gap_tol: Optional[float] = Field(default=None, gt=0)
    size_cap: Optional[int] = Field(default=None, ge=1)
    polytope: Optional[PolytopeConfig] = None
    output: Optional[str] = None

    @model_validator(mode='after')
    def seed_for_seesaw(self):
        if self.method in ('seesaw', 'sandwich') and self.seed is None:
            raise ValueError(f"method {self.method!r} needs a 'seed'")
        if self.polytope is not None and self.method != 'sandwich':
            raise ValueError("'polytope' is only used by the sandwich method")
        return self

    def settings(self, base):
        return base.with_overrides(solver=self.solver, feas_tol=self.feas_tol, gap_tol=self.gap_tol,
                                   size_cap=self.size_cap)


class Bound(BaseModel):
    value: Optional[float] = None
    status: str
    certificate: dict = Field(default_factory=dict)


class FactorSet(BaseModel):
    """Product factors of the compiled problem ('product') or tester elements ('tester')."""
    kind: Literal['product', 'tester']
    tester_kind: Optional[str] = None
    matrices: List[Matrix]
    digest: str


class SeesawCertificateReport(BaseModel):
    r_V: float
    l_tau: float
    f_tau: float
    interval: Tuple[float, float]
    polytope: str
    party: int


class Failure(BaseModel):
    task: str
    error: str
    exit_code: int


class Timing(BaseModel):
    """Run-dependent measurements, kept apart from the reproducible results."""
    wall_time: float = 0.0


class BoundReport(BaseModel):
    schema_version: Literal[1] = SCHEMA_VERSION
    config: RunConfig
    lower: Optional[Bound] = None
    upper: Optional[Bound] = None
    exact: Optional[Bound] = None
    oracle: Optional[Bound] = None
    factors: Optional[FactorSet] = None
    seesaw_certificate: Optional[SeesawCertificateReport] = None
    failures: List[Failure] = Field(default_factory=list)
    versions: dict = Field(default_factory=dict)
    timing: Timing = Field(default_factory=Timing)

    @property
    def exit_code(self):
        return max((f.exit_code for f in self.failures), default=0)

    def results_json(self):
        """Everything but timing; identical across runs with the same config and seed."""
        return self.model_dump_json(exclude={'timing'})


def factor_set(kind, matrices, tester_kind=None):
    encoded = [encode_matrix(m) for m in matrices]
    return FactorSet(kind=kind, tester_kind=tester_kind, matrices=encoded, digest=digest(encoded))
