"""
Pydantic models shared across modules: parameters, serialized sets and reports.
"""

from pathlib import Path
from typing import Literal, Optional

from pydantic import BaseModel, root_validator, validator

FunctionMode = Literal['strict', 'relaxed']
QSetMode = Literal['asymptotic', 'desk']
OutputFormat = Literal['csv', 'json']
MomentMethod = Literal['poisson', 'truncated']
Command = Literal['gaps', 'void', 'gauss-check', 'fresnel-check',
                  'prop3-check', 'jutila', 'moments', 'qset']

SCHEMA_VERSION = 'sqrt-gaps/1'

STRICT_ETA_MAX = 1 / 100
RELAXED_ETA_MAX = 1 / 2
STRICT_ETA_DEFAULT = 1 / 200
RELAXED_ETA_DEFAULT = 1 / 2

# Commands whose coupling tables are only affordable with wide ramps
RELAXED_COMMANDS = ('moments',)

N_MIN = 100
N_MAX = 10**8
K_MAX = 3


class TestFunctionParams(BaseModel):
    """Bump parameters as they appear in the run config."""
    __test__ = False

    eta: float = STRICT_ETA_DEFAULT
    s: float = 1.0
    phi_support: tuple[float, float] = (-1 / 100, 1 / 100)
    w_support: tuple[float, float] = (-1 / 2, 1 / 2)
    mode: FunctionMode = 'strict'

    @validator('s')
    def _positive_s(cls, v):
        if v <= 0:
            raise ValueError('s must be positive')
        return v

    @validator('phi_support')
    def _phi_inside(cls, v):
        lo, hi = v
        if not -1 / 100 <= lo < hi <= 1 / 100:
            raise ValueError('phi support must lie inside [-1/100, 1/100]')
        return v

    @validator('w_support')
    def _w_around_zero(cls, v):
        lo, hi = v
        if not -1 / 2 <= lo < 0 < hi <= 1 / 2:
            raise ValueError('w support must contain 0 and lie inside (-1/2, 1/2)')
        return v

    @root_validator(skip_on_failure=True)
    def _eta_range(cls, values):
        eta, mode = values['eta'], values['mode']
        if mode == 'strict' and not 0 < eta < STRICT_ETA_MAX:
            raise ValueError(f'eta must be in (0, {STRICT_ETA_MAX:g}) in strict mode')
        if mode == 'relaxed' and not 0 < eta <= RELAXED_ETA_MAX:
            raise ValueError(f'eta must be in (0, {RELAXED_ETA_MAX:g}] in relaxed mode')
        return values


class QSetModel(BaseModel):
    delta: float
    n: int
    mode: QSetMode
    prime_floor: int
    a_band: Optional[tuple[int, int]]
    members: list[tuple[int, int, int]]

    @property
    def Q(self) -> float:
        return self.delta * self.n ** 0.5

    @property
    def moduli(self) -> list[int]:
        return [q for q, _, _ in self.members]


class GapSummary(BaseModel):
    n: int
    mean: float
    min: float
    max: float
    sup_deviation: float


class DecayReport(BaseModel):
    order: int
    sup: float
    argsup: float
    points: int


class PhiStatsReport(BaseModel):
    epsilon: float
    window_sum: float
    scaled_sum: float
    window_deviation: float
    phi_total: float
    phi_predicted: float
    total_deviation: float
    members: int


class SmoothingReport(BaseModel):
    n: int
    s: float
    eta: float
    restricted: float
    smoothed: float
    inner: float
    outer: float
    difference: float
    bound: float

    @property
    def holds(self) -> bool:
        return self.difference <= self.bound and self.inner >= self.restricted >= self.outer


class JutilaReport(BaseModel):
    delta: float
    n: int
    members: int
    L: int
    lhs: float
    head: float
    tail: float
    bound: float

    @property
    def ratio(self) -> float:
        return self.lhs / self.bound


class MomentReport(BaseModel):
    k: int
    lhs: float
    rhs: float
    rel_error: float
    n: int
    delta: float
    u_cap: int
    t_cap: Optional[int]
    method: str
    xi_budget: int
    arcs: int


class RunConfig(BaseModel):
    command: Command
    n: int = 10**4
    delta: float = 2.0
    deltas: Optional[list[float]]
    s: float = 1.0
    eta: Optional[float]
    mode: Optional[FunctionMode]
    k: int = 2
    prime_floor: Optional[int]
    v_cap: Optional[int]
    u_cap: Optional[int]
    t_cap: int = 64
    theta: float = 0.0
    max_arcs: Optional[int]
    max_ell: Optional[int]
    bins: int = 200
    bin_max: float = 4.0
    budget: float = 1e-2
    tolerance: float = 0.1
    seed: int = 0
    threads: Optional[int]
    out_path: Optional[Path]
    format: OutputFormat = 'json'
    qset_mode: QSetMode = 'desk'
    method: MomentMethod = 'poisson'
    restricted: bool = False
    debug: bool = False

    @validator('n')
    def _n_range(cls, v):
        if not N_MIN <= v <= N_MAX:
            raise ValueError(f'N must be in [{N_MIN}, {N_MAX}]')
        return v

    @validator('k')
    def _k_range(cls, v):
        if not 1 <= v <= K_MAX:
            raise ValueError(f'k must be in [1, {K_MAX}]')
        return v

    @validator('delta', 's', 'budget', 'tolerance', 'bin_max')
    def _positive(cls, v):
        if v <= 0:
            raise ValueError('must be positive')
        return v

    @validator('bins')
    def _bins_range(cls, v):
        if v < 10:
            raise ValueError('bins must be at least 10')
        return v

    @validator('prime_floor')
    def _floor_range(cls, v):
        if v is not None and v < 3:
            raise ValueError('prime floor must be at least 3')
        return v

    @validator('v_cap', 'u_cap', 't_cap', 'max_arcs', 'threads')
    def _positive_int(cls, v):
        if v is not None and v < 1:
            raise ValueError('must be at least 1')
        return v

    @root_validator(skip_on_failure=True)
    def _eta_mode(cls, values):
        if values.get('mode') is None:
            values['mode'] = 'relaxed' if values['command'] in RELAXED_COMMANDS else 'strict'
        if values.get('eta') is None:
            values['eta'] = RELAXED_ETA_DEFAULT if values['mode'] == 'relaxed' else STRICT_ETA_DEFAULT
        TestFunctionParams(eta=values['eta'], s=values['s'], mode=values['mode'])
        if values.get('max_ell') is not None and values['max_ell'] < values['n']:
            raise ValueError('max_ell must be at least N')
        return values

    def function_params(self) -> TestFunctionParams:
        return TestFunctionParams(eta=self.eta, s=self.s, mode=self.mode)
