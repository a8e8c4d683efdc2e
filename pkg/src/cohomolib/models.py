from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, field_validator


class AlphaKind(str, Enum):
    """How a rotation number was supplied"""
    RATIONAL = "rational"
    QUOTIENTS = "quotients"
    REAL = "real"


class FamilyKind(str, Enum):
    """Supported circle map families"""
    ROTATION = "rotation"
    ARNOLD = "arnold"
    CUSTOM_SPECTRAL = "custom-spectral"


class LevelPolicy(str, Enum):
    """Which renormalization levels the coboundary pipeline visits"""
    LIOUVILLE = "liouville"
    EXPLICIT = "explicit"
    SWEEP = "sweep"


class NumericsConfig(BaseModel):
    """Numeric knobs shared by every component"""
    model_config = ConfigDict(extra="forbid")

    grid_size: int = 4096
    max_grid: int = 65536
    bits: int = 256
    budget_qn: int = 1_000_000
    newton_tol: float = 1e-13
    diffeo_tol: float = 1e-8
    overlap_tol: float = 1e-10
    rotation_tol: float = 1e-10
    max_iter: int = 200_000
    tune_candidates: int = 32
    n_min: int = 3
    interval_samples: int = 257
    vanish_tol: float = 1e-7
    leakage_tol: float = 1e-10
    pairing_tol: float = 1e-7
    flatness_tol: float = 1e-7
    line_domains: int = 2
    resample: bool = False
    threads: int = 1

    @field_validator("grid_size")
    @classmethod
    def _power_of_two(cls, value: int) -> int:
        if value < 8 or value & (value - 1):
            raise ValueError(f"grid_size must be a power of two >= 8, got {value}")
        return value

    @field_validator("threads")
    @classmethod
    def _positive_threads(cls, value: int) -> int:
        return max(1, value)


class LiouvilleLevels(BaseModel):
    """Levels m with beta_m < beta_{m-1}^tau, plus a finite-depth density statistic"""
    tau: float
    depth: int
    levels: List[int] = Field(default_factory=list)
    density: float = 0.0
    note: str = "finite-depth density only, not a Liouville verdict"

    def __contains__(self, m: object) -> bool:
        return m in self.levels

    def __len__(self) -> int:
        return len(self.levels)


class DiophantineLevel(BaseModel):
    n: int
    beta_n: float
    beta_next: float
    passed: bool


class DiophantineReport(BaseModel):
    C: float
    tau: float
    levels: List[DiophantineLevel] = Field(default_factory=list)
    all_pass: bool = True
    note: str = "finite-depth evidence only"


class PartitionReport(BaseModel):
    """Disjointness of the dynamical partition at one level"""
    level: int
    intervals: int
    worst_overlap: float
    disjoint: bool
    j_decomposition_defect: float
    k_decomposition_defect: float


class DistortionReport(BaseModel):
    """Bounded-distortion diagnostics for f_n"""
    level: int
    var_log_df: float
    log_dfn_sup: float
    ratio_min: float
    ratio_max: float
    ratio_bound: float
    m_ratio: float
    alpha_n: float


class RotationEstimate(BaseModel):
    """Closest-return records of the orbit of 0"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    alpha: float
    records: List[Tuple[int, int]] = Field(default_factory=list)
    beta_estimate: float = 1.0
    converged: bool = True
    cf: Any = Field(default=None, exclude=True)


class BirkhoffRecord(BaseModel):
    """Birkhoff sum S^k phi at one level"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    n: int
    k: int
    values: Any = Field(default=None, exclude=True)
    mean_estimate: float
    sup_deviation: float


class DenjoyKoksmaReport(BaseModel):
    n: int
    q_n: int
    sup_dev: float
    var_bound: float
    slack: float
    mu: float
    mu_error: float
    interval_dev: float
    passed: bool


class SmallDivisorReport(BaseModel):
    """Per-mode table of the rotation solver"""
    modes: List[int] = Field(default_factory=list)
    psi_abs: List[float] = Field(default_factory=list)
    divisor_abs: List[float] = Field(default_factory=list)
    u_abs: List[float] = Field(default_factory=list)
    truncation: int = 0
    removed_mean: float = 0.0
    residual: float = 0.0
    growth: bool = False

    def rows(self) -> List[Dict[str, Any]]:
        """Rows for CSV output"""
        return [
            {"k": k, "psi_abs": p, "divisor_abs": d, "u_abs": u}
            for k, p, d, u in zip(self.modes, self.psi_abs, self.divisor_abs, self.u_abs)
        ]


class SolutionBound(BaseModel):
    """A-priori sup bound for a rotation solver under a Diophantine condition"""
    C: float
    tau: float
    modes: int
    bound: float
    u_sup: float
    condition_holds: bool
    worst_mode: Optional[int] = None


class FixedPointScan(BaseModel):
    """Finite scan for fixed points of f^{m,n}, |m|, |n| <= check_range"""
    check_range: int
    min_gap: float
    worst_pair: Tuple[int, int]
    fixed_point_free: bool


class CoboundaryWitness(BaseModel):
    """Result of the flatness test on a fibered action"""
    passed: bool
    sup_10: float
    sup_01: float
    tol: float
    fixed_point_free: bool = True


class CertificateReport(BaseModel):
    """Three-clause coboundary certificate"""
    level: int
    orbit_avoidance: bool
    worst_avoidance_margin: float
    flatness: CoboundaryWitness
    a_z_sets: List[List[int]] = Field(default_factory=list)
    a_z_ok: bool
    line_residual: float
    passed: bool


class LevelRecord(BaseModel):
    """Per-level row of the coboundary pipeline"""
    n: int
    q_n: int
    x_star: float
    M_prev: float
    xi_ck: float
    u_ck_on_J: float
    phibar_n_on_I: float
    theta: float
    j_vanishing: float
    leakage: float
    pairing: float
    periodicity: float
    u_estimate_ratio: float
    xi_estimate_ratio: float
    final_estimate_ratio: float
    min_phibar_n: float
    certificate: Optional[CertificateReport] = None
    error: Optional[str] = None


class ConstructionReport(BaseModel):
    """Artifacts of the coboundary approximation pipeline"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    level: int
    x_star: float
    M_prev: float
    r: int
    k: int
    epsilon: float
    policy: LevelPolicy
    removed_mean: float
    mean_error: float
    achieved: bool
    norms: Dict[str, float] = Field(default_factory=dict)
    residuals: Dict[str, float] = Field(default_factory=dict)
    levels: List[LevelRecord] = Field(default_factory=list)
    certificate: Optional[CertificateReport] = None
    u: Any = Field(default=None, exclude=True)
    phibar: Any = Field(default=None, exclude=True)
    xi: Any = Field(default=None, exclude=True)
    phitilde: Any = Field(default=None, exclude=True)


class ExperimentConfig(BaseModel):
    """Everything needed to reproduce one CLI run"""
    model_config = ConfigDict(extra="forbid")

    command: str
    map: str = "rotation:rho=golden"
    phi: str = "cos"
    alpha: str = "golden"
    psi: str = "cos"
    depth: int = 20
    tau: float = 2.0
    C: float = 0.1
    level: int = 5
    levels: List[int] = Field(default_factory=list)
    n_max: int = 12
    modes: int = 16
    r: int = 11
    epsilon: float = 1e-3
    print_pr: Optional[int] = None
    policy: LevelPolicy = LevelPolicy.LIOUVILLE
    numerics: NumericsConfig = Field(default_factory=NumericsConfig)
    csv: Optional[str] = None
    json_path: Optional[str] = None
    seed: int = 0


class ConjugacyResult(BaseModel):
    """Linearizing conjugacy h with h o f - h = rho"""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    h: Any = Field(default=None, exclude=True)
    rho: float
    defect: float
    residual: float
    normalization: float
