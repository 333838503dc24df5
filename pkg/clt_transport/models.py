"""
Report and configuration models.

Everything a computation hands back to the caller (distances, certificates,
band reports, sweep rows) is a pydantic model so it can be dumped to JSON
as-is. The distribution carriers themselves live in dist_core.
"""

from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator


class TransportResult(BaseModel):
    """Distance value plus the diagnostics of how it was obtained."""

    model_config = ConfigDict(frozen=True)

    value: float
    """Distance, in support units (Kolmogorov/Lévy: probability units)."""

    objective_at_value: Optional[float] = None
    """For W_psi: the coupling integral at the returned scale."""

    quadrature_error: float = 0.0
    """Estimated absolute error of the integrals behind `value`."""

    iterations: int = 0
    method: str = ""
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @field_validator("value")
    @classmethod
    def _nonnegative_value(cls, v: float) -> float:
        if not v >= 0.0:
            raise ValueError(f"distance must be nonnegative, got {v}")
        return v

    @field_validator("quadrature_error")
    @classmethod
    def _nonnegative_error(cls, v: float) -> float:
        if not v >= 0.0:
            raise ValueError(f"quadrature error must be nonnegative, got {v}")
        return v


class CumulantSeries(BaseModel):
    values: List[float]
    """gamma_1 ... gamma_M."""

    condition: List[float]
    """Per order: largest intermediate recursion term over |gamma_m|."""

    unreliable_orders: List[int] = Field(default_factory=list)


class OrderConstraint(BaseModel):
    order: int
    tau: float
    """Smallest tau satisfying the inequality at this order."""

    magnitude: float
    """|gamma_m| (cumulant classes) or |E xi^m| (moment classes)."""

    reliable: bool = True


ClassName = Literal["statulevicius", "bernstein1d", "sakhanenko", "a1_grid"]


class ClassCertificate(BaseModel):
    class_name: ClassName
    order_constraints: List[OrderConstraint] = Field(default_factory=list)
    tau_estimate: float
    max_order: int = 0
    binding_order: Optional[int] = None
    holds_at: Optional[float] = None
    holds: Optional[bool] = None
    max_ratio: Optional[float] = None
    grid: Dict[str, Any] = Field(default_factory=dict)
    diagnostics: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _estimate_matches_orders(self) -> "ClassCertificate":
        if self.tau_estimate < 0.0:
            raise ValueError("tau_estimate must be nonnegative")
        if self.order_constraints:
            top = max(c.tau for c in self.order_constraints)
            if abs(top - self.tau_estimate) > 1e-15 * max(1.0, top):
                raise ValueError("tau_estimate must equal the largest per-order tau")
        return self


class SakhanenkoCheck(BaseModel):
    tau: float
    holds: bool
    ratio: float
    """E|xi|^3 exp(|xi|/tau) / (tau E xi^2)."""

    lhs: float
    rhs: float


class TiltDiagnostics(BaseModel):
    tau: float
    h: float
    variance_ratio: float
    band_low: float
    band_high: float
    variance_in_band: bool
    theta_real: float
    """Theta of the real-argument cumulant expansion."""

    theta_imag: float
    """|theta| of the imaginary-argument cumulant expansion."""

    theta_real_ok: bool
    theta_imag_ok: bool
    notes: List[str] = Field(default_factory=list)


class TiltSolutionReport(BaseModel):
    x: float
    h: float
    tau: float
    sigma: float
    in_guaranteed_domain: bool
    h_tau: float
    h_tau_ok: bool
    scale_ratio: float
    """sigma |h| / (2.4 |x| / sigma); at most one inside the domain."""

    gaussian_theta: float
    """(sigma h - x/sigma) / (2.88 tau sigma^-1 (x/sigma)^2)."""

    exponent_theta: float
    """Theta of the exponential identity with constant 10.08."""


class BandReport(BaseModel):
    name: str
    x_grid: List[float] = Field(default_factory=list)
    lhs: List[float] = Field(default_factory=list)
    rhs: List[float] = Field(default_factory=list)
    labels: List[str] = Field(default_factory=list)
    minimal_constant: float = 0.0
    constant: float = 1.0
    holds: bool = True
    violations: int = 0
    empty: bool = False
    details: Dict[str, Any] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _constant_consistency(self) -> "BandReport":
        if self.minimal_constant < 0.0:
            raise ValueError("minimal_constant must be nonnegative")
        return self


class CouplingCell(BaseModel):
    atom: float
    mass: float
    u_low: float
    u_high: float
    eta_low: float
    eta_high: float
    clipped_low: bool
    clipped_high: bool
    max_displacement: float


class CouplingBands(BaseModel):
    tau: float
    sigma: float
    c7: Optional[float]
    c11: Dict[str, Optional[float]]
    inner: BandReport
    outer: Dict[str, BandReport]


FamilyName = Literal["binomial", "poisson", "rademacher_sum", "bounded_iid", "custom"]


class SweepConfig(BaseModel):
    """One parameter sweep over a named family."""

    name: str = "sweep"
    family: FamilyName
    parameters: List[float]
    """Grid of the family's main parameter (n, or lambda for poisson)."""

    p: float = 0.5
    """Success probability for the binomial family."""

    law_file: Optional[str] = None
    """Lattice file for bounded_iid (the summand) and custom (the law)."""

    normalize: bool = True
    distances: List[str] = Field(default_factory=lambda: ["rho", "levy", "w1", "wp", "wpsi"])
    orlicz_kind: Literal["exp", "abs", "pow"] = "exp"
    wp_order: float = Field(2.0, ge=1.0)
    cumulant_order: int = Field(8, ge=3)
    band_c10: List[float] = Field(default_factory=lambda: [0.1, 0.2, 0.5])
    mass_tolerance: float = Field(1e-12, ge=0.0)
    workers: int = Field(1, ge=1)
    output_dir: str = "reports"
    formats: List[Literal["csv", "json"]] = Field(default_factory=lambda: ["csv", "json"])
    checks: List[str] = Field(default_factory=list)
    """Acceptance checks evaluated on the rows (see sweeps.CHECKS)."""

    locked: Dict[str, float] = Field(default_factory=dict)
    """Regression-locked constants, keyed by check name."""

    @field_validator("parameters")
    @classmethod
    def _nonempty_grid(cls, v: List[float]) -> List[float]:
        if not v:
            raise ValueError("parameter grid must be nonempty")
        if any(not x > 0 for x in v):
            raise ValueError("family parameters must be positive")
        return v

    @field_validator("distances")
    @classmethod
    def _known_distances(cls, v: List[str]) -> List[str]:
        known = {"rho", "levy", "w1", "wp", "wpsi"}
        unknown = set(v) - known
        if unknown:
            raise ValueError(f"unknown distances: {sorted(unknown)}")
        return v


class SweepRow(BaseModel):
    family: str
    parameter: float
    n: Optional[int] = None
    sigma: Optional[float] = None
    tau: Optional[float] = None
    """The tau used in the ratio columns (see the per-family convention)."""

    tau_as: Optional[float] = None
    tau_stat: Optional[float] = None
    tau_bern: Optional[float] = None
    rho: Optional[float] = None
    levy: Optional[float] = None
    w1: Optional[float] = None
    w1_quantile: Optional[float] = None
    wp: Optional[float] = None
    wpsi: Optional[float] = None
    w1_over_tau: Optional[float] = None
    wpsi_over_tau: Optional[float] = None
    rho_sigma_over_tau: Optional[float] = None
    wpsi_sqrt_n: Optional[float] = None
    levy_kolmogorov_ratio: Optional[float] = None
    smoothing_bound: Optional[float] = None
    tail_multiplier: Optional[float] = None
    c7: Optional[float] = None
    c11: Optional[float] = None
    runtime_seconds: Optional[float] = None
    error: Optional[str] = None


class CheckResult(BaseModel):
    name: str
    passed: bool
    observed: Optional[float] = None
    limit: Optional[float] = None
    locked: bool = False
    message: str = ""


class SweepSummary(BaseModel):
    name: str
    family: str
    rows: int
    failed_rows: int
    column_max: Dict[str, float] = Field(default_factory=dict)
    column_min: Dict[str, float] = Field(default_factory=dict)
    checks: List[CheckResult] = Field(default_factory=list)
    passed: bool = True
