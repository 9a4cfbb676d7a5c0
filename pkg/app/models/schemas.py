from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator
from typing import Callable, Optional, List, Dict, Tuple
from datetime import datetime, timezone
import numpy as np
from app.core.config import settings
from app.models.enums import (
    DegeneracyKind, SymmetryKind, TrigFunction, Axis, FermiLabel
)


class ArrayModel(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True, frozen=True)


# Generator basis
class GeneratorBasis(ArrayModel):
    n: int
    matrices: List[np.ndarray]


class CoefficientVector(BaseModel):
    model_config = ConfigDict(frozen=True)

    n: int
    d: List[complex]

    @model_validator(mode="after")
    def check_length(self):
        if len(self.d) != self.n ** 2:
            raise ValueError(f"expected {self.n ** 2} coefficients, got {len(self.d)}")
        return self

    def part(self, mu: int, which: str) -> float:
        value = self.d[mu]
        return value.real if which == "R" else value.imag


# Spectral core
class CharPolyCoeffs(BaseModel):
    n: int
    a: complex
    b: Optional[complex] = None
    c: Optional[complex] = None
    d: complex

    def evaluate(self, lam: complex) -> complex:
        """Characteristic polynomial with the λⁿ − aλⁿ⁻¹ + bλⁿ⁻² − cλ + d sign convention."""
        if self.n == 2:
            return lam ** 2 - self.a * lam + self.d
        if self.n == 3:
            return lam ** 3 - self.a * lam ** 2 + self.b * lam - self.d
        return lam ** 4 - self.a * lam ** 3 + self.b * lam ** 2 - self.c * lam + self.d


class DiscriminantSet(BaseModel):
    n: int
    eta: complex
    nu: Optional[complex] = None
    kappa: Optional[complex] = None

    def discriminant(self) -> complex:
        if self.n == 2:
            return self.eta
        if self.n == 3:
            return -(4 * self.eta ** 3 + self.nu ** 2) / 27
        return (4 * self.eta ** 3 - self.nu ** 2) / 27

    def part(self, name: str) -> float:
        """Real or imaginary part by name, e.g. `eta_R`, `nu_I`."""
        scalar, _, which = name.partition("_")
        value = getattr(self, scalar, None)
        if value is None or which not in ("R", "I"):
            raise KeyError(name)
        return value.real if which == "R" else value.imag


class SpectralData(BaseModel):
    eigenvalues: List[complex]
    right_eigvec_cond: float
    min_gap: float
    max_gap: float


class MultiplicityStructure(BaseModel):
    eigenvalue: complex
    algebraic: int
    geometric: int
    rank_sequence: List[int]

    @property
    def jordan_blocks(self) -> List[int]:
        """Block sizes from the rank sequence (Weyr characteristic)."""
        n_total = self.rank_sequence[0] + self.geometric
        ranks = [n_total] + list(self.rank_sequence)
        at_least = [ranks[j - 1] - ranks[j] for j in range(1, len(ranks))]
        at_least.append(0)
        blocks: List[int] = []
        for size in range(1, len(at_least)):
            count = at_least[size - 1] - at_least[size]
            blocks.extend([size] * count)
        return sorted(blocks, reverse=True)


class JordanDecomposition2x2(ArrayModel):
    S: np.ndarray
    J: np.ndarray
    cond_S: float


# Symmetry
class SymmetrySpec(ArrayModel):
    kind: SymmetryKind
    generator: np.ndarray

    @field_validator("generator")
    @classmethod
    def check_unitary(cls, value: np.ndarray) -> np.ndarray:
        value = np.asarray(value, dtype=complex)
        if value.ndim != 2 or value.shape[0] != value.shape[1]:
            raise ValueError("generator must be a square matrix")
        if not np.allclose(value @ value.conj().T, np.eye(value.shape[0]), atol=1e-12):
            raise ValueError("generator must be unitary")
        return value


class ConstraintDescriptor(BaseModel):
    kind: SymmetryKind
    n: int
    defective_constraints: List[str]
    nondefective_constraints: List[str]
    codimension_defective: int
    codimension_nondefective: int

    @model_validator(mode="after")
    def check_codimension(self):
        if self.codimension_defective != len(self.defective_constraints):
            raise ValueError("codimension_defective must match the constraint list")
        if self.codimension_nondefective != len(self.nondefective_constraints):
            raise ValueError("codimension_nondefective must match the constraint list")
        return self


class SymmetryCheckResult(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    passed: bool = Field(..., alias="pass")
    max_residual: float
    samples: int


# Models
class Factor(BaseModel):
    model_config = ConfigDict(frozen=True)

    fn: TrigFunction
    axis: Optional[Axis] = None


class Term(BaseModel):
    model_config = ConfigDict(frozen=True)

    mu: int = Field(..., ge=0)
    coeff: complex
    factors: Tuple[Factor, ...] = ()


class ModelSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    n: int
    terms: Tuple[Term, ...]
    params: Dict[str, float] = {}

    @model_validator(mode="after")
    def check_terms(self):
        if self.n not in (2, 3, 4):
            raise ValueError("band count must be 2, 3 or 4")
        for term in self.terms:
            if term.mu > self.n ** 2 - 1:
                raise ValueError(f"generator index {term.mu} out of range for n={self.n}")
        return self


class SlabHamiltonian(ArrayModel):
    open_axis: Axis
    sites: int
    k_perp: Dict[str, float]
    matrix: np.ndarray


# Finder
class ScanConfig(BaseModel):
    grid: int = Field(default_factory=lambda: settings.SCAN_GRID, ge=3)
    refine_tol: float = Field(default_factory=lambda: settings.REFINE_TOL, gt=0)
    cluster_radius: float = Field(default_factory=lambda: settings.CLUSTER_RADIUS, gt=0)
    sphere_radii: List[float] = Field(default_factory=lambda: list(settings.SPHERE_RADII))
    directions_per_sphere: int = Field(
        default_factory=lambda: settings.DIRECTIONS_PER_SPHERE, ge=8
    )
    defect_cond_threshold: float = Field(
        default_factory=lambda: settings.DEFECT_COND_THRESHOLD, gt=0
    )
    max_evaluations: int = Field(
        default_factory=lambda: settings.SIMPLEX_MAX_EVALUATIONS, ge=10
    )
    max_seeds: int = Field(default_factory=lambda: settings.MAX_SEEDS, ge=1)
    threads: int = Field(default=1, ge=1)

    @field_validator("sphere_radii")
    @classmethod
    def check_radii(cls, value: List[float]) -> List[float]:
        if not value:
            raise ValueError("at least one sphere radius is required")
        if any(r <= 0 for r in value):
            raise ValueError("sphere radii must be positive")
        if any(b >= a for a, b in zip(value, value[1:])):
            raise ValueError("sphere radii must be strictly decreasing")
        return value


class SphereProbe(BaseModel):
    radius: float
    defective_found: bool
    max_eigvec_cond: float
    cond_S: Optional[float] = None
    direction: Optional[List[float]] = None
    min_spread: float
    max_eigenprojector_norm: float


class DegeneracyDiagnostics(BaseModel):
    objective: float
    defect_at_point: float
    sphere_probes: List[SphereProbe] = []
    ambiguous: bool = False


class DegeneracyRecord(BaseModel):
    k_star: List[float]
    eigenvalue: complex
    order: int
    kind: DegeneracyKind
    jordan_structure: List[int]
    diagnostics: DegeneracyDiagnostics


class ScanResult(BaseModel):
    records: List[DegeneracyRecord]
    seeds: int
    dropped_seeds: int


class ParityReport(BaseModel):
    count: int
    even: bool
    partners: List[Tuple[int, int]] = []


class ZeroSetSample(ArrayModel):
    fields: List[str]
    points: np.ndarray


class FermiRegionMap(ArrayModel):
    points: np.ndarray
    labels: List[FermiLabel]


# Output
class RunManifest(BaseModel):
    command: str
    model: str
    params: Dict[str, float] = {}
    config: Dict[str, object] = {}
    tool_version: str = settings.APP_VERSION
    wall_time_seconds: float = 0.0
    record_counts: Dict[str, int] = {}
    created_at: datetime = Field(default_factory=lambda: datetime.now(timezone.utc))


class ZooEntry(BaseModel):
    model_config = ConfigDict(frozen=True)

    name: str
    n: int
    builder: Callable[[Dict[str, float]], Tuple[Term, ...]]
    defaults: Dict[str, float] = {}
    symmetry: Optional[SymmetryKind] = None
    published: bool = True
    description: str = ""
