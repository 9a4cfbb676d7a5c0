import logging
import re
from itertools import product
from typing import Dict, List, Optional, Sequence, Tuple, Union
import numpy as np
from scipy.stats import qmc
from app.core.config import settings
from app.models.schemas import (
    ModelSpec, SymmetrySpec, ConstraintDescriptor, SymmetryCheckResult
)
from app.models.enums import SymmetryKind
from app.repositories.constraint_repository import constraint_repository
from app.services.basis_service import basis_service
from app.services.model_service import model_service
from app.services.spectral_service import spectral_service
from app.utils.exceptions import (
    InvalidArgumentException, UnsupportedCombinationException
)

logger = logging.getLogger(__name__)

# d_xR, d_1I, d_za, d12_R, ...
D_PART = re.compile(r"^d_?(\d+|[xyz])_?([RIsa])$")
DISCRIMINANT_PART = re.compile(r"^(eta|nu|kappa)_([RI])$")
PAULI_INDEX = {"x": 1, "y": 2, "z": 3}


def parse_d_part(name: str, n: int) -> Optional[Tuple[int, str]]:
    """(μ, part) for a d-component name, or None if the name is not one."""
    match = D_PART.match(name)
    if not match:
        return None
    label, part = match.groups()
    if label in PAULI_INDEX:
        if n != 2:
            return None
        mu = PAULI_INDEX[label]
    else:
        mu = int(label)
    if not 1 <= mu <= n ** 2 - 1:
        return None
    return mu, part


def _max_abs(M: np.ndarray) -> np.ndarray:
    return np.max(np.abs(M), axis=(-2, -1))


class SymmetryService:
    """Residual checks of the discrete symmetries and their constraint rows."""

    def __init__(self):
        self.repository = constraint_repository

    def default_spec(self, kind: Union[SymmetryKind, str], n: int) -> SymmetrySpec:
        kind = SymmetryKind(kind)
        generator = self.repository.generator(kind, n)
        if generator is None:
            raise UnsupportedCombinationException.single(
                ["symmetry"], f"no default generator for {kind.value} with {n} bands",
                "unsupported_combination",
            )
        return SymmetrySpec(kind=kind, generator=generator)

    def _residuals(self, model: ModelSpec, spec: SymmetrySpec, k: np.ndarray) -> np.ndarray:
        U = spec.generator
        if U.shape != (model.n, model.n):
            raise InvalidArgumentException.single(
                ["generator"], f"generator is {U.shape[0]}x{U.shape[1]}, model has {model.n} bands",
                "dimension_mismatch",
            )
        U_inv = U.conj().T
        H = model_service.eval_bloch(model, k)
        if spec.kind == SymmetryKind.PT:
            diff = H - U @ H.conj() @ U_inv
        elif spec.kind == SymmetryKind.CP:
            diff = H + U @ H.conj() @ U_inv
        elif spec.kind == SymmetryKind.PSH:
            diff = H - U @ np.swapaxes(H.conj(), -1, -2) @ U_inv
        else:
            H_minus = model_service.eval_bloch(model, -np.asarray(k, dtype=float))
            diff = H_minus - U @ np.swapaxes(H.conj(), -1, -2) @ U_inv
        return _max_abs(diff)

    def symmetry_residual(self, model: ModelSpec, spec: SymmetrySpec, k: Sequence[float]) -> float:
        return float(self._residuals(model, spec, np.asarray(k, dtype=float)))

    def sample_momenta(self, samples: int, seed: Optional[int] = None) -> np.ndarray:
        """Scrambled Halton points mapped to [-π, π)³."""
        seed = settings.HALTON_SEED if seed is None else seed
        sampler = qmc.Halton(d=3, scramble=True, seed=seed)
        return qmc.scale(sampler.random(samples), [-np.pi] * 3, [np.pi] * 3)

    def verify_symmetry(
        self,
        model: ModelSpec,
        spec: SymmetrySpec,
        samples: Optional[int] = None,
        tol: Optional[float] = None,
        seed: Optional[int] = None,
    ) -> SymmetryCheckResult:
        samples = settings.SYMMETRY_SAMPLES if samples is None else samples
        tol = settings.SYMMETRY_TOL if tol is None else tol
        if samples < 1:
            raise InvalidArgumentException.single(["samples"], "samples must be at least 1", "value_error")
        residuals = self._residuals(model, spec, self.sample_momenta(samples, seed))
        max_residual = float(residuals.max())
        logger.info(
            f"{spec.kind.value} check on {model.name}: max residual {max_residual:.3e} over {samples} samples"
        )
        return SymmetryCheckResult(passed=max_residual <= tol, max_residual=max_residual, samples=samples)

    def reduced_constraints(self, spec: Union[SymmetrySpec, SymmetryKind, str], n: int) -> ConstraintDescriptor:
        kind = spec.kind if isinstance(spec, SymmetrySpec) else SymmetryKind(spec)
        descriptor = self.repository.get(kind, n)
        if descriptor is None:
            raise UnsupportedCombinationException.single(
                ["symmetry"], f"{kind.value} with {n} bands is not tabulated", "unsupported_combination"
            )
        return descriptor

    def trim_points(self, dim: int) -> List[Tuple[float, ...]]:
        if dim not in (1, 2, 3):
            raise InvalidArgumentException.single(["dim"], "dimension must be 1, 2 or 3", "value_error")
        return [tuple(p) for p in product((0.0, float(np.pi)), repeat=dim)]

    def constraint_values(
        self, model: ModelSpec, descriptor: ConstraintDescriptor, k: Sequence[float]
    ) -> Dict[str, float]:
        """Evaluate each named part of a constraint row at k."""
        if descriptor.n != model.n:
            raise InvalidArgumentException.single(
                ["descriptor"], f"row is for {descriptor.n} bands, model has {model.n}", "dimension_mismatch"
            )
        k = np.asarray(k, dtype=float)
        H = model_service.eval_bloch(model, k)
        d = basis_service.decompose_array(H)
        d_minus = basis_service.decompose_array(model_service.eval_bloch(model, -k))
        discriminants = spectral_service.discriminant_constraints(H)

        values: Dict[str, float] = {}
        for name in descriptor.defective_constraints + descriptor.nondefective_constraints:
            if DISCRIMINANT_PART.match(name):
                values[name] = discriminants.part(name)
                continue
            mu, part = parse_d_part(name, model.n)
            if part == "R":
                values[name] = float(d[mu].real)
            elif part == "I":
                values[name] = float(d[mu].imag)
            elif part == "s":
                values[name] = float(abs(d[mu] + d_minus[mu]) / 2)
            else:
                values[name] = float(abs(d[mu] - d_minus[mu]) / 2)
        return values


# Singleton instance
symmetry_service = SymmetryService()
