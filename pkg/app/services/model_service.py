import logging
from pathlib import Path
from typing import Callable, Dict, Mapping, Optional, Union
from urllib.parse import parse_qsl
import numpy as np
from app.core.config import settings
from app.models.schemas import ModelSpec, Term, SlabHamiltonian
from app.models.enums import Axis, TrigFunction
from app.repositories.zoo_repository import zoo_repository
from app.services.basis_service import basis_service
from app.utils.model_validator import ModelValidator
from app.utils.exceptions import (
    InvalidArgumentException, ModelNotFoundException, UnsupportedModelException
)

logger = logging.getLogger(__name__)

ZOO_PREFIX = "zoo:"

# Coefficient of e^{imθ} in each factor
_HOPS = {
    TrigFunction.COS: {1: 0.5, -1: 0.5},
    TrigFunction.SIN: {1: 1 / 2j, -1: -1 / 2j},
}


def _factor_values(fn: TrigFunction, theta: np.ndarray) -> np.ndarray:
    if fn == TrigFunction.SIN:
        return np.sin(theta)
    if fn == TrigFunction.COS:
        return np.cos(theta)
    return np.ones_like(theta)


class ModelService:
    """Bloch Hamiltonians from term lists, the zoo, and open-boundary slabs."""

    def __init__(self):
        self.repository = zoo_repository
        self.validator = ModelValidator()

    # Construction

    def zoo(
        self, name: str, params: Optional[Mapping[str, float]] = None, strict: bool = False
    ) -> ModelSpec:
        entry = self.repository.get(name)
        if entry is None:
            raise ModelNotFoundException(name)

        params = dict(params or {})
        unknown = sorted(set(params) - set(entry.defaults))
        if unknown:
            raise InvalidArgumentException([
                {"loc": ["params", key], "msg": f"{name} has no parameter {key}", "type": "unknown_parameter"}
                for key in unknown
            ])
        if strict:
            missing = sorted(set(entry.defaults) - set(params))
            if missing:
                raise InvalidArgumentException([
                    {"loc": ["params", key], "msg": f"parameter {key} is required", "type": "missing_parameter"}
                    for key in missing
                ])
        resolved = {**entry.defaults, **{k: float(v) for k, v in params.items()}}
        bad = [k for k, v in resolved.items() if not np.isfinite(v)]
        if bad:
            raise InvalidArgumentException([
                {"loc": ["params", key], "msg": "parameters must be finite", "type": "value_error"}
                for key in bad
            ])
        return ModelSpec(name=name, n=entry.n, terms=entry.builder(resolved), params=resolved)

    def from_matrix(self, H: np.ndarray, name: str = "constant") -> ModelSpec:
        """Momentum-independent model equal to H everywhere."""
        d = basis_service.decompose(H)
        terms = tuple(
            Term(mu=mu, coeff=value) for mu, value in enumerate(d.d) if abs(value) > 0
        )
        return ModelSpec(name=name, n=d.n, terms=terms)

    def load(self, reference: Union[str, Path]) -> ModelSpec:
        """Resolve ``zoo:NAME?param=value&...`` or a model JSON path."""
        reference = str(reference)
        if reference.startswith(ZOO_PREFIX):
            name, _, query = reference[len(ZOO_PREFIX):].partition("?")
            params = {}
            for key, value in parse_qsl(query, keep_blank_values=True):
                try:
                    params[key] = float(value)
                except ValueError:
                    raise InvalidArgumentException.single(
                        ["model", "params", key], f"{value!r} is not a number", "value_error"
                    )
            return self.zoo(name, params)
        logger.debug(f"Loading model file {reference}")
        return self.validator.validate_file(reference)

    # Evaluation

    def coefficients(self, model: ModelSpec, k: np.ndarray) -> np.ndarray:
        """d_μ(k) over a (..., 3) momentum array, shape (..., n²)."""
        k = np.asarray(k, dtype=float)
        d = np.zeros(k.shape[:-1] + (model.n ** 2,), dtype=np.complex128)
        for term in model.terms:
            value = np.full(k.shape[:-1], term.coeff, dtype=np.complex128)
            for factor in term.factors:
                if factor.axis is None:
                    continue
                value = value * _factor_values(factor.fn, k[..., factor.axis.index])
            d[..., term.mu] += value
        return d

    def eval_bloch(self, model: ModelSpec, k) -> np.ndarray:
        k = np.asarray(k, dtype=float)
        if k.shape[-1:] != (3,):
            raise InvalidArgumentException.single(
                ["k"], f"momentum must have 3 components, got shape {k.shape}", "dimension_mismatch"
            )
        return basis_service.reconstruct_array(self.coefficients(model, k), model.n)

    # Open boundaries

    def fourier_blocks(
        self, model: ModelSpec, open_axis: Union[Axis, str]
    ) -> Dict[int, Callable[[Mapping[str, float]], np.ndarray]]:
        open_axis = Axis(open_axis)
        split = []
        for index, term in enumerate(model.terms):
            along = [f for f in term.factors if f.axis == open_axis and f.fn != TrigFunction.CONST]
            across = tuple(f for f in term.factors if f.axis != open_axis)
            if len(along) > 1:
                raise UnsupportedModelException.single(
                    ["model", "terms", index],
                    f"term has {len(along)} factors along {open_axis.value}; only nearest-neighbour hops are supported",
                    "hopping_range",
                )
            hops = _HOPS[along[0].fn] if along else {0: 1.0}
            split.append((term, across, hops))

        basis = basis_service.stack(model.n)

        def block(m: int) -> Callable[[Mapping[str, float]], np.ndarray]:
            def evaluate(k_perp: Mapping[str, float]) -> np.ndarray:
                T = np.zeros((model.n, model.n), dtype=np.complex128)
                for term, across, hops in split:
                    if m not in hops:
                        continue
                    value = term.coeff * hops[m]
                    for factor in across:
                        if factor.axis is None:
                            continue
                        value *= complex(_factor_values(factor.fn, np.asarray(k_perp[factor.axis.value])))
                    T += value * basis[term.mu]
                return T
            return evaluate

        return {m: block(m) for m in (-1, 0, 1)}

    def obc_hamiltonian(
        self,
        model: ModelSpec,
        open_axis: Union[Axis, str],
        sites: int,
        k_perp: Mapping[str, float],
    ) -> SlabHamiltonian:
        open_axis = Axis(open_axis)
        if sites < 1:
            raise InvalidArgumentException.single(["sites"], "sites must be at least 1", "value_error")
        expected = {a.value for a in Axis} - {open_axis.value}
        if set(k_perp) != expected:
            raise InvalidArgumentException.single(
                ["k_perp"], f"k_perp must give exactly {sorted(expected)}", "value_error"
            )
        blocks = {m: T(k_perp) for m, T in self.fourier_blocks(model, open_axis).items()}
        n = model.n
        matrix = np.zeros((n * sites, n * sites), dtype=np.complex128)
        for j in range(sites):
            for m, T in blocks.items():
                if 0 <= j + m < sites:
                    matrix[j * n:(j + 1) * n, (j + m) * n:(j + m + 1) * n] = T
        return SlabHamiltonian(
            open_axis=open_axis, sites=sites,
            k_perp={key: float(v) for key, v in k_perp.items()}, matrix=matrix,
        )

    def edge_weight(self, state: np.ndarray, sites: int, width: Optional[int] = None) -> float:
        width = settings.EDGE_WIDTH if width is None else width
        state = np.asarray(state, dtype=np.complex128)
        if width < 1 or 2 * width >= sites:
            raise InvalidArgumentException.single(
                ["width"], f"boundary width must be in [1, {sites}/2), got {width}", "value_error"
            )
        if state.size % sites:
            raise InvalidArgumentException.single(
                ["state"], f"state length {state.size} is not a multiple of {sites} sites", "dimension_mismatch"
            )
        weights = np.sum(np.abs(state.reshape(sites, -1)) ** 2, axis=1)
        total = weights.sum()
        if total == 0:
            raise InvalidArgumentException.single(["state"], "state is zero", "value_error")
        return float((weights[:width].sum() + weights[-width:].sum()) / total)

    def slab_spectrum(
        self,
        model: ModelSpec,
        open_axis: Union[Axis, str],
        sites: int,
        k_perp: Mapping[str, float],
        width: Optional[int] = None,
    ):
        """Eigenvalues sorted by (re, im) with the edge weight of each eigenvector."""
        slab = self.obc_hamiltonian(model, open_axis, sites, k_perp)
        eigs, vecs = np.linalg.eig(slab.matrix)
        order = np.lexsort((eigs.imag, eigs.real))
        width = settings.EDGE_WIDTH if width is None else width
        if 2 * width >= sites:
            # every site lies within the boundary layer
            return eigs[order], np.ones(len(order))
        weights = np.array([self.edge_weight(vecs[:, i], sites, width) for i in order])
        return eigs[order], weights


# Singleton instance
model_service = ModelService()
