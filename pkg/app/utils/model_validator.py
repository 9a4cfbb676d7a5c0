import json
from pathlib import Path
from typing import Any, List, Tuple, Union
import numpy as np
from app.models.schemas import ModelSpec, Term, Factor
from app.utils.exceptions import ModelValidationException

VALID_FUNCTIONS = ("sin", "cos")
VALID_AXES = ("x", "y", "z")


def _read_json(path: Union[str, Path]) -> Any:
    try:
        content = Path(path).read_text(encoding="utf-8")
    except OSError as e:
        raise ModelValidationException([{
            "loc": ["file"],
            "msg": f"Cannot read {path}: {e.strerror}",
            "type": "file_error",
        }])
    try:
        return json.loads(content)
    except json.JSONDecodeError as e:
        raise ModelValidationException([{
            "loc": ["file", "line", e.lineno],
            "msg": f"Invalid JSON: {e.msg}",
            "type": "json_error",
        }])


def _parse_complex(value: Any) -> complex:
    """A number or a ``[re, im]`` pair."""
    if isinstance(value, bool):
        raise ValueError("booleans are not numbers")
    if isinstance(value, (int, float)):
        result = complex(value)
    elif isinstance(value, (list, tuple)) and len(value) == 2 and all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in value
    ):
        result = complex(value[0], value[1])
    else:
        raise ValueError("expected a number or a [re, im] pair")
    if not np.isfinite(result.real) or not np.isfinite(result.imag):
        raise ValueError("coefficients must be finite")
    return result


class ModelValidator:
    """Model and generator file validator"""

    @staticmethod
    def validate_file(path: Union[str, Path]) -> ModelSpec:
        return ModelValidator.validate_payload(_read_json(path))

    @staticmethod
    def validate_payload(payload: Any) -> ModelSpec:
        errors: List[dict] = []

        if not isinstance(payload, dict):
            raise ModelValidationException([{
                "loc": ["model"],
                "msg": "Model file must contain a JSON object",
                "type": "type_error",
            }])

        name = payload.get("name")
        if not isinstance(name, str) or not name.strip():
            errors.append({
                "loc": ["model", "name"],
                "msg": "name is required and must be a non-empty string",
                "type": "value_error",
            })

        bands = payload.get("bands")
        if bands not in (2, 3, 4) or isinstance(bands, bool):
            errors.append({
                "loc": ["model", "bands"],
                "msg": "bands must be one of 2, 3, 4",
                "type": "value_error",
            })
            bands = None

        raw_terms = payload.get("terms")
        if not isinstance(raw_terms, list) or not raw_terms:
            errors.append({
                "loc": ["model", "terms"],
                "msg": "terms must be a non-empty list",
                "type": "value_error",
            })
            raise ModelValidationException(errors)

        terms = []
        for index, raw in enumerate(raw_terms):
            term, term_errors = ModelValidator._validate_term(raw, index, bands)
            if term_errors:
                errors.extend(term_errors)
            else:
                terms.append(term)

        if errors:
            raise ModelValidationException(errors)

        return ModelSpec(name=name.strip(), n=bands, terms=tuple(terms))

    @staticmethod
    def _validate_term(raw: Any, index: int, bands: Union[int, None]) -> Tuple[Union[Term, None], List[dict]]:
        errors: List[dict] = []
        loc = ["model", "terms", index]
        if not isinstance(raw, dict):
            return None, [{"loc": loc, "msg": "term must be an object", "type": "type_error"}]

        mu = raw.get("mu")
        if not isinstance(mu, int) or isinstance(mu, bool) or mu < 0:
            errors.append({
                "loc": loc + ["mu"],
                "msg": "mu must be a non-negative integer",
                "type": "value_error",
            })
        elif bands is not None and mu > bands ** 2 - 1:
            errors.append({
                "loc": loc + ["mu"],
                "msg": f"mu must be at most {bands ** 2 - 1} for {bands} bands",
                "type": "value_error",
            })

        coeff = None
        try:
            coeff = _parse_complex(raw.get("coeff"))
        except ValueError as e:
            errors.append({"loc": loc + ["coeff"], "msg": str(e), "type": "value_error"})

        factors = []
        raw_factors = raw.get("factors", [])
        if not isinstance(raw_factors, list):
            errors.append({
                "loc": loc + ["factors"],
                "msg": "factors must be a list",
                "type": "type_error",
            })
            raw_factors = []
        for f_index, factor in enumerate(raw_factors):
            f_loc = loc + ["factors", f_index]
            if not isinstance(factor, dict):
                errors.append({"loc": f_loc, "msg": "factor must be an object", "type": "type_error"})
                continue
            if factor.get("fn") not in VALID_FUNCTIONS:
                errors.append({
                    "loc": f_loc + ["fn"],
                    "msg": f"fn must be one of {', '.join(VALID_FUNCTIONS)}",
                    "type": "value_error",
                })
                continue
            if factor.get("axis") not in VALID_AXES:
                errors.append({
                    "loc": f_loc + ["axis"],
                    "msg": f"axis must be one of {', '.join(VALID_AXES)}",
                    "type": "value_error",
                })
                continue
            factors.append(Factor(fn=factor["fn"], axis=factor["axis"]))

        if errors:
            return None, errors
        return Term(mu=mu, coeff=coeff, factors=tuple(factors)), []

    @staticmethod
    def validate_generator_file(path: Union[str, Path], n: int) -> np.ndarray:
        payload = _read_json(path)
        if isinstance(payload, dict):
            payload = payload.get("matrix")
        errors: List[dict] = []
        if not isinstance(payload, list) or len(payload) != n or any(
            not isinstance(row, list) or len(row) != n for row in payload
        ):
            raise ModelValidationException([{
                "loc": ["generator"],
                "msg": f"generator must be a {n}x{n} matrix of numbers or [re, im] pairs",
                "type": "shape_error",
            }])
        matrix = np.zeros((n, n), dtype=np.complex128)
        for i, row in enumerate(payload):
            for j, entry in enumerate(row):
                try:
                    matrix[i, j] = _parse_complex(entry)
                except ValueError as e:
                    errors.append({"loc": ["generator", i, j], "msg": str(e), "type": "value_error"})
        if errors:
            raise ModelValidationException(errors)
        if not np.allclose(matrix @ matrix.conj().T, np.eye(n), atol=1e-12):
            raise ModelValidationException([{
                "loc": ["generator"],
                "msg": "generator must be unitary to 1e-12",
                "type": "value_error",
            }])
        return matrix
