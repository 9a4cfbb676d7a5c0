from typing import List, Optional

import numpy as np


class DegeneracyToolException(Exception):
    """Base error; carries `{loc, msg, type}` dicts and a CLI exit code."""

    exit_code: int = 2
    message: str = "Request failed"

    def __init__(self, errors: List[dict], message: Optional[str] = None):
        self.errors = errors
        super().__init__(message or self.message)

    @classmethod
    def single(cls, loc: list, msg: str, type_: str, **kwargs):
        return cls([{"loc": loc, "msg": msg, "type": type_}], message=msg, **kwargs)

    def payload(self) -> dict:
        return {"detail": self.errors}


class InvalidArgumentException(DegeneracyToolException):
    message = "Invalid argument"


class UnsupportedCombinationException(DegeneracyToolException):
    message = "Unsupported symmetry/band-count combination"


class UnsupportedModelException(DegeneracyToolException):
    message = "Model not supported by this operation"


class ModelValidationException(DegeneracyToolException):
    message = "Model validation failed"


class ModelNotFoundException(InvalidArgumentException):
    def __init__(self, name: str):
        super().__init__(
            [{
                "loc": ["model", "name"],
                "msg": f"Model {name} not found in the zoo",
                "type": "unknown_model",
            }],
            message=f"Model {name} not found in the zoo",
        )


class NumericFailureException(DegeneracyToolException):
    exit_code = 3
    message = "Numeric failure"

    def __init__(self, msg: str, matrix: Optional[np.ndarray] = None):
        error = {"loc": ["numeric"], "msg": msg, "type": "numeric_failure"}
        if matrix is not None:
            error["matrix"] = [
                [[float(z.real), float(z.imag)] for z in row]
                for row in np.asarray(matrix, dtype=complex)
            ]
        self.matrix = matrix
        super().__init__([error], message=msg)
