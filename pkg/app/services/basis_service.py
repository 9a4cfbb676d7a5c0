from typing import Dict, List
import numpy as np
from app.models.schemas import GeneratorBasis, CoefficientVector
from app.utils.exceptions import InvalidArgumentException


def _offdiag(n: int, i: int, j: int, antisymmetric: bool) -> np.ndarray:
    m = np.zeros((n, n), dtype=np.complex128)
    if antisymmetric:
        m[i, j] = -1j
        m[j, i] = 1j
    else:
        m[i, j] = 1
        m[j, i] = 1
    return m


def _pauli() -> List[np.ndarray]:
    return [
        np.array([[0, 1], [1, 0]], dtype=np.complex128),
        np.array([[0, -1j], [1j, 0]], dtype=np.complex128),
        np.array([[1, 0], [0, -1]], dtype=np.complex128),
    ]


def _gell_mann() -> List[np.ndarray]:
    # Antisymmetric generators first, then symmetric, then diagonal.
    pairs = [(0, 1), (0, 2), (1, 2)]
    matrices = [_offdiag(3, i, j, True) for i, j in pairs]
    matrices += [_offdiag(3, i, j, False) for i, j in pairs]
    matrices.append(np.diag([1, -1, 0]).astype(np.complex128))
    matrices.append(np.diag([1, 1, -2]).astype(np.complex128) / np.sqrt(3))
    return matrices


def _generalized_gell_mann() -> List[np.ndarray]:
    pairs = [(0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3)]
    matrices = [_offdiag(4, i, j, True) for i, j in pairs]
    matrices += [_offdiag(4, i, j, False) for i, j in pairs]
    matrices.append(np.diag([1, -1, 0, 0]).astype(np.complex128))
    matrices.append(np.diag([1, 1, -2, 0]).astype(np.complex128) / np.sqrt(3))
    matrices.append(
        np.diag([1 / np.sqrt(6)] * 3 + [-np.sqrt(1.5)]).astype(np.complex128)
    )
    return matrices


class BasisService:
    """Identity-plus-SU(n) generator bases and the H = d_μ Υ^μ decomposition."""

    SUPPORTED_BANDS = (2, 3, 4)

    def __init__(self):
        self._cache: Dict[int, GeneratorBasis] = {}
        self._stacks: Dict[int, np.ndarray] = {}

    def basis(self, n: int) -> GeneratorBasis:
        if n not in self.SUPPORTED_BANDS:
            raise InvalidArgumentException.single(
                ["n"], f"band count must be one of {self.SUPPORTED_BANDS}, got {n}",
                "unsupported_band_count",
            )
        if n not in self._cache:
            builders = {2: _pauli, 3: _gell_mann, 4: _generalized_gell_mann}
            matrices = [np.eye(n, dtype=np.complex128)] + builders[n]()
            for m in matrices:
                m.setflags(write=False)
            self._cache[n] = GeneratorBasis(n=n, matrices=matrices)
        return self._cache[n]

    def stack(self, n: int) -> np.ndarray:
        """The basis as a read-only (n², n, n) array."""
        if n not in self._stacks:
            stacked = np.array(self.basis(n).matrices)
            stacked.setflags(write=False)
            self._stacks[n] = stacked
        return self._stacks[n]

    def decompose(self, H: np.ndarray) -> CoefficientVector:
        H = np.asarray(H, dtype=np.complex128)
        if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] not in self.SUPPORTED_BANDS:
            raise InvalidArgumentException.single(
                ["H"], f"expected an n×n matrix with n in {self.SUPPORTED_BANDS}, got shape {H.shape}",
                "dimension_mismatch",
            )
        d = self.decompose_array(H)
        return CoefficientVector(n=H.shape[0], d=[complex(x) for x in d])

    def decompose_array(self, H: np.ndarray) -> np.ndarray:
        """Vectorised decomposition of (..., n, n) matrices into (..., n²) coefficients."""
        n = H.shape[-1]
        basis = self.stack(n)
        # tr(H Υ^μ) = Σ_ij H_ij Υ^μ_ji
        traces = np.einsum("...ij,mji->...m", H, basis)
        weights = np.full(n * n, 0.5)
        weights[0] = 1.0 / n
        return traces * weights

    def reconstruct(self, d: CoefficientVector) -> np.ndarray:
        return self.reconstruct_array(np.asarray(d.d, dtype=np.complex128), d.n)

    def reconstruct_array(self, d: np.ndarray, n: int) -> np.ndarray:
        return np.einsum("...m,mij->...ij", d, self.stack(n))


# Singleton instance
basis_service = BasisService()
