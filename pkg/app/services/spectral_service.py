import logging
from itertools import combinations
from typing import List, Optional, Sequence
import numpy as np
import scipy.linalg
from scipy.cluster.hierarchy import linkage, fcluster
from scipy.spatial.distance import pdist
from app.core.config import settings
from app.models.schemas import (
    CharPolyCoeffs, DiscriminantSet, SpectralData,
    MultiplicityStructure, JordanDecomposition2x2
)
from app.utils.exceptions import InvalidArgumentException, NumericFailureException

logger = logging.getLogger(__name__)

COND_CAP = 1.0 / np.finfo(float).eps


def _check_square(H: np.ndarray) -> np.ndarray:
    H = np.asarray(H, dtype=np.complex128)
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] not in (2, 3, 4):
        raise InvalidArgumentException.single(
            ["H"], f"expected an n×n matrix with n in (2, 3, 4), got shape {H.shape}",
            "dimension_mismatch",
        )
    return H


def _capped_cond(M: np.ndarray) -> float:
    s = np.linalg.svd(M, compute_uv=False)
    if s[-1] <= s[0] / COND_CAP or s[-1] == 0.0:
        return float(COND_CAP)
    return float(s[0] / s[-1])


class SpectralService:
    """Characteristic polynomials, discriminants and (non-)diagonalizability diagnostics."""

    def __init__(self):
        self.rank_tol = settings.RANK_TOL
        self.cluster_rel_radius = settings.CLUSTER_REL_RADIUS

    # Characteristic polynomial and discriminants

    def char_poly_coeffs(self, H: np.ndarray) -> CharPolyCoeffs:
        H = _check_square(H)
        n = H.shape[0]
        H2 = H @ H
        tr1 = complex(np.trace(H))
        tr2 = complex(np.trace(H2))
        det = complex(np.linalg.det(H))
        if n == 2:
            return CharPolyCoeffs(n=2, a=tr1, d=det)
        b = (tr1 ** 2 - tr2) / 2
        if n == 3:
            return CharPolyCoeffs(n=3, a=tr1, b=b, d=det)
        tr3 = complex(np.trace(H2 @ H))
        c = (tr1 ** 3 - 3 * tr1 * tr2 + 2 * tr3) / 6
        return CharPolyCoeffs(n=4, a=tr1, b=b, c=c, d=det)

    def discriminant_constraints(self, H: np.ndarray) -> DiscriminantSet:
        H = _check_square(H)
        n = H.shape[0]
        coeffs = self.char_poly_coeffs(H)
        a, d = coeffs.a, coeffs.d
        if n == 2:
            return DiscriminantSet(n=2, eta=a ** 2 - 4 * d)
        if n == 3:
            tr2 = complex(np.trace(H @ H))
            eta = (a ** 2 - 3 * tr2) / 2
            nu = (54 * d - 5 * a ** 3 + 9 * a * tr2) / 2
            return DiscriminantSet(n=3, eta=eta, nu=nu)
        b, c = coeffs.b, coeffs.c
        eta = -3 * a * c + b ** 2 + 12 * d
        nu = 27 * a ** 2 * d - 9 * a * b * c + 2 * b ** 3 - 72 * b * d + 27 * c ** 2
        kappa = a ** 3 - 4 * a * b + 8 * c
        return DiscriminantSet(n=4, eta=eta, nu=nu, kappa=kappa)

    def discriminant_array(self, H: np.ndarray) -> dict:
        """Vectorised η, ν, κ over a (..., n, n) stack; keys present per band count."""
        n = H.shape[-1]
        H2 = H @ H
        tr1 = np.trace(H, axis1=-2, axis2=-1)
        tr2 = np.trace(H2, axis1=-2, axis2=-1)
        det = np.linalg.det(H)
        if n == 2:
            return {"eta": tr1 ** 2 - 4 * det}
        if n == 3:
            return {
                "eta": (tr1 ** 2 - 3 * tr2) / 2,
                "nu": (54 * det - 5 * tr1 ** 3 + 9 * tr1 * tr2) / 2,
            }
        tr3 = np.trace(H2 @ H, axis1=-2, axis2=-1)
        a, d = tr1, det
        b = (tr1 ** 2 - tr2) / 2
        c = (tr1 ** 3 - 3 * tr1 * tr2 + 2 * tr3) / 6
        return {
            "eta": -3 * a * c + b ** 2 + 12 * d,
            "nu": 27 * a ** 2 * d - 9 * a * b * c + 2 * b ** 3 - 72 * b * d + 27 * c ** 2,
            "kappa": a ** 3 - 4 * a * b + 8 * c,
        }

    def discriminant_oracle(self, H: np.ndarray) -> complex:
        H = _check_square(H)
        eigs = self.eigenvalues(H)
        result = 1.0 + 0.0j
        for i, j in combinations(range(len(eigs)), 2):
            result *= (eigs[i] - eigs[j]) ** 2
        return complex(result)

    # Eigen-decomposition

    def eigenvalues(self, H: np.ndarray) -> np.ndarray:
        try:
            return np.linalg.eigvals(H)
        except np.linalg.LinAlgError as e:
            raise NumericFailureException(f"eigensolver did not converge: {e}", H)

    def _eig(self, H: np.ndarray):
        try:
            return np.linalg.eig(H)
        except np.linalg.LinAlgError as e:
            raise NumericFailureException(f"eigensolver did not converge: {e}", H)

    @staticmethod
    def sort_eigenvalues(eigs: np.ndarray) -> np.ndarray:
        return np.lexsort((eigs.imag, eigs.real))

    def eigen(self, H: np.ndarray) -> SpectralData:
        H = _check_square(H)
        eigs, vecs = self._eig(H)
        order = self.sort_eigenvalues(eigs)
        eigs = eigs[order]
        vecs = vecs[:, order]
        gaps = [abs(eigs[i] - eigs[j]) for i, j in combinations(range(len(eigs)), 2)]
        return SpectralData(
            eigenvalues=[complex(x) for x in eigs],
            right_eigvec_cond=_capped_cond(vecs),
            min_gap=float(min(gaps)),
            max_gap=float(max(gaps)),
        )

    # Clustering and multiplicity

    def matrix_scale(self, H: np.ndarray, eigs: Optional[np.ndarray] = None) -> float:
        if eigs is None:
            eigs = self.eigenvalues(H)
        return max(float(np.max(np.abs(eigs))), float(np.linalg.norm(H, 2)))

    def cluster_radius(self, H: np.ndarray, tol: float, eigs: Optional[np.ndarray] = None) -> float:
        return max(tol, self.cluster_rel_radius * self.matrix_scale(H, eigs))

    @staticmethod
    def cluster_eigenvalues(eigs: np.ndarray, radius: float) -> List[np.ndarray]:
        """Single-linkage groups of eigenvalue indices, ordered by smallest index."""
        if len(eigs) == 1:
            return [np.array([0])]
        points = np.column_stack([eigs.real, eigs.imag])
        labels = fcluster(linkage(pdist(points), method="single"), t=radius, criterion="distance")
        groups = [np.flatnonzero(labels == label) for label in np.unique(labels)]
        return sorted(groups, key=lambda g: g[0])

    def numerical_rank(self, A: np.ndarray, cutoff: float) -> int:
        s = np.linalg.svd(A, compute_uv=False)
        return int(np.sum(s > cutoff))

    def rank_cutoff(self, H: np.ndarray, tol: float) -> float:
        return tol * max(float(np.linalg.norm(H, 2)), 1.0)

    def multiplicity_structure(
        self, H: np.ndarray, lam: complex, tol: Optional[float] = None
    ) -> MultiplicityStructure:
        H = _check_square(H)
        tol = self.rank_tol if tol is None else tol
        eigs = self.eigenvalues(H)
        radius = self.cluster_radius(H, tol, eigs)
        nearest = int(np.argmin(np.abs(eigs - lam)))
        if abs(eigs[nearest] - lam) > radius:
            raise InvalidArgumentException.single(
                ["lambda"], f"{lam} is not an eigenvalue within {radius:.3g}",
                "not_an_eigenvalue",
            )
        group = next(g for g in self.cluster_eigenvalues(eigs, radius) if nearest in g)
        return self._structure_for_group(H, eigs, group, tol)

    def _structure_for_group(
        self, H: np.ndarray, eigs: np.ndarray, group: np.ndarray, tol: float
    ) -> MultiplicityStructure:
        n = H.shape[0]
        center = complex(np.mean(eigs[group]))
        A = H - center * np.eye(n)
        cutoff = self.rank_cutoff(H, tol)
        algebraic = len(group)
        ranks = []
        power = np.eye(n, dtype=np.complex128)
        for _ in range(algebraic):
            power = power @ A
            ranks.append(self.numerical_rank(power, cutoff))
        # Rounding can make a later power look fuller than an earlier one.
        ranks = list(np.minimum.accumulate(ranks))
        geometric = min(max(n - ranks[0], 1), algebraic)
        return MultiplicityStructure(
            eigenvalue=center, algebraic=algebraic, geometric=geometric,
            rank_sequence=[int(r) for r in ranks],
        )

    def all_structures(self, H: np.ndarray, tol: Optional[float] = None) -> List[MultiplicityStructure]:
        H = _check_square(H)
        tol = self.rank_tol if tol is None else tol
        eigs = self.eigenvalues(H)
        radius = self.cluster_radius(H, tol, eigs)
        return [
            self._structure_for_group(H, eigs, group, tol)
            for group in self.cluster_eigenvalues(eigs, radius)
        ]

    def diagonalizability_defect(self, H: np.ndarray, tol: Optional[float] = None) -> float:
        return float(max(s.algebraic - s.geometric for s in self.all_structures(H, tol)))

    # Jordan decomposition

    def jordan_decompose_2x2(self, H: np.ndarray, tol: Optional[float] = None) -> JordanDecomposition2x2:
        H = _check_square(H)
        if H.shape != (2, 2):
            raise InvalidArgumentException.single(
                ["H"], "closed-form Jordan decomposition needs a 2×2 matrix", "dimension_mismatch"
            )
        if self.diagonalizability_defect(H, tol) < 1:
            raise InvalidArgumentException.single(
                ["H"], "matrix is diagonalizable; use eigen instead", "not_defective"
            )
        lam = complex(np.trace(H)) / 2
        N = H - lam * np.eye(2)
        U, s, Vh = np.linalg.svd(N)
        s1 = U[:, 0]
        s2 = Vh[0].conj() / s[0]
        # Fix the gauge so S is unique: largest component of s1 real positive.
        pivot = s1[int(np.argmax(np.abs(s1)))]
        phase = pivot / abs(pivot)
        s1 = s1 / phase
        s2 = s2 / phase
        S = np.column_stack([s1, s2])
        J = np.array([[lam, 1.0], [0.0, lam]], dtype=np.complex128)
        return JordanDecomposition2x2(S=S, J=J, cond_S=_capped_cond(S))

    # Cluster diagnostics used by the sphere probes

    def nearest_cluster(self, eigs: np.ndarray, center: complex, size: int) -> np.ndarray:
        return np.argsort(np.abs(eigs - center), kind="stable")[:size]

    def cluster_spread(self, H: np.ndarray, center: complex, size: int) -> complex:
        """Σ(λ_i − λ̄)² over the `size` eigenvalues nearest `center` (η/2 for a full 2-band cluster)."""
        n = H.shape[0]
        if size == n:
            tr1 = np.trace(H)
            return complex(np.trace(H @ H) - tr1 ** 2 / n)
        eigs = self.eigenvalues(H)
        chosen = eigs[self.nearest_cluster(eigs, center, size)]
        return complex(np.sum((chosen - chosen.mean()) ** 2))

    def cluster_conditioning(self, H: np.ndarray, center: complex, size: int):
        """(eigenvector-matrix condition, max eigenprojector norm) over the cluster."""
        try:
            eigs, left, right = scipy.linalg.eig(H, left=True, right=True)
        except (np.linalg.LinAlgError, ValueError) as e:
            raise NumericFailureException(f"eigensolver did not converge: {e}", H)
        idx = self.nearest_cluster(eigs, center, size)
        vecs = right[:, idx]
        vecs = vecs / np.linalg.norm(vecs, axis=0)
        cond = _capped_cond(vecs)
        projector_norms = []
        for i in idx:
            overlap = abs(np.vdot(left[:, i], right[:, i]))
            scale = np.linalg.norm(left[:, i]) * np.linalg.norm(right[:, i])
            projector_norms.append(COND_CAP if overlap <= scale / COND_CAP else scale / overlap)
        return cond, float(max(projector_norms))

    # Objectives

    def subset_diameter(self, eigs: np.ndarray, size: int) -> float:
        """Smallest diameter of any `size`-subset of eigenvalues."""
        best = np.inf
        for subset in combinations(range(len(eigs)), size):
            chosen = eigs[list(subset)]
            diam = max(abs(a - b) for a, b in combinations(chosen, 2))
            best = min(best, diam)
        return float(best)

    def collapse_array(self, H: np.ndarray, order: int) -> np.ndarray:
        """Vectorised degeneracy objective over a (..., n, n) stack.

        Smallest diameter of any `order`-subset of eigenvalues; for order = n this
        is the largest pairwise gap.
        """
        n = H.shape[-1]
        eigs = np.linalg.eigvals(H)
        best = None
        for subset in combinations(range(n), order):
            chosen = eigs[..., list(subset)]
            diffs = np.abs(chosen[..., :, None] - chosen[..., None, :]).max(axis=(-2, -1))
            best = diffs if best is None else np.minimum(best, diffs)
        return best

    def pinned_collapse_array(self, H: np.ndarray, order: int) -> np.ndarray:
        """Scan objective: for order = n the collapse is floored by the traceless norm.

        Vanishes only where H is scalar.
        """
        collapse = self.collapse_array(H, order)
        n = H.shape[-1]
        if order < n:
            return collapse
        trace = np.trace(H, axis1=-2, axis2=-1)
        traceless = H - (trace / n)[..., None, None] * np.eye(n)
        return np.maximum(collapse, np.linalg.norm(traceless, ord=2, axis=(-2, -1)))

    def traceless_frobenius_sq(self, H: np.ndarray) -> float:
        n = H.shape[-1]
        traceless = H - np.trace(H) / n * np.eye(n)
        return float(np.sum(np.abs(traceless) ** 2))


# Singleton instance
spectral_service = SpectralService()
