from typing import Dict, Optional, Tuple
import numpy as np
from app.models.schemas import ConstraintDescriptor
from app.models.enums import SymmetryKind

PT, CP, PSH, TRS_DAG = (
    SymmetryKind.PT, SymmetryKind.CP, SymmetryKind.PSH, SymmetryKind.TRS_DAG
)


def _parts(spec: str) -> list:
    """``"1R 4I"`` -> ``["d_1R", "d_4I"]``"""
    return [f"d_{token}" for token in spec.split()]


_ROWS = {
    (PT, 2): (["eta_R"], ["d_xR", "d_yI", "d_zR"]),
    (CP, 2): (["eta_R"], ["d_xI", "d_yR", "d_zI"]),
    (PSH, 2): (["eta_R"], ["d_xR", "d_yI", "d_zI"]),
    (TRS_DAG, 2): (["eta_R", "eta_I"], ["d_xa", "d_ya", "d_za"]),
    (PT, 3): (["eta_R", "nu_R"], _parts("1R 4I 2I 5R 3R 6I 7R 8R")),
    (CP, 3): (["eta_R", "nu_I"], _parts("1I 4R 2R 5I 3I 6R 7I 8I")),
    (PSH, 3): (["eta_R", "nu_R"], _parts("1I 4I 2R 5R 3I 6I 7R 8R")),
    (PT, 4): (
        ["eta_R", "nu_R", "kappa_R"],
        _parts("1R 2I 3R 4R 5I 6R 7I 8R 9I 10I 11R 12I 13R 14R 15R"),
    ),
    (CP, 4): (
        ["eta_R", "nu_R", "kappa_I"],
        _parts("1I 2R 3I 4I 5R 6I 7R 8I 9R 10R 11I 12R 13I 14I 15I"),
    ),
    (PSH, 4): (
        ["eta_R", "nu_R", "kappa_R"],
        _parts("1I 2R 3I 4I 5R 6I 7I 8R 9I 10I 11R 12I 13R 14R 15R"),
    ),
}

_GENERATORS = {
    (PT, 2): np.eye(2),
    (CP, 2): np.eye(2),
    (PSH, 2): np.array([[0, 1], [1, 0]]),
    # adiag[1, -1], i.e. iσ_y
    (TRS_DAG, 2): np.array([[0, 1], [-1, 0]]),
    (PT, 3): np.diag([1, -1, 1]),
    (CP, 3): np.diag([1, -1, 1]),
    (PSH, 3): np.diag([1, -1, 1]),
    (PT, 4): np.diag([1, -1, 1, -1]),
    (CP, 4): np.diag([1, -1, 1, -1]),
    (PSH, 4): np.diag([1, -1, 1, -1]),
}


class ConstraintRepository:
    """Symmetry-reduced constraint rows and default generators per (kind, band count)."""

    def __init__(self):
        self._storage: Dict[Tuple[SymmetryKind, int], ConstraintDescriptor] = {}
        for (kind, n), (defective, nondefective) in _ROWS.items():
            self._storage[(kind, n)] = ConstraintDescriptor(
                kind=kind, n=n,
                defective_constraints=defective,
                nondefective_constraints=nondefective,
                codimension_defective=len(defective),
                codimension_nondefective=len(nondefective),
            )

    def get(self, kind: SymmetryKind, n: int) -> Optional[ConstraintDescriptor]:
        return self._storage.get((SymmetryKind(kind), n))

    def exists(self, kind: SymmetryKind, n: int) -> bool:
        return (SymmetryKind(kind), n) in self._storage

    def generator(self, kind: SymmetryKind, n: int) -> Optional[np.ndarray]:
        matrix = _GENERATORS.get((SymmetryKind(kind), n))
        return None if matrix is None else matrix.astype(np.complex128)


# Singleton instance
constraint_repository = ConstraintRepository()
