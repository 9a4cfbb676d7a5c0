from typing import Dict, List, Optional, Tuple
import numpy as np
from app.models.schemas import ZooEntry, Term, Factor
from app.models.enums import SymmetryKind, TrigFunction, Axis


def _term(mu: int, coeff: complex, *factors: str) -> Term:
    """Build a term from factor strings such as ``"sin x"`` or ``"cos z"``."""
    parsed = []
    for spec in factors:
        fn, axis = spec.split()
        parsed.append(Factor(fn=TrigFunction(fn), axis=Axis(axis)))
    return Term(mu=mu, coeff=coeff, factors=tuple(parsed))


def _pt_weyl_2b(p: Dict[str, float]) -> Tuple[Term, ...]:
    t, V, lambda0 = p["t"], p["V"], p["lambda0"]
    return (
        _term(0, 2 * lambda0, "sin x"),
        _term(1, 2 * t, "sin x"),
        _term(3, 2 * t, "sin y"),
        # i{2t cos kz + 2V[2 - cos kx - cos ky]} on Υ²
        _term(2, 2j * t, "cos z"),
        _term(2, 4j * V),
        _term(2, -2j * V, "cos x"),
        _term(2, -2j * V, "cos y"),
    )


def _psh_dirac_4b(p: Dict[str, float]) -> Tuple[Term, ...]:
    t, t_z, k0 = p["t"], p["t_z"], p["k0"]
    lambda_xx, lambda_xy, m_I = p["lambda_Ixx"], p["lambda_Ixy"], p["m_I"]
    terms: List[Term] = []
    for mu, weight in ((14, 2 / np.sqrt(3)), (15, np.sqrt(2 / 3))):
        terms += [
            _term(mu, weight * t, "cos x"),
            _term(mu, weight * t, "cos y"),
            _term(mu, weight * (-2 * t - t_z * np.cos(k0))),
            _term(mu, weight * t_z, "cos z"),
        ]
    terms += [
        _term(3, 1j * lambda_xy, "sin y"),
        _term(4, 1j * lambda_xy, "sin y"),
        _term(9, 1j * lambda_xx, "sin x"),
        _term(10, 1j * lambda_xx, "sin x"),
        _term(7, 1j * m_I, "sin z", "cos x"),
        _term(12, -1j * m_I, "sin z", "cos x"),
        _term(7, -1j * m_I, "sin z", "cos y"),
        _term(12, 1j * m_I, "sin z", "cos y"),
    ]
    return tuple(terms)


def _onp_2b(p: Dict[str, float]) -> Tuple[Term, ...]:
    return (
        _term(1, 0.5, "sin x"),
        _term(1, 1j, "sin x", "cos y"),
        _term(2, 0.5, "sin y"),
        _term(2, 1j, "sin y", "cos z"),
        _term(3, 0.5, "sin z"),
        _term(3, 1j, "sin z", "cos x"),
    )


def _edge_2b(p: Dict[str, float]) -> Tuple[Term, ...]:
    t, V, lambda0 = p["t"], p["V"], p["lambda0"]
    return (
        _term(0, lambda0, "cos x"),
        _term(1, -1j * V),
        _term(1, 1j * V, "cos z"),
        _term(1, 2 * V, "cos y"),
        _term(1, -2 * t, "cos x"),
        _term(2, -2 * t, "sin y"),
        _term(3, -2 * t, "sin z"),
    )


def _trsdag_2b(p: Dict[str, float]) -> Tuple[Term, ...]:
    return (
        _term(1, 1.0, "sin x"),
        _term(2, 1j, "sin y"),
        _term(3, 1.0, "sin z"),
    )


class ZooRepository:
    def __init__(self):
        self._storage: Dict[str, ZooEntry] = {}

    def save(self, entry: ZooEntry) -> ZooEntry:
        """Register or replace a zoo entry"""
        self._storage[entry.name] = entry
        return entry

    def get(self, name: str) -> Optional[ZooEntry]:
        return self._storage.get(name)

    def exists(self, name: str) -> bool:
        return name in self._storage

    def names(self) -> List[str]:
        return sorted(self._storage)

    def all(self) -> List[ZooEntry]:
        return [self._storage[name] for name in self.names()]


# Singleton instance
zoo_repository = ZooRepository()

zoo_repository.save(ZooEntry(
    name="pt-weyl-2b", n=2, builder=_pt_weyl_2b,
    defaults={"t": 1.0, "V": 1.0, "lambda0": 1.0},
    symmetry=SymmetryKind.PT,
    description="PT-symmetric Weyl-like two-band model",
))
zoo_repository.save(ZooEntry(
    name="psh-dirac-4b", n=4, builder=_psh_dirac_4b,
    defaults={
        "t": 1.0, "t_z": 1.0, "lambda_Ixx": 0.15, "lambda_Ixy": 0.15,
        "m_I": -0.27, "k0": float(np.pi / 2),
    },
    symmetry=SymmetryKind.PSH,
    description="pseudo-Hermitian Dirac-like four-band model",
))
zoo_repository.save(ZooEntry(
    name="onp-2b", n=2, builder=_onp_2b,
    description="two-band model with ordinary nodal points at k_i in {0, pi}",
))
zoo_repository.save(ZooEntry(
    name="edge-2b", n=2, builder=_edge_2b,
    defaults={"t": 1.0, "V": 1.0, "lambda0": 2.3},
    description="two-band model, Hermitian at kz=0, with boundary states between nodal points",
))
zoo_repository.save(ZooEntry(
    name="trsdag-2b", n=2, builder=_trsdag_2b,
    symmetry=SymmetryKind.TRS_DAG, published=False,
    description="sin kx Υ¹ + i sin ky Υ² + sin kz Υ³, TRS†-symmetric test model",
))
