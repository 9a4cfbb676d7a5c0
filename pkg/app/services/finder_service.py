import asyncio
import logging
import math
from itertools import product
from typing import Callable, List, Optional, Sequence, Tuple, Union
import numpy as np
from scipy.optimize import brentq, minimize
from app.core.config import settings
from app.models.schemas import (
    ModelSpec, ScanConfig, ScanResult, DegeneracyRecord, DegeneracyDiagnostics,
    SphereProbe, ParityReport, ZeroSetSample, FermiRegionMap, MultiplicityStructure
)
from app.models.enums import DegeneracyKind, FermiLabel
from app.services.basis_service import basis_service
from app.services.model_service import model_service
from app.services.spectral_service import spectral_service
from app.services.symmetry_service import parse_d_part, DISCRIMINANT_PART
from app.utils.exceptions import InvalidArgumentException, UnsupportedModelException

logger = logging.getLogger(__name__)

GAP_FLOOR = 1e-8
REAL_SPREAD_TOL = 1e-10
GridSpec = Union[int, Sequence[np.ndarray]]


def wrap_momentum(k) -> np.ndarray:
    """Map momenta into [-π, π)."""
    return np.mod(np.asarray(k, dtype=float) + np.pi, 2 * np.pi) - np.pi


def torus_distance(a, b) -> float:
    delta = np.abs(wrap_momentum(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)))
    return float(np.linalg.norm(np.minimum(delta, 2 * np.pi - delta)))


def _unit(theta, phi) -> np.ndarray:
    theta, phi = np.asarray(theta, dtype=float), np.asarray(phi, dtype=float)
    return np.stack(
        [np.sin(theta) * np.cos(phi), np.sin(theta) * np.sin(phi), np.cos(theta)], axis=-1
    )


def direction_lattice(count: int) -> Tuple[np.ndarray, np.ndarray]:
    """Polar ring midpoints and azimuths for roughly `count` directions.

    The azimuth count is a multiple of 8 so the meridians include the
    kx=0, ky=0 and kx=±ky mirror planes of the cubic lattice.
    """
    n_phi = 8 * max(1, math.ceil(math.sqrt(2 * count) / 8))
    n_theta = max(2, round(count / n_phi))
    thetas = (np.arange(n_theta) + 0.5) * np.pi / n_theta
    phis = np.arange(n_phi) * 2 * np.pi / n_phi
    return thetas, phis


class FinderService:
    """Brillouin-zone scans, refinement and classification of degeneracies."""

    def __init__(self):
        self.spectral = spectral_service
        self.models = model_service

    # Objective

    def _check_order(self, model: ModelSpec, order_target: Optional[int]) -> int:
        order = model.n if order_target is None else order_target
        if not 2 <= order <= model.n:
            raise InvalidArgumentException.single(
                ["order_target"], f"order must be between 2 and {model.n}, got {order}", "value_error"
            )
        return order

    def degeneracy_objective(self, model: ModelSpec, k, order_target: Optional[int] = None) -> float:
        order = self._check_order(model, order_target)
        H = self.models.eval_bloch(model, np.asarray(k, dtype=float)[None, :])
        return float(self.spectral.collapse_array(H, order)[0])

    def _scan_objective(self, model: ModelSpec, k, order: int) -> float:
        H = self.models.eval_bloch(model, np.asarray(k, dtype=float)[None, :])
        return float(self.spectral.pinned_collapse_array(H, order)[0])

    def _surrogate(self, model: ModelSpec, order: int) -> Callable[[np.ndarray], float]:
        """Smooth stand-in minimised during refinement; zero exactly where the scan objective is."""
        if order == model.n:
            def traceless(k: np.ndarray) -> float:
                return self.spectral.traceless_frobenius_sq(self.models.eval_bloch(model, k))
            return traceless

        def diameter(k: np.ndarray) -> float:
            eigs = np.linalg.eigvals(self.models.eval_bloch(model, k))
            return self.spectral.subset_diameter(eigs, order) ** 2
        return diameter

    # Scan

    def scan_grid(self, grid: int) -> np.ndarray:
        return np.linspace(-np.pi, np.pi, grid, endpoint=False)

    def _grid_seeds(self, model: ModelSpec, config: ScanConfig, order: int) -> List[np.ndarray]:
        axis = self.scan_grid(config.grid)
        mesh = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1)
        values = np.empty(mesh.shape[:3])
        for i in range(config.grid):
            values[i] = self.spectral.pinned_collapse_array(self.models.eval_bloch(model, mesh[i]), order)

        is_min = np.ones(values.shape, dtype=bool)
        for shift in product((-1, 0, 1), repeat=3):
            if shift != (0, 0, 0):
                is_min &= values <= np.roll(values, shift, axis=(0, 1, 2))

        max_step = max(
            float(np.max(np.abs(values - np.roll(values, 1, axis=a)))) for a in range(3)
        )
        # a zero lies within half a cell diagonal of some grid point, and the slope
        # along a diagonal is at most sqrt(3) times the steepest axial step
        threshold = 2.0 * max_step
        candidates = np.argwhere(is_min & (values <= threshold))
        order_idx = np.lexsort((*candidates.T[::-1], values[tuple(candidates.T)]))
        candidates = candidates[order_idx][: config.max_seeds]
        logger.debug(
            f"{len(candidates)} seeds below threshold {threshold:.3e} on a {config.grid}^3 grid"
        )
        return [mesh[tuple(idx)] for idx in candidates]

    def _refine(
        self, model: ModelSpec, seed: np.ndarray, config: ScanConfig, order: int
    ) -> Optional[Tuple[np.ndarray, float]]:
        surrogate = self._surrogate(model, order)
        step = np.pi / config.grid
        k = np.asarray(seed, dtype=float)
        objective = self._scan_objective(model, k, order)
        for _ in range(settings.SIMPLEX_RESTARTS + 1):
            if objective <= config.refine_tol:
                break
            simplex = np.vstack([k, k + step * np.eye(3)])
            result = minimize(
                surrogate, k, method="Nelder-Mead",
                options={
                    "initial_simplex": simplex,
                    "maxfev": config.max_evaluations,
                    "xatol": 1e-14,
                    "fatol": 0.0,
                },
            )
            k = result.x
            objective = self._scan_objective(model, k, order)
            step = max(step * 1e-3, 1e-9)
        if objective > config.refine_tol * 1e2:
            logger.debug(f"Dropping seed {seed.tolist()}: objective {objective:.3e}")
            return None
        return wrap_momentum(k), objective

    def _deduplicate(self, refined: List[Tuple[np.ndarray, float]], radius: float) -> List[np.ndarray]:
        kept: List[np.ndarray] = []
        for k, _ in sorted(refined, key=lambda item: (item[1], tuple(item[0]))):
            if all(torus_distance(k, other) > radius for other in kept):
                kept.append(k)
        return kept

    async def _gather_bounded(self, func: Callable, items: list, threads: int) -> list:
        semaphore = asyncio.Semaphore(threads)

        async def run_with_semaphore(item):
            async with semaphore:
                return await asyncio.to_thread(func, item)

        tasks = [run_with_semaphore(item) for item in items]
        return list(await asyncio.gather(*tasks))

    async def _scan_async(self, model: ModelSpec, config: ScanConfig, order: int) -> ScanResult:
        seeds = self._grid_seeds(model, config, order)
        refined = await self._gather_bounded(
            lambda seed: self._refine(model, seed, config, order), seeds, config.threads
        )
        converged = [item for item in refined if item is not None]
        survivors = self._deduplicate(converged, config.cluster_radius)
        records = await self._gather_bounded(
            lambda k: self.classify_degeneracy(model, k, config, order), survivors, config.threads
        )
        records.sort(key=lambda r: tuple(r.k_star))
        logger.info(
            f"Scan of {model.name}: {len(seeds)} seeds, {len(seeds) - len(converged)} dropped, "
            f"{len(records)} degeneracies"
        )
        return ScanResult(records=records, seeds=len(seeds), dropped_seeds=len(seeds) - len(converged))

    def scan_degeneracies(
        self, model: ModelSpec, config: Optional[ScanConfig] = None, order_target: Optional[int] = None
    ) -> ScanResult:
        order = self._check_order(model, order_target)
        if config is None:
            grid = settings.SCAN_GRID if model.n < 4 else settings.SCAN_GRID_4B
            config = ScanConfig(grid=grid)
        return asyncio.run(self._scan_async(model, config, order))

    # Classification

    def _degenerate_structure(self, H: np.ndarray) -> MultiplicityStructure:
        structures = self.spectral.all_structures(H)
        structures.sort(key=lambda s: (
            -(s.algebraic - s.geometric), -s.algebraic, s.eigenvalue.real, s.eigenvalue.imag
        ))
        return structures[0]

    def _spreads(self, model: ModelSpec, k_star: np.ndarray, rho: float,
                 directions: np.ndarray, center: complex, size: int) -> np.ndarray:
        H = self.models.eval_bloch(model, k_star + rho * directions)
        n = model.n
        if size == n:
            tr = np.trace(H, axis1=-2, axis2=-1)
            return np.trace(H @ H, axis1=-2, axis2=-1) - tr ** 2 / n
        eigs = np.linalg.eigvals(H)
        idx = np.argsort(np.abs(eigs - center), axis=-1, kind="stable")[..., :size]
        chosen = np.take_along_axis(eigs, idx, axis=-1)
        return np.sum((chosen - chosen.mean(axis=-1, keepdims=True)) ** 2, axis=-1)

    def _real_roots(self, spread_at: Callable[[float, float], float],
                    thetas: np.ndarray, phis: np.ndarray, sample: Callable) -> List[Tuple[float, float]]:
        """Sign changes of the real spread along meridians and rings, refined by brentq."""
        roots = []
        fine = (np.arange(2 * len(phis)) + 0.5) * np.pi / (2 * len(phis))
        for phi in phis:
            values = sample(fine, np.full_like(fine, phi))
            for i in np.flatnonzero(values[:-1] * values[1:] < 0):
                try:
                    theta = brentq(lambda t: spread_at(t, phi), fine[i], fine[i + 1], xtol=1e-15)
                except ValueError:
                    # batched and scalar evaluation disagree on a rounding-level sign
                    continue
                roots.append((theta, float(phi)))
        ring = np.append(phis, 2 * np.pi)
        for theta in thetas:
            values = sample(np.full_like(ring, theta), ring)
            for i in np.flatnonzero(values[:-1] * values[1:] < 0):
                try:
                    phi = brentq(lambda p: spread_at(theta, p), ring[i], ring[i + 1], xtol=1e-15)
                except ValueError:
                    continue
                roots.append((float(theta), phi))
        return roots

    def _probe_sphere(self, model: ModelSpec, k_star: np.ndarray, rho: float,
                      config: ScanConfig, center: complex, size: int) -> SphereProbe:
        thetas, phis = direction_lattice(config.directions_per_sphere)
        grid_t, grid_p = np.meshgrid(thetas, phis, indexing="ij")
        lattice = np.column_stack([grid_t.ravel(), grid_p.ravel()])

        def sample(t: np.ndarray, p: np.ndarray) -> np.ndarray:
            return self._spreads(model, k_star, rho, _unit(t, p), center, size)

        def hamiltonian(theta: float, phi: float) -> np.ndarray:
            return self.models.eval_bloch(model, k_star + rho * _unit(theta, phi))

        spreads = sample(lattice[:, 0], lattice[:, 1])
        is_real = np.max(np.abs(spreads.imag)) <= REAL_SPREAD_TOL * (1 + np.max(np.abs(spreads)))

        if is_real:
            def spread_at(theta: float, phi: float) -> float:
                return float(sample(np.array([theta]), np.array([phi]))[0].real)
            candidates = self._real_roots(spread_at, thetas, phis, lambda t, p: sample(t, p).real)
        else:
            def score(x: np.ndarray) -> float:
                return abs(sample(np.array([x[0]]), np.array([x[1]]))[0]) / rho ** 2
            candidates = []
            for start in lattice[np.argsort(np.abs(spreads), kind="stable")[:3]]:
                result = minimize(
                    score, start, method="Nelder-Mead",
                    options={"maxfev": config.max_evaluations, "xatol": 1e-12, "fatol": 0.0},
                )
                candidates.append((float(result.x[0]), float(result.x[1])))

        conds, projectors, abs_spreads = [], [], list(np.abs(spreads))
        for theta, phi in [tuple(p) for p in lattice] + candidates:
            cond, projector = self.spectral.cluster_conditioning(hamiltonian(theta, phi), center, size)
            conds.append(cond)
            projectors.append(projector)
        for theta, phi in candidates:
            abs_spreads.append(abs(sample(np.array([theta]), np.array([phi]))[0]))

        best = int(np.argmax(conds))
        defective = conds[best] >= config.defect_cond_threshold
        direction = None
        cond_S = None
        if defective:
            theta, phi = ([tuple(p) for p in lattice] + candidates)[best]
            direction = [float(x) for x in _unit(theta, phi)]
            if model.n == 2:
                try:
                    cond_S = self.spectral.jordan_decompose_2x2(hamiltonian(theta, phi)).cond_S
                except InvalidArgumentException:
                    cond_S = None
        logger.debug(
            f"rho={rho}: {len(candidates)} candidates, max cond {conds[best]:.3e}, defective={defective}"
        )
        return SphereProbe(
            radius=rho, defective_found=bool(defective), max_eigvec_cond=float(conds[best]),
            cond_S=cond_S, direction=direction, min_spread=float(min(abs_spreads)),
            max_eigenprojector_norm=float(max(projectors)),
        )

    def classify_degeneracy(
        self, model: ModelSpec, k_star, config: Optional[ScanConfig] = None,
        order_target: Optional[int] = None,
    ) -> DegeneracyRecord:
        config = config or ScanConfig()
        k = wrap_momentum(k_star)
        H = self.models.eval_bloch(model, k)
        structure = self._degenerate_structure(H)
        if structure.algebraic < 2:
            raise InvalidArgumentException.single(
                ["k_star"], f"no degenerate eigenvalue cluster at {k.tolist()}", "not_a_degeneracy"
            )
        order = structure.algebraic
        if order_target is not None:
            order = min(self._check_order(model, order_target), order)
        objective = self.degeneracy_objective(model, k, order)
        defect = float(structure.algebraic - structure.geometric)

        probes: List[SphereProbe] = []
        ambiguous = False
        if defect > 0:
            kind = DegeneracyKind.DEFECTIVE_EP
        else:
            for rho in config.sphere_radii:
                probes.append(
                    self._probe_sphere(model, k, rho, config, structure.eigenvalue, structure.algebraic)
                )
            found = [p.defective_found for p in probes]
            ambiguous = 0 < sum(found) < len(found)
            kind = DegeneracyKind.NON_DEFECTIVE_EP if found[-1] else DegeneracyKind.ONP
            if ambiguous:
                logger.warning(
                    f"Sphere outcomes disagree across radii at {k.tolist()}: {found}; using the smallest radius"
                )

        return DegeneracyRecord(
            k_star=[float(x) for x in k],
            eigenvalue=structure.eigenvalue,
            order=structure.algebraic,
            kind=kind,
            jordan_structure=structure.jordan_blocks,
            diagnostics=DegeneracyDiagnostics(
                objective=objective, defect_at_point=defect,
                sphere_probes=probes, ambiguous=ambiguous,
            ),
        )

    # Zero sets and Fermi regions

    def valid_fields(self, n: int) -> List[str]:
        names = [f"d_{label}{part}" for label in ("xyz" if n == 2 else range(1, n ** 2)) for part in "RI"]
        names += [f"{scalar}_{part}" for scalar in ("eta", "nu", "kappa")[: n - 1] for part in "RI"]
        if n == 2:
            names += ["re_gap", "im_gap"]
        return names

    def field_values(self, model: ModelSpec, name: str, k: np.ndarray) -> np.ndarray:
        H = self.models.eval_bloch(model, k)
        parsed = parse_d_part(name, model.n)
        if parsed is not None and parsed[1] in "RI":
            mu, part = parsed
            d = basis_service.decompose_array(H)[..., mu]
            return d.real if part == "R" else d.imag
        match = DISCRIMINANT_PART.match(name)
        if match:
            scalars = self.spectral.discriminant_array(H)
            if match.group(1) in scalars:
                value = scalars[match.group(1)]
                return value.real if match.group(2) == "R" else value.imag
        if name in ("re_gap", "im_gap") and model.n == 2:
            eigs = np.linalg.eigvals(H)
            gap = eigs[..., 0] - eigs[..., 1]
            floor = GAP_FLOOR * (1 + np.max(np.abs(eigs), axis=-1))
            return (np.abs(gap.real) if name == "re_gap" else np.abs(gap.imag)) - floor
        raise InvalidArgumentException.single(
            ["field"], f"unknown field {name!r}; valid fields: {', '.join(self.valid_fields(model.n))}",
            "unknown_field",
        )

    def _axes(self, grid: GridSpec) -> List[np.ndarray]:
        if isinstance(grid, (int, np.integer)):
            if grid < 2:
                raise InvalidArgumentException.single(["grid"], "grid must be at least 2", "value_error")
            axis = np.linspace(-np.pi, np.pi, int(grid))
            return [axis, axis, axis]
        axes = [np.atleast_1d(np.asarray(a, dtype=float)) for a in grid]
        if len(axes) != 3:
            raise InvalidArgumentException.single(["grid"], "grid needs one axis per momentum component", "value_error")
        return axes

    def zero_set_sample(self, model: ModelSpec, fields: Union[str, Sequence[str]], grid: GridSpec) -> ZeroSetSample:
        fields = [fields] if isinstance(fields, str) else list(fields)
        axes = self._axes(grid)
        mesh = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        values = [self.field_values(model, name, mesh) for name in fields]
        active = [a for a in range(3) if len(axes[a]) > 1]

        if len(fields) == 1:
            F = values[0]
            points = []
            for a in active:
                n_a = F.shape[a]
                fa, fb = F.take(range(n_a - 1), axis=a), F.take(range(1, n_a), axis=a)
                pa, pb = mesh.take(range(n_a - 1), axis=a), mesh.take(range(1, n_a), axis=a)
                mask = fa * fb < 0
                t = fa[mask] / (fa[mask] - fb[mask])
                points.append(pa[mask] + t[:, None] * (pb[mask] - pa[mask]))
            points = np.concatenate(points) if points else np.empty((0, 3))
        else:
            shape = tuple(len(axes[a]) - 1 if a in active else 1 for a in range(3))
            corners = [
                tuple(slice(o, o + shape[a]) if a in active else slice(None) for a, o in enumerate(offset))
                for offset in product(*[(0, 1) if a in active else (0,) for a in range(3)])
            ]
            mask = np.ones(shape, dtype=bool)
            for F in values:
                stacked = np.stack([F[c] for c in corners])
                mask &= (stacked.min(axis=0) < 0) & (stacked.max(axis=0) > 0)
            centres = np.mean(np.stack([mesh[c] for c in corners]), axis=0)
            points = centres[mask]

        points = points.reshape(-1, 3)
        if len(points):
            points = points[np.lexsort((points[:, 2], points[:, 1], points[:, 0]))]
        return ZeroSetSample(fields=fields, points=points)

    def fermi_region_map(self, model: ModelSpec, grid: Union[int, np.ndarray]) -> FermiRegionMap:
        if model.n != 2:
            raise UnsupportedModelException.single(
                ["model", "bands"], "Fermi region maps need a two-band model", "unsupported_band_count"
            )
        if isinstance(grid, (int, np.integer)):
            axis = self.scan_grid(int(grid))
            points = np.stack(np.meshgrid(axis, axis, axis, indexing="ij"), axis=-1).reshape(-1, 3)
        else:
            points = np.asarray(grid, dtype=float).reshape(-1, 3)
        eigs = np.linalg.eigvals(self.models.eval_bloch(model, points))
        gap = np.abs((eigs[:, 0] - eigs[:, 1]).real)
        zero = gap <= GAP_FLOOR * (1 + np.max(np.abs(eigs), axis=-1))
        labels = [FermiLabel.RE_GAP_ZERO if z else FermiLabel.RE_GAP_NONZERO for z in zero]
        return FermiRegionMap(points=points, labels=labels)

    # Parity

    def pair_count_check(self, records: Sequence[DegeneracyRecord], tol: float = 1e-6) -> ParityReport:
        indices = [i for i, r in enumerate(records) if r.kind == DegeneracyKind.NON_DEFECTIVE_EP]
        partners = []
        paired = set()
        for i in indices:
            if i in paired:
                continue
            for j in indices:
                if j <= i or j in paired:
                    continue
                if torus_distance(records[i].k_star, -np.asarray(records[j].k_star)) < tol:
                    partners.append((i, j))
                    paired.update((i, j))
                    break
        return ParityReport(count=len(indices), even=len(indices) % 2 == 0, partners=partners)


# Singleton instance
finder_service = FinderService()
