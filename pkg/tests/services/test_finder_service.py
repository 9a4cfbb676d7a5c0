import numpy as np
import pytest
from app.models.enums import DegeneracyKind, FermiLabel
from app.models.schemas import DegeneracyRecord, DegeneracyDiagnostics, ScanConfig
from app.services.finder_service import (
    finder_service, direction_lattice, torus_distance, wrap_momentum,
)
from app.services.model_service import model_service
from app.services.spectral_service import spectral_service
from app.services.symmetry_service import symmetry_service
from app.utils.exceptions import InvalidArgumentException, UnsupportedModelException


def record_at(k, kind=DegeneracyKind.NON_DEFECTIVE_EP):
    return DegeneracyRecord(
        k_star=list(k), eigenvalue=0j, order=2, kind=kind, jordan_structure=[1, 1],
        diagnostics=DegeneracyDiagnostics(objective=0.0, defect_at_point=0.0),
    )


class TestGeometry:

    def test_wrap_momentum(self):
        assert np.allclose(wrap_momentum([np.pi, -np.pi, 3 * np.pi / 2]), [-np.pi, -np.pi, -np.pi / 2])

    def test_torus_distance_wraps(self):
        assert torus_distance([np.pi - 0.01, 0, 0], [-np.pi + 0.01, 0, 0]) == pytest.approx(0.02)

    def test_direction_lattice_contains_mirror_meridians(self):
        thetas, phis = direction_lattice(200)
        assert len(phis) % 8 == 0
        assert len(thetas) * len(phis) == pytest.approx(200, rel=0.1)
        assert np.any(np.isclose(phis, np.pi / 4))
        assert np.all((thetas > 0) & (thetas < np.pi))


class TestClassification:

    def setup_method(self):
        self.pt_weyl = model_service.zoo("pt-weyl-2b")

    def test_objective_vanishes_at_weyl_point(self):
        assert finder_service.degeneracy_objective(self.pt_weyl, [0, 0, np.pi / 2]) < 1e-12
        assert finder_service.degeneracy_objective(self.pt_weyl, [0.3, 0.2, 0.1]) > 0.1

    def test_objective_is_the_eigenvalue_gap_at_defective_points(self):
        k = [0, np.pi / 2, np.pi / 2]
        gap = spectral_service.eigen(model_service.eval_bloch(self.pt_weyl, k)).max_gap
        objective = finder_service.degeneracy_objective(self.pt_weyl, k)
        assert objective < 1e-6
        assert gap < 1e-6

    def test_defective_point(self):
        record = finder_service.classify_degeneracy(self.pt_weyl, [0, np.pi / 2, np.pi / 2])
        assert record.kind == DegeneracyKind.DEFECTIVE_EP
        assert record.order == 2
        assert record.jordan_structure == [2]
        assert record.diagnostics.defect_at_point == 1
        assert record.diagnostics.objective < 1e-6
        assert record.diagnostics.sphere_probes == []

    def test_weyl_point_is_a_non_defective_ep(self):
        record = finder_service.classify_degeneracy(self.pt_weyl, [0, 0, np.pi / 2])
        assert record.kind == DegeneracyKind.NON_DEFECTIVE_EP
        assert record.jordan_structure == [1, 1]
        assert record.diagnostics.defect_at_point == 0
        probes = record.diagnostics.sphere_probes
        assert [p.radius for p in probes] == [0.2, 0.1, 0.05, 0.02]
        assert all(p.defective_found for p in probes)
        assert not record.diagnostics.ambiguous

    def test_jordan_condition_grows_as_the_spheres_shrink(self):
        record = finder_service.classify_degeneracy(self.pt_weyl, [0, 0, np.pi / 2])
        conds = [p.cond_S for p in record.diagnostics.sphere_probes]
        assert all(c is not None for c in conds)
        assert all(b > a for a, b in zip(conds, conds[1:]))

    @pytest.mark.parametrize("name, k, kind", [
        ("pt-weyl-2b", [0, 0, np.pi / 2], DegeneracyKind.NON_DEFECTIVE_EP),
        ("onp-2b", [0, 0, 0], DegeneracyKind.ONP),
    ])
    def test_classification_survives_halved_radii(self, name, k, kind):
        model = model_service.zoo(name)
        halved = ScanConfig(sphere_radii=[r / 2 for r in ScanConfig().sphere_radii])
        assert finder_service.classify_degeneracy(model, k).kind == kind
        assert finder_service.classify_degeneracy(model, k, halved).kind == kind

    def test_onp(self):
        record = finder_service.classify_degeneracy(model_service.zoo("onp-2b"), [0, 0, 0])
        assert record.kind == DegeneracyKind.ONP
        probes = record.diagnostics.sphere_probes
        assert not any(p.defective_found for p in probes)
        # the cluster spread stays bounded away from zero on every sphere
        for probe in probes:
            assert probe.min_spread > 0.5 * probe.radius ** 2

    def test_trsdag_bands_touch_at_every_trim(self):
        model = model_service.zoo("trsdag-2b")
        for k in symmetry_service.trim_points(3):
            assert spectral_service.eigen(model_service.eval_bloch(model, k)).min_gap <= 1e-10

    def test_trsdag_trim_is_a_non_defective_ep(self):
        record = finder_service.classify_degeneracy(model_service.zoo("trsdag-2b"), [0, 0, 0])
        assert record.kind == DegeneracyKind.NON_DEFECTIVE_EP

    def test_non_degenerate_point(self):
        with pytest.raises(InvalidArgumentException) as exc:
            finder_service.classify_degeneracy(self.pt_weyl, [0.3, 0.2, 0.1])
        assert exc.value.errors[0]["type"] == "not_a_degeneracy"

    def test_invalid_order(self):
        with pytest.raises(InvalidArgumentException):
            finder_service.degeneracy_objective(self.pt_weyl, [0, 0, 0], order_target=3)

    def test_momentum_is_wrapped(self):
        record = finder_service.classify_degeneracy(self.pt_weyl, [2 * np.pi, np.pi / 2, np.pi / 2])
        assert np.allclose(record.k_star, [0, np.pi / 2, np.pi / 2], atol=1e-12)


class TestFieldsAndRegions:

    def setup_method(self):
        self.pt_weyl = model_service.zoo("pt-weyl-2b")

    def test_valid_fields(self):
        names = finder_service.valid_fields(2)
        assert {"d_xR", "d_yI", "eta_R", "re_gap"} <= set(names)
        assert "nu_R" not in names
        assert "d_15I" in finder_service.valid_fields(4)

    def test_unknown_field_lists_valid_names(self):
        with pytest.raises(InvalidArgumentException) as exc:
            finder_service.field_values(self.pt_weyl, "bogus", np.zeros((1, 3)))
        assert "d_zR" in exc.value.errors[0]["msg"]

    def test_single_field_crossings_are_interpolated(self):
        model = model_service.zoo("trsdag-2b")
        axes = [np.linspace(-1, 1, 10), np.array([0.3]), np.array([0.1])]
        sample = finder_service.zero_set_sample(model, "d_xR", axes)
        assert sample.fields == ["d_xR"]
        assert np.allclose(sample.points, [[0, 0.3, 0.1]], atol=1e-12)

    def test_identically_zero_field_has_no_crossings(self):
        sample = finder_service.zero_set_sample(self.pt_weyl, "d_xI", 11)
        assert sample.points.shape == (0, 3)

    @pytest.mark.slow
    def test_onp_joint_zero_set_avoids_the_nodal_points(self):
        model = model_service.zoo("onp-2b")
        sample = finder_service.zero_set_sample(model, ["eta_R", "eta_I"], 61)
        assert len(sample.points) > 0
        for trim in symmetry_service.trim_points(3):
            distances = [torus_distance(p, trim) for p in sample.points]
            assert min(distances) > 0.3

    def test_fermi_region_along_the_diagonal(self):
        s = np.array([0.5, 1.0, 2.0, 3.0])
        points = np.column_stack([s, s, np.full_like(s, np.pi / 2)])
        region = finder_service.fermi_region_map(self.pt_weyl, points)
        assert region.labels == [
            FermiLabel.RE_GAP_NONZERO, FermiLabel.RE_GAP_NONZERO,
            FermiLabel.RE_GAP_ZERO, FermiLabel.RE_GAP_ZERO,
        ]

    def test_fermi_arc_ends_where_eta_real_part_vanishes(self):
        s = np.linspace(0.05, np.pi, 400)
        points = np.column_stack([s, s, np.full_like(s, np.pi / 2)])
        region = finder_service.fermi_region_map(self.pt_weyl, points)
        zero = np.array([label == FermiLabel.RE_GAP_ZERO for label in region.labels])
        # one contiguous segment running to the zone edge
        start = int(np.argmax(zero))
        assert zero[start:].all() and not zero[:start].any()
        eta_r = spectral_service.discriminant_array(model_service.eval_bloch(self.pt_weyl, points))["eta"].real
        crossing = int(np.flatnonzero(np.diff(np.sign(eta_r)) != 0)[0])
        step = s[1] - s[0]
        assert abs(s[start] - s[crossing]) <= 2 * step
        assert abs(s[start] - np.arccos(1 / 3)) <= 2 * step

    def test_fermi_region_needs_two_bands(self):
        with pytest.raises(UnsupportedModelException):
            finder_service.fermi_region_map(model_service.zoo("psh-dirac-4b"), 5)


class TestParity:

    def test_partners_are_paired_by_inversion(self):
        records = [
            record_at([0, 0, np.pi / 2]),
            record_at([0, 0, -np.pi / 2]),
            record_at([0, np.pi / 2, np.pi / 2], DegeneracyKind.DEFECTIVE_EP),
        ]
        report = finder_service.pair_count_check(records)
        assert report.count == 2
        assert report.even
        assert report.partners == [(0, 1)]

    def test_odd_count_is_reported(self):
        records = [record_at([-np.pi, 0, 0]), record_at([0, 0, 0]), record_at([0, -np.pi, 0])]
        report = finder_service.pair_count_check(records)
        assert report.count == 3
        assert not report.even


@pytest.mark.slow
class TestScans:

    def test_pt_weyl_has_two_non_defective_eps(self):
        result = finder_service.scan_degeneracies(model_service.zoo("pt-weyl-2b"))
        assert len(result.records) == 2
        assert all(r.kind == DegeneracyKind.NON_DEFECTIVE_EP for r in result.records)
        positions = sorted((r.k_star for r in result.records), key=lambda k: k[2])
        assert np.allclose(positions, [[0, 0, -np.pi / 2], [0, 0, np.pi / 2]], atol=1e-6)
        assert finder_service.pair_count_check(result.records).even

    def test_onp_model_has_only_nodal_points(self):
        result = finder_service.scan_degeneracies(model_service.zoo("onp-2b"))
        assert len(result.records) == 8
        assert all(r.kind == DegeneracyKind.ONP for r in result.records)
        for record in result.records:
            assert min(torus_distance(record.k_star, t) for t in symmetry_service.trim_points(3)) < 1e-6

    def test_nodal_point_between_grid_nodes_is_seeded(self):
        # an odd grid steps over k = 0 on every axis
        config = ScanConfig(grid=15)
        assert not np.any(np.isclose(finder_service.scan_grid(config.grid), 0))
        result = finder_service.scan_degeneracies(model_service.zoo("onp-2b"), config)
        assert len(result.records) == 8
        assert min(torus_distance(r.k_star, [0, 0, 0]) for r in result.records) < 1e-6

    def test_trsdag_trims_are_non_defective(self):
        result = finder_service.scan_degeneracies(model_service.zoo("trsdag-2b"))
        assert len(result.records) == 8
        assert all(r.kind == DegeneracyKind.NON_DEFECTIVE_EP for r in result.records)
        assert finder_service.pair_count_check(result.records).even

    def test_psh_dirac_has_two_fourfold_eps(self):
        result = finder_service.scan_degeneracies(model_service.zoo("psh-dirac-4b"))
        assert len(result.records) == 2
        for record in result.records:
            assert record.order == 4
            assert record.kind == DegeneracyKind.NON_DEFECTIVE_EP
            assert abs(abs(record.k_star[2]) - np.pi / 2) < 1e-6

    def test_results_do_not_depend_on_thread_count(self):
        model = model_service.zoo("pt-weyl-2b")
        single = finder_service.scan_degeneracies(model, ScanConfig(grid=41, threads=1))
        pooled = finder_service.scan_degeneracies(model, ScanConfig(grid=41, threads=4))
        assert single.model_dump() == pooled.model_dump()
