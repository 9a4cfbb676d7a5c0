import csv
import io
import json
import numpy as np
import pytest
from app.main import cli
from app.services.finder_service import finder_service
from app.utils.exceptions import NumericFailureException


def read_csv(text):
    return list(csv.DictReader(io.StringIO(text)))


class TestZooAndSymcheck:

    def test_zoo_list(self, runner):
        result = runner.invoke(cli, ["zoo-list"])
        assert result.exit_code == 0
        entries = {e["name"]: e for e in json.loads(result.stdout)["data"]}
        assert set(entries) == {"pt-weyl-2b", "psh-dirac-4b", "onp-2b", "edge-2b", "trsdag-2b"}
        assert entries["trsdag-2b"]["published"] is False
        assert entries["psh-dirac-4b"]["symmetry"] == "psH"
        assert entries["onp-2b"]["generator"] is None
        assert entries["pt-weyl-2b"]["defaults"] == {"t": 1.0, "V": 1.0, "lambda0": 1.0}

    @pytest.mark.parametrize("args", [
        ["--model", "zoo:pt-weyl-2b", "--symmetry", "PT"],
        ["--model", "zoo:psh-dirac-4b"],
        ["--model", "zoo:trsdag-2b", "--samples", "100"],
    ])
    def test_symcheck_passes(self, runner, args):
        result = runner.invoke(cli, ["symcheck", *args])
        assert result.exit_code == 0
        payload = json.loads(result.stdout)
        assert payload["data"]["pass"] is True
        assert payload["data"]["max_residual"] < 1e-10

    def test_symcheck_failure_exits_with_one(self, runner):
        result = runner.invoke(cli, ["symcheck", "--model", "zoo:onp-2b", "--symmetry", "PT"])
        assert result.exit_code == 1
        assert json.loads(result.stdout)["data"]["pass"] is False

    def test_symcheck_without_a_symmetry(self, runner):
        result = runner.invoke(cli, ["symcheck", "--model", "zoo:edge-2b"])
        assert result.exit_code == 2
        assert _first_json(result.stderr)["detail"][0]["type"] == "missing_symmetry"

    def test_user_generator(self, runner, tmp_path):
        path = tmp_path / "identity.json"
        path.write_text(json.dumps([[1, 0], [0, 1]]))
        result = runner.invoke(cli, ["symcheck", "--model", "zoo:pt-weyl-2b", "--symmetry", "PT",
                                     "--generator", str(path)])
        assert result.exit_code == 0

    def test_malformed_generator_file(self, runner, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps([[1, 2], [3]]))
        result = runner.invoke(cli, ["symcheck", "--model", "zoo:pt-weyl-2b", "--symmetry", "PT",
                                     "--generator", str(path)])
        assert result.exit_code == 2
        assert _first_json(result.stderr)["detail"][0]["type"] == "shape_error"

    def test_unknown_model(self, runner):
        result = runner.invoke(cli, ["symcheck", "--model", "zoo:nope", "--symmetry", "PT"])
        assert result.exit_code == 2
        assert _first_json(result.stderr)["detail"][0]["type"] == "unknown_model"


class TestBands:

    def test_constant_model_has_flat_bands(self, runner, constant_model_file):
        result = runner.invoke(cli, ["bands", "--model", str(constant_model_file),
                                     "--path", "0,0,0;1,0,0", "--samples", "4"])
        assert result.exit_code == 0
        rows = read_csv(result.stdout)
        assert list(rows[0]) == ["arc_index", "kx", "ky", "kz", "band_index", "re_E", "im_E"]
        assert len(rows) == 10
        assert [float(r["re_E"]) for r in rows[:2]] == [-1.0, 1.0]
        assert {float(r["re_E"]) for r in rows} == {-1.0, 1.0}
        assert float(rows[-1]["kx"]) == pytest.approx(np.pi)

    def test_pt_weyl_real_parts_merge_inside_the_fermi_segment(self, runner):
        result = runner.invoke(cli, ["bands", "--model", "zoo:pt-weyl-2b",
                                     "--path", "0,0,0.5;1,1,0.5", "--samples", "40"])
        assert result.exit_code == 0
        rows = read_csv(result.stdout)
        by_arc = {}
        for row in rows:
            by_arc.setdefault(int(row["arc_index"]), []).append(row)
        inside = 0
        for arc_rows in by_arc.values():
            s = float(arc_rows[0]["kx"])
            if np.cos(s) < 1 / 3 - 0.05:
                inside += 1
                assert float(arc_rows[0]["re_E"]) == pytest.approx(float(arc_rows[1]["re_E"]), abs=1e-9)
        assert inside > 0

    def test_psh_dirac_bands_are_doubly_degenerate_on_the_diagonal(self, runner):
        result = runner.invoke(cli, ["bands", "--model", "zoo:psh-dirac-4b",
                                     "--path", "0,0,0.3;1,1,0.3", "--samples", "10"])
        assert result.exit_code == 0
        rows = read_csv(result.stdout)
        assert len(rows) == 4 * 11
        for arc in range(11):
            energies = np.array([
                complex(float(r["re_E"]), float(r["im_E"])) for r in rows if int(r["arc_index"]) == arc
            ])
            for value in energies:
                assert np.sum(np.abs(energies - value) < 1e-6) >= 2

    @pytest.mark.parametrize("path", ["0,0;1,1,1", "0,0,0", "a,b,c;1,1,1"])
    def test_malformed_waypoints(self, runner, path):
        result = runner.invoke(cli, ["bands", "--model", "zoo:pt-weyl-2b", "--path", path])
        assert result.exit_code == 2

    def test_output_file_and_manifest_replay(self, runner, tmp_path):
        out = tmp_path / "bands.csv"
        args = ["bands", "--model", "zoo:edge-2b?lambda0=2.3", "--path", "0,0,0;0.5,0.5,0",
                "--samples", "5", "--out", str(out)]
        assert runner.invoke(cli, args).exit_code == 0
        first = out.read_text()
        manifest = json.loads((tmp_path / "bands.csv.manifest.json").read_text())
        assert manifest["command"] == "bands"
        assert manifest["params"]["lambda0"] == 2.3
        assert manifest["record_counts"]["rows"] == 12
        assert runner.invoke(cli, manifest["config"]["args"]).exit_code == 0
        assert out.read_text() == first


class TestClassifyAndScan:

    def test_classify_defective_point(self, runner):
        result = runner.invoke(cli, ["classify", "--model", "zoo:pt-weyl-2b", "--k", "0,0.5,0.5"])
        assert result.exit_code == 0
        record = json.loads(result.stdout)["data"]
        assert record["kind"] == "defective_ep"
        assert record["jordan_structure"] == [2]
        assert np.allclose(record["eigenvalue"], [0, 0], atol=1e-7)

    def test_classify_regular_point(self, runner):
        result = runner.invoke(cli, ["classify", "--model", "zoo:pt-weyl-2b", "--k", "0.1,0.07,0.03"])
        assert result.exit_code == 2
        assert _first_json(result.stderr)["detail"][0]["type"] == "not_a_degeneracy"

    def test_numeric_failure_exits_with_three(self, runner, monkeypatch):
        def fail(*args, **kwargs):
            raise NumericFailureException("eigensolver did not converge", np.eye(2))
        monkeypatch.setattr(finder_service, "scan_degeneracies", fail)
        result = runner.invoke(cli, ["scan", "--model", "zoo:pt-weyl-2b", "--grid", "5"])
        assert result.exit_code == 3
        detail = _first_json(result.stderr)["detail"][0]
        assert detail["type"] == "numeric_failure"
        assert detail["matrix"] == [[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]

    def test_invalid_grid_is_a_usage_error(self, runner):
        result = runner.invoke(cli, ["scan", "--model", "zoo:pt-weyl-2b", "--grid", "1"])
        assert result.exit_code == 2

    @pytest.mark.slow
    def test_scan_pt_weyl(self, runner):
        result = runner.invoke(cli, ["scan", "--model", "zoo:pt-weyl-2b", "--threads", "2"])
        assert result.exit_code == 0
        payload = json.loads(result.stdout)
        assert [r["kind"] for r in payload["data"]] == ["non_defective_ep", "non_defective_ep"]
        assert payload["manifest"]["record_counts"]["non_defective_ep"] == 2


class TestSurfacesAndSlabs:

    def test_surfaces_per_field(self, runner):
        result = runner.invoke(cli, ["surfaces", "--model", "zoo:pt-weyl-2b", "--field", "d_yI",
                                     "--field", "d_zR", "--fix", "x=0", "--grid", "30"])
        assert result.exit_code == 0
        rows = read_csv(result.stdout)
        assert {r["field"] for r in rows} == {"d_yI", "d_zR"}
        assert all(float(r["kx"]) == 0 for r in rows)

    def test_joint_crossings_share_one_label(self, runner):
        result = runner.invoke(cli, ["surfaces", "--model", "zoo:onp-2b", "--field", "eta_R",
                                     "--field", "eta_I", "--joint", "--grid", "21"])
        assert result.exit_code == 0
        assert {r["field"] for r in read_csv(result.stdout)} <= {"eta_R&eta_I"}

    def test_field_without_zeros_gives_header_only(self, runner):
        result = runner.invoke(cli, ["surfaces", "--model", "zoo:pt-weyl-2b", "--field", "d_xI",
                                     "--grid", "11"])
        assert result.exit_code == 0
        assert result.stdout == "kx,ky,kz,field\n"

    def test_invalid_field(self, runner):
        result = runner.invoke(cli, ["surfaces", "--model", "zoo:pt-weyl-2b", "--field", "nu_R"])
        assert result.exit_code == 2
        assert "d_xR" in _first_json(result.stderr)["detail"][0]["msg"]

    def test_trivial_slab(self, runner, constant_model_file):
        result = runner.invoke(cli, ["obc", "--model", str(constant_model_file), "--sites", "2",
                                     "--fix", "x=0", "--steps", "3"])
        assert result.exit_code == 0
        rows = read_csv(result.stdout)
        assert len(rows) == 3 * 4
        assert list(rows[0]) == ["sweep", "state_index", "re_E", "im_E", "edge_weight", "boundary"]

    def test_edge_model_mid_gap_states(self, runner):
        result = runner.invoke(cli, ["obc", "--model", "zoo:edge-2b", "--axis", "y", "--sweep-axis", "x",
                                     "--fix", "z=0", "--start", "0.5", "--stop", "0.5", "--steps", "1"])
        assert result.exit_code == 0
        rows = read_csv(result.stdout)
        mid_gap = [r for r in rows if abs(complex(float(r["re_E"]), float(r["im_E"]))) < 1e-9]
        assert len(mid_gap) == 2
        for row in mid_gap:
            assert row["boundary"] == "true"
            assert float(row["edge_weight"]) > 0.9

    def test_sweep_along_open_axis_is_rejected(self, runner):
        result = runner.invoke(cli, ["obc", "--model", "zoo:edge-2b", "--axis", "y", "--sweep-axis", "y",
                                     "--fix", "x=0"])
        assert result.exit_code == 2

    def test_single_site_slab_is_rejected(self, runner):
        result = runner.invoke(cli, ["obc", "--model", "zoo:edge-2b", "--sites", "1", "--fix", "x=0"])
        assert result.exit_code == 2


def _first_json(stream):
    """The error payload printed on stderr, ignoring any log lines."""
    start = stream.index("{")
    payload, _ = json.JSONDecoder().raw_decode(stream[start:])
    return payload
