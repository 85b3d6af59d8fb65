import json

import pytest

from domsplit import GeneratorSpec, build_with_truth, load_sequence
from domsplit.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestGen:
    def test_example1_window(self, tmp_path, capsys):
        out = tmp_path / "seq.json"
        code, _, _ = run(capsys, "gen", "--family", "example1",
                         "--window", "-10", "10", "--out", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        assert len(doc["entries"]) == 21
        j0 = next(e for e in doc["entries"] if e["j"] == 0)
        assert j0["m"] == [[4.0, 0.0], [-3.0, 0.0], [0.0, 0.0], [0.5, 0.0]]

    def test_diagonal_constant(self, tmp_path, capsys):
        out = tmp_path / "d.json"
        code, _, _ = run(capsys, "gen", "--family", "diagonal", "--lplus", "2",
                         "--lminus", "1", "--window", "0", "5", "--out", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        assert all(e["m"] == [[2.0, 0.0], [0.0, 0.0], [0.0, 0.0], [1.0, 0.0]]
                   for e in doc["entries"])

    def test_schrodinger_zeros(self, tmp_path, capsys):
        out = tmp_path / "s.json"
        code, _, _ = run(capsys, "gen", "--family", "schrodinger", "--energy", "3",
                         "--window", "0", "99", "--potential", "zeros", "--out", str(out))
        assert code == 0
        doc = json.loads(out.read_text())
        assert len(doc["entries"]) == 100
        assert doc["entries"][0]["m"] == [[3.0, 0.0], [-1.0, 0.0], [1.0, 0.0], [0.0, 0.0]]

    def test_invalid_spec_exit2(self, capsys):
        code, _, err = run(capsys, "gen", "--family", "diagonal", "--lplus", "1",
                           "--lminus", "1", "--window", "0", "5")
        assert code == 2
        assert "lambda" in err or "lplus" in err

    def test_roundtrip_matches_memory(self, tmp_path, capsys):
        out = tmp_path / "c.json"
        code, _, _ = run(capsys, "gen", "--family", "conjugated_dominated", "--seed", "5",
                         "--window", "-8", "8", "--out", str(out))
        assert code == 0
        seq = load_sequence(str(out))
        mem, _ = build_with_truth(GeneratorSpec("conjugated_dominated", (-8, 8), seed=5))
        for j in mem.indices():
            assert seq[j] == mem[j]

    def test_spec_file(self, tmp_path, capsys):
        spec_path = tmp_path / "spec.json"
        spec_path.write_text(json.dumps(
            {"family": "diagonal", "window": [0, 3], "params": {}, "seed": 0}))
        out = tmp_path / "seq.json"
        code, _, _ = run(capsys, "gen", "--spec", str(spec_path), "--out", str(out))
        assert code == 0
        assert len(json.loads(out.read_text())["entries"]) == 4


class TestProfiles:
    def test_example1_svg_pass_fi_fail(self, capsys):
        args = ["--family", "example1", "--window", "-20", "20", "--nmax", "20",
                "--format", "json"]
        code, out, _ = run(capsys, "svg", *args)
        assert code == 0
        doc = json.loads(out)
        assert doc["result"]["passed"] is True
        assert doc["result"]["mu"] >= 3.5
        code, out, _ = run(capsys, "fi", *args)
        assert code == 1
        assert json.loads(out)["result"]["passed"] is False

    def test_diag_both_pass(self, capsys):
        args = ["--family", "diagonal", "--window", "-20", "20", "--nmax", "15"]
        assert run(capsys, "svg", *args)[0] == 0
        assert run(capsys, "fi", *args)[0] == 0

    def test_rotation_svg_fail(self, capsys):
        code, _, _ = run(capsys, "svg", "--family", "unitary", "--params",
                         '{"angle": 0.5}', "--window", "-20", "20", "--nmax", "15")
        assert code == 1

    def test_csv_table(self, capsys):
        code, out, _ = run(capsys, "svg", "--family", "diagonal", "--window", "0", "20",
                           "--nmax", "10", "--format", "csv")
        assert code == 0
        lines = out.strip().splitlines()
        assert lines[0] == "j,n,ratio_log"
        assert len(lines) > 10

    def test_malformed_input_exit2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{not json")
        code, _, err = run(capsys, "svg", "--input", str(bad), "--nmax", "5")
        assert code == 2

    def test_window_too_short_exit2(self, capsys):
        code, _, _ = run(capsys, "svg", "--family", "diagonal", "--window", "0", "5",
                         "--nmax", "40")
        assert code == 2


class TestSplit:
    def test_example1_fields(self, capsys):
        code, out, _ = run(capsys, "split", "--family", "example1", "--window", "-45", "56",
                           "--jrange", "-10", "10", "--tol", "1e-10", "--format", "json")
        assert code == 0
        doc = json.loads(out)
        recs = {r["j"]: r for r in doc["result"]["fields"]}
        for j in range(-10, 11):
            assert abs(recs[j]["Eu"][0]) <= 1e-8
            assert abs(recs[j]["Es"][0] - 2.0 ** -abs(j)) <= 1e-8
        assert doc["result"]["min_separation"] == pytest.approx(
            2 * 2.0**-10 / (1 + 4.0**-10) ** 0.5, abs=1e-8)

    def test_unitary_inconclusive(self, capsys):
        code, out, _ = run(capsys, "split", "--family", "unitary", "--seed", "2",
                           "--window", "-10", "10", "--format", "json")
        assert code == 3
        assert json.loads(out)["result"]["failed_js"]


class TestDom:
    def test_example1_witnessed_violation(self, capsys):
        code, out, _ = run(capsys, "dom", "--family", "example1", "--window", "-40", "40",
                           "--jrange", "-20", "20", "--format", "json")
        assert code == 1
        doc = json.loads(out)
        assert doc["result"]["verdict"] == "not_dominated"
        assert any("condition (c)" in w for w in doc["result"]["witnesses"])

    def test_conjugated_dominated(self, capsys):
        code, out, _ = run(capsys, "dom", "--family", "conjugated_dominated", "--seed", "3",
                           "--window", "-30", "30", "--jrange", "-6", "6", "--format", "json")
        assert code == 0
        assert json.loads(out)["result"]["verdict"] == "dominated"

    def test_unitary_inconclusive(self, capsys):
        code, _, _ = run(capsys, "dom", "--family", "unitary", "--seed", "1",
                         "--window", "-15", "15")
        assert code == 3


class TestAp:
    def test_generated_family_passes(self, capsys):
        code, out, _ = run(capsys, "ap", "--family", "ap_family", "--params", '{"mu": 1e4}',
                           "--seed", "4", "--window", "0", "40", "--mu", "1e4",
                           "--nmax", "25", "--format", "json", "--table")
        assert code == 0
        doc = json.loads(out)
        assert doc["result"]["conditions_pass"] is True
        assert doc["result"]["residuals"]

    def test_rotation_fails_conditions(self, capsys):
        code, _, _ = run(capsys, "ap", "--family", "unitary", "--params", '{"angle": 0.4}',
                         "--window", "0", "20", "--mu", "10")
        assert code == 1

    def test_nmax_below_three_exit2(self, capsys):
        code, _, _ = run(capsys, "ap", "--family", "diagonal", "--window", "0", "20",
                         "--mu", "10", "--nmax", "2")
        assert code == 2


class TestReportContract:
    def test_config_embedded_and_deterministic(self, capsys):
        args = ["svg", "--family", "diagonal", "--window", "0", "20", "--nmax", "10",
                "--format", "json"]
        code1, out1, _ = run(capsys, *args)
        code2, out2, _ = run(capsys, *args)
        assert code1 == code2 == 0
        assert out1 == out2
        doc = json.loads(out1)
        assert doc["tool"] == "domsplit"
        assert doc["version"]
        assert doc["config"]["nmax"] == 10
        assert doc["config"]["generator"]["family"] == "diagonal"

    def test_both_input_and_family_rejected(self, tmp_path, capsys):
        seq = tmp_path / "s.json"
        run(capsys, "gen", "--family", "diagonal", "--window", "0", "5", "--out", str(seq))
        code, _, _ = run(capsys, "svg", "--input", str(seq), "--family", "diagonal",
                         "--window", "0", "5", "--nmax", "3")
        assert code == 2

    def test_input_window_restriction(self, tmp_path, capsys):
        seq = tmp_path / "s.json"
        run(capsys, "gen", "--family", "example1", "--window", "-10", "10", "--out", str(seq))
        code, out, _ = run(capsys, "svg", "--input", str(seq), "--window", "-5", "5",
                           "--nmax", "8", "--format", "json")
        assert code == 0
        assert json.loads(out)["config"]["window"] == [-5, 5]

    def test_declared_window_mismatch_exit2(self, tmp_path, capsys):
        seq = tmp_path / "s.json"
        run(capsys, "gen", "--family", "diagonal", "--window", "0", "5", "--out", str(seq))
        doc = json.loads(seq.read_text())
        doc["window"] = [0, 9]
        seq.write_text(json.dumps(doc))
        code, _, err = run(capsys, "svg", "--input", str(seq), "--nmax", "3")
        assert code == 2
        assert "window" in err

    def test_rank_one_vacuous_pass_exit0(self, tmp_path, capsys):
        from domsplit import Mat2C, MatrixSequence, dump_sequence

        seq = tmp_path / "r1.json"
        dump_sequence(MatrixSequence({j: Mat2C(1.0, 0.0, 0.0, 0.0) for j in range(12)}, 2.0),
                      str(seq))
        code, _, _ = run(capsys, "svg", "--input", str(seq), "--nmax", "8")
        assert code == 0

    def test_vanished_products_exit1(self, tmp_path, capsys):
        from domsplit import Mat2C, MatrixSequence, dump_sequence

        seq = tmp_path / "nil.json"
        nil = Mat2C(0.0, 1.0, 0.0, 0.0)
        dump_sequence(MatrixSequence({j: nil for j in range(12)}, 2.0), str(seq))
        code, _, _ = run(capsys, "svg", "--input", str(seq), "--nmax", "8")
        assert code == 1

    def test_atomic_write_to_file(self, tmp_path, capsys):
        out = tmp_path / "rep.json"
        code, _, _ = run(capsys, "svg", "--family", "diagonal", "--window", "0", "20",
                         "--nmax", "10", "--format", "json", "--out", str(out))
        assert code == 0
        assert json.loads(out.read_text())["command"] == "svg"
        assert not (tmp_path / "rep.json.tmp").exists()
