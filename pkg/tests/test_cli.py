import csv
import json

import pytest

from treedyn.cli import EXIT_INPUT, EXIT_INVALID, EXIT_OK, main
from treedyn.examples import build_counterexample, identity_map, star_rotation_map, star_tree, tent_map
from treedyn.fileformat import dump, dumps, load


def _write(tmp_path, name, fmap):
    path = tmp_path / name
    dump(fmap, str(path))
    return str(path)


def _json(capsys):
    return json.loads(capsys.readouterr().out)


def test_counterexample_writes_file(tmp_path, capsys):
    out = tmp_path / "c1.tree"
    assert main(["counterexample", "1", "--out", str(out)]) == EXIT_OK
    assert _json(capsys)["vertices"] == 5
    assert len(load(str(out)).tree.vertices) == 5


def test_counterexample_to_stdout(capsys):
    assert main(["counterexample", "2"]) == EXIT_OK
    assert capsys.readouterr().out == dumps(build_counterexample(2).fmap)


def test_counterexample_level_zero_is_input_error(capsys):
    assert main(["counterexample", "0"]) == EXIT_INPUT
    assert "error" in capsys.readouterr().err


def test_validate_exit_codes(tmp_path, capsys):
    good = _write(tmp_path, "tent.tree", tent_map(2))
    assert main(["validate", good]) == EXIT_OK
    assert _json(capsys)["ok"] is True

    text = dumps(tent_map(2)).replace("0 1/2 1 ", "0 1/4 1 ")
    bad = tmp_path / "overlap.tree"
    bad.write_text(text)
    assert main(["validate", str(bad)]) == EXIT_INVALID
    assert _json(capsys)["ok"] is False

    broken = tmp_path / "broken.tree"
    broken.write_text("[edges]\n0 a\n")
    assert main(["validate", str(broken)]) == EXIT_INPUT
    assert main(["validate", str(tmp_path / "missing.tree")]) == EXIT_INPUT


def test_cr_identity_all_cells(tmp_path, capsys):
    path = _write(tmp_path, "id.tree", identity_map(star_tree(3)))
    out = tmp_path / "cr.json"
    assert main(["cr", path, "--mesh", "1/8", "--out", str(out)]) == EXIT_OK
    res = _json(capsys)
    cells = res["cell_count"]
    assert all(row["count"] == cells for row in res["chain_recurrent"])
    with open(tmp_path / "cr.csv", newline="") as fh:
        rows = list(csv.reader(fh))
    assert rows[0][:3] == ["cell", "edge", "offset"]
    assert len(rows) == cells + 1


def test_entropy_identity_is_zero(tmp_path, capsys):
    path = _write(tmp_path, "id.tree", identity_map(star_tree(3)))
    out = tmp_path / "h.json"
    assert main(["entropy", path, "--nmax", "6", "--samples", "256", "--out", str(out)]) == EXIT_OK
    res = _json(capsys)
    assert abs(res["headline"]) < 1e-9
    assert (tmp_path / "h.csv").exists()


def test_entropy_restricted_star_rotation(tmp_path, capsys):
    path = _write(tmp_path, "rot.tree", star_rotation_map(3))
    assert main(["entropy", path, "--nmax", "8", "--restrict-to-cr", "--mesh", "1/16",
                 "--epsilon", "1/16,1/32"]) == EXIT_OK
    res = _json(capsys)
    assert res["restricted_to_cr"] is True
    assert res["headline"] <= 0.05


def test_entropy_bad_sequence(tmp_path, capsys):
    path = _write(tmp_path, "id.tree", identity_map(star_tree(3)))
    assert main(["entropy", path, "--sequence", "fibonacci"]) == EXIT_INPUT


def test_independence_identity_has_no_certificate(tmp_path, capsys):
    path = _write(tmp_path, "id.tree", identity_map(star_tree(3)))
    assert main(["independence", path, "--U", "0:1/2:1/8", "--V", "1:1/2:1/8", "--samples", "128"]) == EXIT_OK
    res = _json(capsys)
    assert res["no_certificate"] is True and res["certificate"] is None


def test_independence_tent_certificate_verifies(tmp_path, capsys):
    path = _write(tmp_path, "tent.tree", tent_map(2))
    assert main(["independence", path, "--U", "0:9/40:9/40", "--V", "0:31/40:9/40", "--samples", "4096",
                 "--kmax", "4", "--horizon", "6"]) == EXIT_OK
    res = _json(capsys)
    assert res["certificate"] is not None and len(res["certificate"]["times"]) >= 2


def test_independence_overlapping_balls(tmp_path, capsys):
    path = _write(tmp_path, "tent.tree", tent_map(2))
    assert main(["independence", path, "--U", "0:1/2:1/4", "--V", "0:5/8:1/4"]) == EXIT_INPUT


def test_iterate(tmp_path, capsys):
    path = _write(tmp_path, "tent.tree", tent_map(2))
    assert main(["iterate", path, "--point", "0:2/5", "--horizon", "6"]) == EXIT_OK
    res = _json(capsys)
    assert res["orbit"][:3] == [[0, "2/5"], [0, "4/5"], [0, "2/5"]]
    assert res["periodicity"]["period"] == 2
    assert main(["iterate", path, "--point", "nonsense"]) == EXIT_INPUT


def test_factor_collapse(tmp_path, capsys):
    spec = build_counterexample(3)
    path = _write(tmp_path, "c3.tree", spec.fmap)
    out = tmp_path / "f.tree"
    arg = f"{spec.top_edge[1, 1]},{spec.bottom_edge[1, 1]}"
    assert main(["factor", path, "--collapse", arg, "--out", str(out)]) == EXIT_OK
    g = load(str(out))
    assert len(g.tree.edges) == len(spec.tree.edges) - 2
    # a level-2 spike is not invariant
    assert main(["factor", path, "--collapse", str(spec.top_edge[2, 1])]) == EXIT_INPUT


@pytest.mark.parametrize("cmd", [
    ["entropy", "{p}", "--nmax", "5", "--samples", "200", "--seed", "3"],
    ["cr", "{p}", "--mesh", "1/16"],
])
def test_outputs_are_deterministic(tmp_path, capsys, cmd):
    path = _write(tmp_path, "tent.tree", tent_map(2))
    texts = []
    for k in range(2):
        out = tmp_path / f"run{k}.json"
        assert main([c.format(p=path) for c in cmd] + ["--out", str(out)]) == EXIT_OK
        capsys.readouterr()
        texts.append((out.read_bytes(), (tmp_path / f"run{k}.csv").read_bytes()))
    assert texts[0] == texts[1]


def test_float_mode(tmp_path, capsys):
    path = _write(tmp_path, "tent.tree", tent_map(2))
    assert main(["iterate", path, "--numeric", "float", "--point", "0:0.25", "--horizon", "3"]) == EXIT_OK
    assert _json(capsys)["orbit"][1] == [0, "0.5"]
    fpath = _write(tmp_path, "tentf.tree", tent_map(2).to_float())
    assert main(["iterate", fpath, "--numeric", "rational", "--point", "0:0.25"]) == EXIT_INPUT
