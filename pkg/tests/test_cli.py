import csv

import pytest

from nematic_gamma.cli import main


def rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


def test_profile(tmp_path):
    assert main(["profile", "--theta", "1.5708", "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / "profile.csv")
    assert all(float(x["rel_err"]) < 1e-3 for x in r)
    assert (tmp_path / "resolved_config.yaml").exists()


def test_e0_equator_preset(tmp_path):
    assert main(["e0", "--preset", "stuck", "--out", str(tmp_path)]) == 0
    (r,) = rows(tmp_path / "e0.csv")
    assert float(r["term_line"]) > 0 and float(r["term_G"]) == 0


def test_relax_then_extract(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("regime: {beta: 0.25, eta: 0.1}\ngrid: {h_radii: 0.125, box_half_radii: 1.5}\n"
                   "solver: {max_iter: 3}\n")
    out = tmp_path / "r"
    assert main(["relax", "--config", str(cfg), "--out", str(out)]) == 0
    assert len(rows(out / "trace.csv")) >= 2
    x = tmp_path / "x"
    assert main(["extract", "--config", str(cfg), "--checkpoint", str(out / "checkpoint.vol"),
                 "--out", str(x)]) == 0
    for name in ("S.txt", "T.obj", "F.obj", "G.csv", "extract_report.csv"):
        assert (x / name).exists()
    e = tmp_path / "e"
    assert main(["e0", "--config", str(cfg), "--S", str(x / "S.txt"), "--T", str(x / "T.obj"),
                 "--G", str(x / "G.csv"), "--out", str(e)]) == 0


def test_recover_plate(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("regime: {eta_list: [0.3]}\n")
    assert main(["recover", "--config", str(cfg), "--preset", "plate", "--out", str(tmp_path)]) == 0
    (r,) = rows(tmp_path / "limsup.csv")
    assert 1.0 <= float(r["ratio"]) < 1.1


@pytest.mark.parametrize("text", ["regime: {betta: 1}\n", "regime: {eta: 2}\n"])
def test_config_errors_exit_1(tmp_path, text):
    cfg = tmp_path / "bad.yaml"
    cfg.write_text(text)
    assert main(["relax", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1


def test_missing_file_exits_1(tmp_path):
    assert main(["e0", "--S", str(tmp_path / "nope.txt"), "--out", str(tmp_path)]) == 1


def test_validate_single_criterion(tmp_path):
    assert main(["validate", "--only", "2", "--out", str(tmp_path)]) == 0
    (r,) = rows(tmp_path / "validate.csv")
    assert r["passed"] in ("1", "True")


def test_e0_accepts_F_or_G(tmp_path):
    cfg = tmp_path / "c.yaml"
    cfg.write_text("grid: {h_radii: 0.125}\n")
    from nematic_gamma.config import load
    from nematic_gamma.domain import surface_mesh
    c = load(cfg)
    mesh = surface_mesh(c.shape(), c.h)
    up = mesh.normals[:, 2] > 0
    (tmp_path / "G.csv").write_text("vertex,G\n" + "".join(f"{i},{int(u)}\n" for i, u in enumerate(up)))
    (tmp_path / "F.csv").write_text("vertex,F\n" + "".join(f"{i},0\n" for i in range(len(up))))
    totals = []
    for name in ("G.csv", "F.csv"):
        out = tmp_path / name[0]
        assert main(["e0", "--config", str(cfg), "--G", str(tmp_path / name), "--out", str(out)]) == 0
        totals.append(float(rows(out / "e0.csv")[0]["total"]))
    assert totals[0] == pytest.approx(totals[1], rel=1e-12)
