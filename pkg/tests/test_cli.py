import csv
import json
from pathlib import Path

import numpy as np
import pytest

from randersgeo import cli
from randersgeo.grid import contour_from_json, read_rsf1, write_pgm


@pytest.fixture(scope="module")
def fixture_dir(tmp_path_factory):
    out = tmp_path_factory.mktemp("fixtures")
    assert cli.main(["make-fixture", "disk", "--seed", "1",
                     "--out", str(out)]) == 0
    return out


def landmarks_arg(contour_path, m=3, seed=7):
    from randersgeo.evolve import sample_landmarks

    gtc = contour_from_json(Path(contour_path).read_text())
    lm = sample_landmarks(gtc, m, seed=seed)
    return ";".join(f"{p[0]:.4f},{p[1]:.4f}" for p in lm.points)


def test_make_fixture_outputs(fixture_dir):
    assert (fixture_dir / "disk.pgm").exists()
    assert (fixture_dir / "disk.gt.pgm").exists()
    assert (fixture_dir / "disk.gt.contour.json").exists()


def test_dump_config(capsys):
    assert cli.main(["dump-config"]) == 0
    cfg = json.loads(capsys.readouterr().out)
    assert cfg["tube_width"] == 15.0


def test_segment_fixture_run(fixture_dir, tmp_path):
    lm = landmarks_arg(fixture_dir / "disk.gt.contour.json")
    out = tmp_path / "run"
    code = cli.main([
        "segment", "--image", str(fixture_dir / "disk.pgm"),
        "--landmarks", lm, "--gt", str(fixture_dir / "disk.gt.pgm"),
        "--out", str(out), "--seed", "7",
    ])
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    assert report["converged"] is True
    assert report["jaccard"] >= 0.97
    assert (out / "final.mask.pgm").exists()
    assert (out / "final.contour.json").exists()
    assert (out / "iter001.contour.json").exists()
    with open(out / "energy.csv") as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["iteration", "psi", "length", "energy", "area_delta"]
    assert len(rows) - 1 == report["iterations"]


def test_segment_missing_image_exit_3(tmp_path):
    code = cli.main(["segment", "--image", str(tmp_path / "missing.pgm"),
                     "--landmarks", "10,10;30,10;20,30",
                     "--out", str(tmp_path / "o")])
    assert code == 3


def test_segment_max_iters_exit_2(fixture_dir, tmp_path):
    lm = landmarks_arg(fixture_dir / "disk.gt.contour.json")
    code = cli.main([
        "segment", "--image", str(fixture_dir / "disk.pgm"),
        "--landmarks", lm, "--out", str(tmp_path / "o"),
        "--set", "max_iters=1", "--set", "stop_area_frac=0.0",
    ])
    assert code == 2


def test_eval_command(tmp_path, capsys):
    a = np.zeros((10, 10), dtype=bool)
    a[:, :5] = True
    b = np.ones((10, 10), dtype=bool)
    pa, pb = tmp_path / "a.pgm", tmp_path / "b.pgm"
    write_pgm(pa, a)
    write_pgm(pb, b)
    assert cli.main(["eval", str(pa), str(pa)]) == 0
    assert capsys.readouterr().out.strip() == "1.000000"
    assert cli.main(["eval", str(pa), str(pb)]) == 0
    assert capsys.readouterr().out.strip() == "0.500000"
    c = np.zeros((8, 8), dtype=bool)
    pc = tmp_path / "c.pgm"
    write_pgm(pc, c)
    assert cli.main(["eval", str(pa), str(pc)]) == 3  # size mismatch


def test_distance_isotropic_artifacts(tmp_path):
    out = tmp_path / "d"
    code = cli.main(["distance", "--metric", "isotropic", "--size", "101",
                     "--source", "50,50", "--target", "90,50",
                     "--out", str(out)])
    assert code == 0
    grid, planes = read_rsf1(out / "distance.rsf1")
    assert planes.shape == (1, 101, 101)
    assert abs(planes[0, 50, 90] - 40.0) <= 0.5
    assert (out / "levels.png").exists()
    geo = contour_from_json((out / "geodesic.json").read_text())
    assert np.abs(geo.points[:, 1] - 50.0).max() <= 0.5


def test_distance_rotational_flag(tmp_path):
    out = tmp_path / "f"
    code = cli.main(["distance", "--rotational", "--a1", "0.0", "--a2", "0.0",
                     "--size", "101", "--source", "20,50",
                     "--target", "80,50", "--out", str(out)])
    assert code == 0
    geo = contour_from_json((out / "geodesic.json").read_text())
    assert np.abs(geo.points[:, 1] - 50.0).max() <= 0.5


def test_bench_single_run_zero_std(fixture_dir, tmp_path):
    out = tmp_path / "bench.csv"
    code = cli.main(["bench", "--fixture", "disk", "--fixture-seed", "1",
                     "--runs", "1", "--m", "3", "--seed", "3",
                     "--out", str(out)])
    assert code == 0
    with open(out) as f:
        rows = list(csv.reader(f))
    assert rows[0] == ["Mean", "Max", "Min", "Std"]
    mean, mx, mn, std = map(float, rows[1])
    assert std == 0.0 and mean == mx == mn
    assert mean >= 0.95


def test_bench_deterministic(fixture_dir, tmp_path):
    args = ["bench", "--fixture", "disk", "--fixture-seed", "1",
            "--runs", "2", "--m", "3", "--seed", "5"]
    o1 = tmp_path / "b1.csv"
    o2 = tmp_path / "b2.csv"
    assert cli.main(args + ["--out", str(o1)]) == 0
    assert cli.main(args + ["--out", str(o2)]) == 0
    assert o1.read_bytes() == o2.read_bytes()
