import json

import numpy as np

from qed2lattice import report


def test_clean_handles_numpy_and_complex():
    rep = report.make_report("x", {"a": np.int64(3)},
                             {"z": 1 + 2j, "arr": np.arange(2.0), "bad": float("nan"),
                              "flag": np.bool_(True)})
    s = report.dumps(rep)
    back = json.loads(s)
    assert back["results"]["z"] == {"re": 1.0, "im": 2.0}
    assert back["results"]["bad"] == "nan"
    assert back["results"]["flag"] is True
    assert back["version"].startswith("qed2lattice ")
    assert set(back) == {"command", "version", "config", "fitted_constants", "passed", "results"}


def test_grid_csv_roundtrip(tmp_path):
    g = (np.arange(2 * 2 * 2 * 2) + 0.5j).reshape(2, 2, 2, 2)
    p = report.write_grid_csv(tmp_path / "g.csv", g)
    rows = report.read_csv(p)
    assert tuple(rows[0]) == report.GRID_COLUMNS and len(rows) == 16
    r = rows[5]
    i, j, mu, nu = (int(r[k]) for k in ("x0_index", "x1_index", "mu", "nu_or_spinpair"))
    assert complex(float(r["re"]), float(r["im"])) == g[i, j, mu, nu]
    spin = report.read_csv(report.write_grid_csv(tmp_path / "f.csv", g, spin=True))
    assert spin[1]["mu"] == "" and spin[1]["nu_or_spinpair"] == "01"


def test_tensor_scan_gn_csv(tmp_path):
    t = report.read_csv(report.write_tensor_csv(tmp_path / "t.csv", [(0.0, 1.0, 0, 1, 2 - 1j)],
                                                (1, 3), 4))
    assert t[0]["window_h"] == "1:3" and t[0]["N"] == "4" and float(t[0]["im"]) == -1.0
    s = report.read_csv(report.write_scan_csv(tmp_path / "s.csv",
                                              [{"N": 4, "n": 16, "lambda": 0.01, "delta": 1e-3}]))
    assert tuple(s[0]) == report.SCAN_COLUMNS and s[0]["slope"] == ""
    gn = report.read_csv(report.write_gn_csv(tmp_path / "n.csv",
                                             [{"N": 1, "sum": 1.0, "increment": None}]))
    assert gn[0]["increment"] == ""


def test_figures_are_deterministic(tmp_path):
    g = np.random.default_rng(0).normal(size=(8, 8, 2, 2))
    a = report.plot_grid(tmp_path / "a.png", g).read_bytes()
    b = report.plot_grid(tmp_path / "b.png", g).read_bytes()
    assert a[:8] == b"\x89PNG\r\n\x1a\n" and a == b
    p = report.plot_xy(tmp_path / "xy.png", {"u": ([1, 2], [3, 4]), "v": ([1, 2], [1, 1])},
                       "x", "y", logy=True)
    assert p.stat().st_size > 0
