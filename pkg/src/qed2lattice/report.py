"""Report persistence: CSV dumps, JSON reports and Agg-rendered figures."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np
import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

from . import __version__

GRID_COLUMNS = ("x0_index", "x1_index", "mu", "nu_or_spinpair", "re", "im")
TENSOR_COLUMNS = ("p0", "p1", "mu", "nu", "re", "im", "window_h", "N")
SCAN_COLUMNS = ("N", "n", "lambda", "delta", "slope")
GN_COLUMNS = ("N", "sum", "increment")

plt.rcParams.update({
    "figure.figsize": (5.0, 3.6),
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "savefig.bbox": "tight",
    "savefig.dpi": 120,
})


def version_string() -> str:
    return f"qed2lattice {__version__}"


def _clean(x):
    """JSON-safe copy: numpy scalars, complex numbers and non-finite floats."""
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (complex, np.complexfloating)):
        return {"re": _clean(float(x.real)), "im": _clean(float(x.imag))}
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


def make_report(command: str, config: dict, results: dict, constants: dict | None = None,
                passed: bool | None = None) -> dict:
    return {"command": command, "version": version_string(), "config": _clean(config),
            "fitted_constants": _clean(constants or {}), "passed": passed,
            "results": _clean(results)}


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True)


def write_json(path, report: dict) -> Path:
    path = Path(path)
    path.write_text(dumps(report) + "\n")
    return path


def _write_csv(path, columns, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def grid_rows(grid: np.ndarray, spin: bool = False):
    """Rows of a (n, n, 2, 2) position-space grid.  Boson grids give (mu, nu);
    fermion grids give mu = "" and the spin pair as "st"."""
    n0, n1 = grid.shape[:2]
    for i in range(n0):
        for j in range(n1):
            for a in range(grid.shape[2]):
                for b in range(grid.shape[3]):
                    v = complex(grid[i, j, a, b])
                    if spin:
                        yield (i, j, "", f"{a}{b}", v.real, v.imag)
                    else:
                        yield (i, j, a, b, v.real, v.imag)


def write_grid_csv(path, grid: np.ndarray, spin: bool = False) -> Path:
    return _write_csv(path, GRID_COLUMNS, grid_rows(grid, spin))


def write_tensor_csv(path, rows, window_h=None, N=None) -> Path:
    """rows of (p0, p1, mu, nu, value)."""
    wh = "" if window_h is None else f"{window_h[0]}:{window_h[1]}"
    out = ((p0, p1, mu, nu, v.real, v.imag, wh, N) for p0, p1, mu, nu, v in rows)
    return _write_csv(path, TENSOR_COLUMNS, out)


def write_scan_csv(path, rows) -> Path:
    out = ((r["N"], r["n"], r["lambda"], r["delta"], r.get("slope")) for r in rows)
    return _write_csv(path, SCAN_COLUMNS, out)


def write_gn_csv(path, rows) -> Path:
    return _write_csv(path, GN_COLUMNS, ((r["N"], r["sum"], r["increment"]) for r in rows))


def read_csv(path) -> list[dict]:
    with Path(path).open(newline="") as fh:
        return list(csv.DictReader(fh))


# -- figures -------------------------------------------------------------------

def _save(fig, path) -> Path:
    path = Path(path)
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
    return path


def plot_grid(path, grid: np.ndarray, title: str = "", log: bool = True) -> Path:
    """Heat map of |grid| (max over decorations), origin shifted to the centre."""
    v = np.abs(grid)
    if v.ndim > 2:
        v = v.reshape(v.shape[:2] + (-1,)).max(axis=-1)
    v = np.fft.fftshift(v)
    fig, ax = plt.subplots()
    data = np.log10(np.maximum(v, 1e-300)) if log else v
    im = ax.imshow(data.T, origin="lower", cmap="viridis")
    fig.colorbar(im, ax=ax, label=r"$\log_{10}|g|$" if log else "|g|")
    ax.set_xlabel(r"$x_0$ index")
    ax.set_ylabel(r"$x_1$ index")
    if title:
        ax.set_title(title)
    return _save(fig, path)


def plot_xy(path, series: dict, xlabel: str, ylabel: str, logy: bool = False,
            title: str = "") -> Path:
    """series: label -> (x, y)."""
    fig, ax = plt.subplots()
    for label, (x, y) in series.items():
        ax.plot(x, y, "o-", ms=3, lw=1, label=label)
    if logy:
        ax.set_yscale("log")
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    if title:
        ax.set_title(title)
    if len(series) > 1:
        ax.legend(frameon=False)
    return _save(fig, path)


def plot_extrapolation(path, series: dict, targets: dict | None = None) -> Path:
    """series: label -> ExtrapolationReport.as_dict(); the limit is drawn at x = 0."""
    fig, ax = plt.subplots()
    for label, s in series.items():
        (line,) = ax.plot(s["x"], s["values"], "o", ms=3, label=label)
        xs = np.linspace(0.0, max(s["x"]), 50)
        ax.plot(xs, s["limit"] + s.get("c", 0.0) * xs ** s["exponent"],
                lw=0.8, color=line.get_color())
        if targets and label in targets:
            ax.axhline(targets[label], ls=":", lw=0.8, color=line.get_color())
    ax.set_xlabel(r"$|Q|$")
    ax.set_ylabel("coefficient")
    ax.legend(frameon=False)
    return _save(fig, path)
