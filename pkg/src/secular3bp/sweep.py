"""Parameter-plane sweeps with deterministic output.

A sweep evaluates the full pipeline (equilibrium -> spatial classification
-> frequencies) on a rectangular (a, e_J) grid.  Cells are independent and
may be dispatched to a process pool; results are assembled in row-major
cell order regardless of completion order, and every float is written with
shortest round-trip formatting, so identical inputs produce byte-identical
CSV no matter how many workers ran.  A failing cell is recorded as a typed
failure and never aborts the sweep.
"""

import json
import math
import time
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from ._version import __version__ as _pkg_version
from .averaging import DEFAULT_SEPARATION_THRESHOLD, QuadratureSpec, SeparationGuard
from .equilibrium import (
    STATUS_CROSSING,
    STATUS_FOUND,
    STATUS_MULTIPLE_ROOTS,
    STATUS_NO_ROOT,
    find_equilibrium,
)
from .errors import NonConvergedError, OrbitCrossingError
from .geometry import OrbitConfig
from .stability import INCONCLUSIVE, classify_spatial

__all__ = [
    "CSV_COLUMNS",
    "CellResult",
    "SweepGrid",
    "evaluate_cell",
    "run_sweep",
    "sweep_csv_text",
    "write_sweep_csv",
    "write_metadata_json",
    "resonance_csv_text",
]

CSV_COLUMNS = (
    "a", "e_J", "status", "e_star", "Rbar", "Abar", "Bbar", "Cbar",
    "hess_pp", "hess_qq", "hess_pq", "omega_plane", "omega_z", "ratio",
    "err_R", "err_A", "err_C",
)

CSV_SCHEMA_VERSION = "1"

STATUS_ORBIT_CROSSING = "ORBIT_CROSSING"
STATUS_NON_CONVERGED = "NON_CONVERGED"
STATUS_INCONCLUSIVE = "INCONCLUSIVE"


@dataclass(frozen=True, eq=False)
class CellResult:
    """Outcome of one (a, e_J) cell: a stability record or a typed failure."""

    a: float
    e_J: float
    status: str
    equilibrium: object = None
    stability: object = None
    message: str = ""

    def csv_row(self):
        eq, st = self.equilibrium, self.stability
        coeffs = st.coefficients if st is not None else None
        hess = eq.hessian if eq is not None else None
        fields = [
            _fmt(self.a),
            _fmt(self.e_J),
            self.status,
            _fmt(eq.e_star) if eq is not None and math.isfinite(eq.e_star) else "",
            _fmt(coeffs.Rbar) if coeffs is not None else "",
            _fmt(coeffs.Abar) if coeffs is not None else "",
            _fmt(coeffs.Bbar) if coeffs is not None else "",
            _fmt(coeffs.Cbar) if coeffs is not None else "",
            _fmt(hess[0, 0]) if hess is not None else "",
            _fmt(hess[1, 1]) if hess is not None else "",
            _fmt(hess[0, 1]) if hess is not None else "",
            _fmt(st.omega_plane) if st is not None and math.isfinite(st.omega_plane) else "",
            _fmt(st.omega_z) if st is not None and math.isfinite(st.omega_z) else "",
            _fmt(st.ratio) if st is not None and math.isfinite(st.ratio) else "",
            _fmt(coeffs.err["Rbar"]) if coeffs is not None else "",
            _fmt(coeffs.err["Abar"]) if coeffs is not None else "",
            _fmt(coeffs.err["Cbar"]) if coeffs is not None else "",
        ]
        return ",".join(fields)


def _fmt(x):
    return repr(float(x))


@dataclass(eq=False)
class SweepGrid:
    """Rectangular (a, e_J) grid with per-cell results and sweep metadata."""

    a_min: float
    a_max: float
    n_a: int
    eJ_min: float
    eJ_max: float
    n_eJ: int
    mu: float
    quad: QuadratureSpec
    cells: list = field(default_factory=list)
    metadata: dict = field(default_factory=dict)

    def a_values(self):
        return np.linspace(self.a_min, self.a_max, self.n_a)

    def eJ_values(self):
        return np.linspace(self.eJ_min, self.eJ_max, self.n_eJ)

    def cell(self, i, j) -> CellResult:
        return self.cells[i * self.n_eJ + j]

    def ratio_array(self):
        """(n_a, n_eJ) array of frequency ratios, NaN where unavailable."""
        out = np.full((self.n_a, self.n_eJ), np.nan)
        for i in range(self.n_a):
            for j in range(self.n_eJ):
                st = self.cell(i, j).stability
                if st is not None and math.isfinite(st.ratio):
                    out[i, j] = st.ratio
        return out

    def found_cells(self):
        return [c for c in self.cells
                if c.status in (STATUS_FOUND, STATUS_MULTIPLE_ROOTS)]


def evaluate_cell(a, e_J, mu, quad: QuadratureSpec) -> CellResult:
    """Full pipeline at one parameter point, mapped to a typed cell result.

    Invalid parameters raise ValueError; numerical failures of any stage
    are captured as typed cell statuses, never raised.
    """
    cfg = OrbitConfig(a=a, e_J=e_J, mu=mu)
    try:
        guard = SeparationGuard(cfg)
        eq = find_equilibrium(cfg, quad, guard=guard)
        if eq.status == STATUS_CROSSING:
            return CellResult(a=a, e_J=e_J, status=STATUS_ORBIT_CROSSING,
                              equilibrium=eq, message=eq.message)
        if eq.status == STATUS_NO_ROOT:
            return CellResult(a=a, e_J=e_J, status=STATUS_NO_ROOT,
                              equilibrium=eq, message=eq.message)
        stab = classify_spatial(cfg, eq, quad, guard=guard)
        status = STATUS_INCONCLUSIVE if stab.spatial_verdict == INCONCLUSIVE \
            else eq.status
        return CellResult(a=a, e_J=e_J, status=status, equilibrium=eq,
                          stability=stab)
    except OrbitCrossingError as exc:
        return CellResult(a=a, e_J=e_J, status=STATUS_ORBIT_CROSSING,
                          message=str(exc))
    except NonConvergedError as exc:
        return CellResult(a=a, e_J=e_J, status=STATUS_NON_CONVERGED,
                          message=str(exc))
    except Exception as exc:  # crash isolation: record, never poison the sweep
        return CellResult(a=a, e_J=e_J, status=STATUS_NON_CONVERGED,
                          message=f"unexpected {type(exc).__name__}: {exc}")


def _cell_worker(args):
    a, e_J, mu, quad = args
    return evaluate_cell(a, e_J, mu, quad)


def run_sweep(a_range, eJ_range, mu=0.0, quad=None, jobs=1) -> SweepGrid:
    """Populate a SweepGrid over a rectangular parameter window.

    Args:
        a_range: (a_min, a_max, n_a).
        eJ_range: (eJ_min, eJ_max, n_eJ).
        mu: Planet mass fraction.
        quad: QuadratureSpec (defaults apply when None).
        jobs: Process count; 1 runs in-process.  Output is byte-identical
            for any worker count.

    Returns:
        SweepGrid with row-major cells and reproducibility metadata.
    """
    if quad is None:
        quad = QuadratureSpec()
    a_min, a_max, n_a = a_range
    eJ_min, eJ_max, n_eJ = eJ_range
    if n_a < 1 or n_eJ < 1:
        raise ValueError("grid needs at least one point per axis")

    grid = SweepGrid(a_min=float(a_min), a_max=float(a_max), n_a=int(n_a),
                     eJ_min=float(eJ_min), eJ_max=float(eJ_max),
                     n_eJ=int(n_eJ), mu=float(mu), quad=quad)
    jobs_list = [
        (float(av), float(ev), float(mu), quad)
        for av in grid.a_values()
        for ev in grid.eJ_values()
    ]

    t0 = time.time()
    if jobs <= 1:
        cells = [_cell_worker(j) for j in jobs_list]
    else:
        # Workers fork after warmup so compiled kernels are inherited.
        kernels.warmup()
        import multiprocessing

        with multiprocessing.Pool(processes=jobs) as pool:
            cells = pool.map(_cell_worker, jobs_list, chunksize=4)
    wall = time.time() - t0

    grid.cells = cells
    grid.metadata = {
        "schema": f"secular3bp-sweep-v{CSV_SCHEMA_VERSION}",
        "csv_columns": list(CSV_COLUMNS),
        "package_version": _pkg_version,
        "kernel_backend": kernels.BACKEND,
        "a_min": grid.a_min, "a_max": grid.a_max, "n_a": grid.n_a,
        "eJ_min": grid.eJ_min, "eJ_max": grid.eJ_max, "n_eJ": grid.n_eJ,
        "mu": grid.mu,
        "quad_n_ast": quad.n_ast, "quad_n_pl": quad.n_pl,
        "quad_tol": quad.tol, "quad_max_n": quad.max_n,
        "separation_threshold": DEFAULT_SEPARATION_THRESHOLD,
        "cell_order": "row-major (a outer, e_J inner)",
        "jobs": jobs,
        "wall_time_s": wall,
    }
    return grid


def sweep_csv_text(grid: SweepGrid) -> str:
    lines = [",".join(CSV_COLUMNS)]
    lines.extend(cell.csv_row() for cell in grid.cells)
    return "\n".join(lines) + "\n"


def write_sweep_csv(grid: SweepGrid, path):
    with open(path, "w", newline="") as fh:
        fh.write(sweep_csv_text(grid))


def write_metadata_json(grid: SweepGrid, path):
    with open(path, "w") as fh:
        json.dump(grid.metadata, fh, indent=2, sort_keys=True)
        fh.write("\n")


def resonance_csv_text(points) -> str:
    lines = ["a,e_J,ratio"]
    lines.extend(f"{_fmt(p.a)},{_fmt(p.e_J)},{_fmt(p.ratio)}" for p in points)
    return "\n".join(lines) + "\n"
