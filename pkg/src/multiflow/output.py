"""Text writers and readers for trajectories and snapshots.

Formatting contract: floats are written with 17 significant digits
('.' decimal point), which round-trips IEEE doubles bit-exactly;
columns are comma separated; every line ends with a newline.  All
output is plain text so acceptance runs stay auditable by eye.
"""
from __future__ import annotations

import numpy as np

from .solver import MixtureState, Trajectory

__all__ = [
    "write_timeseries",
    "read_timeseries",
    "write_snapshot",
    "read_snapshot",
]


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _open_for_write(path):
    try:
        return open(path, "w", newline="\n")
    except OSError as exc:
        raise OSError(f"cannot write '{path}': {exc}") from exc


def write_timeseries(traj: Trajectory, path, every: int = 1):
    """Write the scalar diagnostics series, one row per ``every`` steps
    (the final row is always included).

    Columns: t, mass_1..mass_N, kinetic, potential, dissipation,
    floor_events (cumulative).
    """
    n_rows = traj.times.size
    n_cons = traj.masses.shape[1] if n_rows else 0
    header = (
        ["t"]
        + [f"mass_{i + 1}" for i in range(n_cons)]
        + ["kinetic", "potential", "dissipation", "floor_events"]
    )
    rows = list(range(0, n_rows, max(1, every)))
    if n_rows and rows[-1] != n_rows - 1:
        rows.append(n_rows - 1)
    with _open_for_write(path) as fh:
        fh.write(",".join(header) + "\n")
        for r in rows:
            cells = [_fmt(traj.times[r])]
            cells += [_fmt(m) for m in traj.masses[r]]
            cells += [
                _fmt(traj.kinetic[r]),
                _fmt(traj.potential[r]),
                _fmt(traj.dissipation[r]),
                str(int(traj.floor_events[r])),
            ]
            fh.write(",".join(cells) + "\n")


def read_timeseries(path):
    """Read a timeseries file back; returns (header list, 2-d array)."""
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        data = [
            [float(tok) for tok in line.strip().split(",")]
            for line in fh
            if line.strip()
        ]
    return header, np.array(data) if data else np.empty((0, len(header)))


def write_snapshot(state: MixtureState, path):
    """Write a state as columns x, rho_1..rho_N, u_1..u_N."""
    n = state.n_constituents
    header = (
        ["x"]
        + [f"rho_{i + 1}" for i in range(n)]
        + [f"u_{i + 1}" for i in range(n)]
    )
    x = state.grid.centers()
    with _open_for_write(path) as fh:
        fh.write(",".join(header) + "\n")
        for k in range(state.grid.n_cells):
            cells = [_fmt(x[k])]
            cells += [_fmt(state.rho[i, k]) for i in range(n)]
            cells += [_fmt(state.u[i, k]) for i in range(n)]
            fh.write(",".join(cells) + "\n")


def read_snapshot(path):
    """Read a snapshot file back; returns (header list, 2-d array)."""
    return read_timeseries(path)
