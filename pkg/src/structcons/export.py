"""CSV / JSON-lines writers.  Floats are written with repr() so reruns are byte-identical."""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .dynamics import Trajectory
from .protocol import Transcript
from .spectral import BoundaryPoint


def _f(x: float) -> str:
    return repr(float(x))


def write_trajectory_csv(path: str | Path, trajectory: Trajectory, names: Sequence[str] | None = None) -> None:
    n = trajectory.n_agents
    names = list(names) if names is not None else [str(i) for i in range(n)]
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        if trajectory.order == "first":
            w.writerow(["k", "agent", "x"])
            for k, row in enumerate(trajectory.states):
                for i in range(n):
                    w.writerow([k, names[i], _f(row[i])])
        else:
            w.writerow(["k", "agent", "p", "v"])
            for k, row in enumerate(trajectory.states):
                for i in range(n):
                    w.writerow([k, names[i], _f(row[i]), _f(row[n + i])])


def write_transcript_jsonl(path: str | Path, transcript: Transcript) -> None:
    Path(path).write_text(transcript.to_jsonl())


def write_boundary_csv(
    path: str | Path,
    points: Iterable[BoundaryPoint],
    samples: np.ndarray | None = None,
) -> None:
    """Curve points tagged by branch, then sampled eigenvalues tagged ``sample:<id>``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["re", "im", "branch"])
        for pt in points:
            z = pt.z
            w.writerow([_f(z.real), _f(z.imag), pt.branch])
        if samples is not None:
            for sid, row in enumerate(np.atleast_2d(samples)):
                for mu in row:
                    w.writerow([_f(mu.real), _f(mu.imag), f"sample:{sid}"])


def write_json(path: str | Path, obj) -> None:
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, default=_json_default) + "\n")


def _json_default(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    raise TypeError(f"not JSON serializable: {type(obj).__name__}")
