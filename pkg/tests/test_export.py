import csv
import json

import numpy as np

from structcons.dynamics import SecondOrderState, simulate
from structcons.export import write_boundary_csv, write_json, write_trajectory_csv
from structcons.spectral import boundary_curve
from structcons.topology import five_agent_topology


def test_second_order_trajectory_csv_round_trip(tmp_path):
    t = five_agent_topology()
    traj = simulate(t, SecondOrderState(np.arange(5.0), np.ones(5) / 3), (0.3, 0.75), 5, seed=0)
    p = tmp_path / "t.csv"
    write_trajectory_csv(p, traj, t.names)
    rows = list(csv.DictReader(p.open()))
    assert len(rows) == 6 * 5
    back = np.array([[float(r["p"]) for r in rows[k * 5 : (k + 1) * 5]] for k in range(6)])
    # repr() floats round-trip exactly
    np.testing.assert_array_equal(back, traj.states[:, :5])


def test_boundary_csv_samples(tmp_path):
    p = tmp_path / "b.csv"
    write_boundary_csv(p, boundary_curve(0.3, 2.5, 11), np.array([[1 + 1j, 2.0]]))
    rows = list(csv.reader(p.open()))
    assert rows[-1] == ["2.0", "0.0", "sample:0"]


def test_write_json_numpy(tmp_path):
    p = tmp_path / "r.json"
    write_json(p, {"a": np.float64(1.5), "b": np.arange(3), "c": np.int64(2)})
    assert json.loads(p.read_text()) == {"a": 1.5, "b": [0, 1, 2], "c": 2}
