"""Trace persistence: JSON-lines states plus a small meta sidecar.

Each line is one timestep: {"t": step, "vehicles": [{"id", "x", "y", "v",
"a", "psi", "lane"}, ...], "collisions": [[id_a, id_b], ...]}. Floats are
written with Python repr, so a saved trace reloads bit-identically. The
sidecar (<stem>.meta.json) carries dt and the road configuration needed to
rebuild the lane index array.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .config import RoadConfig, VehicleState
from .engine import Trace, _fill_index_slice

__all__ = ["save_trace", "load_trace", "meta_path"]


def meta_path(trace_path) -> Path:
    return Path(trace_path).with_suffix(".meta.json")


def save_trace(trace: Trace, path) -> None:
    path = Path(path)
    by_step: dict = {}
    for t, pair in trace.collisions:
        by_step.setdefault(t, []).append(list(pair))
    with open(path, "w", newline="\n") as fh:
        for t, step in enumerate(trace.states):
            rec = {
                "t": t,
                "vehicles": [
                    {"id": i + 1, "x": s.x, "y": s.y, "v": s.v, "a": s.a, "psi": s.psi, "lane": s.lane}
                    for i, s in enumerate(step)
                ],
                "collisions": by_step.get(t, []),
            }
            fh.write(json.dumps(rec) + "\n")
    meta = {
        "dt": trace.dt,
        "n_vehicles": trace.n_vehicles,
        "n_ts": trace.n_ts,
        "road": {
            "n_l": trace.road.n_l,
            "lane_width": trace.road.lane_width,
            "n_vpl": trace.road.n_vpl,
            "speed_limit": trace.road.speed_limit,
            "d_il_max": trace.road.d_il_max,
        },
    }
    meta_path(path).write_text(json.dumps(meta) + "\n")


def load_trace(path) -> Trace:
    """Rebuild a Trace from a JSONL file and its meta sidecar.

    Steering angles and lane-change start events are not part of the wire
    format; they reload as zero/empty.
    """
    path = Path(path)
    meta = json.loads(meta_path(path).read_text())
    road = RoadConfig(**meta["road"])
    states = []
    collisions = []
    with open(path) as fh:
        for line in fh:
            rec = json.loads(line)
            step = [None] * len(rec["vehicles"])
            for v in rec["vehicles"]:
                step[v["id"] - 1] = VehicleState(
                    x=v["x"], y=v["y"], v=v["v"], a=v["a"], psi=v["psi"], delta=0.0, lane=v["lane"]
                )
            states.append(step)
            for pair in rec["collisions"]:
                collisions.append((rec["t"], (pair[0], pair[1])))
    index_array = np.zeros((road.n_l, road.n_vpl, len(states)), dtype=np.int64)
    for t, step in enumerate(states):
        _fill_index_slice(index_array, t, step, road)
    return Trace(
        dt=meta["dt"],
        road=road,
        states=states,
        index_array=index_array,
        collisions=collisions,
    )
