"""Time-headway scenario detection, zone occupancy, and the 47-feature layout.

A scenario opens for an ego vehicle when the time headway to its leader
drops to the trigger level, closes when it recovers (or the trace ends),
and is kept only if the minimum THW undercuts the keep level. Windows of
the same ego separated by less than the merge gap fuse into one scenario;
the merged window may briefly exceed the trigger inside the fused gap.

Features are sampled at three instants (window start, the changepoint of
minimum THW, window end) from the six-zone neighborhood around the ego,
plus scalar descriptors of the whole window.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset
from .sim.config import VEHICLE_LENGTH
from .sim.engine import Trace

__all__ = [
    "THW_TRIGGER",
    "THW_KEEP",
    "MERGE_GAP_S",
    "ZONES",
    "FEATURE_NAMES",
    "Scenario",
    "ZoneOccupancy",
    "compute_thw",
    "zone_extent",
    "thw_series",
    "find_trigger_windows",
    "detect_scenarios",
    "assign_zones",
    "dtw_distance",
    "extract_features",
    "scenarios_to_dataset",
]

THW_TRIGGER = 1.0   # s, scenario opens at THW <= trigger
THW_KEEP = 0.8      # s, scenario kept iff min THW <= keep
MERGE_GAP_S = 1.0   # s, same-ego windows closer than this merge
NO_THREAT = math.inf  # THW sentinel when the ego is (almost) standing

V_EGO_MIN = 0.1        # m/s, below this THW is the no-threat sentinel
ZONE_HORIZON_S = 2.0   # s, zone extent per unit ego speed
ZONE_MIN_M = 20.0      # m
ZONE_MAX_M = 120.0     # m
DESIRED_THW_S = 1.8    # s, administrative rule-of-thumb gap for the DTW feature
DTW_MAX_SAMPLES = 128  # gap curves are resampled to at most this length

ZONES = ("front", "rear", "left_front", "left_rear", "right_front", "right_rear")
_INSTANTS = ("start", "changepoint", "end")

FEATURE_NAMES = (
    [f"dist_{z}_{i}" for z in ZONES for i in _INSTANTS]
    + [f"relv_{z}_{i}" for z in ZONES for i in _INSTANTS]
    + [
        "thw_min",
        "duration_s",
        "dtw_gap_desired",
        "ego_lane_start",
        "ego_lane_changepoint",
        "ego_lane_end",
        "lane_count",
        "ego_lane_changes",
        "cut_in",
        "collision",
        "ego_speed_changepoint",
    ]
)
assert len(FEATURE_NAMES) == 47


@dataclass
class Scenario:
    """One ego-centered THW window of a trace (timestep indices inclusive)."""

    ego_id: int
    t_start: int
    t_end: int
    thw_series: np.ndarray
    thw_min: float
    t_changepoint: int

    def __post_init__(self):
        if not self.t_start <= self.t_changepoint <= self.t_end:
            raise ValueError("changepoint outside the scenario window")


@dataclass
class ZoneOccupancy:
    """Nearest vehicle per zone: (vehicle id, |dx| m, relative speed m/s)."""

    slots: dict

    def occupied(self) -> list:
        return [z for z in ZONES if self.slots.get(z) is not None]


def compute_thw(d_rel: float, v_ego: float) -> float:
    """Time headway: relative distance over ego speed; the no-threat
    sentinel (inf) for a near-standing ego."""
    if d_rel < 0:
        raise ValueError(f"negative relative distance {d_rel}")
    if v_ego < V_EGO_MIN:
        return NO_THREAT
    return d_rel / v_ego


def zone_extent(v_ego: float) -> float:
    """Longitudinal zone reach, adapted to the ego speed."""
    return min(max(v_ego * ZONE_HORIZON_S, ZONE_MIN_M), ZONE_MAX_M)


def _leader_of(step: list, ego: int) -> int | None:
    best, best_dx = None, math.inf
    ego_s = step[ego]
    for j, s in enumerate(step):
        if j == ego or s.lane != ego_s.lane:
            continue
        dx = s.x - ego_s.x
        if 0.0 < dx < best_dx:
            best, best_dx = j, dx
    return best


def thw_series(trace: Trace, ego_id: int) -> np.ndarray:
    """Per-timestep THW of one ego to its current leader (inf if none)."""
    ego = ego_id - 1
    out = np.empty(trace.n_ts)
    for t, step in enumerate(trace.states):
        leader = _leader_of(step, ego)
        if leader is None:
            out[t] = NO_THREAT
        else:
            gap = max(step[leader].x - step[ego].x - VEHICLE_LENGTH, 0.0)
            out[t] = compute_thw(gap, step[ego].v)
    return out


def find_trigger_windows(thw: np.ndarray, dt: float) -> list:
    """Kept scenario windows [(t_start, t_end)] of a THW series.

    Maximal runs with THW <= trigger; consecutive runs merge when the
    strictly-above gap between them is shorter than the merge time; a
    window survives iff its minimum THW <= keep level.
    """
    thw = np.asarray(thw, dtype=np.float64)
    triggered = thw <= THW_TRIGGER
    runs = []
    start = None
    for t, on in enumerate(triggered):
        if on and start is None:
            start = t
        elif not on and start is not None:
            runs.append((start, t - 1))
            start = None
    if start is not None:
        runs.append((start, len(thw) - 1))
    merged = []
    for run in runs:
        if merged and (run[0] - merged[-1][1] - 1) * dt < MERGE_GAP_S:
            merged[-1] = (merged[-1][0], run[1])
        else:
            merged.append(run)
    return [(a, b) for a, b in merged if float(np.min(thw[a : b + 1])) <= THW_KEEP]


def detect_scenarios(trace: Trace) -> list:
    """All kept scenarios of a trace, every vehicle serving as ego."""
    out = []
    for ego_id in range(1, trace.n_vehicles + 1):
        series = thw_series(trace, ego_id)
        for t0, t1 in find_trigger_windows(series, trace.dt):
            window = series[t0 : t1 + 1]
            t_min = t0 + int(np.argmin(window))
            out.append(
                Scenario(
                    ego_id=ego_id,
                    t_start=t0,
                    t_end=t1,
                    thw_series=window.copy(),
                    thw_min=float(np.min(window)),
                    t_changepoint=t_min,
                )
            )
    return out


def assign_zones(trace: Trace, ego_id: int, t: int) -> ZoneOccupancy:
    """Nearest vehicle per zone around the ego at timestep t.

    Zones combine the lane offset (-1 right, 0 own, +1 left) with the sign
    of the longitudinal center distance; reach is the speed-adapted extent.
    Every vehicle falls into at most one zone.
    """
    step = trace.states[t]
    ego = step[ego_id - 1]
    extent = zone_extent(ego.v)
    slots: dict = {z: None for z in ZONES}
    for j, s in enumerate(step):
        if j == ego_id - 1:
            continue
        offset = s.lane - ego.lane
        if offset not in (-1, 0, 1):
            continue
        dx = s.x - ego.x
        if abs(dx) > extent:
            continue
        side = {0: "", 1: "left_", -1: "right_"}[offset]
        zone = side + ("front" if dx >= 0 else "rear")
        prev = slots[zone]
        if prev is None or abs(dx) < prev[1]:
            slots[zone] = (j + 1, abs(dx), s.v - ego.v)
    return ZoneOccupancy(slots=slots)


def dtw_distance(s1, s2) -> float:
    """Classic dynamic time warping with |a - b| local cost, full window,
    boundary-aligned; returns the optimal cumulative cost."""
    s1 = np.asarray(s1, dtype=np.float64)
    s2 = np.asarray(s2, dtype=np.float64)
    if s1.size == 0 or s2.size == 0:
        raise ValueError("dtw_distance requires non-empty sequences")
    n, m = len(s1), len(s2)
    prev = np.full(m + 1, np.inf)
    prev[0] = 0.0
    for i in range(1, n + 1):
        cur = np.full(m + 1, np.inf)
        for j in range(1, m + 1):
            cost = abs(s1[i - 1] - s2[j - 1])
            cur[j] = cost + min(prev[j], cur[j - 1], prev[j - 1])
        prev = cur
    return float(prev[m])


def _resample(series: np.ndarray, n: int) -> np.ndarray:
    if len(series) <= n:
        return series
    grid = np.linspace(0.0, len(series) - 1.0, n)
    return np.interp(grid, np.arange(len(series)), series)


def _gap_curves(trace: Trace, sc: Scenario):
    actual, desired = [], []
    for t in range(sc.t_start, sc.t_end + 1):
        step = trace.states[t]
        ego = step[sc.ego_id - 1]
        leader = _leader_of(step, sc.ego_id - 1)
        if leader is None:
            actual.append(zone_extent(ego.v))
        else:
            actual.append(max(step[leader].x - ego.x - VEHICLE_LENGTH, 0.0))
        desired.append(ego.v * DESIRED_THW_S)
    return np.array(actual), np.array(desired)


def extract_features(sc: Scenario, trace: Trace) -> np.ndarray:
    """The canonical 47-feature vector of one scenario (see FEATURE_NAMES).

    Absent zone neighbors encode as the zone-extent ceiling at that instant
    with zero relative speed; all outputs are finite.
    """
    instants = (sc.t_start, sc.t_changepoint, sc.t_end)
    occ = [assign_zones(trace, sc.ego_id, t) for t in instants]
    dists, relvs = [], []
    for zone in ZONES:
        for k, t in enumerate(instants):
            ego_v = trace.states[t][sc.ego_id - 1].v
            slot = occ[k].slots[zone]
            if slot is None:
                dists.append(zone_extent(ego_v))
                relvs.append(0.0)
            else:
                dists.append(slot[1])
                relvs.append(slot[2])
    actual, desired = _gap_curves(trace, sc)
    dtw = dtw_distance(_resample(actual, DTW_MAX_SAMPLES), _resample(desired, DTW_MAX_SAMPLES))
    ego_lanes = [trace.states[t][sc.ego_id - 1].lane for t in range(sc.t_start, sc.t_end + 1)]
    lane_changes = sum(1 for a, b in zip(ego_lanes, ego_lanes[1:]) if a != b)
    cut_in = 0.0
    for t in range(sc.t_start + 1, sc.t_end + 1):
        front = assign_zones(trace, sc.ego_id, t).slots["front"]
        if front is None:
            continue
        vid = front[0]
        prev_lane = trace.states[t - 1][vid - 1].lane
        ego_lane_now = trace.states[t][sc.ego_id - 1].lane
        if prev_lane != ego_lane_now and trace.states[t][vid - 1].lane == ego_lane_now:
            cut_in = 1.0
            break
    collision = float(
        any(sc.t_start <= t <= sc.t_end and sc.ego_id in pair for t, pair in trace.collisions)
    )
    features = (
        dists
        + relvs
        + [
            sc.thw_min,
            (sc.t_end - sc.t_start) * trace.dt,
            dtw,
            float(ego_lanes[0]),
            float(trace.states[sc.t_changepoint][sc.ego_id - 1].lane),
            float(ego_lanes[-1]),
            float(trace.road.n_l),
            float(lane_changes),
            cut_in,
            collision,
            trace.states[sc.t_changepoint][sc.ego_id - 1].v,
        ]
    )
    return np.array(features, dtype=np.float64)


def scenarios_to_dataset(traces_with_names) -> tuple:
    """Extract all scenarios of several (name, Trace) pairs into a Dataset.

    Ids are '<trace name>_s<k>'; the metadata list mirrors the rows with
    {id, trace, ego_id, t_start, t_end, thw_min}.
    """
    ids, rows, meta = [], [], []
    for name, trace in traces_with_names:
        for k, sc in enumerate(detect_scenarios(trace)):
            sid = f"{name}_s{k}"
            ids.append(sid)
            rows.append(extract_features(sc, trace))
            meta.append(
                {
                    "id": sid,
                    "trace": name,
                    "ego_id": sc.ego_id,
                    "t_start": sc.t_start,
                    "t_end": sc.t_end,
                    "thw_min": sc.thw_min,
                }
            )
    values = np.array(rows, dtype=np.float64).reshape(len(rows), len(FEATURE_NAMES))
    return Dataset(feature_names=list(FEATURE_NAMES), ids=ids, values=values), meta
