"""Offline critical-action labeling.

Pipeline: approximate a trajectory with waypoints under an error budget
(recursive maximal-deviation splitting), cluster the waypoints with DBSCAN,
and mark the spans between consecutive clustered waypoints as critical
(k = 1). Gripper toggles provide a second, runtime-friendly flag source.
"""

from dataclasses import dataclass

import numpy as np

from .errors import InvalidInputError

NOISE = -1  # DBSCAN noise label


@dataclass(frozen=True)
class WaypointSet:
    indices: np.ndarray   # strictly increasing indices into the trajectory
    positions: np.ndarray  # (M, 3)


@dataclass(frozen=True)
class LabelParams:
    tau: float = 0.005      # m, waypoint approximation error budget
    eps: float = 0.02       # m, DBSCAN radius
    min_pts: int = 4

    def __post_init__(self):
        if self.tau <= 0 or self.eps <= 0 or self.min_pts <= 0:
            raise InvalidInputError("labeling parameters must be positive")


def _point_segment_distances(points, a, b):
    """Distances from each point to segment a-b."""
    d = b - a
    denom = float(d @ d)
    if denom == 0.0:
        return np.linalg.norm(points - a, axis=1)
    t = np.clip((points - a) @ d / denom, 0.0, 1.0)
    proj = a + t[:, None] * d
    return np.linalg.norm(points - proj, axis=1)


def extract_waypoints(positions, tau: float) -> WaypointSet:
    """Recursive maximal-deviation split until all points lie within tau.

    ``positions`` is an (N, 3) array (or a list of Pose, from which positions
    are taken). The first and last points are always waypoints.
    """
    if tau <= 0:
        raise InvalidInputError("tau must be positive")
    pts = _as_positions(positions)
    n = len(pts)
    if n < 2:
        raise InvalidInputError("trajectory must contain at least 2 points")

    keep = {0, n - 1}
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        dists = _point_segment_distances(pts[i + 1:j], pts[i], pts[j])
        k = int(np.argmax(dists))
        if dists[k] > tau:
            m = i + 1 + k
            keep.add(m)
            stack.append((i, m))
            stack.append((m, j))
    idx = np.array(sorted(keep), dtype=int)
    return WaypointSet(indices=idx, positions=pts[idx])


def dbscan(points, eps: float, min_pts: int) -> np.ndarray:
    """Plain DBSCAN over 3-D points; noise labeled -1.

    Deterministic: points are visited in ascending index order.
    """
    if eps <= 0 or min_pts < 1:
        raise InvalidInputError("eps must be > 0 and min_pts >= 1")
    pts = np.asarray(points, dtype=float)
    n = len(pts)
    labels = np.full(n, NOISE, dtype=int)
    if n == 0:
        return labels
    dist = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=2)
    neighbors = [np.nonzero(dist[i] <= eps)[0] for i in range(n)]

    cluster = 0
    visited = np.zeros(n, dtype=bool)
    for i in range(n):
        if visited[i]:
            continue
        visited[i] = True
        if len(neighbors[i]) < min_pts:
            continue
        labels[i] = cluster
        seeds = list(neighbors[i])
        k = 0
        while k < len(seeds):
            j = seeds[k]
            k += 1
            if labels[j] == NOISE:
                labels[j] = cluster
            if not visited[j]:
                visited[j] = True
                if len(neighbors[j]) >= min_pts:
                    labels[j] = cluster
                    seeds.extend(neighbors[j])
        cluster += 1
    return labels


def label_critical(positions, params: LabelParams = LabelParams()) -> np.ndarray:
    """Critical-action flags: spans between consecutive clustered waypoints.

    Returns k in {0,1}^N, N = trajectory length. For each consecutive pair
    of waypoints that are both assigned to a cluster, every step from the
    first to the second (inclusive) is critical.
    """
    pts = _as_positions(positions)
    wps = extract_waypoints(pts, params.tau)
    labels = dbscan(wps.positions, params.eps, params.min_pts)
    k = np.zeros(len(pts), dtype=np.int8)
    for a, b in zip(range(len(labels) - 1), range(1, len(labels))):
        if labels[a] != NOISE and labels[b] != NOISE:
            k[wps.indices[a]:wps.indices[b] + 1] = 1
    return k


def gripper_event_flags(grippers, window: int = 2) -> np.ndarray:
    """k=1 where the binarized gripper command (threshold 0.5) toggles.

    ``window`` dilates each toggle to [t - window, t + window].
    """
    g = np.asarray(_as_grippers(grippers), dtype=float)
    binary = g >= 0.5
    k = np.zeros(len(g), dtype=np.int8)
    toggles = np.nonzero(binary[1:] != binary[:-1])[0] + 1
    for t in toggles:
        k[max(0, t - window):t + window + 1] = 1
    return k


def _as_positions(traj):
    traj = list(traj) if not isinstance(traj, np.ndarray) else traj
    if len(traj) and hasattr(traj[0], "position"):
        return np.array([p.position for p in traj])
    return np.asarray(traj, dtype=float)


def _as_grippers(chunk):
    if hasattr(chunk, "grippers"):
        return chunk.grippers
    return chunk
