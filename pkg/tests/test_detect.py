from __future__ import annotations

import numpy as np
import pytest

from graspcheck.dataset import BoundingBox
from graspcheck.detect import (
    ClusterConfig,
    Detection,
    PadConfig,
    ThresholdSchedule,
    adaptive_detect,
    cluster_detections,
    pad_box,
    select_detection,
)
from graspcheck.errors import GripperNotFound

from conftest import CountingDetector, random_detections

IMAGE = (640, 480)


def det(x: float, y: float, conf: float, size: float = 20.0) -> Detection:
    return Detection(BoundingBox(x, y, x + size, y + size), conf)


# --- threshold schedule -------------------------------------------------------


def test_schedule_sequence_and_bound():
    schedule = ThresholdSchedule(start=0.5, decay_factor=0.5, floor=0.01)
    values = schedule.thresholds()
    assert values[:2] == [0.5, 0.25]
    assert len(values) == schedule.max_queries() == 7
    assert values[-1] <= 0.01 < values[-2]


def test_schedule_validation():
    with pytest.raises(ValueError):
        ThresholdSchedule(start=0.5, decay_factor=1.0, floor=0.01)
    with pytest.raises(ValueError):
        ThresholdSchedule(start=0.01, decay_factor=0.5, floor=0.5)


def test_adaptive_first_threshold_hit_queries_once():
    backend = CountingDetector([det(10, 10, 0.9), det(12, 12, 0.7), det(14, 14, 0.55)])
    result = adaptive_detect(backend, image=None, schedule=ThresholdSchedule())
    assert len(result) == 3
    assert backend.calls == [0.5]


def test_adaptive_descends_to_second_threshold():
    backend = CountingDetector([det(10, 10, 0.25), det(40, 40, 0.25)])
    result = adaptive_detect(backend, image=None, schedule=ThresholdSchedule())
    assert len(result) == 2
    assert backend.calls == [0.5, 0.25]
    assert all(d.confidence >= 0.25 for d in result)


def test_adaptive_exhaustion_raises_with_bounded_queries():
    backend = CountingDetector([])
    schedule = ThresholdSchedule()
    with pytest.raises(GripperNotFound):
        adaptive_detect(backend, image=None, schedule=schedule)
    assert len(backend.calls) == schedule.max_queries()


# --- clustering ---------------------------------------------------------------


def test_single_detection_single_cluster():
    assert cluster_detections([det(10, 10, 0.5)], IMAGE) == [0]


def test_identical_centers_share_cluster():
    detections = [det(100, 100, 0.3), det(100, 100, 0.9)]
    labels = cluster_detections(detections, IMAGE, ClusterConfig(eps=1e-9))
    assert labels[0] == labels[1]


def test_labels_contiguous_from_zero():
    detections = [det(10, 10, 0.5), det(600, 400, 0.5), det(12, 12, 0.5)]
    labels = cluster_detections(detections, IMAGE, ClusterConfig(eps=0.05))
    assert sorted(set(labels)) == list(range(len(set(labels))))


def test_noise_points_become_singletons():
    # min_pts=3 with three mutually distant points: all noise, all singletons
    detections = [det(10, 10, 0.5), det(300, 240, 0.5), det(600, 400, 0.5)]
    labels = cluster_detections(detections, IMAGE, ClusterConfig(eps=0.01, min_pts=3))
    assert sorted(labels) == [0, 1, 2]


def _partition(labels: list[int]) -> set[frozenset[int]]:
    groups: dict[int, set[int]] = {}
    for i, label in enumerate(labels):
        groups.setdefault(label, set()).add(i)
    return {frozenset(g) for g in groups.values()}


def brute_force_dbscan_partition(
    points: np.ndarray, eps: float, min_pts: int
) -> set[frozenset[int]]:
    """Density-reachability by transitive closure of the core eps-graph.

    Border points attach to their nearest core's cluster; noise points are
    singletons. Mirrors the documented semantics through an independent
    computation (boolean matrix closure instead of queue expansion).
    """
    n = len(points)
    dist = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=2)
    neighbors = dist <= eps
    core = neighbors.sum(axis=1) >= min_pts

    reach = neighbors & core[None, :] & core[:, None]
    np.fill_diagonal(reach, True)
    for _ in range(n):  # transitive closure, brute force
        new = reach | (reach @ reach)
        if (new == reach).all():
            break
        reach = new

    assigned = np.full(n, -1)
    label = 0
    for i in range(n):
        if not core[i] or assigned[i] != -1:
            continue
        members = np.nonzero(reach[i] & core)[0]
        assigned[members] = label
        label += 1
    for i in range(n):
        if assigned[i] != -1 or core[i]:
            continue
        core_nbrs = np.nonzero(neighbors[i] & core)[0]
        if core_nbrs.size:
            assigned[i] = assigned[core_nbrs[np.argmin(dist[i, core_nbrs])]]
    groups: dict[int, set[int]] = {}
    singles = []
    for i in range(n):
        if assigned[i] == -1:
            singles.append(frozenset({i}))
        else:
            groups.setdefault(int(assigned[i]), set()).add(i)
    return {frozenset(g) for g in groups.values()} | set(singles)


def test_clustering_matches_bruteforce_oracle():
    rng = np.random.default_rng(777)
    for trial in range(200):
        count = int(rng.integers(1, 21))
        detections = random_detections(rng, count)
        eps = float(rng.uniform(0.03, 0.3))
        min_pts = int(rng.integers(1, 4))
        cfg = ClusterConfig(eps=eps, min_pts=min_pts)
        labels = cluster_detections(detections, IMAGE, cfg)
        points = np.array(
            [(d.box.center[0] / IMAGE[0], d.box.center[1] / IMAGE[1]) for d in detections]
        )
        assert _partition(labels) == brute_force_dbscan_partition(points, eps, min_pts), (
            f"trial {trial}"
        )


def test_partition_invariant_to_input_order(rng):
    detections = random_detections(rng, 15)
    cfg = ClusterConfig(eps=0.12, min_pts=2)
    base = cluster_detections(detections, IMAGE, cfg)
    order = rng.permutation(len(detections))
    shuffled = [detections[i] for i in order]
    permuted = cluster_detections(shuffled, IMAGE, cfg)
    base_partition = _partition(base)
    # map shuffled indices back to original positions
    remapped = {frozenset(int(order[i]) for i in group) for group in _partition(permuted)}
    assert remapped == base_partition


# --- selection ----------------------------------------------------------------


def test_cumulative_confidence_beats_single_strong_box():
    # cluster A sums 0.7 over two boxes, cluster B has one 0.6 box: A wins and
    # its strongest member (0.4) is returned
    a1, a2 = det(50, 50, 0.4), det(55, 55, 0.3)
    b = det(500, 400, 0.6)
    selected = select_detection([a1, a2, b], IMAGE, ClusterConfig(eps=0.05))
    assert selected is a1


def test_single_detection_selected():
    only = det(10, 10, 0.2)
    assert select_detection([only], IMAGE) is only


def test_coincident_detections_pick_max_confidence():
    stack = [det(100, 100, 0.2), det(100, 100, 0.8), det(100, 100, 0.5)]
    assert select_detection(stack, IMAGE).confidence == 0.8


def test_sum_tie_broken_by_strongest_member():
    # both clusters sum to 0.8; the cluster holding the single 0.5 box wins
    a1, a2 = det(50, 50, 0.5), det(55, 55, 0.3)
    b1, b2 = det(500, 400, 0.4), det(505, 405, 0.4)
    selected = select_detection([b1, b2, a1, a2], IMAGE, ClusterConfig(eps=0.05))
    assert selected is a1


def test_within_cluster_tie_broken_lexicographically():
    first = det(52, 50, 0.4)
    second = det(50, 50, 0.4)
    selected = select_detection([first, second], IMAGE, ClusterConfig(eps=0.2))
    assert selected is second  # smaller x_min


def test_selection_member_and_rescale_invariance(rng):
    for _ in range(200):
        detections = random_detections(rng, int(rng.integers(1, 15)))
        selected = select_detection(detections, IMAGE)
        assert selected in detections
        for factor in (2.0, 0.125, 0.37):
            scaled = [Detection(d.box, min(d.confidence * factor, 1.0)) for d in detections]
            if factor > 1.0 and any(d.confidence * factor > 1.0 for d in detections):
                continue  # clipping would change relative order
            rescaled = select_detection(scaled, IMAGE)
            assert rescaled.box.as_list() == selected.box.as_list()


# --- padding ------------------------------------------------------------------


def test_pad_box_arithmetic():
    padded = pad_box(BoundingBox(100, 100, 200, 200), IMAGE, PadConfig(0.05, 0.25))
    assert padded.as_list() == [95.0, 75.0, 205.0, 225.0]


def test_zero_pad_is_identity():
    box = BoundingBox(10, 20, 30, 40)
    assert pad_box(box, IMAGE, PadConfig(0.0, 0.0)).as_list() == box.as_list()


def test_pad_clamps_at_image_edges():
    box = BoundingBox(0.0, 0.0, 100.0, 480.0)
    padded = pad_box(box, IMAGE, PadConfig(0.5, 0.5))
    assert padded.x_min == 0.0 and padded.y_min == 0.0 and padded.y_max == 480.0
    assert padded.contains_box(box)


def test_pad_monotone_in_fractions(rng):
    for _ in range(50):
        x0, y0 = rng.uniform(0, 500), rng.uniform(0, 350)
        box = BoundingBox(x0, y0, x0 + rng.uniform(5, 100), y0 + rng.uniform(5, 100))
        small = pad_box(box, IMAGE, PadConfig(0.05, 0.10))
        large = pad_box(box, IMAGE, PadConfig(0.10, 0.30))
        assert small.contains_box(box)
        assert large.contains_box(small)
