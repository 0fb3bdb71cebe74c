"""Deterministic frame-stream fixtures.

Running this module rewrites the bundled files in tests/data/:

    python tests/fixtures.py
"""

import json
import math
from pathlib import Path

import numpy as np

DATA = Path(__file__).parent / "data"

CAR = [4.6, 1.9, 1.7]
PEDESTRIAN = [0.7, 0.7, 1.8]
TRUCK = [8.0, 2.6, 3.2]

# radial offset that gives a contour error of 3.5 m for an 80 degree yaw error at 50 m
FAR_YAW_OFFSET = 2.051138


def obj(track_id, label, center, size, yaw, score=None):
    out = {
        "id": track_id,
        "class": label,
        "center": [round(float(c), 4) for c in center],
        "size": list(size),
        "yaw": float(yaw),
    }
    if score is not None:
        out["score"] = score
    return out


def frame(scene_id, index, ego, gt, pred, dt=0.5):
    ego_doc = {"x": round(float(ego[0]), 4), "y": round(float(ego[1]), 4), "z": 0.0, "yaw": 0.0}
    return {
        "scene_id": scene_id,
        "frame_index": index,
        "timestamp": round(index * dt, 3),
        "ego": ego_doc,
        "gt": gt,
        "pred": pred,
    }


def dumps(frames):
    return "".join(json.dumps(f, separators=(",", ":")) + "\n" for f in frames)


def corpus_frames():
    """Three small scenes: car following, an intersection, and a cluttered road."""
    rng = np.random.RandomState(7)
    frames = []

    # car following: ego drives along +x, a lead car 12-15 m ahead, a pedestrian on the curb
    for k in range(12):
        ego = (5.0 * k, 0.0)
        lead = (ego[0] + 12.0 + 0.25 * k, 0.2, 0.85)
        ped = (30.0, 6.0 - 0.3 * k, 0.9)
        gt = [obj("car-1", "car", lead, CAR, 0.0), obj("ped-1", "pedestrian", ped, PEDESTRIAN, -math.pi / 2)]
        pred = [
            obj("p1", "car", np.add(lead, rng.normal(0, 0.3, 3) * [1, 1, 0.2]), CAR,
                rng.normal(0, math.radians(3)), 0.9),
            obj("p2", "pedestrian", np.add(ped, rng.normal(0, 0.15, 3) * [1, 1, 0.2]), PEDESTRIAN,
                -math.pi / 2 + rng.normal(0, math.radians(10)), 0.7),
        ]
        frames.append(frame("follow", k, ego, gt, pred))

    # intersection: a crossing car with growing yaw error, a parked truck, a pedestrian missed half the time
    for k in range(12):
        ego = (0.0, 0.0)
        car = (22.0, -15.0 + 2.5 * k, 0.85)
        truck = (35.0, -9.0, 1.6)
        ped = (10.0 + 0.4 * k, 7.0, 0.9)
        gt = [
            obj("car-7", "car", car, CAR, math.pi / 2),
            obj("truck-1", "truck", truck, TRUCK, 0.0),
            obj("ped-4", "pedestrian", ped, PEDESTRIAN, 0.0),
        ]
        yaw_err = math.radians(4.0 * k)
        pred = [
            obj("p10", "car", np.add(car, rng.normal(0, 0.4, 3) * [1, 1, 0.2]), CAR, math.pi / 2 + yaw_err, 0.8),
            obj("p11", "truck", np.add(truck, [0.8, 0.3, 0.0]), TRUCK, rng.normal(0, math.radians(2)), 0.85),
        ]
        if k % 2 == 0:
            pred.append(obj("p12", "pedestrian", np.add(ped, [0.2, -0.1, 0.0]), PEDESTRIAN, 0.1, 0.6))
        frames.append(frame("intersection", k, ego, gt, pred))

    # clutter: two cars side by side, a ghost prediction every frame, an ID switch halfway
    for k in range(10):
        ego = (4.0 * k, 0.0)
        c1 = (ego[0] + 18.0, 3.5, 0.85)
        c2 = (ego[0] + 25.0, -3.5, 0.85)
        gt = [obj("car-a", "car", c1, CAR, 0.0), obj("car-b", "car", c2, CAR, 0.0)]
        pred = [
            obj("p20" if k < 5 else "p22", "car", np.add(c1, rng.normal(0, 0.3, 3) * [1, 1, 0]), CAR,
                rng.normal(0, math.radians(2)), 0.9),
            obj("p21", "car", np.add(c2, rng.normal(0, 0.3, 3) * [1, 1, 0]), CAR,
                rng.normal(0, math.radians(2)), 0.9),
            obj("ghost", "car", (ego[0] + 60.0, 12.0, 0.85), CAR, 1.0, 0.3),
        ]
        frames.append(frame("clutter", k, ego, gt, pred))
    return frames


def perfect_frames():
    """The corpus ground truth, predicted perfectly."""
    frames = corpus_frames()
    for f in frames:
        f["pred"] = [dict(g, id="p-" + g["id"], score=1.0) for g in f["gt"]]
    return frames


def far_yaw_frames():
    """One car at 50 m whose prediction is turned by 80 degrees (contour error 3.5 m)."""
    gt = [obj("car-1", "car", (50.0, 0.0, 0.0), CAR, 0.0)]
    pred = [obj("p1", "car", (50.0 + FAR_YAW_OFFSET, 0.0, 0.0), CAR, math.radians(80.0), 0.9)]
    return [frame("far-yaw", 0, (0.0, 0.0), gt, pred)]


def _filter_scene(scene_id, n_frames, distance, yaw_error_deg, extra=None):
    frames = []
    for k in range(n_frames):
        ego = (2.0 * k, 0.0)
        center = (ego[0] + distance, 1.0, 0.85)
        gt = [obj("car-1", "car", center, CAR, 0.0)]
        pred = [obj("p1", "car", center, CAR, math.radians(yaw_error_deg), 0.9)]
        if extra:
            g, p = extra(ego)
            gt.append(g)
            pred.append(p)
        frames.append(frame(scene_id, k, ego, gt, pred))
    return frames


def filter_corpus_frames():
    """Five scenes; only "keep-a" and "keep-e" meet all three selection criteria."""
    def turned_pedestrian(ego):
        c = (ego[0] + 8.0, 4.0, 0.9)
        return obj("ped-1", "pedestrian", c, PEDESTRIAN, 0.0), obj("p9", "pedestrian", c, PEDESTRIAN, math.radians(45))

    return (
        _filter_scene("keep-a", 12, 20.0, 15.0)
        + _filter_scene("short-b", 8, 20.0, 15.0)
        + _filter_scene("aligned-c", 12, 20.0, 5.0, extra=turned_pedestrian)
        + _filter_scene("far-d", 12, 45.0, 15.0)
        + _filter_scene("keep-e", 12, 15.0, 20.0)
    )


BUNDLED = {
    "corpus.jsonl": corpus_frames,
    "perfect.jsonl": perfect_frames,
    "far_yaw.jsonl": far_yaw_frames,
    "filter_corpus.jsonl": filter_corpus_frames,
}


def write_all(directory=DATA):
    directory.mkdir(parents=True, exist_ok=True)
    for name, build in BUNDLED.items():
        (directory / name).write_text(dumps(build()), encoding="utf-8")


if __name__ == "__main__":
    write_all()
