"""Synthetic driving scenes with a known causal object.

Four scenario kinds, all on a straight north-bound road with the ego car on
the centre line:

* ``StoppingForCrosser`` -- a pedestrian crosses ahead; the ego brakes to a
  stop (action ``Stopping``, cause ``ped``).
* ``LeadVehicleBraking`` -- the car ahead brakes; the ego stops behind it
  (action ``Stopping``, cause ``lead``).
* ``ClearCruise`` -- steady driving among ordinary traffic (action
  ``Cruising``, no causal object).
* ``GapAccelerate`` -- the car ahead pulls away and the ego sets off after
  it (action ``Accelerating``, cause ``lead``).

The geometry of each cause object is fixed per kind, so its relation chain
over the five frames ending at the annotation is the same in every scene of
that kind.  Scenes are dressed up with distractors: objects that leave
before the decision window, fully visible traffic (cruise only), and one
briefly-visible "lingering" object whose windowed chain is constructed to
be *bit-identical* between the kind it belongs to and a fraction of cruise
scenes.  Those shared chains are the hard part of the classification task:
no feature can separate two identical vectors, so a classifier can be
confident about planted causes while staying honestly uncertain about the
lingerers.

Randomness (distractor placement, jitter) never touches the qualitative
relations inside the window: every randomized object is accepted only if
its window geometry clears safety margins around all relation boundaries,
and jitter is a per-object constant offset, re-drawn if it would flip any
windowed relation.  Positions elsewhere in the scene are free to vary.
"""

from __future__ import annotations

import hashlib
import random
from dataclasses import dataclass, field, replace
from math import hypot
from typing import Iterable

import numpy as np

from .builder import build
from .calculi import BBox2D, DEFAULT_CONFIG
from .scene import ActionAnnotation, Frame, NO_CAUSE, ObjectState, Scene

__all__ = [
    "STOPPING_FOR_CROSSER",
    "LEAD_VEHICLE_BRAKING",
    "CLEAR_CRUISE",
    "GAP_ACCELERATE",
    "KINDS",
    "ACTION_FOR_KIND",
    "EGO_ID",
    "ScenarioSpec",
    "GroundTruth",
    "generate_scene",
    "generate_dataset",
    "generate_corpus",
    "split_scenes",
]

STOPPING_FOR_CROSSER = "StoppingForCrosser"
LEAD_VEHICLE_BRAKING = "LeadVehicleBraking"
CLEAR_CRUISE = "ClearCruise"
GAP_ACCELERATE = "GapAccelerate"

KINDS = (STOPPING_FOR_CROSSER, LEAD_VEHICLE_BRAKING, CLEAR_CRUISE, GAP_ACCELERATE)

ACTION_FOR_KIND = {
    STOPPING_FOR_CROSSER: "Stopping",
    LEAD_VEHICLE_BRAKING: "Stopping",
    CLEAR_CRUISE: "Cruising",
    GAP_ACCELERATE: "Accelerating",
}

EGO_ID = "ego"

_WINDOW = 5  # frames per relation chain, matching the default encoder
_MARGIN = 0.5  # metres of slack demanded around every relation boundary

# box half-extents (x, y): cars are 2 x 4.5 along their travel direction
_CAR_NS = (1.0, 2.25)
_CAR_EW = (2.25, 1.0)
_HALF_BY_CLASS = {"car": _CAR_NS, "pedestrian": (0.3, 0.3), "cyclist": (0.4, 0.9)}

_MIN_FRAMES = {
    STOPPING_FOR_CROSSER: 9,
    LEAD_VEHICLE_BRAKING: 12,
    CLEAR_CRUISE: 6,
    GAP_ACCELERATE: 6,
}


@dataclass(frozen=True)
class ScenarioSpec:
    """Everything that determines one generated scene.

    ``cruise_twin`` plants the lingering-object chain of another kind into a
    ``ClearCruise`` scene (``"l12"`` for the stopping lingerer, ``"l45"``
    for the accelerating one); the corpus builders set it on a fixed
    rotation."""

    kind: str
    n_frames: int = 12
    n_distractors: int = 4
    jitter_sigma: float = 0.1
    seed: int = 0
    cruise_twin: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"unknown scenario kind {self.kind!r}; choose from {KINDS}")
        if self.n_frames < 6:
            raise ValueError(f"scenes need at least 6 frames, got {self.n_frames}")
        if self.n_frames < _MIN_FRAMES[self.kind]:
            raise ValueError(
                f"{self.kind} needs at least {_MIN_FRAMES[self.kind]} frames, got {self.n_frames}"
            )
        if self.n_distractors < 0:
            raise ValueError("n_distractors must be non-negative")
        if self.jitter_sigma < 0:
            raise ValueError("jitter_sigma must be non-negative")
        if self.cruise_twin not in (None, "l12", "l45"):
            raise ValueError(f"cruise_twin must be 'l12', 'l45' or None, got {self.cruise_twin!r}")
        if self.cruise_twin is not None and self.kind != CLEAR_CRUISE:
            raise ValueError("cruise_twin only applies to ClearCruise scenes")


@dataclass(frozen=True)
class GroundTruth:
    """What the generator knows about a scene: the annotation it planted,
    the object that caused it (``NO_CAUSE`` if none), and the object nearest
    the actor at the annotation frame as a baseline answer."""

    scene_id: str
    annotation: ActionAnnotation
    cause_id: str
    nearest_id: str | None


@dataclass
class _Track:
    obj_class: str
    half: tuple[float, float]
    pos: dict[int, tuple[float, float]] = field(default_factory=dict)


def _ego_ys(kind: str, n: int) -> list[float]:
    if kind in (STOPPING_FOR_CROSSER, LEAD_VEHICLE_BRAKING):
        steps = [3.0] * (n - 7) + [2.0, 1.0] + [0.0] * 4
    elif kind == CLEAR_CRUISE:
        steps = [3.0] * (n - 1)
    else:
        steps = [0.0] * (n - 4) + [1.0, 2.0, 3.0]
    ys = [0.0]
    for s in steps:
        ys.append(ys[-1] + s)
    return ys


def _annotation_frame(kind: str, n: int) -> int:
    # stopping is annotated at the first stationary frame; the other kinds
    # at the final frame
    return n - 4 if kind in (STOPPING_FOR_CROSSER, LEAD_VEHICLE_BRAKING) else n - 1


def _linger_track(ego_ys: list[float], ann_frame: int, variant: str) -> _Track:
    """The briefly-visible object.  Placement is relative to the ego at the
    entry frame, which is what makes the windowed chain reproducible across
    scenario kinds with different absolute ego positions."""
    if variant == "l12":
        entry = ann_frame - 3
        track = _Track("car", _CAR_EW)
        track.pos[entry] = (22.0, ego_ys[entry] + 8.0)
        track.pos[entry + 1] = (20.0, ego_ys[entry] + 8.0)
    else:
        entry = ann_frame - 1
        track = _Track("car", _CAR_EW)
        track.pos[entry] = (-20.0, ego_ys[entry] - 8.0)
        track.pos[entry + 1] = (-18.0, ego_ys[entry] - 8.0)
    return track


def _margins_ok(ego: _Track, other: _Track, window: range) -> bool:
    """True when the pair's window geometry keeps every qualitative relation
    at least ``_MARGIN`` away from flipping: distances clear of band edges,
    interval endpoints clear of each other, displacement deltas either
    exactly zero (structurally static) or decisively signed, and the offset
    clear of both axes."""
    edges = DEFAULT_CONFIG.qdc_band_edges
    for f in window:
        if f not in other.pos:
            continue
        ex, ey = ego.pos[f]
        ox, oy = other.pos[f]
        dx, dy = ox - ex, oy - ey
        if abs(dx) < _MARGIN or abs(dy) < _MARGIN:
            return False
        dist = hypot(dx, dy)
        if any(abs(dist - edge) < _MARGIN for edge in edges):
            return False
        for a_half, b_half, delta in ((ego.half[0], other.half[0], dx), (ego.half[1], other.half[1], dy)):
            a_lo, a_hi = -a_half, a_half
            b_lo, b_hi = delta - b_half, delta + b_half
            for diff in (a_lo - b_lo, a_hi - b_hi, a_hi - b_lo, b_hi - a_lo):
                if abs(diff) < _MARGIN:
                    return False
        prev_e = ego.pos.get(f - 1)
        prev_o = other.pos.get(f - 1)
        if prev_e is not None and prev_o is not None:
            d_ego = hypot(ex - prev_o[0], ey - prev_o[1]) - hypot(
                prev_e[0] - prev_o[0], prev_e[1] - prev_o[1]
            )
            d_oth = hypot(ox - prev_e[0], oy - prev_e[1]) - hypot(
                prev_o[0] - prev_e[0], prev_o[1] - prev_e[1]
            )
            for d in (d_ego, d_oth):
                if d != 0.0 and abs(d) < _MARGIN:
                    return False
    return True


def _draw_until_safe(draw, ego: _Track, window: range, limit: int = 200) -> _Track:
    for _ in range(limit):
        candidate = draw()
        if _margins_ok(ego, candidate, window):
            return candidate
    raise RuntimeError("could not place a distractor clear of relation boundaries")


def _paced_car(rng: random.Random, ego_ys: list[float], ahead: bool) -> _Track:
    dy = rng.uniform(5.2, 10.0) * (1 if ahead else -1)
    x = rng.choice((-3.5, 3.5))
    track = _Track("car", _CAR_NS)
    for f, y in enumerate(ego_ys):
        track.pos[f] = (x, y + dy)
    return track


def _static_obstacle(rng: random.Random, ego_ys: list[float], ann_frame: int, behind: bool) -> _Track:
    x = rng.choice((-1, 1)) * rng.uniform(3.0, 7.0)
    if behind:
        y = ego_ys[ann_frame - _WINDOW + 1] - rng.uniform(2.5, 7.0)
    else:
        y = ego_ys[ann_frame] + rng.uniform(2.5, 12.0)
    track = _Track("car", _CAR_NS)
    for f in range(len(ego_ys)):
        track.pos[f] = (x, y)
    return track


def _exiter(rng: random.Random, last_frame: int, obj_class: str) -> _Track:
    x = rng.choice((-1, 1)) * rng.uniform(3.0, 12.0)
    y = rng.uniform(-8.0, 28.0)
    track = _Track(obj_class, _HALF_BY_CLASS[obj_class])
    for f in range(last_frame + 1):
        track.pos[f] = (x, y)
    return track


def _build_tracks(spec: ScenarioSpec, rng: random.Random) -> tuple[dict[str, _Track], str, int]:
    n = spec.n_frames
    ego_ys = _ego_ys(spec.kind, n)
    ann = _annotation_frame(spec.kind, n)
    window = range(ann - _WINDOW + 1, ann + 1)

    ego = _Track("car", _CAR_NS, {f: (0.0, y) for f, y in enumerate(ego_ys)})
    tracks: dict[str, _Track] = {EGO_ID: ego}

    if spec.kind == STOPPING_FOR_CROSSER:
        cause = "ped"
        ped = _Track("pedestrian", _HALF_BY_CLASS["pedestrian"])
        crossing_y = ego_ys[ann] + 8.0
        for f in range(n):
            ped.pos[f] = (-10.0 + 2.0 * (f - (ann - 4)), crossing_y)
        tracks[cause] = ped
    elif spec.kind == LEAD_VEHICLE_BRAKING:
        cause = "lead"
        steps = [3.0] * (n - 10) + [2.0, 1.0] + [0.0] * 7
        lead = _Track("car", _CAR_NS)
        y = ego_ys[0] + 20.0
        lead.pos[0] = (0.5, y)
        for f, s in enumerate(steps, start=1):
            y += s
            lead.pos[f] = (0.5, y)
        tracks[cause] = lead
    elif spec.kind == GAP_ACCELERATE:
        cause = "lead"
        lead = _Track("car", _CAR_NS)
        y = 8.0
        for f in range(n):
            if f > ann - 4:
                y += 1.5 * (f - (ann - 4))
            lead.pos[f] = (0.5, y)
        tracks[cause] = lead
    else:
        cause = NO_CAUSE

    if spec.kind == CLEAR_CRUISE:
        slots = spec.n_distractors
        draws = [
            lambda: _paced_car(rng, ego_ys, ahead=True),
            lambda: _paced_car(rng, ego_ys, ahead=False),
            lambda: _static_obstacle(rng, ego_ys, ann, behind=True),
            lambda: _static_obstacle(rng, ego_ys, ann, behind=False),
        ]
        n_full = slots - 1 if (spec.cruise_twin and slots > 0) else slots
        for i in range(n_full):
            tracks[f"d{i}"] = _draw_until_safe(draws[i % 4], ego, window)
        if spec.cruise_twin and slots > 0:
            twin = _linger_track(ego_ys, ann, spec.cruise_twin)
            if not _margins_ok(ego, twin, window):
                raise RuntimeError("lingering-object geometry lost its safety margins")
            tracks[f"d{slots - 1}"] = twin
    else:
        exit_classes = ("car", "pedestrian", "cyclist")
        slots = spec.n_distractors
        for i in range(max(0, slots - 1)):
            tracks[f"d{i}"] = _exiter(rng, window.start - 1, exit_classes[i % 3])
        if slots > 0:
            variant = "l12" if spec.kind != GAP_ACCELERATE else "l45"
            linger = _linger_track(ego_ys, ann, variant)
            if not _margins_ok(ego, linger, window):
                raise RuntimeError("lingering-object geometry lost its safety margins")
            tracks[f"d{slots - 1}"] = linger
        if not _margins_ok(ego, tracks[cause], window):
            raise RuntimeError(f"{spec.kind} cause geometry lost its safety margins")

    return tracks, cause, ann


def _assemble(
    scene_id: str,
    tracks: dict[str, _Track],
    n_frames: int,
    offsets: dict[str, tuple[float, float]],
) -> Scene:
    frames = []
    for f in range(n_frames):
        states = []
        for oid, track in tracks.items():
            if f not in track.pos:
                continue
            cx, cy = track.pos[f]
            off = offsets.get(oid)
            if off is not None:
                cx += off[0]
                cy += off[1]
            hx, hy = track.half
            states.append(
                ObjectState(oid, track.obj_class, BBox2D.from_bounds(cx - hx, cx + hx, cy - hy, cy + hy))
            )
        frames.append(Frame(f, f * 0.5, tuple(states)))
    return Scene(scene_id, tuple(frames))


def _window_chains(scene: Scene, ann_frame: int):
    graph = build(scene)
    start = ann_frame - _WINDOW + 1
    chains = {}
    for other in graph.partners(EGO_ID):
        chain = [(f, rel) for f, rel in graph.edge_chain(EGO_ID, other, ann_frame, _WINDOW) if f >= start]
        if chain:
            chains[other] = chain
    return chains


def generate_scene(spec: ScenarioSpec) -> tuple[Scene, ActionAnnotation, GroundTruth]:
    """Generate one scene.  Deterministic in the spec (including its seed):
    the same spec always yields byte-identical frames and annotations."""
    rng = random.Random(spec.seed)
    tracks, cause, ann_frame = _build_tracks(spec, rng)
    scene_id = f"{spec.kind}-{spec.seed:x}"

    clean = _assemble(scene_id, tracks, spec.n_frames, {})
    if spec.jitter_sigma == 0.0:
        scene = clean
    else:
        # jitter must perturb coordinates without flipping any windowed
        # relation, otherwise the planted ground truth would silently rot
        reference = _window_chains(clean, ann_frame)
        for _ in range(50):
            offsets = {
                oid: (rng.gauss(0.0, spec.jitter_sigma), rng.gauss(0.0, spec.jitter_sigma))
                for oid in tracks
            }
            scene = _assemble(scene_id, tracks, spec.n_frames, offsets)
            if _window_chains(scene, ann_frame) == reference:
                break
        else:
            raise RuntimeError(
                f"jitter sigma {spec.jitter_sigma} keeps flipping windowed relations; "
                "the margins assume something closer to 0.1"
            )

    annotation = ActionAnnotation(scene_id, ann_frame, EGO_ID, ACTION_FOR_KIND[spec.kind])

    frame = scene.frame_at(ann_frame)
    ego_state = frame.get(EGO_ID)
    nearest = None
    best = None
    for state in frame.objects:
        if state.object_id == EGO_ID:
            continue
        d = ego_state.center.distance_to(state.center)
        if best is None or (d, state.object_id) < best:
            best = (d, state.object_id)
            nearest = state.object_id
    truth = GroundTruth(scene_id, annotation, cause, nearest)
    return scene, annotation, truth


def _round_robin(
    n_per_kind: int, base: ScenarioSpec, seeds: np.ndarray
) -> list[tuple[Scene, ActionAnnotation, GroundTruth]]:
    items = []
    for i in range(4 * n_per_kind):
        kind = KINDS[i % 4]
        twin = None
        if kind == CLEAR_CRUISE:
            # every fifth cruise scene hosts the stopping lingerer's chain,
            # the next one the accelerating lingerer's
            twin = {0: "l12", 1: "l45"}.get((i // 4) % 5)
        spec = replace(base, kind=kind, seed=int(seeds[i]), cruise_twin=twin)
        items.append(generate_scene(spec))
    return items


def _base_spec(base: ScenarioSpec | None) -> ScenarioSpec:
    return base if base is not None else ScenarioSpec(CLEAR_CRUISE)


def generate_dataset(
    n_per_kind: int, base_spec: ScenarioSpec | None = None, master_seed: int = 42
) -> list[tuple[Scene, ActionAnnotation, GroundTruth]]:
    """A mixed list of scenes, kinds interleaved round-robin, with all scene
    seeds derived from one master seed."""
    seeds = np.random.SeedSequence(master_seed).generate_state(4 * n_per_kind, dtype=np.uint64)
    return _round_robin(n_per_kind, _base_spec(base_spec), seeds)


def generate_corpus(
    n_train_per_kind: int,
    n_test_per_kind: int,
    base_spec: ScenarioSpec | None = None,
    master_seed: int = 42,
):
    """Disjoint train and test scene lists with exact per-kind counts.  The
    two halves draw from independent seed streams spawned off the master
    seed, so they never share a scene."""
    train_ss, test_ss = np.random.SeedSequence(master_seed).spawn(2)
    base = _base_spec(base_spec)
    train = _round_robin(n_train_per_kind, base, train_ss.generate_state(4 * n_train_per_kind, dtype=np.uint64))
    test = _round_robin(n_test_per_kind, base, test_ss.generate_state(4 * n_test_per_kind, dtype=np.uint64))
    return train, test


def split_scenes(items: Iterable, train_fraction: float = 0.7):
    """Stable hash split by scene id: membership depends only on the id, so
    regenerating or reordering a corpus never moves a scene across the
    boundary."""
    if not 0.0 <= train_fraction <= 1.0:
        raise ValueError(f"train_fraction must be within [0, 1], got {train_fraction}")
    train, test = [], []
    for item in items:
        scene = item[0] if isinstance(item, tuple) else item
        digest = hashlib.sha256(scene.scene_id.encode("utf-8")).digest()
        share = int.from_bytes(digest[:8], "big") / 2**64
        (train if share < train_fraction else test).append(item)
    return train, test
