"""Incremental construction of the qualitative scene graph.

The graph has one node per object ever observed and one edge per object pair
that shared at least one frame.  An edge carries the pair's relation history:
for every co-occurrence frame, one four-component relation tuple.

``Builder.push_frame`` is the hot path and deliberately avoids the dataclass
machinery in :mod:`qxg.calculi`: relations are computed with inline float
comparisons and stored as packed integer codes.  The arithmetic (``hypot``
distances, exact endpoint ties, half-open bands) is kept identical to the
pure functions so the two code paths agree bit for bit; the test suite
cross-checks them on random frames.
"""

from __future__ import annotations

import json
import time
from bisect import bisect_right
from dataclasses import dataclass, field
from math import hypot
from typing import Union

from .calculi import (
    ALLEN_BY_LABEL,
    DEFAULT_CONFIG,
    MOTION_BY_LABEL,
    SECTOR_BY_LABEL,
    Allen,
    CalculiConfig,
    Motion,
    QDCRelation,
    QTCBRelation,
    RARelation,
    RelationTuple,
    Sector,
    converse_tuple,
)
from .scene import Frame, Scene

__all__ = [
    "OutOfOrderFrame",
    "BuilderStats",
    "EdgeHistory",
    "QXG",
    "Builder",
    "build",
    "export_graph",
    "import_graph",
]


class OutOfOrderFrame(ValueError):
    """Frames must arrive with strictly increasing indices."""


@dataclass(frozen=True)
class BuilderStats:
    """What one ``push_frame`` call did and how long it took."""

    frame_index: int
    objects_in_frame: int
    pairs_updated: int
    elapsed_ns: int


@dataclass
class EdgeHistory:
    """Per-pair relation history as parallel arrays (ascending frames)."""

    frames: list[int] = field(default_factory=list)
    codes: list[int] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.frames)


@dataclass
class QXG:
    """A finished (or in-progress) qualitative scene graph.

    Stored relation tuples always describe the lexicographically smaller
    object id against the larger one; the accessors apply the converse when
    a query names the pair in the opposite order.
    """

    scene_id: str
    band_names: tuple[str, ...]
    node_classes: dict[str, str] = field(default_factory=dict)
    edges: dict[tuple[str, str], EdgeHistory] = field(default_factory=dict)

    def decode(self, code: int) -> RelationTuple:
        ax = code % 13
        code //= 13
        ay = code % 13
        code //= 13
        am = code % 4
        code //= 4
        bm = code % 4
        code //= 4
        n_bands = len(self.band_names)
        band = code % n_bands
        sector = code // n_bands
        return RelationTuple(
            RARelation(Allen(ax), Allen(ay)),
            QTCBRelation(Motion(am), Motion(bm)),
            QDCRelation(band, self.band_names[band]),
            Sector(sector),
        )

    def relations(self, a: str, b: str) -> list[tuple[int, RelationTuple]]:
        """Full relation history of the pair, oriented as a-against-b."""
        if a == b:
            raise ValueError(f"a pair needs two distinct objects, got {a!r} twice")
        key = (a, b) if a < b else (b, a)
        history = self.edges.get(key)
        if history is None:
            return []
        flip = key[0] != a
        out = []
        for frame, code in zip(history.frames, history.codes):
            rel = self.decode(code)
            out.append((frame, converse_tuple(rel) if flip else rel))
        return out

    def edge_chain(
        self, a: str, b: str, at_frame: int, t: int
    ) -> list[tuple[int, RelationTuple]]:
        """The last up-to-``t`` relations of the pair at or before
        ``at_frame``, in ascending frame order, oriented as a-against-b."""
        if a == b:
            raise ValueError(f"a pair needs two distinct objects, got {a!r} twice")
        if t <= 0:
            return []
        key = (a, b) if a < b else (b, a)
        history = self.edges.get(key)
        if history is None:
            return []
        end = bisect_right(history.frames, at_frame)
        start = max(0, end - t)
        flip = key[0] != a
        out = []
        for frame, code in zip(history.frames[start:end], history.codes[start:end]):
            rel = self.decode(code)
            out.append((frame, converse_tuple(rel) if flip else rel))
        return out

    def partners(self, object_id: str) -> list[str]:
        """Every object this one ever shared a frame with, sorted."""
        found = []
        for first, second in self.edges:
            if first == object_id:
                found.append(second)
            elif second == object_id:
                found.append(first)
        return sorted(found)


class Builder:
    """Feeds frames one at a time into a growing :class:`QXG`.

    Keeps the last observed centroid of every object so trajectory relations
    survive detection gaps: an object absent for a few frames is judged
    against wherever it was last seen, not reset to Unknown.
    """

    def __init__(
        self,
        scene_id: str,
        cfg: CalculiConfig = DEFAULT_CONFIG,
        *,
        max_pair_distance: float | None = None,
    ):
        self.cfg = cfg
        self.graph = QXG(scene_id, cfg.qdc_band_names)
        self.max_pair_distance = max_pair_distance
        self._last_center: dict[str, tuple[float, float]] = {}
        self._last_index: int | None = None

    def push_frame(self, frame: Frame) -> BuilderStats:
        t0 = time.perf_counter_ns()
        if self._last_index is not None and frame.index <= self._last_index:
            raise OutOfOrderFrame(
                f"frame {frame.index} pushed after frame {self._last_index}"
            )

        edges = self.cfg.qdc_band_edges
        n_bands = len(self.cfg.qdc_band_names)
        eps = self.cfg.qtc_epsilon
        prune = self.max_pair_distance
        last_center = self._last_center
        node_classes = self.graph.node_classes
        graph_edges = self.graph.edges

        # Unpack once; the pair loop below touches plain floats only.
        states = []
        for s in frame.objects:
            x, y = s.bbox.x, s.bbox.y
            cx, cy = (x.lo + x.hi) / 2.0, (y.lo + y.hi) / 2.0
            states.append((s.object_id, x.lo, x.hi, y.lo, y.hi, cx, cy))
            if s.object_id not in node_classes:
                node_classes[s.object_id] = s.obj_class
        states.sort(key=lambda st: st[0])

        frame_index = frame.index
        pairs_updated = 0
        for i in range(len(states) - 1):
            a_id, axl, axh, ayl, ayh, acx, acy = states[i]
            a_prev = last_center.get(a_id)
            for j in range(i + 1, len(states)):
                b_id, bxl, bxh, byl, byh, bcx, bcy = states[j]

                dist = hypot(acx - bcx, acy - bcy)
                if prune is not None and dist > prune:
                    continue

                # Interval relation per axis (exact endpoint ties).
                if axh < bxl:
                    ax = 0
                elif bxh < axl:
                    ax = 7
                elif axl == bxl:
                    ax = 6 if axh == bxh else (3 if axh < bxh else 10)
                elif axl < bxl:
                    if axh == bxh:
                        ax = 12
                    elif axh > bxh:
                        ax = 11
                    else:
                        ax = 1 if axh == bxl else 2
                elif axh == bxh:
                    ax = 5
                elif axh < bxh:
                    ax = 4
                else:
                    ax = 8 if axl == bxh else 9

                if ayh < byl:
                    ay = 0
                elif byh < ayl:
                    ay = 7
                elif ayl == byl:
                    ay = 6 if ayh == byh else (3 if ayh < byh else 10)
                elif ayl < byl:
                    if ayh == byh:
                        ay = 12
                    elif ayh > byh:
                        ay = 11
                    else:
                        ay = 1 if ayh == byl else 2
                elif ayh == byh:
                    ay = 5
                elif ayh < byh:
                    ay = 4
                else:
                    ay = 8 if ayl == byh else 9

                b_prev = last_center.get(b_id)
                if a_prev is None or b_prev is None:
                    am = bm = 3
                else:
                    apx, apy = a_prev
                    bpx, bpy = b_prev
                    a_delta = hypot(acx - bpx, acy - bpy) - hypot(apx - bpx, apy - bpy)
                    am = 0 if a_delta < -eps else (2 if a_delta > eps else 1)
                    b_delta = hypot(bcx - apx, bcy - apy) - hypot(bpx - apx, bpy - apy)
                    bm = 0 if b_delta < -eps else (2 if b_delta > eps else 1)

                band = bisect_right(edges, dist)

                dx = bcx - acx
                dy = bcy - acy
                if dy > 0.0:
                    sector = 0 if dx >= 0.0 else 1
                elif dy < 0.0:
                    sector = 2 if dx <= 0.0 else 3
                elif dx > 0.0:
                    sector = 3
                elif dx < 0.0:
                    sector = 1
                else:
                    sector = 0

                code = ax + 13 * (ay + 13 * (am + 4 * (bm + 4 * (band + n_bands * sector))))
                history = graph_edges.get((a_id, b_id))
                if history is None:
                    history = graph_edges[(a_id, b_id)] = EdgeHistory()
                history.frames.append(frame_index)
                history.codes.append(code)
                pairs_updated += 1

        for st in states:
            last_center[st[0]] = (st[5], st[6])
        self._last_index = frame_index

        return BuilderStats(frame_index, len(states), pairs_updated, time.perf_counter_ns() - t0)

    @property
    def last_seen_center(self) -> dict[str, tuple[float, float]]:
        return dict(self._last_center)


def build(
    scene: Scene,
    cfg: CalculiConfig = DEFAULT_CONFIG,
    *,
    max_pair_distance: float | None = None,
) -> QXG:
    """Run a whole scene through a fresh builder."""
    builder = Builder(scene.scene_id, cfg, max_pair_distance=max_pair_distance)
    for frame in scene.frames:
        builder.push_frame(frame)
    return builder.graph


# -- serialization ------------------------------------------------------------


def graph_to_dict(graph: QXG) -> dict:
    edges_out = []
    for (a, b) in sorted(graph.edges):
        history = graph.edges[(a, b)]
        relations = []
        for frame, code in zip(history.frames, history.codes):
            rel = graph.decode(code)
            relations.append(
                {
                    "frame": frame,
                    "ra": [rel.ra.x.label, rel.ra.y.label],
                    "qtcb": [rel.qtcb.a.label, rel.qtcb.b.label],
                    "qdc": rel.qdc.band_name,
                    "star4": rel.star4.label,
                }
            )
        edges_out.append({"a": a, "b": b, "relations": relations})
    return {
        "scene_id": graph.scene_id,
        "qdc_bands": list(graph.band_names),
        "nodes": [
            {"id": oid, "class": graph.node_classes[oid]} for oid in sorted(graph.node_classes)
        ],
        "edges": edges_out,
    }


def graph_from_dict(payload: dict) -> QXG:
    try:
        band_names = tuple(payload["qdc_bands"])
        graph = QXG(payload["scene_id"], band_names)
        band_index = {name: i for i, name in enumerate(band_names)}
        for node in payload["nodes"]:
            graph.node_classes[node["id"]] = node["class"]
        n_bands = len(band_names)
        for edge in payload["edges"]:
            history = EdgeHistory()
            for rel in edge["relations"]:
                ax = ALLEN_BY_LABEL[rel["ra"][0]]
                ay = ALLEN_BY_LABEL[rel["ra"][1]]
                am = MOTION_BY_LABEL[rel["qtcb"][0]]
                bm = MOTION_BY_LABEL[rel["qtcb"][1]]
                band = band_index[rel["qdc"]]
                sector = SECTOR_BY_LABEL[rel["star4"]]
                history.frames.append(rel["frame"])
                history.codes.append(
                    ax + 13 * (ay + 13 * (am + 4 * (bm + 4 * (band + n_bands * sector))))
                )
            graph.edges[(edge["a"], edge["b"])] = history
    except (KeyError, IndexError, TypeError) as exc:
        raise ValueError(f"not a serialized scene graph: {exc!r}") from None
    return graph


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')


def _dot_quote(text: str) -> str:
    return '"' + _dot_escape(text) + '"'


def _tuple_label(rel: RelationTuple) -> str:
    return "|".join(
        (
            f"{rel.ra.x.label},{rel.ra.y.label}",
            f"{rel.qtcb.a.label},{rel.qtcb.b.label}",
            rel.qdc.band_name,
            rel.star4.label,
        )
    )


def export_graph(graph: QXG, fmt: str = "json") -> bytes:
    """Serialize a graph.  ``json`` round-trips through :func:`import_graph`;
    ``dot`` is a one-way rendering where each edge is labelled with its most
    recent relation tuple."""
    if fmt == "json":
        return (json.dumps(graph_to_dict(graph), separators=(",", ":")) + "\n").encode("utf-8")
    if fmt == "dot":
        lines = [f"graph {_dot_quote(graph.scene_id)} {{"]
        for oid in sorted(graph.node_classes):
            # \n is Graphviz's own line-break escape, so it must survive
            # quoting literally rather than get its backslash doubled.
            label = f"{_dot_escape(oid)}\\n({_dot_escape(graph.node_classes[oid])})"
            lines.append(f'  {_dot_quote(oid)} [label="{label}"];')
        for (a, b) in sorted(graph.edges):
            history = graph.edges[(a, b)]
            final = graph.decode(history.codes[-1])
            lines.append(
                f"  {_dot_quote(a)} -- {_dot_quote(b)} [label={_dot_quote(_tuple_label(final))}];"
            )
        lines.append("}")
        return ("\n".join(lines) + "\n").encode("utf-8")
    raise ValueError(f"unknown export format {fmt!r} (expected 'json' or 'dot')")


def import_graph(data: Union[str, bytes, dict]) -> QXG:
    if isinstance(data, (str, bytes)):
        try:
            payload = json.loads(data)
        except json.JSONDecodeError as exc:
            raise ValueError(f"not a serialized scene graph: {exc.msg}") from None
    else:
        payload = data
    if not isinstance(payload, dict):
        raise ValueError("not a serialized scene graph: expected a JSON object")
    return graph_from_dict(payload)
