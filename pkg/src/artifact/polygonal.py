"""Inscribed geodesic polygonals: mesh, modulus, rotation and refinement schedules."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .curve import GeodesicPiece, arc_length_param, signed_turn
from .surface import GeodesicConnectionError, IllConditionedError, Plane

STRATEGIES = ("uniform-doubling", "modulus-target", "random-nested")
REPORT_COLUMNS = ("n", "mesh", "modulus", "rotation", "euclid_rotation", "length")


class DegenerateCornerError(ValueError):
    """A polygonal has a zero-length arc, so a corner angle is undefined."""


class ResolutionError(ValueError):
    """A requested modulus is finer than the curve sampling can resolve."""


@dataclass
class GeodesicPolygonal:
    """Vertices on a curve joined by minimal geodesic arcs.

    ``params`` holds the curve parameter of each arc start plus the end of
    the last arc, so it has ``n_arcs + 1`` entries (for a closed polygonal
    the last one is ``L``).  Arc ``i`` runs from vertex ``i`` to vertex
    ``i + 1`` (to vertex 0 for the closing arc).
    """
    surface: object
    points: np.ndarray = field(repr=False)
    params: np.ndarray = field(repr=False)
    indices: np.ndarray = field(repr=False)
    closed: bool
    directions: np.ndarray = field(repr=False)
    lengths: np.ndarray = field(repr=False)
    end_directions: np.ndarray = field(repr=False)

    @property
    def n_vertices(self):
        return len(self.points)

    @property
    def n_arcs(self):
        return len(self.lengths)

    @property
    def length(self):
        return float(np.sum(self.lengths))

    def arc_ends(self):
        P = self.points
        Q = np.roll(P, -1, axis=0) if self.closed else P[1:]
        return (P if self.closed else P[:-1]), Q

    def signed_turns(self):
        """Signed turning angle at each corner; for closed polygonals the corner at vertex 0 comes last."""
        if np.any(self.lengths <= 0.0) or not np.all(np.isfinite(self.directions)):
            k = int(np.argmin(self.lengths))
            raise DegenerateCornerError(f"arc {k} has zero length")
        if self.closed:
            at = np.r_[np.arange(1, self.n_arcs), 0]
            inc = np.r_[np.arange(0, self.n_arcs - 1), self.n_arcs - 1]
            out = np.r_[np.arange(1, self.n_arcs), 0]
        else:
            at = np.arange(1, self.n_arcs)
            inc = at - 1
            out = at
        if len(at) == 0:
            return np.zeros(0)
        return np.atleast_1d(signed_turn(self.surface, self.points[at],
                                         self.end_directions[inc], self.directions[out]))

    def arcs(self, samples=64):
        """Dense traces ``(s, points, velocities)`` of every arc."""
        P, _ = self.arc_ends()
        return [self.surface.geodesic_trace(p, d, ell, samples)
                for p, d, ell in zip(P, self.directions, self.lengths)]


def _snap(curve, partition):
    part = np.asarray(partition, dtype=float)
    if part.ndim != 1 or len(part) == 0:
        raise ValueError("partition must be a non-empty list of parameters")
    if np.any(np.diff(part) <= 0):
        raise ValueError("partition must be strictly increasing")
    L = curve.length
    if part[0] < -1e-12 or part[-1] > L + 1e-12:
        raise ValueError(f"partition must lie inside [0, {L:.9g}]")
    idx = np.searchsorted(curve.s, part)
    idx = np.clip(idx, 1, curve.n)
    left = curve.s[idx - 1]
    idx = np.where(np.abs(part - left) <= np.abs(curve.s[idx] - part), idx - 1, idx)
    return idx


def inscribe(curve, partition, indices=None):
    """Inscribe a geodesic polygonal at the nodes nearest to ``partition``.

    The curve's start is always a vertex; for open curves the end is too.
    ``indices`` may be passed instead of ``partition`` to give node indices
    directly.
    """
    if indices is None:
        idx = _snap(curve, partition)
    else:
        idx = np.asarray(indices, dtype=int)
    idx = np.unique(np.r_[0, idx, curve.n])
    surf = curve.surface
    if curve.closed:
        verts = idx[:-1]
        params = curve.s[idx]
    else:
        verts = idx
        params = curve.s[idx]
    if len(verts) < 2:
        raise ValueError("a polygonal needs at least two vertices")
    P = curve.points[verts]
    Q = np.roll(P, -1, axis=0) if curve.closed else P[1:]
    A = P if curve.closed else P[:-1]
    try:
        d0, ell, d1 = surf.connect_many(A, Q)
    except (IllConditionedError, GeodesicConnectionError) as exc:
        k = _failing_arc(surf, A, Q)
        raise type(exc)(f"arc {k} (vertices {k} -> {k + 1}): {exc}") from None
    return GeodesicPolygonal(surf, P, params, verts, curve.closed, d0, ell, d1)


def _failing_arc(surf, A, Q):
    for k, (a, q) in enumerate(zip(A, Q)):
        try:
            surf.connect_many(a[None], q[None])
        except (IllConditionedError, GeodesicConnectionError):
            return k
    return -1


def mesh_of(curve, poly):
    """Largest parameter gap between consecutive vertices."""
    return float(np.max(np.diff(poly.params)))


def _arc_index_ranges(curve, poly):
    starts = np.asarray(poly.indices)
    ends = np.r_[starts[1:], curve.n] if poly.closed else starts[1:]
    return starts[: len(ends)], ends


def _pairwise_max(surface, X):
    """Max distance over all sample pairs of each row of ``X`` (shape ``(A, m, d)``)."""
    diff = X[:, :, None, :] - X[:, None, :, :]
    chord = np.max(np.linalg.norm(diff, axis=-1), axis=(1, 2))
    if surface.kind == "sphere":
        return 2.0 * np.arcsin(np.minimum(chord / 2.0, 1.0))
    return chord


def _subsample(lo, hi, m):
    return np.unique(np.round(np.linspace(lo, hi, m)).astype(int))


def arc_diameters(curve, starts, ends, samples=None):
    """Subsampled geodesic diameters of the curve arcs ``[starts[i], ends[i]]`` (node indices)."""
    surf = curve.surface
    analytic = isinstance(surf, Plane) or surf.analytic
    cap = samples or (64 if analytic else 4)
    starts = np.asarray(starts)
    ends = np.asarray(ends)
    out = np.zeros(len(starts))
    if analytic:
        X = surf.embed(curve.points)
        counts = ends - starts
        for c in np.unique(counts):
            sel = np.flatnonzero(counts == c)
            m = int(min(cap, c + 1))
            offs = np.unique(np.round(np.linspace(0, c, m)).astype(int))
            out[sel] = _pairwise_max(surf, X[starts[sel][:, None] + offs[None, :]])
        return out
    for k, (a, b) in enumerate(zip(starts, ends)):
        idx = _subsample(a, b, min(cap, b - a + 1))
        pts = curve.points[idx]
        i, j = np.triu_indices(len(idx), 1)
        out[k] = float(np.max(surf.distance_many(pts[i], pts[j])))
    return out


def modulus_of(curve, poly, samples=None):
    """Largest subsampled geodesic diameter of the curve arcs cut by consecutive vertices.

    Each arc uses ``min(64, nodes)`` evenly spaced samples on analytic
    surfaces and 4 on shooting charts; the result is a lower bound of the
    exact diameter.
    """
    starts, ends = _arc_index_ranges(curve, poly)
    return float(np.max(arc_diameters(curve, starts, ends, samples)))


def rotation_of(poly):
    """Sum of absolute turning angles, including the closing corner of a closed polygonal."""
    return float(np.sum(np.abs(poly.signed_turns())))


def polyline_rotation(points, closed=False):
    """Sum of exterior angles of a straight polyline in any dimension."""
    X = np.asarray(points, dtype=float)
    if closed:
        X = np.vstack([X, X[:1]])
    seg = np.diff(X, axis=0)
    norms = np.linalg.norm(seg, axis=1)
    if np.any(norms == 0.0):
        raise ValueError(f"repeated vertex at position {int(np.argmin(norms))}")
    a, b = seg[:-1], seg[1:]
    if closed:
        a, b = np.vstack([a, seg[-1:]]), np.vstack([b, seg[:1]])
    if X.shape[1] == 2:
        cross = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
    else:
        cross = np.linalg.norm(np.cross(a, b), axis=1)
    return float(np.sum(np.arctan2(cross, np.sum(a * b, axis=1))))


def euclidean_rotation_of(obj, closed=False):
    """Rotation of a straight polyline: an ``(k, d)`` array or the embedded vertices of a polygonal."""
    if isinstance(obj, GeodesicPolygonal):
        surf = obj.surface
        if not (isinstance(surf, Plane) or surf.has_embedding):
            raise ValueError("surface has no embedding")
        return polyline_rotation(surf.embed(obj.points), obj.closed)
    return polyline_rotation(obj, closed)


def as_curve(poly, n=4096):
    """The polygonal itself as a sampled curve (geodesic pieces)."""
    P = [tuple(p) for p in poly.points]
    chain = P + [P[0]] if poly.closed else P
    pieces = [GeodesicPiece(a, b) for a, b in zip(chain[:-1], chain[1:])]
    return arc_length_param(poly.surface, pieces, n=n, closed=poly.closed)


# ---------------------------------------------------------------------------
# refinement

def _with_breaks(curve, idx):
    return np.unique(np.r_[idx, curve.breakpoints])


def _uniform(curve, count):
    return np.unique(np.round(np.arange(count + 1) * (curve.n / count)).astype(int))


def refinement_schedule(curve, strategy="uniform-doubling", start=None, rounds=6, targets=None,
                        seed=0):
    """Nested partitions (as node indices) with decreasing mesh.

    ``uniform-doubling`` starts from ``start`` equal arcs (default 4) and
    doubles ``rounds - 1`` times.  For curves with singular pieces and no
    explicit ``start`` the schedule is anchored so that the last round uses
    every native node.  ``modulus-target`` bisects arcs until every
    subsampled diameter is below each target in turn.  ``random-nested``
    splits every arc at a seeded random node in its middle half.  Piece
    junctions are always included.
    """
    if strategy not in STRATEGIES:
        raise ValueError(f"unknown strategy {strategy!r}; valid: {', '.join(STRATEGIES)}")
    if rounds < 1:
        raise ValueError("rounds must be positive")
    singular = any(seg.kind == "singular" for seg in curve.segments)
    if start is None and singular and strategy == "uniform-doubling":
        top = rounds - 1
        return [_with_breaks(curve, np.r_[np.arange(0, curve.n + 1, 2 ** (top - j)), curve.n])
                for j in range(rounds)]
    start = 4 if start is None else int(start)
    if start < 1:
        raise ValueError("start must be positive")
    if strategy == "uniform-doubling":
        out = []
        for j in range(rounds):
            count = start * 2 ** j
            if count > curve.n:
                raise ResolutionError(
                    f"round {j} needs {count} arcs but the curve has only {curve.n} intervals")
            out.append(_with_breaks(curve, _uniform(curve, count)))
        return out
    base = _with_breaks(curve, _uniform(curve, min(start, curve.n)))
    if strategy == "random-nested":
        rng = np.random.default_rng(seed)
        out = [base]
        for _ in range(rounds - 1):
            cur = out[-1]
            new = []
            for a, b in zip(cur[:-1], cur[1:]):
                if b - a >= 2:
                    lo, hi = a + max(1, (b - a) // 4), b - max(1, (b - a) // 4)
                    new.append(int(rng.integers(lo, hi + 1)))
            if not new:
                raise ResolutionError("cannot split further at this sampling")
            out.append(np.unique(np.r_[cur, new]))
        return out
    if not targets:
        raise ValueError("modulus-target strategy needs a list of targets")
    out, cur = [], base
    for target in targets:
        if target <= 0:
            raise ValueError("targets must be positive")
        while True:
            d = arc_diameters(curve, cur[:-1], cur[1:])
            bad = np.flatnonzero(d > target)
            if len(bad) == 0:
                break
            a, b = cur[bad], cur[bad + 1]
            if np.any(b - a < 2):
                raise ResolutionError(
                    f"modulus target {target:g} is below the curve sampling resolution")
            cur = np.unique(np.r_[cur, (a + b) // 2])
        out.append(cur)
    return out


@dataclass
class RefinementRow:
    n: int
    mesh: float
    modulus: float
    rotation: float
    euclid_rotation: float
    length: float


@dataclass
class RefinementReport:
    rows: list
    strategy: str = "uniform-doubling"
    seed: int | None = None
    subsample: int | None = None

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def as_dict(self):
        return {"strategy": self.strategy, "seed": self.seed, "subsample": self.subsample,
                "rows": [asdict(r) for r in self.rows]}

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(REPORT_COLUMNS)
        for r in self.rows:
            w.writerow([r.n] + [repr(float(getattr(r, c))) for c in REPORT_COLUMNS[1:]])
        return buf.getvalue()


def refinement_report(curve, partitions, strategy="uniform-doubling", seed=None, samples=None):
    """Mesh, modulus, rotations and length for each partition (node indices)."""
    rows = []
    surf = curve.surface
    embedded = isinstance(surf, Plane) or surf.has_embedding
    for idx in partitions:
        poly = inscribe(curve, None, indices=idx)
        eu = euclidean_rotation_of(poly) if embedded else math.nan
        rows.append(RefinementRow(poly.n_vertices, mesh_of(curve, poly),
                                  modulus_of(curve, poly, samples), rotation_of(poly), eu,
                                  poly.length))
    analytic = isinstance(surf, Plane) or surf.analytic
    return RefinementReport(rows, strategy, seed, samples or (64 if analytic else 4))
