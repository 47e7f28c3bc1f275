"""Concrete metric spaces: objects, distances, and distance matrices.

Four object kinds are supported, each with exactly one metric:

==========  =========================  ==========================
kind        object                     metric (selector)
==========  =========================  ==========================
``corr``    correlation matrix         affine-invariant SPD (``spd``)
``sphere``  unit vector                arc length (``sphere``)
``hist``    1-D histogram              order-2 Wasserstein (``wass``)
``eucl``    point in R^p               Euclidean (``eucl``)
==========  =========================  ==========================

Histograms are interpreted as piecewise-uniform densities (mass spread
uniformly within each bin), which makes their quantile functions piecewise
linear and the order-2 Wasserstein integral exact in closed form.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import DistanceMatrix
from .errors import InvalidArgumentError, NotPositiveDefiniteError

EIGENVALUE_FLOOR = 1e-12

METRIC_FOR_KIND = {"corr": "spd", "sphere": "sphere", "hist": "wass", "eucl": "eucl"}
KIND_FOR_METRIC = {v: k for k, v in METRIC_FOR_KIND.items()}


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class CorrelationMatrix:
    """Symmetric positive definite matrix with unit diagonal."""

    entries: np.ndarray

    def __post_init__(self):
        e = np.array(self.entries, dtype=float)
        if e.ndim != 2 or e.shape[0] != e.shape[1]:
            raise InvalidArgumentError(f"correlation matrix must be square, got {e.shape}")
        if not np.all(np.isfinite(e)):
            raise InvalidArgumentError("correlation matrix entries must be finite")
        if np.max(np.abs(e - e.T)) > 1e-9:
            raise InvalidArgumentError("correlation matrix must be symmetric")
        e = 0.5 * (e + e.T)
        if np.max(np.abs(np.diagonal(e) - 1.0)) > 1e-10:
            raise InvalidArgumentError("correlation matrix diagonal must be 1 within 1e-10")
        if np.min(np.linalg.eigvalsh(e)) <= EIGENVALUE_FLOOR:
            raise NotPositiveDefiniteError("correlation matrix is not positive definite")
        object.__setattr__(self, "entries", _readonly(e))

    @property
    def p(self) -> int:
        return self.entries.shape[0]


@dataclass(frozen=True)
class UnitVector:
    """Point on the unit hypersphere."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
            raise InvalidArgumentError("unit vector coords must be a finite 1-D array")
        if abs(np.linalg.norm(c) - 1.0) > 1e-10:
            raise InvalidArgumentError("unit vector must have norm 1 within 1e-10")
        object.__setattr__(self, "coords", _readonly(c))

    @property
    def p(self) -> int:
        return self.coords.size


@dataclass(frozen=True)
class Histogram:
    """Piecewise-uniform probability distribution on the line.

    ``edges`` are the m+1 strictly increasing bin boundaries and ``masses``
    the m nonnegative bin probabilities summing to one.
    """

    edges: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        e = np.array(self.edges, dtype=float)
        m = np.array(self.masses, dtype=float)
        if e.ndim != 1 or m.ndim != 1 or e.size != m.size + 1 or m.size == 0:
            raise InvalidArgumentError("need m+1 edges for m >= 1 masses")
        if not (np.all(np.isfinite(e)) and np.all(np.isfinite(m))):
            raise InvalidArgumentError("histogram entries must be finite")
        if np.any(np.diff(e) <= 0):
            raise InvalidArgumentError("histogram edges must be strictly increasing")
        if np.min(m) < 0:
            raise InvalidArgumentError("histogram masses must be nonnegative")
        if abs(m.sum() - 1.0) > 1e-10:
            raise InvalidArgumentError("histogram masses must sum to 1 within 1e-10")
        object.__setattr__(self, "edges", _readonly(e))
        object.__setattr__(self, "masses", _readonly(m))


@dataclass(frozen=True)
class EuclideanPoint:
    """Plain point in R^p."""

    coords: np.ndarray

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        if c.ndim != 1 or c.size == 0 or not np.all(np.isfinite(c)):
            raise InvalidArgumentError("point coords must be a finite 1-D array")
        object.__setattr__(self, "coords", _readonly(c))

    @property
    def p(self) -> int:
        return self.coords.size


_KIND_FOR_TYPE = {
    CorrelationMatrix: "corr",
    UnitVector: "sphere",
    Histogram: "hist",
    EuclideanPoint: "eucl",
}


@dataclass(frozen=True)
class ObjectSet:
    """Homogeneous collection of objects from one metric space.

    ``labels``, when present, attach one string per object (used by the
    two-group inference routines).
    """

    items: tuple
    labels: tuple | None = None
    kind: str = field(init=False)

    def __post_init__(self):
        items = tuple(self.items)
        if not items:
            raise InvalidArgumentError("object set must be nonempty")
        kinds = {_KIND_FOR_TYPE.get(type(o)) for o in items}
        if None in kinds:
            bad = next(o for o in items if type(o) not in _KIND_FOR_TYPE)
            raise InvalidArgumentError(f"unsupported object type {type(bad).__name__}")
        if len(kinds) != 1:
            raise InvalidArgumentError(f"object set mixes kinds {sorted(kinds)}")
        labels = self.labels
        if labels is not None:
            labels = tuple(str(x) for x in labels)
            if len(labels) != len(items):
                raise InvalidArgumentError("labels length must match number of objects")
        object.__setattr__(self, "items", items)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "kind", kinds.pop())

    def __len__(self) -> int:
        return len(self.items)

    @property
    def metric(self) -> str:
        return METRIC_FOR_KIND[self.kind]


# ---------------------------------------------------------------------------
# distances


def _as_spd(a) -> np.ndarray:
    m = np.asarray(getattr(a, "entries", a), dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise InvalidArgumentError(f"expected a square matrix, got {m.shape}")
    return 0.5 * (m + m.T)


def _inv_sqrt_spd(a: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(a)
    if np.min(w) <= EIGENVALUE_FLOOR:
        raise NotPositiveDefiniteError(f"matrix has eigenvalue {np.min(w)} <= {EIGENVALUE_FLOOR}")
    return (v / np.sqrt(w)) @ v.T


def _spd_distance_given_isqrt(isqrt_a: np.ndarray, b: np.ndarray) -> float:
    m = isqrt_a @ b @ isqrt_a
    w = np.linalg.eigvalsh(0.5 * (m + m.T))
    if np.min(w) <= EIGENVALUE_FLOOR:
        raise NotPositiveDefiniteError(f"matrix has eigenvalue {np.min(w)} <= {EIGENVALUE_FLOOR}")
    return float(np.sqrt(np.sum(np.log(w) ** 2)))


def spd_distance(a, b) -> float:
    """Affine-invariant distance between positive definite matrices.

    Computed as the Frobenius norm of log(a^{-1/2} b a^{-1/2}) via symmetric
    eigendecompositions (inputs pre-symmetrized to absorb round-off).
    Accepts :class:`CorrelationMatrix` objects or raw arrays; only positive
    definiteness is required, not a unit diagonal.
    """
    a = _as_spd(a)
    b = _as_spd(b)
    if a.shape != b.shape:
        raise InvalidArgumentError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return _spd_distance_given_isqrt(_inv_sqrt_spd(a), b)


def sphere_distance(u, v) -> float:
    """Arc length between unit vectors, in [0, pi].

    Evaluated as 2*arcsin(chord/2), which agrees with arccos of the inner
    product for exact unit vectors but keeps d(u, u) = 0 exact and stays
    well-conditioned near coincident points.
    """
    uc = np.asarray(getattr(u, "coords", u), dtype=float)
    vc = np.asarray(getattr(v, "coords", v), dtype=float)
    if uc.shape != vc.shape:
        raise InvalidArgumentError(f"dimension mismatch: {uc.shape} vs {vc.shape}")
    half_chord = 0.5 * np.linalg.norm(uc - vc)
    return float(2.0 * np.arcsin(min(1.0, half_chord)))


def _cumulative(h: Histogram) -> np.ndarray:
    c = np.concatenate(([0.0], np.cumsum(h.masses)))
    # normalizing (masses sum to 1 within 1e-10) collapses trailing
    # zero-mass repeats to exactly 1, keeping merged breakpoints clean
    c /= c[-1]
    c[-1] = 1.0
    return c


def _quantile_on_pieces(h: Histogram, c: np.ndarray, t: np.ndarray, mid: np.ndarray) -> np.ndarray:
    """Quantile values at probabilities ``t``, each read off the linear piece
    that contains the companion interior point ``mid`` (avoids zero-mass-bin
    boundary ambiguity)."""
    j = np.searchsorted(c, mid, side="right") - 1
    # mid rounding to exactly 1 can select a trailing zero-mass bin
    positive = np.nonzero(np.diff(c) > 0)[0]
    j = np.clip(j, positive[0], positive[-1])
    width = c[j + 1] - c[j]
    e = h.edges
    return e[j] + (t - c[j]) * (e[j + 1] - e[j]) / width


def wasserstein2_distance(h1: Histogram, h2: Histogram) -> float:
    """Order-2 Wasserstein distance between piecewise-uniform histograms.

    Equals the L2 norm of the difference of the two quantile functions.
    Both cumulative-probability breakpoint sets are merged; on each merged
    sub-interval both quantile functions are linear, so the integral of the
    squared difference is accumulated in closed form.
    """
    if not isinstance(h1, Histogram) or not isinstance(h2, Histogram):
        raise InvalidArgumentError("wasserstein2_distance expects Histogram inputs")
    c1 = _cumulative(h1)
    c2 = _cumulative(h2)
    ts = np.union1d(c1, c2)
    t0, t1 = ts[:-1], ts[1:]
    keep = t1 > t0
    t0, t1 = t0[keep], t1[keep]
    mid = 0.5 * (t0 + t1)
    g0 = _quantile_on_pieces(h1, c1, t0, mid) - _quantile_on_pieces(h2, c2, t0, mid)
    g1 = _quantile_on_pieces(h1, c1, t1, mid) - _quantile_on_pieces(h2, c2, t1, mid)
    # exact integral of the squared linear interpolant on each sub-interval
    total = np.sum((t1 - t0) * (g0 * g0 + g0 * g1 + g1 * g1) / 3.0)
    return float(np.sqrt(max(total, 0.0)))


def euclidean_distance(a, b) -> float:
    """Plain Euclidean norm of the difference."""
    ac = np.asarray(getattr(a, "coords", a), dtype=float)
    bc = np.asarray(getattr(b, "coords", b), dtype=float)
    if ac.shape != bc.shape:
        raise InvalidArgumentError(f"dimension mismatch: {ac.shape} vs {bc.shape}")
    return float(np.linalg.norm(ac - bc))


def _resolve_metric(objects: ObjectSet, metric: str | None) -> str:
    expected = objects.metric
    if metric is None:
        return expected
    if metric not in KIND_FOR_METRIC:
        raise InvalidArgumentError(f"unknown metric {metric!r}; choose from {sorted(KIND_FOR_METRIC)}")
    if metric != expected:
        raise InvalidArgumentError(
            f"metric {metric!r} does not match object kind {objects.kind!r} (expected {expected!r})"
        )
    return metric


def distance_matrix(objects: ObjectSet, metric: str | None = None) -> DistanceMatrix:
    """Pairwise distance matrix of an object set.

    Each unordered pair is evaluated once; the matrix is exactly symmetric
    with an exactly zero diagonal. For correlation matrices the inverse
    square roots are factored once per object.
    """
    metric = _resolve_metric(objects, metric)
    items = objects.items
    n = len(items)
    out = np.zeros((n, n))
    if metric == "spd":
        mats = [_as_spd(o) for o in items]
        isqrts = [_inv_sqrt_spd(m) for m in mats]
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = _spd_distance_given_isqrt(isqrts[i], mats[j])
    else:
        dist = {"sphere": sphere_distance, "wass": wasserstein2_distance,
                "eucl": euclidean_distance}[metric]
        for i in range(n):
            for j in range(i + 1, n):
                out[i, j] = out[j, i] = dist(items[i], items[j])
    return DistanceMatrix(out)


def query_distances(x, sample: ObjectSet, metric: str | None = None) -> np.ndarray:
    """Distances from one query object to every object of ``sample``."""
    metric = _resolve_metric(sample, metric)
    if _KIND_FOR_TYPE.get(type(x)) != sample.kind:
        raise InvalidArgumentError(
            f"query of type {type(x).__name__} does not match sample kind {sample.kind!r}"
        )
    if metric == "spd":
        isqrt = _inv_sqrt_spd(_as_spd(x))
        return np.array([_spd_distance_given_isqrt(isqrt, _as_spd(o)) for o in sample.items])
    dist = {"sphere": sphere_distance, "wass": wasserstein2_distance,
            "eucl": euclidean_distance}[metric]
    return np.array([dist(x, o) for o in sample.items])


# ---------------------------------------------------------------------------
# JSON object formats


def object_to_dict(o) -> dict:
    if isinstance(o, CorrelationMatrix):
        return {"kind": "corr", "p": o.p, "rows": o.entries.tolist()}
    if isinstance(o, UnitVector):
        return {"kind": "sphere", "coords": o.coords.tolist()}
    if isinstance(o, Histogram):
        return {"kind": "hist", "edges": o.edges.tolist(), "masses": o.masses.tolist()}
    if isinstance(o, EuclideanPoint):
        return {"kind": "eucl", "coords": o.coords.tolist()}
    raise InvalidArgumentError(f"unsupported object type {type(o).__name__}")


def object_from_dict(d: dict):
    if not isinstance(d, dict) or "kind" not in d:
        raise InvalidArgumentError("object record must be a dict with a 'kind' field")
    kind = d["kind"]
    if kind == "corr":
        rows = np.asarray(d["rows"], dtype=float)
        p = int(d.get("p", rows.shape[0] if rows.ndim == 2 else -1))
        if rows.ndim != 2 or rows.shape != (p, p):
            raise InvalidArgumentError(f"corr rows must form a {p}x{p} matrix")
        return CorrelationMatrix(rows)
    if kind == "sphere":
        c = np.asarray(d["coords"], dtype=float)
        norm = np.linalg.norm(c)
        if abs(norm - 1.0) > 1e-6:
            raise InvalidArgumentError(f"sphere coords have norm {norm}, beyond 1e-6 of unit")
        return UnitVector(c / norm)
    if kind == "hist":
        return Histogram(np.asarray(d["edges"], dtype=float), np.asarray(d["masses"], dtype=float))
    if kind == "eucl":
        return EuclideanPoint(np.asarray(d["coords"], dtype=float))
    raise InvalidArgumentError(f"unknown object kind {kind!r}")


def load_objects(path) -> ObjectSet:
    """Read a JSON dataset: an array of same-kind objects, optional labels."""
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, list) or not data:
        raise InvalidArgumentError("dataset must be a nonempty JSON array of objects")
    items = []
    labels = []
    for i, rec in enumerate(data):
        try:
            items.append(object_from_dict(rec))
        except (InvalidArgumentError, NotPositiveDefiniteError, KeyError, TypeError) as exc:
            raise InvalidArgumentError(f"object {i}: {exc}") from exc
        labels.append(rec.get("label") if isinstance(rec, dict) else None)
    have_labels = [x for x in labels if x is not None]
    if have_labels and len(have_labels) != len(items):
        raise InvalidArgumentError("either all objects carry a 'label' or none do")
    return ObjectSet(tuple(items), tuple(labels) if have_labels else None)


def dump_objects(objects: ObjectSet, path) -> None:
    records = [object_to_dict(o) for o in objects.items]
    if objects.labels is not None:
        for rec, lab in zip(records, objects.labels):
            rec["label"] = lab
    with open(path, "w") as fh:
        json.dump(records, fh)


def load_histogram_csv(path) -> ObjectSet:
    """Read a labeled histogram dataset from CSV.

    One row per entity: label, then alternating edge/mass columns ending
    with the final edge (``label, e0, m0, e1, m1, ..., e_{m-1}, m_{m-1}, e_m``).
    """
    items = []
    labels = []
    with open(path) as fh:
        for lineno, line in enumerate(fh):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 4 or len(parts) % 2 != 0:
                raise InvalidArgumentError(
                    f"row {lineno}: expected label plus alternating edge/mass columns"
                )
            try:
                vals = np.array([float(x) for x in parts[1:]])
            except ValueError as exc:
                raise InvalidArgumentError(f"row {lineno}: {exc}") from exc
            edges = vals[0::2]
            masses = vals[1::2]
            try:
                items.append(Histogram(edges, masses))
            except InvalidArgumentError as exc:
                raise InvalidArgumentError(f"row {lineno}: {exc}") from exc
            labels.append(parts[0])
    if not items:
        raise InvalidArgumentError("histogram CSV contains no rows")
    return ObjectSet(tuple(items), tuple(labels))
