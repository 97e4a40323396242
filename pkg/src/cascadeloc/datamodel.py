"""Fingerprint and radio-map data model shared by every other module.

A radio map is an ordered collection of RSS fingerprints together with the
deployment registry (which buildings exist and which floors each of them
has).  All types here are immutable after construction and safe to share
across threads; the operations are pure functions.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from types import MappingProxyType
from typing import Iterator, Mapping

import numpy as np

# Detected RSS readings are expected to lie in this range (dBm) after
# ingestion has replaced the not-detected sentinel.
RSS_MIN_DBM = -110.0
RSS_MAX_DBM = 0.0


def _frozen_vector(values) -> np.ndarray:
    """Return a read-only 1-D float64 copy/view of ``values``."""
    arr = np.asarray(values, dtype=np.float64).reshape(-1)
    if arr.flags.writeable:
        if arr is values or (isinstance(values, np.ndarray) and arr.base is values):
            arr = arr.copy()
        arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Fingerprint:
    """One RSS observation vector with its ground-truth labels.

    ``rss`` holds one dBm value per access point of the owning radio map.
    Not-detected sentinels are expected to have been replaced during
    ingestion, before any model sees the vector.
    """

    rss: np.ndarray
    building: int
    floor: int
    x: float
    y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "rss", _frozen_vector(self.rss))
        object.__setattr__(self, "building", int(self.building))
        object.__setattr__(self, "floor", int(self.floor))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class PositionEstimate:
    """A complete position output: building, floor and planar coordinates."""

    building: int
    floor: int
    x: float
    y: float

    def __post_init__(self) -> None:
        object.__setattr__(self, "building", int(self.building))
        object.__setattr__(self, "floor", int(self.floor))
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))


@dataclass(frozen=True)
class RadioMap:
    """A labeled fingerprint collection plus deployment metadata.

    ``deployment`` maps building id to the set of floor ids that exist in
    that building; it may list floors for which no fingerprint is present
    (e.g. the validation part of a split).  ``floor_height`` is used only
    when computing 3D positioning errors.
    """

    fingerprints: tuple[Fingerprint, ...]
    ap_count: int
    deployment: Mapping[int, frozenset[int]]
    floor_height: float = 3.0
    name: str = "radiomap"

    def __post_init__(self) -> None:
        object.__setattr__(self, "fingerprints", tuple(self.fingerprints))
        dep = {int(b): frozenset(int(f) for f in floors)
               for b, floors in dict(self.deployment).items()}
        object.__setattr__(self, "deployment", MappingProxyType(dep))
        object.__setattr__(self, "ap_count", int(self.ap_count))
        object.__setattr__(self, "floor_height", float(self.floor_height))
        if self.floor_height <= 0.0:
            raise ValueError("floor_height must be strictly positive")

    @classmethod
    def from_arrays(cls, rss, buildings, floors, x, y, *,
                    ap_count: int | None = None,
                    deployment: Mapping[int, frozenset[int]] | None = None,
                    floor_height: float = 3.0,
                    name: str = "radiomap") -> "RadioMap":
        """Build a radio map from column arrays (the fast path for loaders)."""
        rss = np.ascontiguousarray(rss, dtype=np.float64)
        if rss.ndim != 2:
            raise ValueError(f"rss must be a 2-D matrix, got shape {rss.shape}")
        rss.setflags(write=False)
        buildings = np.asarray(buildings, dtype=np.int64)
        floors = np.asarray(floors, dtype=np.int64)
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        n = rss.shape[0]
        if not (len(buildings) == len(floors) == len(x) == len(y) == n):
            raise ValueError("label arrays must match the rss row count")
        if deployment is None:
            deployment = {}
            for b, f in zip(buildings.tolist(), floors.tolist()):
                deployment.setdefault(b, set()).add(f)
        fps = tuple(
            Fingerprint(rss[i], buildings[i], floors[i], x[i], y[i])
            for i in range(n)
        )
        rmap = cls(fps, ap_count if ap_count is not None else rss.shape[1],
                   deployment, floor_height, name)
        # Seed the cached array views so loaders do not pay for a rebuild.
        rmap.__dict__["rss_matrix"] = rss
        rmap.__dict__["buildings"] = _readonly(buildings)
        rmap.__dict__["floors"] = _readonly(floors)
        rmap.__dict__["coords"] = _readonly(np.column_stack([x, y]))
        return rmap

    def __len__(self) -> int:
        return len(self.fingerprints)

    def __getitem__(self, index: int) -> Fingerprint:
        return self.fingerprints[index]

    def __iter__(self) -> Iterator[Fingerprint]:
        return iter(self.fingerprints)

    @cached_property
    def rss_matrix(self) -> np.ndarray:
        """(n, ap_count) matrix of all RSS vectors; raises if rows are ragged."""
        lengths = {fp.rss.shape[0] for fp in self.fingerprints}
        if lengths and lengths != {self.ap_count}:
            raise ValueError(
                f"{self.name}: rss vectors have lengths {sorted(lengths)}, "
                f"expected {self.ap_count}")
        return _readonly(np.vstack([fp.rss for fp in self.fingerprints]))

    @cached_property
    def buildings(self) -> np.ndarray:
        return _readonly(np.array([fp.building for fp in self.fingerprints],
                                  dtype=np.int64))

    @cached_property
    def floors(self) -> np.ndarray:
        return _readonly(np.array([fp.floor for fp in self.fingerprints],
                                  dtype=np.int64))

    @cached_property
    def coords(self) -> np.ndarray:
        """(n, 2) matrix of (x, y) coordinates in meters."""
        return _readonly(np.array([[fp.x, fp.y] for fp in self.fingerprints],
                                  dtype=np.float64))

    @property
    def building_ids(self) -> tuple[int, ...]:
        return tuple(sorted(self.deployment))

    @property
    def total_floors(self) -> int:
        return sum(len(floors) for floors in self.deployment.values())

    def floor_pairs(self) -> tuple[tuple[int, int], ...]:
        """All (building, floor) pairs of the deployment, sorted."""
        return tuple((b, f) for b in sorted(self.deployment)
                     for f in sorted(self.deployment[b]))

    def subset(self, indices) -> "RadioMap":
        """A new map holding the selected fingerprints; metadata is shared."""
        indices = np.asarray(indices, dtype=np.intp)
        return RadioMap.from_arrays(
            self.rss_matrix[indices],
            self.buildings[indices],
            self.floors[indices],
            self.coords[indices, 0],
            self.coords[indices, 1],
            ap_count=self.ap_count,
            deployment=self.deployment,
            floor_height=self.floor_height,
            name=self.name,
        )


def _readonly(arr: np.ndarray) -> np.ndarray:
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class Violation:
    """One broken radio-map invariant; violations are data, not failures."""

    rule: str
    index: int | None
    message: str

    def __str__(self) -> str:
        where = f"fingerprint {self.index}: " if self.index is not None else ""
        return f"[{self.rule}] {where}{self.message}"


def validate_radiomap(radiomap: RadioMap) -> list[Violation]:
    """Check every radio-map invariant; empty result means the map is clean.

    Side-effect free and idempotent.  Each violation names the offending
    fingerprint index (when one exists) and the broken rule.
    """
    violations: list[Violation] = []
    if len(radiomap) == 0:
        violations.append(Violation("non-empty", None, "radio map holds no fingerprints"))
    for b, floors in radiomap.deployment.items():
        if len(floors) == 0:
            violations.append(Violation(
                "deployment-floors", None,
                f"building {b} owns no floor in the deployment registry"))
    for i, fp in enumerate(radiomap.fingerprints):
        if fp.rss.shape[0] != radiomap.ap_count:
            violations.append(Violation(
                "rss-length", i,
                f"rss has length {fp.rss.shape[0]}, expected {radiomap.ap_count}"))
        elif fp.rss.size and (not np.all(np.isfinite(fp.rss))
                              or fp.rss.min() < RSS_MIN_DBM
                              or fp.rss.max() > RSS_MAX_DBM):
            violations.append(Violation(
                "rss-range", i,
                f"rss values outside [{RSS_MIN_DBM:g}, {RSS_MAX_DBM:g}] dBm"))
        if fp.floor not in radiomap.deployment.get(fp.building, frozenset()):
            violations.append(Violation(
                "unknown-building-floor", i,
                f"(building={fp.building}, floor={fp.floor}) is not in the "
                f"deployment registry"))
    return violations


def rss_distance_manhattan(a, b) -> float:
    """Manhattan distance between two RSS vectors: sum of |a_i - b_i|.

    Symmetric, zero iff the vectors are equal, and satisfies the triangle
    inequality.  Raises ValueError on a dimension mismatch.
    """
    a = np.asarray(a, dtype=np.float64).reshape(-1)
    b = np.asarray(b, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise ValueError(
            f"dimension mismatch: vectors have lengths {a.shape[0]} and {b.shape[0]}")
    return float(np.abs(a - b).sum())
