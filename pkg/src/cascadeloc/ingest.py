"""CSV ingestion, train/validation splitting, and synthetic radio maps.

On-disk format: one CSV per dataset with zero-padded AP columns
(``AP001..APnnn``) and label columns ``X, Y, FLOOR, BUILDINGID``, plus an
optional JSON sidecar ``<stem>.meta.json`` holding the deployment registry,
floor height and the not-detected sentinel.  Raw UJIIndoorLoc-style files
(``WAP...`` columns, ``LONGITUDE``/``LATITUDE`` labels) load through
:data:`UJIINDOORLOC_FORMAT`.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import pandas as pd

from .datamodel import RSS_MAX_DBM, RSS_MIN_DBM, RadioMap, validate_radiomap


class IngestError(ValueError):
    """Base class for dataset loading failures."""


class SchemaError(IngestError):
    """The file does not follow the configured dataset format."""


class ParseError(IngestError):
    """A cell could not be parsed; the message names row and column."""


class EmptyDatasetError(IngestError):
    """The file contains a header but no data rows."""


@dataclass(frozen=True)
class DatasetFormat:
    """Column naming and sentinel conventions of one CSV dialect.

    ``replacement_value`` is substituted for the not-detected sentinel at
    load time; it must sit below every observable RSS reading so Manhattan
    distances stay meaningful.
    """

    rss_column_prefix: str = "AP"
    x_column: str = "X"
    y_column: str = "Y"
    floor_column: str = "FLOOR"
    building_column: str = "BUILDINGID"
    not_detected_sentinel: float = 100.0
    replacement_value: float = -105.0
    subtract_origin: bool = False

    def __post_init__(self) -> None:
        if self.replacement_value >= -100.0:
            raise ValueError(
                f"replacement_value must be below -100 dBm, got {self.replacement_value}")

    @property
    def label_columns(self) -> tuple[str, str, str, str]:
        return (self.x_column, self.y_column, self.floor_column, self.building_column)


DEFAULT_FORMAT = DatasetFormat()

#: Raw UJIIndoorLoc distribution files (trainingData.csv / validationData.csv).
UJIINDOORLOC_FORMAT = DatasetFormat(
    rss_column_prefix="WAP", x_column="LONGITUDE", y_column="LATITUDE")


def detect_format(columns) -> DatasetFormat:
    """Pick the dataset format matching a CSV header, if any is recognized."""
    cols = set(columns)
    for fmt in (DEFAULT_FORMAT, UJIINDOORLOC_FORMAT):
        if _rss_columns(columns, fmt.rss_column_prefix) and all(
                c in cols for c in fmt.label_columns):
            return fmt
    raise SchemaError(
        "header matches no known dataset format (expected AP/WAP columns plus "
        "X/Y/FLOOR/BUILDINGID or LONGITUDE/LATITUDE/FLOOR/BUILDINGID)")


def _rss_columns(columns, prefix: str) -> list[str]:
    found = [c for c in columns
             if c.startswith(prefix) and c[len(prefix):].isdigit()]
    return sorted(found, key=lambda c: int(c[len(prefix):]))


def _numeric(df: pd.DataFrame, columns, path) -> np.ndarray:
    block = df[columns].apply(pd.to_numeric, errors="coerce")
    values = block.to_numpy(dtype=np.float64)
    bad = np.argwhere(~np.isfinite(values))
    if bad.size:
        row, col = bad[0]
        # +2: one for the header line, one for 1-based numbering.
        raise ParseError(
            f"{path}: non-numeric value in row {row + 2}, column "
            f"'{columns[col]}'")
    return values


def _sidecar_path(csv_path: Path) -> Path:
    return csv_path.with_name(csv_path.stem + ".meta.json")


def load_radiomap(path, fmt: DatasetFormat | None = None, *,
                  name: str | None = None,
                  floor_height: float = 3.0) -> RadioMap:
    """Load a radio map from a CSV file (plus optional metadata sidecar).

    Sentinel values are replaced, building/floor ids are normalized to
    contiguous integers, and the returned map passes validate_radiomap.
    When a sidecar exists its deployment registry and floor height are
    authoritative and ids are taken as already normalized.
    """
    path = Path(path)
    df = pd.read_csv(path)
    if fmt is None:
        fmt = detect_format(df.columns)

    rss_cols = _rss_columns(df.columns, fmt.rss_column_prefix)
    if not rss_cols:
        raise SchemaError(
            f"{path}: no '{fmt.rss_column_prefix}' columns found in header")
    missing = [c for c in fmt.label_columns if c not in df.columns]
    if missing:
        raise SchemaError(f"{path}: missing label columns {missing}")
    if len(df) == 0:
        raise EmptyDatasetError(f"{path}: dataset has no rows")

    sidecar = _sidecar_path(path)
    meta = None
    if sidecar.exists():
        meta = json.loads(sidecar.read_text(encoding="utf-8"))
        fmt = replace(fmt, not_detected_sentinel=float(
            meta.get("not_detected_sentinel", fmt.not_detected_sentinel)))
        floor_height = float(meta.get("floor_height_m", floor_height))

    rss = _numeric(df, rss_cols, path)
    labels = _numeric(df, list(fmt.label_columns), path)
    x, y = labels[:, 0], labels[:, 1]
    floors_raw = labels[:, 2]
    buildings_raw = labels[:, 3]
    for colname, vals in ((fmt.floor_column, floors_raw),
                          (fmt.building_column, buildings_raw)):
        if not np.all(vals == np.round(vals)):
            row = int(np.nonzero(vals != np.round(vals))[0][0])
            raise ParseError(
                f"{path}: non-integer value in row {row + 2}, column '{colname}'")
    floors_raw = floors_raw.astype(np.int64)
    buildings_raw = buildings_raw.astype(np.int64)

    detected = rss != fmt.not_detected_sentinel
    if detected.any():
        min_detected = rss[detected].min()
        if min_detected < fmt.replacement_value:
            raise SchemaError(
                f"{path}: replacement_value {fmt.replacement_value} is not below "
                f"the minimum detected RSS {min_detected}")
    rss = np.where(detected, rss, fmt.replacement_value)
    out_of_range = (rss < RSS_MIN_DBM) | (rss > RSS_MAX_DBM)
    if out_of_range.any():
        warnings.warn(
            f"{path}: clamped {int(out_of_range.sum())} RSS values into "
            f"[{RSS_MIN_DBM:g}, {RSS_MAX_DBM:g}] dBm",
            stacklevel=2)
        rss = np.clip(rss, RSS_MIN_DBM, RSS_MAX_DBM)

    if meta is not None:
        deployment = {int(b): frozenset(int(f) for f in fl)
                      for b, fl in meta["deployment"].items()}
        buildings, floors = buildings_raw, floors_raw
        ap_count = int(meta.get("ap_count", len(rss_cols)))
        if ap_count != len(rss_cols):
            raise SchemaError(
                f"{path}: sidecar declares {ap_count} APs but the file has "
                f"{len(rss_cols)} RSS columns")
    else:
        buildings, floors, deployment = _normalize_labels(buildings_raw, floors_raw)
        ap_count = len(rss_cols)

    if fmt.subtract_origin:
        x = x - x.min()
        y = y - y.min()

    rmap = RadioMap.from_arrays(
        rss, buildings, floors, x, y,
        ap_count=ap_count, deployment=deployment,
        floor_height=floor_height, name=name or path.stem)
    violations = validate_radiomap(rmap)
    if violations:
        raise SchemaError(
            f"{path}: loaded map violates radio-map invariants: "
            + "; ".join(str(v) for v in violations[:3]))
    return rmap


def _normalize_labels(buildings_raw, floors_raw):
    """Map raw ids to contiguous 0-based ids (buildings globally, floors
    per building, both in sorted original order)."""
    building_ids = np.unique(buildings_raw)
    bmap = {int(orig): new for new, orig in enumerate(building_ids.tolist())}
    buildings = np.array([bmap[int(b)] for b in buildings_raw], dtype=np.int64)
    floors = np.empty_like(floors_raw)
    deployment: dict[int, frozenset[int]] = {}
    for orig_b, new_b in bmap.items():
        mask = buildings_raw == orig_b
        floor_ids = np.unique(floors_raw[mask])
        fmap = {int(orig): new for new, orig in enumerate(floor_ids.tolist())}
        floors[mask] = [fmap[int(f)] for f in floors_raw[mask]]
        deployment[new_b] = frozenset(fmap.values())
    return buildings, floors, deployment


def save_radiomap(radiomap: RadioMap, csv_path, *,
                  not_detected_sentinel: float = 100.0) -> Path:
    """Write a radio map as CSV plus its metadata sidecar.

    Values are written as-is (sentinels were already replaced at ingestion),
    so save followed by load round-trips the map bit-exactly.
    """
    csv_path = Path(csv_path)
    csv_path.parent.mkdir(parents=True, exist_ok=True)
    width = max(3, len(str(radiomap.ap_count)))
    columns = {f"AP{i + 1:0{width}d}": radiomap.rss_matrix[:, i]
               for i in range(radiomap.ap_count)}
    columns["X"] = radiomap.coords[:, 0]
    columns["Y"] = radiomap.coords[:, 1]
    columns["FLOOR"] = radiomap.floors
    columns["BUILDINGID"] = radiomap.buildings
    pd.DataFrame(columns).to_csv(csv_path, index=False)

    meta = {
        "ap_count": radiomap.ap_count,
        "floor_height_m": radiomap.floor_height,
        "deployment": {str(b): sorted(fl) for b, fl in radiomap.deployment.items()},
        "not_detected_sentinel": not_detected_sentinel,
        "name": radiomap.name,
    }
    _sidecar_path(csv_path).write_text(
        json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return csv_path


def split_train_validation(radiomap: RadioMap, ratio: float,
                           seed: int) -> tuple[RadioMap, RadioMap]:
    """Split a radio map into (train, validation), stratified per floor.

    Every (building, floor) stratum with at least two samples contributes to
    both parts; a single-sample stratum goes to training with a warning.
    The partition is disjoint, exhaustive and deterministic per seed.
    """
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie strictly between 0 and 1, got {ratio}")
    if len(radiomap) == 0:
        raise ValueError("cannot split an empty radio map")

    rng = np.random.default_rng(seed)
    keys = np.stack([radiomap.buildings, radiomap.floors], axis=1)
    strata: dict[tuple[int, int], np.ndarray] = {}
    for key in sorted({(int(b), int(f)) for b, f in keys}):
        mask = (keys[:, 0] == key[0]) & (keys[:, 1] == key[1])
        strata[key] = np.nonzero(mask)[0]

    train_idx: list[np.ndarray] = []
    val_idx: list[np.ndarray] = []
    lonely: list[tuple[int, int]] = []
    for key, idx in strata.items():
        perm = idx[rng.permutation(len(idx))]
        if len(idx) == 1:
            lonely.append(key)
            train_idx.append(perm)
            continue
        n_train = int(round(ratio * len(idx)))
        n_train = min(max(n_train, 1), len(idx) - 1)
        train_idx.append(perm[:n_train])
        val_idx.append(perm[n_train:])
    if lonely:
        warnings.warn(
            f"{radiomap.name}: {len(lonely)} floor(s) with a single sample went "
            f"entirely to training: {lonely[:5]}", stacklevel=2)

    train = radiomap.subset(np.sort(np.concatenate(train_idx)))
    val = radiomap.subset(np.sort(np.concatenate(val_idx))
                          if val_idx else np.array([], dtype=np.intp))
    return train, val


@dataclass(frozen=True)
class SynthConfig:
    """Parameters of the desk-scale synthetic radio-map generator.

    Signal strengths follow a log-distance path-loss model with Gaussian
    shadowing; access points of other buildings read as not-detected.
    ``ap_seed`` fixes the AP layout independently of the sample draw, so two
    configs sharing it describe measurement campaigns in the same deployment.
    """

    buildings: int = 1
    floors_per_building: int = 1
    aps_per_floor: int = 4
    samples_per_floor: int = 100
    grid_extent: float = 25.0
    noise_sigma: float = 2.0
    path_loss_exponent: float = 3.0
    tx_power: float = -30.0
    seed: int = 0
    floor_height: float = 3.0
    ap_seed: int | None = None
    name: str = "synth"

    def __post_init__(self) -> None:
        for field_name in ("buildings", "floors_per_building", "aps_per_floor",
                           "samples_per_floor"):
            if getattr(self, field_name) < 1:
                raise ValueError(f"{field_name} must be >= 1")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be >= 0")
        if self.grid_extent <= 0:
            raise ValueError("grid_extent must be > 0")
        if self.path_loss_exponent <= 0:
            raise ValueError("path_loss_exponent must be > 0")
        if self.floor_height <= 0:
            raise ValueError("floor_height must be > 0")

    @property
    def ap_count(self) -> int:
        return self.buildings * self.floors_per_building * self.aps_per_floor


NOT_DETECTED_DBM = -105.0


def synthesize_radiomap(cfg: SynthConfig) -> RadioMap:
    """Generate a synthetic radio map; deterministic per (seed, ap_seed)."""
    ap_entropy = cfg.seed if cfg.ap_seed is None else cfg.ap_seed
    ap_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=ap_entropy, spawn_key=(1,)))
    sample_rng = np.random.default_rng(
        np.random.SeedSequence(entropy=cfg.seed, spawn_key=(2,)))

    B, F, A = cfg.buildings, cfg.floors_per_building, cfg.aps_per_floor
    ap_xy = ap_rng.uniform(0.0, cfg.grid_extent, size=(B, F, A, 2))

    n_per_floor = cfg.samples_per_floor
    total = B * F * n_per_floor
    rss = np.full((total, cfg.ap_count), NOT_DETECTED_DBM, dtype=np.float64)
    buildings = np.empty(total, dtype=np.int64)
    floors = np.empty(total, dtype=np.int64)
    xy = np.empty((total, 2), dtype=np.float64)

    floor_ids = np.arange(F, dtype=np.float64)
    row = 0
    for b in range(B):
        col0 = b * F * A
        for f in range(F):
            pos = sample_rng.uniform(0.0, cfg.grid_extent, size=(n_per_floor, 2))
            # Distances to every AP of the same building: horizontal offset
            # plus the vertical offset implied by the floor difference.
            horiz = pos[:, None, None, :] - ap_xy[b][None, :, :, :]
            horiz_sq = (horiz ** 2).sum(axis=-1)
            vert_sq = ((f - floor_ids) * cfg.floor_height) ** 2
            dist = np.sqrt(horiz_sq + vert_sq[None, :, None])
            dist = np.maximum(dist, 1e-9)
            level = cfg.tx_power - 10.0 * cfg.path_loss_exponent * np.log10(dist)
            level = level + sample_rng.normal(0.0, cfg.noise_sigma, size=level.shape)
            level = np.clip(level, NOT_DETECTED_DBM, 0.0)

            sl = slice(row, row + n_per_floor)
            rss[sl, col0:col0 + F * A] = level.reshape(n_per_floor, F * A)
            buildings[sl] = b
            floors[sl] = f
            xy[sl] = pos
            row += n_per_floor

    deployment = {b: frozenset(range(F)) for b in range(B)}
    return RadioMap.from_arrays(
        rss, buildings, floors, xy[:, 0], xy[:, 1],
        ap_count=cfg.ap_count, deployment=deployment,
        floor_height=cfg.floor_height, name=cfg.name)


def synth_config_from_json(path) -> SynthConfig:
    """Read a SynthConfig from a JSON object file (keys = field names)."""
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(data, dict):
        raise ValueError(f"{path}: expected a JSON object of SynthConfig fields")
    valid = set(SynthConfig.__dataclass_fields__)
    unknown = set(data) - valid
    if unknown:
        raise ValueError(f"{path}: unknown SynthConfig fields {sorted(unknown)}")
    return SynthConfig(**data)
