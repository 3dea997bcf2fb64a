"""Dataset ingestion, seeded permutation, and the dataset manifest.

Two on-disk formats are supported: dense delimiter-separated rows with a
label column, and sparse ``label index:value`` lines (1-based indices).
Feature values are used raw; rows with missing or malformed cells are
rejected loudly with their line number.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .tree import Example


class Metric(enum.Enum):
    ACCURACY = "accuracy"
    F_SMALLEST_CLASS = "f-smallest-class"


class DatasetError(ValueError):
    pass


@dataclass(frozen=True)
class DatasetMeta:
    name: str
    dimension: int
    n_examples: int
    n_positive: int
    n_negative: int
    metric: Metric = Metric.ACCURACY


@dataclass(frozen=True)
class DenseSchema:
    delimiter: str = ","
    label_column: int = -1
    label_map: Optional[dict] = None
    skip_header: bool = False


def _map_label(token: str, label_map: Optional[dict], path: str, lineno: int) -> int:
    if label_map is not None:
        if token not in label_map:
            raise DatasetError(f"{path}:{lineno}: unmapped label value {token!r}")
        return int(label_map[token])
    try:
        value = float(token)
    except ValueError:
        raise DatasetError(f"{path}:{lineno}: unmapped label value {token!r}") from None
    if value == 0.0:
        return 0
    if value == 1.0:
        return 1
    if value == -1.0:
        return 0
    raise DatasetError(f"{path}:{lineno}: unmapped label value {token!r}")


def load_dense(
    path, schema: DenseSchema = DenseSchema(), name: Optional[str] = None,
    metric: Metric = Metric.ACCURACY,
) -> tuple[list[Example], DatasetMeta]:
    """Parse delimiter-separated numeric rows with one label column."""
    path = Path(path)
    examples: list[Example] = []
    dimension = None
    positives = 0
    with open(path, "r") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line:
                continue
            if schema.skip_header and lineno == 1:
                continue
            cells = line.split(schema.delimiter)
            label_idx = schema.label_column if schema.label_column >= 0 else len(cells) + schema.label_column
            if not 0 <= label_idx < len(cells):
                raise DatasetError(f"{path}:{lineno}: label column out of range")
            label = _map_label(cells[label_idx].strip(), schema.label_map, str(path), lineno)
            feature_cells = cells[:label_idx] + cells[label_idx + 1 :]
            if dimension is None:
                dimension = len(feature_cells)
                if dimension == 0:
                    raise DatasetError(f"{path}:{lineno}: row has no feature cells")
            elif len(feature_cells) != dimension:
                raise DatasetError(
                    f"{path}:{lineno}: expected {dimension} features, got {len(feature_cells)}"
                )
            try:
                features = np.array([float(c) for c in feature_cells], dtype=np.float64)
            except ValueError:
                raise DatasetError(f"{path}:{lineno}: malformed numeric cell") from None
            if np.any(np.isnan(features)):
                raise DatasetError(f"{path}:{lineno}: missing value")
            examples.append(Example(features, label))
            positives += label
    if not examples:
        raise DatasetError(f"{path}: no rows")
    meta = DatasetMeta(
        name=name or path.stem,
        dimension=dimension,
        n_examples=len(examples),
        n_positive=positives,
        n_negative=len(examples) - positives,
        metric=metric,
    )
    return examples, meta


def load_sparse(
    path, name: Optional[str] = None, metric: Metric = Metric.ACCURACY,
    dimension: Optional[int] = None,
) -> tuple[list[Example], DatasetMeta]:
    """Parse sparse ``label index:value`` rows (1-based indices) into dense
    vectors of size max-index (or an explicit ``dimension``)."""
    path = Path(path)
    rows: list[tuple[int, dict[int, float]]] = []
    max_index = dimension or 0
    with open(path, "r") as handle:
        for lineno, raw in enumerate(handle, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            label = _map_label(tokens[0], None, str(path), lineno)
            cells: dict[int, float] = {}
            for token in tokens[1:]:
                try:
                    index_text, value_text = token.split(":", 1)
                    index = int(index_text)
                    value = float(value_text)
                except ValueError:
                    raise DatasetError(f"{path}:{lineno}: malformed pair {token!r}") from None
                if index < 1:
                    raise DatasetError(f"{path}:{lineno}: index {index} must be >= 1")
                if index in cells:
                    raise DatasetError(f"{path}:{lineno}: duplicate index {index}")
                cells[index] = value
                max_index = max(max_index, index)
            rows.append((label, cells))
    if not rows:
        raise DatasetError(f"{path}: no rows")
    if max_index == 0:
        raise DatasetError(f"{path}: no feature indices present")
    examples = []
    positives = 0
    for label, cells in rows:
        features = np.zeros(max_index, dtype=np.float64)
        for index, value in cells.items():
            features[index - 1] = value
        examples.append(Example(features, label))
        positives += label
    meta = DatasetMeta(
        name=name or path.stem,
        dimension=max_index,
        n_examples=len(examples),
        n_positive=positives,
        n_negative=len(examples) - positives,
        metric=metric,
    )
    return examples, meta


def permute(examples: Sequence[Example], seed: Optional[int]) -> list[Example]:
    """Uniform seeded shuffle; ``seed=None`` preserves the input order
    (used by runs that must keep the native drift structure)."""
    if seed is None:
        return list(examples)
    order = np.random.default_rng(seed).permutation(len(examples))
    return [examples[i] for i in order]


@dataclass(frozen=True)
class ManifestEntry:
    name: str
    path: str
    fmt: str  # "dense" | "sparse"
    metric: Metric = Metric.ACCURACY
    delimiter: str = ","
    label_column: int = -1
    label_map: Optional[dict] = None
    skip_header: bool = False
    expected: dict = field(default_factory=dict)


def load_manifest(path) -> dict[str, ManifestEntry]:
    """Read a name -> {path, format, label mapping, metric} manifest."""
    path = Path(path)
    with open(path) as handle:
        raw = json.load(handle)
    entries = {}
    for name, spec in raw.items():
        fmt = spec.get("format", "dense")
        if fmt not in ("dense", "sparse"):
            raise DatasetError(f"manifest {name}: unknown format {fmt!r}")
        data_path = Path(spec["path"])
        if not data_path.is_absolute():
            data_path = path.parent / data_path
        entries[name] = ManifestEntry(
            name=name,
            path=str(data_path),
            fmt=fmt,
            metric=Metric(spec.get("metric", "accuracy")),
            delimiter=spec.get("delimiter", ","),
            label_column=spec.get("label_column", -1),
            label_map=spec.get("label_map"),
            skip_header=spec.get("skip_header", False),
            expected=spec.get("expected", {}),
        )
    return entries


def load_entry(entry: ManifestEntry) -> tuple[list[Example], DatasetMeta]:
    if entry.fmt == "sparse":
        return load_sparse(entry.path, name=entry.name, metric=entry.metric)
    schema = DenseSchema(
        delimiter=entry.delimiter,
        label_column=entry.label_column,
        label_map=entry.label_map,
        skip_header=entry.skip_header,
    )
    return load_dense(entry.path, schema, name=entry.name, metric=entry.metric)
