"""CSV parsing, cohort construction, label derivation and one-hot encoding."""
from __future__ import annotations

import csv
import enum
import hashlib
import io
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from . import kvfile
from .codebook import (CATEGORICAL, DEATH_OR_HOSPICE_CODES, ID, LABEL, MAPPERS, NUMERIC,
                       POLICY_DROPS, FeatureSchema)

log = logging.getLogger(__name__)


class ParseError(ValueError):
    pass


class SchemaError(ValueError):
    pass


class LabelError(ValueError):
    pass


class EncodingError(ValueError):
    pass


class LabelPolicy(str, enum.Enum):
    """How the three-valued readmission field becomes a binary target.

    ``LT30`` marks only the under-30-day code positive. ``ANY`` marks any
    recorded readmission (<30 or >30) positive and is the closest available
    stand-in for a 90-day window.
    """

    LT30 = "lt30"
    ANY = "any"


_POSITIVE = {LabelPolicy.LT30: {"<30"}, LabelPolicy.ANY: {"<30", ">30"}}
_KNOWN_STATUS = {"<30", ">30", "NO"}


@dataclass(frozen=True)
class RawEncounter:
    encounter_id: str
    patient_id: str | None
    attributes: dict  # column name -> raw string, or None when missing

    def is_missing(self, column: str) -> bool:
        return self.attributes[column] is None


@dataclass(frozen=True)
class ColumnDescriptor:
    name: str
    source: str
    kind: str
    level: str | None = None


@dataclass
class CohortTable:
    X: np.ndarray
    columns: list[ColumnDescriptor]
    y: np.ndarray
    encounter_ids: list[str]
    patient_ids: list[str]
    provenance: list[str] = field(default_factory=list)

    def __post_init__(self):
        if self.X.shape != (len(self.y), len(self.columns)):
            raise ValueError(f"matrix shape {self.X.shape} does not match "
                             f"{len(self.y)} labels x {len(self.columns)} columns")

    @property
    def n_rows(self) -> int:
        return self.X.shape[0]

    @property
    def names(self) -> list[str]:
        return [c.name for c in self.columns]

    def numeric_indices(self) -> list[int]:
        return [i for i, c in enumerate(self.columns) if c.kind == NUMERIC]

    def categorical_blocks(self) -> dict[str, list[int]]:
        blocks: dict[str, list[int]] = {}
        for i, c in enumerate(self.columns):
            if c.kind == CATEGORICAL:
                blocks.setdefault(c.source, []).append(i)
        return blocks

    def with_matrix(self, X: np.ndarray, step: str) -> "CohortTable":
        return replace(self, X=X, provenance=self.provenance + [step])

    def take(self, rows: Sequence[int], step: str | None = None) -> "CohortTable":
        rows = np.asarray(rows, dtype=np.int64)
        prov = self.provenance + [step] if step else list(self.provenance)
        return CohortTable(self.X[rows], list(self.columns), self.y[rows],
                           [self.encounter_ids[i] for i in rows],
                           [self.patient_ids[i] for i in rows], prov)

    def select_columns(self, names: Sequence[str], step: str | None = None) -> "CohortTable":
        idx = [self.names.index(n) for n in names]
        prov = self.provenance + [step] if step else list(self.provenance)
        return replace(self, X=self.X[:, idx], columns=[self.columns[i] for i in idx],
                       provenance=prov)


# ---------------------------------------------------------------- parsing

def parse_csv(source: BinaryIO | bytes | str | Path, schema: FeatureSchema) -> list[RawEncounter]:
    """Parse a header-bearing encounter CSV.

    Cells equal to ``schema.missing_marker`` are stored as ``None``. Row order
    is preserved.
    """
    if isinstance(source, (str, Path)):
        with open(source, "rb") as fh:
            return parse_csv(fh, schema)
    if isinstance(source, bytes):
        source = io.BytesIO(source)
    text = io.TextIOWrapper(source, encoding="utf-8", newline="")
    reader = csv.reader(text)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty file: no header row") from None
    unknown = [h for h in header if h not in schema]
    if unknown:
        raise SchemaError(f"unknown column(s) in header: {', '.join(unknown)}")
    absent = [c for c in schema.names if c not in header]
    if absent:
        raise SchemaError(f"header lacks schema column(s): {', '.join(absent)}")
    width = len(header)
    marker = schema.missing_marker
    eid_pos = header.index(schema.encounter_id)
    pid_pos = header.index(schema.patient_id)
    out: list[RawEncounter] = []
    seen: set[str] = set()
    for row in reader:
        line = reader.line_num
        if not row:
            continue
        if len(row) != width:
            raise ParseError(f"line {line}: expected {width} fields, found {len(row)}")
        eid = row[eid_pos]
        if eid in seen:
            raise ParseError(f"line {line}: duplicate encounter_id {eid}")
        seen.add(eid)
        attrs = {h: (None if v == marker else v) for h, v in zip(header, row)}
        pid = row[pid_pos]
        out.append(RawEncounter(eid, None if pid in (marker, "") else pid, attrs))
    return out


def _eid_key(eid: str):
    return (0, int(eid), "") if eid.isdigit() else (1, 0, eid)


def filter_cohort(encounters: Iterable[RawEncounter], schema: FeatureSchema | None = None,
                  excluded_dispositions: Sequence[str] = DEATH_OR_HOSPICE_CODES) -> list[RawEncounter]:
    """Keep each patient's earliest encounter, then drop death/hospice discharges."""
    disposition = schema.disposition if schema else "discharge_disposition_id"
    encounters = list(encounters)
    rejected = sum(1 for e in encounters if e.patient_id is None)
    if rejected:
        log.warning("rejected %d encounter(s) without patient id", rejected)
    first: dict[str, tuple] = {}
    for pos, e in enumerate(encounters):
        if e.patient_id is None:
            continue
        key = _eid_key(e.encounter_id)
        cur = first.get(e.patient_id)
        if cur is None or key < cur[0]:
            first[e.patient_id] = (key, pos)
    keep = sorted(pos for _, pos in first.values())
    excluded = set(excluded_dispositions)
    out = [encounters[p] for p in keep if encounters[p].attributes.get(disposition) not in excluded]
    log.info("cohort: %d encounters -> %d first encounters -> %d after disposition filter",
             len(encounters), len(keep), len(out))
    return out


def drop_sparse_columns(encounters: list[RawEncounter], max_missing_fraction: float = 0.5,
                        policy_drops: Sequence[str] = POLICY_DROPS,
                        keep: Sequence[str] = ("medical_specialty",),
                        protected: Sequence[str] = ()) -> tuple[list[RawEncounter], list[str]]:
    """Remove columns whose missing fraction exceeds the threshold, plus ``policy_drops``."""
    if not encounters:
        return encounters, []
    names = list(encounters[0].attributes)
    n = len(encounters)
    dropped = []
    for name in names:
        if name in keep or name in protected:
            continue
        frac = sum(e.attributes[name] is None for e in encounters) / n
        if frac > max_missing_fraction or name in policy_drops:
            dropped.append(name)
    if dropped:
        gone = set(dropped)
        encounters = [replace(e, attributes={k: v for k, v in e.attributes.items() if k not in gone})
                      for e in encounters]
    return encounters, dropped


def derive_label(encounter: RawEncounter, policy: LabelPolicy = LabelPolicy.LT30,
                 column: str = "readmitted") -> int:
    status = encounter.attributes.get(column)
    if status not in _KNOWN_STATUS:
        raise LabelError(f"unrecognized readmission status {status!r} "
                         f"in encounter {encounter.encounter_id}")
    return int(status in _POSITIVE[LabelPolicy(policy)])


def encode_features(encounters: Sequence[RawEncounter], schema: FeatureSchema,
                    policy: LabelPolicy = LabelPolicy.LT30) -> CohortTable:
    """One-hot encode categoricals, pass numerics through (missing -> NaN)."""
    present = set(encounters[0].attributes) if encounters else set(schema.names)
    columns: list[ColumnDescriptor] = []
    plan = []
    for spec in schema.columns:
        if spec.kind in (ID, LABEL) or spec.name not in present:
            continue
        if spec.kind == NUMERIC:
            plan.append((spec, len(columns), None))
            columns.append(ColumnDescriptor(spec.name, spec.name, NUMERIC))
        else:
            lookup = {lvl: len(columns) + k for k, lvl in enumerate(spec.levels)}
            plan.append((spec, None, lookup))
            columns += [ColumnDescriptor(f"{spec.name}={lvl}", spec.name, CATEGORICAL, lvl)
                        for lvl in spec.levels]
    X = np.zeros((len(encounters), len(columns)))
    y = np.zeros(len(encounters), dtype=np.int8)
    for r, e in enumerate(encounters):
        for spec, pos, lookup in plan:
            raw = e.attributes[spec.name]
            if raw is not None and spec.mapper:
                raw = MAPPERS[spec.mapper](raw)
            if lookup is None:
                X[r, pos] = np.nan if raw is None else float(raw)
                continue
            level = spec.missing_level if raw is None else raw
            if level not in lookup:
                raise EncodingError(f"column {spec.name}: level {level!r} not in schema")
            X[r, lookup[level]] = 1.0
        y[r] = derive_label(e, policy, schema.label)
    return CohortTable(X, columns, y, [e.encounter_id for e in encounters],
                       [e.patient_id for e in encounters],
                       [f"encode_features(policy={LabelPolicy(policy).value})"])


def build_cohort(source, schema: FeatureSchema, policy: LabelPolicy = LabelPolicy.LT30,
                 max_missing_fraction: float = 0.5,
                 excluded_dispositions: Sequence[str] = DEATH_OR_HOSPICE_CODES) -> CohortTable:
    """parse -> filter -> drop sparse -> encode."""
    raw = parse_csv(source, schema)
    cohort = filter_cohort(raw, schema, excluded_dispositions)
    cohort, dropped = drop_sparse_columns(cohort, max_missing_fraction,
                                          protected=(schema.label, schema.encounter_id,
                                                     schema.patient_id))
    table = encode_features(cohort, schema, policy)
    table.provenance[:0] = [
        f"parse_csv(rows={len(raw)})",
        f"filter_cohort(rows={len(cohort)}, excluded_dispositions={','.join(excluded_dispositions)})",
        f"drop_sparse_columns(max_missing_fraction={max_missing_fraction}, dropped={','.join(dropped)})",
    ]
    return table


# ---------------------------------------------------------------- snapshots

def _fmt(v: float) -> str:
    return "" if np.isnan(v) else repr(float(v))


def save_cohort(table: CohortTable, csv_path: str | Path, meta_path: str | Path) -> None:
    """Write the cohort matrix as CSV plus a key-value sidecar with lineage and provenance."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["encounter_id", "patient_id", *table.names, "label"])
    for r in range(table.n_rows):
        w.writerow([table.encounter_ids[r], table.patient_ids[r],
                    *(_fmt(v) for v in table.X[r]), int(table.y[r])])
    Path(csv_path).write_text(buf.getvalue(), encoding="utf-8")
    kvfile.write(meta_path, "cohort", {
        "cohort": {"rows": table.n_rows, "columns": len(table.columns),
                   "sha256": hashlib.sha256(buf.getvalue().encode()).hexdigest()},
        "columns": {c.name: [c.source, c.kind, c.level] for c in table.columns},
        "provenance": {f"step{i:02d}": s for i, s in enumerate(table.provenance)},
    })


def load_cohort(csv_path: str | Path, meta_path: str | Path) -> CohortTable:
    meta = kvfile.read(meta_path, "cohort")
    columns = [ColumnDescriptor(name, src, kind, level)
               for name, (src, kind, level) in meta["columns"].items()]
    with open(csv_path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if header[2:-1] != [c.name for c in columns]:
            raise SchemaError("cohort CSV header does not match its sidecar")
        eids, pids, rows, labels = [], [], [], []
        for row in reader:
            eids.append(row[0])
            pids.append(row[1])
            rows.append([float(v) if v else np.nan for v in row[2:-1]])
            labels.append(int(row[-1]))
    X = np.array(rows, dtype=float).reshape(len(rows), len(columns))
    prov = [meta["provenance"][k] for k in sorted(meta["provenance"])]
    return CohortTable(X, columns, np.array(labels, dtype=np.int8), eids, pids, prov)
