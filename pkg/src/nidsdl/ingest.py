"""NSL-KDD ingestion: feature schema, record parsing, label binarization.

Input files are comma-separated UTF-8 text, one connection record per
line: 41 feature fields, the attack label, and optionally the NSL-KDD
difficulty score (42 or 43 fields total). Nothing is ever downloaded;
callers point at local files.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

from .errors import DataFormatError

NUMERIC = "numeric"
CATEGORICAL = "categorical"

# The 41 connection features, in file column order.
NSL_KDD_FEATURES: tuple[tuple[str, str], ...] = (
    ("duration", NUMERIC),
    ("protocol_type", CATEGORICAL),
    ("service", CATEGORICAL),
    ("flag", CATEGORICAL),
    ("src_bytes", NUMERIC),
    ("dst_bytes", NUMERIC),
    ("land", NUMERIC),
    ("wrong_fragment", NUMERIC),
    ("urgent", NUMERIC),
    ("hot", NUMERIC),
    ("num_failed_logins", NUMERIC),
    ("logged_in", NUMERIC),
    ("num_compromised", NUMERIC),
    ("root_shell", NUMERIC),
    ("su_attempted", NUMERIC),
    ("num_root", NUMERIC),
    ("num_file_creations", NUMERIC),
    ("num_shells", NUMERIC),
    ("num_access_files", NUMERIC),
    ("num_outbound_cmds", NUMERIC),
    ("is_host_login", NUMERIC),
    ("is_guest_login", NUMERIC),
    ("count", NUMERIC),
    ("srv_count", NUMERIC),
    ("serror_rate", NUMERIC),
    ("srv_serror_rate", NUMERIC),
    ("rerror_rate", NUMERIC),
    ("srv_rerror_rate", NUMERIC),
    ("same_srv_rate", NUMERIC),
    ("diff_srv_rate", NUMERIC),
    ("srv_diff_host_rate", NUMERIC),
    ("dst_host_count", NUMERIC),
    ("dst_host_srv_count", NUMERIC),
    ("dst_host_same_srv_rate", NUMERIC),
    ("dst_host_diff_srv_rate", NUMERIC),
    ("dst_host_same_src_port_rate", NUMERIC),
    ("dst_host_srv_diff_host_rate", NUMERIC),
    ("dst_host_serror_rate", NUMERIC),
    ("dst_host_srv_serror_rate", NUMERIC),
    ("dst_host_rerror_rate", NUMERIC),
    ("dst_host_srv_rerror_rate", NUMERIC),
)

# Default 12-feature working set, in fixed order.
TABLE1_FEATURES: tuple[str, ...] = (
    "protocol_type",
    "service",
    "flag",
    "count",
    "logged_in",
    "serror_rate",
    "srv_serror_rate",
    "same_srv_rate",
    "dst_host_srv_count",
    "dst_host_same_srv_rate",
    "dst_host_serror_rate",
    "dst_host_srv_serror_rate",
)


class Label(enum.IntEnum):
    NORMAL = 0
    ATTACK = 1


@dataclass(frozen=True)
class FeatureSchema:
    """Names and kinds of the 41 features plus the selected working subset."""

    features: tuple[tuple[str, str], ...] = NSL_KDD_FEATURES
    selected: tuple[str, ...] = TABLE1_FEATURES

    def __post_init__(self):
        if len(self.features) != 41:
            raise ValueError(f"schema must list 41 features, got {len(self.features)}")
        cats = [n for n, k in self.features if k == CATEGORICAL]
        if cats != ["protocol_type", "service", "flag"]:
            raise ValueError(f"categorical features must be protocol_type/service/flag, got {cats}")
        names = {n for n, _ in self.features}
        missing = [n for n in self.selected if n not in names]
        if missing:
            raise ValueError(f"selected features not in schema: {missing}")
        if len(set(self.selected)) != len(self.selected):
            raise ValueError("selected features contain duplicates")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.features)

    def kind_of(self, name: str) -> str:
        for n, k in self.features:
            if n == name:
                return k
        raise KeyError(name)

    def index_of(self, name: str) -> int:
        for i, (n, _) in enumerate(self.features):
            if n == name:
                return i
        raise KeyError(name)

    def with_selected(self, names) -> "FeatureSchema":
        return FeatureSchema(self.features, tuple(names))


DEFAULT_SCHEMA = FeatureSchema()


@dataclass(frozen=True)
class RawRecord:
    """One parsed NSL-KDD line; values keep their original string form."""

    values: tuple[str, ...]
    label: str
    difficulty: int | None = None

    def value_of(self, name: str, schema: FeatureSchema = DEFAULT_SCHEMA) -> str:
        return self.values[schema.index_of(name)]


def binarize_label(label: str) -> Label:
    """Map a raw label token to NORMAL/ATTACK.

    "normal" (case-insensitive, surrounding whitespace trimmed) is normal;
    every other non-empty token is an attack.
    """
    token = label.strip()
    if not token:
        raise DataFormatError("empty label token")
    return Label.NORMAL if token.lower() == "normal" else Label.ATTACK


def parse_line(line: str, schema: FeatureSchema = DEFAULT_SCHEMA, line_no: int | None = None) -> RawRecord:
    """Parse one comma-separated record line (42 or 43 fields)."""
    fields = [f.strip() for f in line.strip().split(",")]
    if len(fields) == 42:
        values, label, difficulty = fields[:41], fields[41], None
    elif len(fields) == 43:
        values, label = fields[:41], fields[41]
        try:
            difficulty = int(fields[42])
        except ValueError:
            raise DataFormatError(f"difficulty field is not an integer: {fields[42]!r}", line_no) from None
    else:
        raise DataFormatError(f"expected 42 or 43 fields, got {len(fields)}", line_no)

    if not label:
        raise DataFormatError("empty label token", line_no)
    for (name, kind), raw in zip(schema.features, values):
        if kind != NUMERIC:
            if not raw:
                raise DataFormatError(f"empty value for feature {name!r}", line_no)
            continue
        try:
            x = float(raw)
        except ValueError:
            raise DataFormatError(f"non-numeric value for feature {name!r}: {raw!r}", line_no) from None
        if not math.isfinite(x) or x < 0:
            raise DataFormatError(f"feature {name!r} must be a finite non-negative real, got {raw!r}", line_no)
    return RawRecord(tuple(values), label, difficulty)


def _iter_lines(source):
    if hasattr(source, "read"):
        source = iter(source)
    for raw in source:
        if isinstance(raw, bytes):
            raw = raw.decode("utf-8")
        yield raw


def parse_dataset(source, schema: FeatureSchema = DEFAULT_SCHEMA) -> list[RawRecord]:
    """Parse a whole record stream; one RawRecord per non-empty line.

    `source` may be a file object (text or binary) or any iterable of
    lines. Empty input yields an empty list. Malformed lines raise
    DataFormatError naming the 1-based line number.
    """
    records = []
    for line_no, line in enumerate(_iter_lines(source), start=1):
        if not line.strip():
            continue
        records.append(parse_line(line, schema, line_no))
    return records


def load_file(path, schema: FeatureSchema = DEFAULT_SCHEMA) -> list[RawRecord]:
    with open(path, "rb") as fh:
        return parse_dataset(fh, schema)


def serialize_record(record: RawRecord) -> str:
    """Inverse of parse_line for well-formed records."""
    fields = list(record.values) + [record.label]
    if record.difficulty is not None:
        fields.append(str(record.difficulty))
    return ",".join(fields)
