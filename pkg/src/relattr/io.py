"""Text persistence for recordings, manifests, relevance tensors and run snapshots.

Recording file::

    # id: rec-001
    # label: AF
    # sample_rate: 400
    # leads: I,II,III,aVR,aVL,aVF,V1,V2,V3,V4,V5,V6
    0.0132,0.0211,...          (one row per sample, 12 values)

Relevance file::

    # relattr-relevance v1
    # recording_id: rec-001
    # method: IG
    # class_index: 4
    # config: {"method": "IG", ...}
    # shape: 4096,12
    <rows of 17-significant-digit values>

Manifest::

    id,path,label
    rec-001,recordings/rec-001.csv,AF

Paths ending in ``.gz`` are read and written gzip-compressed.
"""

import csv
import gzip
import hashlib
import io as _io
import json
import os
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .analysis.thresholds import DEFAULT_THRESHOLDS
from .attribution.config import Method, RelevanceTensor
from .signal.ecg import LABELS, LEAD_NAMES, N_LEADS, EcgRecording
from .signal.preprocess import preprocess

RELEVANCE_MAGIC = "relattr-relevance v1"
MANIFEST_VERSION = 1
MANIFEST_HEADER = ("id", "path", "label")


class FormatError(ValueError):
    """A file does not follow its documented format."""

    def __init__(self, message, path=None, line=None):
        self.path = None if path is None else str(path)
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:{line}: " if line is not None else f"{path}: "
        super().__init__(where + message)


def _open_text(path, mode="r"):
    path = Path(path)
    if path.suffix == ".gz":
        return gzip.open(path, mode + "t", encoding="utf-8", newline="")
    return open(path, mode, encoding="utf-8", newline="")


def _read_header(lines, path):
    """Collect ``# key: value`` lines at the top; returns ``(header, first_data_line)``."""
    header = {}
    for i, line in enumerate(lines):
        s = line.strip()
        if not s:
            continue
        if not s.startswith("#"):
            return header, i
        body = s[1:].strip()
        if ":" in body:
            key, value = body.split(":", 1)
            header[key.strip().lower()] = value.strip()
        elif body:
            header[body] = ""
    return header, len(lines)


def _parse_grid(lines, start, n_cols, path):
    """Parse comma-separated rows; errors carry the 1-based line number."""
    text = "".join(lines[start:])
    try:
        grid = np.loadtxt(_io.StringIO(text), delimiter=",", ndmin=2, comments="#")
    except ValueError:
        grid = None
    if grid is not None and grid.size and grid.shape[1] == n_cols and np.all(np.isfinite(grid)):
        return grid
    rows = []
    for i in range(start, len(lines)):
        s = lines[i].strip()
        if not s or s.startswith("#"):
            continue
        parts = s.split(",")
        if len(parts) != n_cols:
            raise FormatError(f"expected {n_cols} values, found {len(parts)}", path, i + 1)
        try:
            row = [float(p) for p in parts]
        except ValueError:
            raise FormatError(f"non-numeric value in row: {s[:60]!r}", path, i + 1) from None
        if not all(np.isfinite(row)):
            raise FormatError("non-finite value", path, i + 1)
        rows.append(row)
    if not rows:
        raise FormatError("no data rows", path)
    return np.array(rows, dtype=np.float64)


# ---- recordings ---------------------------------------------------------------------

def read_recording(path, resample=True) -> EcgRecording:
    """Load and validate a recording, then bring it to 400 Hz and 4096 samples.

    Raises
    ------
    FormatError
        Malformed header, wrong lead count or a bad row (with its line number).
    """
    with _open_text(path) as fh:
        lines = fh.readlines()
    header, start = _read_header(lines, path)
    for key in ("id", "sample_rate"):
        if key not in header:
            raise FormatError(f"missing '# {key}:' header line", path)
    leads = header.get("leads")
    if leads is not None:
        names = [n.strip() for n in leads.split(",")]
        if len(names) != N_LEADS:
            raise FormatError(f"header lists {len(names)} leads, expected {N_LEADS}", path)
        if [n.lower() for n in names] != [n.lower() for n in LEAD_NAMES]:
            raise FormatError(f"leads must be {','.join(LEAD_NAMES)} in that order", path)
    try:
        rate = float(header["sample_rate"])
    except ValueError:
        raise FormatError(f"bad sample rate {header['sample_rate']!r}", path) from None
    label = header.get("label") or None
    if label is not None and label not in LABELS:
        raise FormatError(f"unknown label {label!r}; expected one of {LABELS}", path)
    samples = _parse_grid(lines, start, N_LEADS, path)
    try:
        rec = EcgRecording(id=header["id"], samples=samples, sample_rate=rate, label=label)
    except ValueError as exc:
        raise FormatError(str(exc), path) from None
    return preprocess(rec) if resample else rec


def write_recording(recording: EcgRecording, path, fmt="%.9g"):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with _open_text(path, "w") as fh:
        fh.write(f"# id: {recording.id}\n")
        fh.write(f"# label: {recording.label or ''}\n")
        fh.write(f"# sample_rate: {recording.sample_rate:g}\n")
        fh.write(f"# leads: {','.join(LEAD_NAMES)}\n")
        np.savetxt(fh, recording.samples, fmt=fmt, delimiter=",")
    return path


# ---- manifest ------------------------------------------------------------------------

@dataclass(frozen=True)
class ManifestEntry:
    id: str
    path: Path
    label: str


@dataclass
class DatasetManifest:
    entries: list = field(default_factory=list)
    version: int = MANIFEST_VERSION
    source: Optional[Path] = None

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @property
    def counts(self) -> dict:
        c = Counter(e.label for e in self.entries)
        return {label: c.get(label, 0) for label in LABELS}

    @property
    def ids(self) -> list:
        return [e.id for e in self.entries]


def load_manifest(path) -> DatasetManifest:
    """Read a manifest; relative paths resolve against its directory.

    Raises
    ------
    FormatError
        Bad header, duplicate id, unknown label or a missing recording file.
        A file with no rows at all is a valid, empty manifest.
    """
    path = Path(path)
    base = path.parent
    with _open_text(path) as fh:
        rows = list(csv.reader(fh))
    lines = [(i + 1, r) for i, r in enumerate(rows)
             if r and not (len(r) == 1 and not r[0].strip()) and not r[0].startswith("#")]
    if not lines:
        return DatasetManifest(entries=[], source=path)
    first_line, header = lines[0]
    if tuple(h.strip().lower() for h in header) != MANIFEST_HEADER:
        raise FormatError(f"header must be 'id,path,label', got {','.join(header)!r}",
                          path, first_line)
    seen = set()
    entries = []
    for lineno, row in lines[1:]:
        if len(row) != 3:
            raise FormatError(f"expected 3 fields, found {len(row)}", path, lineno)
        rid, rpath, label = (x.strip() for x in row)
        if rid in seen:
            raise FormatError(f"duplicate recording id {rid!r}", path, lineno)
        if label not in LABELS:
            raise FormatError(f"unknown label {label!r} for {rid!r}", path, lineno)
        full = Path(rpath) if os.path.isabs(rpath) else base / rpath
        if not full.is_file():
            raise FormatError(f"recording file for {rid!r} not found: {rpath}", path, lineno)
        seen.add(rid)
        entries.append(ManifestEntry(id=rid, path=full, label=label))
    return DatasetManifest(entries=entries, source=path)


def write_manifest(entries, path):
    """Write ``(id, path, label)`` entries; paths are stored relative to the manifest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    base = path.parent.resolve()
    with _open_text(path, "w") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for e in entries:
            rid, rpath, label = (e.id, e.path, e.label) if isinstance(e, ManifestEntry) else e
            p = Path(rpath)
            try:
                p = p.resolve().relative_to(base)
            except ValueError:
                pass
            writer.writerow([rid, p.as_posix(), label])
    return path


# ---- relevance -----------------------------------------------------------------------

def relevance_filename(recording_id, method, class_index, compress=False) -> str:
    code = Method.parse(method).short_code
    return f"{recording_id}.{code}.c{int(class_index)}.txt" + (".gz" if compress else "")


def write_relevance(tensor: RelevanceTensor, path):
    """Write ``tensor`` with 17 significant digits (lossless for float64)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    values = np.asarray(tensor.values)
    grid = values.reshape(values.shape[0], -1) if values.ndim > 1 else values[:, None]
    with _open_text(path, "w") as fh:
        fh.write(f"# {RELEVANCE_MAGIC}\n")
        fh.write(f"# recording_id: {tensor.recording_id or ''}\n")
        fh.write(f"# method: {tensor.method.value}\n")
        fh.write(f"# class_index: {tensor.class_index}\n")
        fh.write(f"# config: {json.dumps(tensor.config, sort_keys=True)}\n")
        fh.write(f"# shape: {','.join(str(d) for d in values.shape)}\n")
        np.savetxt(fh, grid, fmt="%.17g", delimiter=",")
    return path


def read_relevance(path, expected_shape=None) -> RelevanceTensor:
    """Read a relevance file; the grid must match its shape header.

    Raises
    ------
    FormatError
        Missing header fields, bad values, or a shape mismatch.
    """
    with _open_text(path) as fh:
        lines = fh.readlines()
    header, start = _read_header(lines, path)
    if RELEVANCE_MAGIC not in header:
        raise FormatError(f"not a relevance file (missing '# {RELEVANCE_MAGIC}')", path)
    for key in ("method", "class_index", "shape"):
        if key not in header:
            raise FormatError(f"missing '# {key}:' header line", path)
    try:
        shape = tuple(int(d) for d in header["shape"].split(","))
    except ValueError:
        raise FormatError(f"bad shape header {header['shape']!r}", path) from None
    if expected_shape is not None and shape != tuple(expected_shape):
        raise FormatError(f"shape {shape} does not match expected {tuple(expected_shape)}",
                          path)
    n_cols = int(np.prod(shape[1:])) if len(shape) > 1 else 1
    grid = _parse_grid(lines, start, n_cols, path)
    if grid.shape[0] != shape[0]:
        raise FormatError(f"shape header says {shape[0]} rows, file has {grid.shape[0]}",
                          path)
    config = json.loads(header.get("config") or "{}")
    try:
        method = Method.parse(header["method"])
    except ValueError as exc:
        raise FormatError(str(exc), path) from None
    return RelevanceTensor(values=grid.reshape(shape), method=method,
                           class_index=int(header["class_index"]),
                           recording_id=header.get("recording_id") or None, config=config)


def tensor_checksum(values) -> str:
    return hashlib.sha256(np.ascontiguousarray(values, dtype=np.float64).tobytes()).hexdigest()


# ---- run configuration ---------------------------------------------------------------

@dataclass
class RunConfig:
    """Settings of one CLI run, written alongside its outputs."""

    command: str = ""
    model_path: Optional[str] = None
    manifest_path: Optional[str] = None
    attribution: list = field(default_factory=list)
    thresholds: dict = field(default_factory=lambda: dict(DEFAULT_THRESHOLDS))
    target_class: Optional[str] = None
    detection_lead: str = "II"
    analysis_lead: str = "II"
    bins: int = 100
    pre_fraction: float = 0.35
    post_fraction: float = 0.55
    out_dir: Optional[str] = None
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        for name, t in self.thresholds.items():
            if not 0.0 <= float(t) <= 1.0:
                raise ValueError(f"threshold for {name} must be in [0, 1], got {t}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data) -> "RunConfig":
        known = {f for f in cls.__dataclass_fields__}
        return cls(**{k: v for k, v in data.items() if k in known})


RUN_CONFIG_NAME = "run_config.json"


def write_run_config(config: RunConfig, out_dir) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / RUN_CONFIG_NAME
    path.write_text(json.dumps(config.to_dict(), indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")
    return path


def read_run_config(path) -> RunConfig:
    path = Path(path)
    if path.is_dir():
        path = path / RUN_CONFIG_NAME
    return RunConfig.from_dict(json.loads(path.read_text(encoding="utf-8")))
