"""Result tables (CSV with a JSON mirror), run manifests and flat config files."""

from __future__ import annotations

import csv
import json
import math
import platform
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from . import __version__

BASE_COLUMNS = ("k", "region", "model", "statistic", "value", "stderr")


def fmt(v) -> str:
    if isinstance(v, bool):
        return str(v).lower()
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v):
            return "nan"
        return "%.17g" % v
    return str(v)


def _parse(s: str):
    if s in ("true", "false"):
        return s == "true"
    try:
        return int(s)
    except ValueError:
        pass
    try:
        return float(s)
    except ValueError:
        return s


class ResultTable:
    """Row-per-measurement table; extra columns are appended after the base schema."""

    def __init__(self, extra_columns=()):
        self.columns = list(BASE_COLUMNS) + [c for c in extra_columns if c not in BASE_COLUMNS]
        self.rows: list[dict] = []

    def add(self, **row):
        for key in row:
            if key not in self.columns:
                self.columns.append(key)
        self.rows.append(row)

    def __len__(self):
        return len(self.rows)

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(self.columns)
            for r in self.rows:
                w.writerow([fmt(r.get(c, "")) for c in self.columns])
        return path

    def write_json(self, path) -> Path:
        path = Path(path)
        clean = [{c: _jsonable(r.get(c)) for c in self.columns} for r in self.rows]
        path.write_text(json.dumps({"columns": self.columns, "rows": clean}, indent=1))
        return path

    @classmethod
    def read_csv(cls, path) -> "ResultTable":
        with Path(path).open(newline="") as fh:
            rd = csv.reader(fh)
            header = next(rd, None)
            if header is None or tuple(header[: len(BASE_COLUMNS)]) != BASE_COLUMNS:
                raise ValueError("CSV does not follow the result schema")
            t = cls(header[len(BASE_COLUMNS):])
            for line in rd:
                if len(line) != len(header):
                    raise ValueError("ragged CSV row")
                t.rows.append({c: (_parse(v) if v != "" else None) for c, v in zip(header, line)})
        return t

    @classmethod
    def read_json(cls, path) -> "ResultTable":
        data = json.loads(Path(path).read_text())
        t = cls(data["columns"][len(BASE_COLUMNS):])
        t.rows = [dict(r) for r in data["rows"]]
        return t


def _jsonable(v):
    if isinstance(v, float) and (math.isnan(v) or math.isinf(v)):
        return str(v)
    if hasattr(v, "item"):
        return v.item()
    return v


@dataclass
class RunManifest:
    command: str
    config: dict
    seed: int | None = None
    code_version: str = __version__
    started: float = field(default_factory=time.time)
    finished: float | None = None
    grids: list = field(default_factory=list)
    error_caps: dict = field(default_factory=dict)
    outputs: list = field(default_factory=list)
    python: str = platform.python_version()

    def finish(self):
        self.finished = time.time()

    def write(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=1, default=_jsonable))
        return path


def load_config(path) -> dict:
    """Flat ``key = value`` file; blank lines and # comments are ignored."""
    out = {}
    for n, line in enumerate(Path(path).read_text().splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{n}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        out[key.replace("-", "_")] = val
    return out


def write_outputs(table: ResultTable, manifest: RunManifest, out_dir, stem: str) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = [table.write_csv(out_dir / f"{stem}.csv"), table.write_json(out_dir / f"{stem}.json")]
    manifest.outputs += [p.name for p in paths]
    manifest.finish()
    paths.append(manifest.write(out_dir / f"{stem}.manifest.json"))
    return paths
