"""JSONL/CSV/config I/O.

Trajectory lines look like::

    {"id": "t0", "group_id": "q7", "outcome": 1,
     "tokens": [{"h": 0.21, "t": "So"}, {"h": 2.4, "valid": false}],
     "boundary_potentials": [0.0, 0.375, 1.0]}
"""

from __future__ import annotations

import csv
import io
import json
import logging
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Any, Iterable, Iterator, Mapping

from .trajectory import ConfigError, ShapingConfig, TokenInfo, TrajectoryRecord

logger = logging.getLogger(__name__)

CONFIG_ENV_VAR = "SHAPECREDIT_CONFIG"


class ParseError(ValueError):
    def __init__(self, message: str, line_no: int | None = None):
        self.line_no = line_no
        prefix = f"line {line_no}: " if line_no is not None else ""
        super().__init__(prefix + message)


def record_from_dict(obj: Mapping[str, Any]) -> TrajectoryRecord:
    if not isinstance(obj, Mapping):
        raise ParseError("record must be a JSON object")
    for key in ("id", "outcome", "tokens"):
        if key not in obj:
            raise ParseError(f"missing key {key!r}")
    raw_tokens = obj["tokens"]
    if not isinstance(raw_tokens, list):
        raise ParseError("'tokens' must be an array")
    tokens = []
    for i, tok in enumerate(raw_tokens):
        if not isinstance(tok, Mapping) or "h" not in tok:
            raise ParseError(f"token {i} must be an object with key 'h'")
        if not isinstance(tok["h"], (int, float)) or isinstance(tok["h"], bool):
            raise ParseError(f"token {i}: entropy 'h' must be a number")
        tokens.append(TokenInfo(index=i, entropy=float(tok["h"]),
                                text=tok.get("t"), valid=bool(tok.get("valid", True))))
    bp = obj.get("boundary_potentials")
    if bp is not None:
        if not isinstance(bp, list) or not all(isinstance(x, (int, float)) for x in bp):
            raise ParseError("'boundary_potentials' must be an array of numbers")
        bp = tuple(float(x) for x in bp)
    return TrajectoryRecord(
        id=str(obj["id"]),
        group_id=None if obj.get("group_id") is None else str(obj["group_id"]),
        tokens=tuple(tokens),
        outcome=obj["outcome"],
        boundary_potentials=bp,
        meta=dict(obj.get("meta") or {}),
    )


def record_to_dict(record: TrajectoryRecord) -> dict[str, Any]:
    toks = []
    for tok in record.tokens:
        d: dict[str, Any] = {"h": tok.entropy}
        if tok.text is not None:
            d["t"] = tok.text
        if not tok.valid:
            d["valid"] = False
        toks.append(d)
    out: dict[str, Any] = {"id": record.id, "group_id": record.group_id,
                           "outcome": record.outcome, "tokens": toks}
    if record.boundary_potentials is not None:
        out["boundary_potentials"] = list(record.boundary_potentials)
    if record.meta:
        out["meta"] = dict(record.meta)
    return out


def dumps_record(record: TrajectoryRecord) -> str:
    return json.dumps(record_to_dict(record), ensure_ascii=False)


def loads_record(line: str) -> TrajectoryRecord:
    try:
        obj = json.loads(line)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc.msg}") from exc
    return record_from_dict(obj)


def iter_records(path: str | os.PathLike, *, strict: bool = False) -> Iterator[TrajectoryRecord]:
    """Stream records from a JSONL file.

    Malformed lines raise :class:`ParseError` under ``strict``; otherwise they
    are logged with their line number and skipped.
    """
    with open(path, encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                yield loads_record(line)
            except ParseError as exc:
                err = ParseError(str(exc), line_no)
                if strict:
                    raise err from exc
                logger.warning("skipping %s", err)


@contextmanager
def atomic_write(path: str | os.PathLike, newline: str | None = None):
    """Write to a temp file next to ``path`` and rename it into place on success."""
    target = Path(path)
    target.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=f".{target.name}.", dir=target.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline=newline) as fh:
            yield fh
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_jsonl(path: str | os.PathLike, rows: Iterable[Mapping[str, Any]]) -> None:
    with atomic_write(path) as fh:
        for row in rows:
            fh.write(json.dumps(row, ensure_ascii=False) + "\n")


def write_csv(path: str | os.PathLike, header: list[str], rows: Iterable[Iterable[Any]]) -> None:
    with atomic_write(path, newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def csv_text(header: list[str], rows: Iterable[Iterable[Any]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _coerce(text: str) -> Any:
    text = text.strip()
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        low = text.lower()
        if low in ("none", "null", ""):
            return None
        if low in ("true", "false"):
            return low == "true"
        return text.strip("'\"")


def parse_config_text(text: str) -> dict[str, Any]:
    """Parse a flat config: either a JSON object or ``key = value`` lines."""
    stripped = text.strip()
    if stripped.startswith("{"):
        obj = json.loads(stripped)
        if not isinstance(obj, dict):
            raise ConfigError("config JSON must be an object")
        return obj
    out: dict[str, Any] = {}
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        for sep in ("=", ":"):
            if sep in line:
                key, value = line.split(sep, 1)
                break
        else:
            raise ConfigError(f"config line {n}: expected 'key = value'")
        out[key.strip()] = _coerce(value)
    return out


def config_from_mapping(values: Mapping[str, Any], base: ShapingConfig | None = None) -> ShapingConfig:
    known = set(ShapingConfig.field_names())
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    merged = dict(vars(base or ShapingConfig()))
    merged.update(values)
    return ShapingConfig(**merged)


def load_config(path: str | os.PathLike | None = None, overrides: Mapping[str, Any] | None = None,
                base: ShapingConfig | None = None) -> ShapingConfig:
    """Resolve config with precedence: overrides > file > ``base`` (built-in defaults).

    When ``path`` is None the environment variable ``SHAPECREDIT_CONFIG`` is
    consulted.
    """
    values: dict[str, Any] = {}
    path = path or os.environ.get(CONFIG_ENV_VAR)
    if path:
        values.update(parse_config_text(Path(path).read_text(encoding="utf-8")))
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    return config_from_mapping(values, base)
