"""Versioned plain-text key-value sidecar files.

Layout::

    [format]
    name = readmit-kv
    version = 1
    kind = <what the file holds>

    [section]
    key = <JSON value>

Every value is JSON-encoded on a single line so lists and floats round-trip
exactly. Sections and keys are written in insertion order. Characters in
keys that the INI syntax would misread (``=``, ``:``, ``%``, leading comment
markers, surrounding blanks) are percent-encoded.
"""
from __future__ import annotations

import configparser
import json
from urllib.parse import quote, unquote
from pathlib import Path
from typing import Any, Mapping

FORMAT_NAME = "readmit-kv"
FORMAT_VERSION = 1


class KVFormatError(ValueError):
    pass


_SAFE = "/.-_<>()+,!*'@|&$^~{}"


def _key(key: str) -> str:
    if not isinstance(key, str) or not key:
        raise KVFormatError(f"keys must be non-empty strings, got {key!r}")
    return quote(key, safe=_SAFE)


def dumps(kind: str, sections: Mapping[str, Mapping[str, Any]]) -> str:
    lines = ["[format]", f"name = {FORMAT_NAME}", f"version = {FORMAT_VERSION}", f"kind = {kind}", ""]
    for section, entries in sections.items():
        if section in ("format", "DEFAULT"):
            raise KVFormatError(f"section name {section!r} is reserved")
        if not section or any(c in section for c in "[]\n\r"):
            raise KVFormatError(f"invalid section name {section!r}")
        lines.append(f"[{section}]")
        for key, value in entries.items():
            lines.append(f"{_key(key)} = {json.dumps(value, sort_keys=True)}")
        lines.append("")
    return "\n".join(lines)


def loads(text: str, kind: str | None = None) -> dict[str, dict[str, Any]]:
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str  # keep key case
    parser.read_string(text)
    if not parser.has_section("format") or parser.get("format", "name", fallback="") != FORMAT_NAME:
        raise KVFormatError("not a readmit-kv file")
    version = int(parser.get("format", "version"))
    if version != FORMAT_VERSION:
        raise KVFormatError(f"unsupported readmit-kv version {version}")
    if kind is not None and parser.get("format", "kind") != kind:
        raise KVFormatError(f"expected kind {kind!r}, found {parser.get('format', 'kind')!r}")
    out: dict[str, dict[str, Any]] = {}
    for section in parser.sections():
        if section == "format":
            continue
        out[section] = {unquote(k): json.loads(v) for k, v in parser.items(section)}
    return out


def write(path: str | Path, kind: str, sections: Mapping[str, Mapping[str, Any]]) -> None:
    Path(path).write_text(dumps(kind, sections), encoding="utf-8")


def read(path: str | Path, kind: str | None = None) -> dict[str, dict[str, Any]]:
    return loads(Path(path).read_text(encoding="utf-8"), kind)
