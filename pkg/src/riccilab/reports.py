"""Deterministic report emission: JSON, CSV and markdown."""

import csv
import io
import json
import math
import os


def round12(value):
    """Round a float to 12 significant digits for stable byte output."""
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return float(f"{value:.12g}")
    return value


def _normalize(obj):
    if isinstance(obj, dict):
        return {str(k): _normalize(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_normalize(v) for v in obj]
    if hasattr(obj, "to_dict"):
        return _normalize(obj.to_dict())
    if hasattr(obj, "item"):
        return _normalize(obj.item())
    return round12(obj)


def _flatten(obj, prefix=""):
    rows = []
    if isinstance(obj, dict):
        for k in sorted(obj):
            rows.extend(_flatten(obj[k], f"{prefix}{k}." if prefix or True else k))
    elif isinstance(obj, list):
        for i, v in enumerate(obj):
            rows.extend(_flatten(v, f"{prefix}{i}."))
    else:
        rows.append((prefix[:-1], obj))
    return rows


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.12g}"
    return str(v)


def emit_report(results, formats, out_dir, stem="report"):
    """Write the result dict in the requested formats; returns file paths.

    Byte-deterministic: keys sorted, floats at 12 significant digits, no
    timestamps.
    """
    os.makedirs(out_dir, exist_ok=True)
    data = _normalize(results)
    written = []
    for fmt in formats:
        path = os.path.join(out_dir, f"{stem}.{fmt}")
        if fmt == "json":
            body = json.dumps(data, indent=1, sort_keys=True) + "\n"
            with open(path, "w", newline="") as fh:
                fh.write(body)
        elif fmt == "csv":
            buf = io.StringIO()
            w = csv.writer(buf, lineterminator="\n")
            w.writerow(["key", "value"])
            for key, val in _flatten(data):
                w.writerow([key, _fmt(val)])
            with open(path, "w", newline="") as fh:
                fh.write(buf.getvalue())
        elif fmt == "md":
            lines = [f"# {stem}", "", "| key | value |", "| --- | --- |"]
            for key, val in _flatten(data):
                lines.append(f"| {key} | {_fmt(val)} |")
            with open(path, "w", newline="") as fh:
                fh.write("\n".join(lines) + "\n")
        else:
            raise ValueError(f"unknown report format {fmt!r}")
        written.append(path)
    return written


def write_table_csv(rows, header, path):
    """Plain table CSV with 12-digit float formatting."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(round12(v) if isinstance(v, float) else v)
                        for v in row])
