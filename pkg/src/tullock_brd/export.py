"""Trace serialisation: CSV with a sibling summary file, or JSON lines."""

from __future__ import annotations

import io
import json
import os
import tempfile


def fmt_number(v) -> str:
    if v is None:
        return ""
    if isinstance(v, (bool,)):
        return str(int(v))
    if isinstance(v, int):
        return str(v)
    return format(float(v), ".17g")


def trace_csv(trace) -> str:
    buf = io.StringIO()
    buf.write(",".join(trace.columns()) + "\n")
    for row in trace.rows():
        buf.write(",".join(fmt_number(v) for v in row) + "\n")
    return buf.getvalue()


def trace_jsonl(trace) -> str:
    cols = trace.columns()
    vec = cols[-1].split("_")[0]
    head = [c for c in cols if "_" not in c]
    lines = []
    for row in trace.rows():
        rec = dict(zip(head, row[: len(head)]))
        rec[vec] = row[len(head):]
        lines.append(json.dumps(rec))
    lines.append(json.dumps({"summary": summary_dict(trace)}, sort_keys=True))
    return "\n".join(lines) + "\n"


def summary_dict(trace) -> dict:
    out = trace.summary.to_json()
    out["meta"] = trace.meta
    out["truncated"] = trace.truncated
    return out


def atomic_write(path: str, text: str) -> None:
    """Write ``text`` to ``path`` via a temporary file and rename."""
    d = os.path.dirname(os.path.abspath(path))
    os.makedirs(d, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_trace(trace, out: str, fmt: str = "csv", stdout=None) -> None:
    """Write ``trace`` to ``out`` (``-`` for stdout).

    CSV output puts the summary in ``<out>.summary.json``; on stdout it is
    appended as a final ``# summary`` comment line.
    """
    if fmt == "csv":
        body = trace_csv(trace)
        summary = json.dumps(summary_dict(trace), sort_keys=True)
        if out == "-":
            stdout.write(body)
            stdout.write("# summary " + summary + "\n")
        else:
            atomic_write(out, body)
            atomic_write(out + ".summary.json", summary + "\n")
    elif fmt == "jsonl":
        body = trace_jsonl(trace)
        if out == "-":
            stdout.write(body)
        else:
            atomic_write(out, body)
    else:
        raise ValueError(f"unknown format {fmt!r}")
