"""Shared CSV writing with an embedded provenance comment line."""

from __future__ import annotations

import csv


def write_rows(path, header, rows, meta: dict | None = None) -> None:
    """Write a CSV; ``meta`` lands in a single '#'-prefixed first line so the
    file itself records where it came from."""
    with open(path, "w", newline="") as fh:
        if meta:
            fh.write("# " + " ".join(f"{k}={v}" for k, v in meta.items()) + "\n")
        writer = csv.writer(fh)
        writer.writerow(header)
        writer.writerows(rows)


def read_rows(path) -> tuple[list[str], list[list[str]]]:
    """Read a CSV written by :func:`write_rows`, skipping comment lines."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh)
                if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise ValueError(f"{path}: no rows")
    return rows[0], rows[1:]
