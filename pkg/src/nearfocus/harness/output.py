"""
CSV, report and manifest emission.

Files are written with ``\\n`` line endings and floats in ``.9e`` format,
independent of locale, so equal inputs give byte-identical files. Each
CSV starts with ``# key=value`` metadata lines followed by one column
header row.
"""

import csv
import io
import json
import platform

import numpy as np

from .experiments import PowerMap, RateCurve, SumRateTable

__all__ = ["emit_csv", "emit_report", "emit_manifest", "read_csv", "format_float"]


def format_float(value):
    return format(float(value), ".9e")


def _cell(value):
    if isinstance(value, (float, np.floating)):
        return format_float(value)
    return str(value)


def _tables(result):
    """Metadata, header and rows of one result."""
    if isinstance(result, RateCurve):
        meta = {"artifact": "rate_curve", "far_field_baseline": str(result.far_field).lower()}
        header = ["x_m", "y_m", "z_m"]
        cols = []
        for arch in sorted(result.rates):
            for m in range(result.rates[arch].shape[0]):
                header.append(f"{arch}_user{m}_rate")
                cols.append(result.rates[arch][m])
        rows = [[*map(float, result.positions[p]), *(float(c[p]) for c in cols)]
                for p in range(len(result.positions))]
        return meta, header, rows
    if isinstance(result, (list, tuple)) and all(isinstance(r, PowerMap) for r in result):
        meta = {"artifact": "power_map"}
        if result:
            meta["architecture"] = result[0].architecture
            meta["far_field_baseline"] = str(result[0].far_field).lower()
        header = ["user", "iz", "ix", "x_m", "z_m", "normalized_power"]
        rows = []
        for pm in result:
            for iz, zz in enumerate(pm.z):
                for ix, xx in enumerate(pm.x):
                    rows.append([pm.user, iz, ix, float(xx), float(zz), float(pm.values[iz, ix])])
        return meta, header, rows
    if isinstance(result, SumRateTable):
        meta = {"artifact": "sum_rate_table", "far_field_baseline": str(result.far_field).lower()}
        header = ["n_users", "architecture", "sum_rate", "min_user_rate"]
        rows = [[int(m), arch, float(s), float(lo)] for m, arch, s, lo in result.rows]
        return meta, header, rows
    raise TypeError(f"cannot emit {type(result).__name__} as CSV")


def emit_csv(result, path):
    """Write ``result`` (rate curve, list of power maps or sum-rate table) to ``path``."""
    meta, header, rows = _tables(result)
    buf = io.StringIO()
    for key in sorted(meta):
        buf.write(f"# {key}={meta[key]}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(buf.getvalue())


def read_csv(path):
    """Parse a file written by :func:`emit_csv`.

    Returns ``(meta, header, rows)`` with numeric cells converted to float.
    """
    meta, lines = {}, []
    with open(path, encoding="utf-8", newline="") as fh:
        for line in fh:
            if line.startswith("# "):
                key, _, value = line[2:].rstrip("\n").partition("=")
                meta[key] = value
            else:
                lines.append(line)
    reader = csv.reader(lines)
    header = next(reader, [])
    rows = []
    for raw in reader:
        row = []
        for cell in raw:
            try:
                row.append(float(cell))
            except ValueError:
                row.append(cell)
        rows.append(row)
    return meta, header, rows


def emit_report(results, path, summary=None):
    """Plain-text digest of a run: scenario quantities and per-artifact extrema.

    ``results`` maps artifact names to results accepted by :func:`emit_csv`.
    """
    lines = []
    for key, value in (summary or {}).items():
        lines.append(f"{key}: {_cell(value)}")
    for name in sorted(results):
        result = results[name]
        if isinstance(result, RateCurve):
            for arch in sorted(result.rates):
                for m, row in enumerate(result.rates[arch]):
                    if row.size:
                        k = int(np.argmax(row))
                        lines.append(f"{name} {arch} user{m}: peak {format_float(row[k])} "
                                     f"at z={format_float(result.axis[k])}")
        elif isinstance(result, SumRateTable):
            for m, arch, s, lo in result.rows:
                lines.append(f"{name} M={m} {arch}: sum {format_float(s)} min {format_float(lo)}")
        else:
            for pm in result:
                iz, ix = pm.peak_cell()
                lines.append(f"{name} {pm.architecture} user{pm.user}: peak {format_float(pm.values[iz, ix])} "
                             f"at x={format_float(pm.x[ix])} z={format_float(pm.z[iz])}")
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write("\n".join(lines) + "\n")


def emit_manifest(path, scenario, seed, files, options=None):
    """JSON manifest: scenario digest, seed, produced files and library versions."""
    import scipy

    from .. import __version__

    manifest = {
        "scenario_sha256": scenario.digest(),
        "seed": int(seed),
        "options": options or {},
        "files": sorted(files),
        "versions": {
            "nearfocus": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
    }
    with open(path, "w", encoding="utf-8", newline="") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
