"""Deterministic on-disk formats.

CSV: comma separated, '.' decimal point, one header row, LF line
endings, floats at 17 significant digits (round-trip exact for
float64). Complex matrices become paired real/imag columns. Manifests
are sorted-key JSON with no timestamps, so identical (config, seed)
reruns are byte identical.
"""

import csv
import json

import numpy as np


def format_value(value):
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    if value is None:
        return ""
    return str(value)


def write_csv(path, header, rows):
    """Write rows of scalars; every cell goes through format_value."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([format_value(v) for v in row])


def write_columns_csv(path, columns):
    """columns: list of (name, 1d array) with equal lengths."""
    names = [name for name, _ in columns]
    arrays = [np.asarray(values) for _, values in columns]
    length = len(arrays[0])
    for name, arr in zip(names, arrays):
        if len(arr) != length:
            raise ValueError("column %r has length %d, expected %d"
                             % (name, len(arr), length))
    write_csv(path, names,
              ([arr[i] for arr in arrays] for i in range(length)))


def write_matrix_csv(path, matrix, extra_columns=()):
    """Complex matrix as rows (i, j, real, imag [, extras])."""
    matrix = np.asarray(matrix)
    header = ["row", "col", "real", "imag"]
    extras = [(name, np.asarray(values)) for name, values in extra_columns]
    header += [name for name, _ in extras]
    rows = []
    for i in range(matrix.shape[0]):
        for j in range(matrix.shape[1]):
            row = [i, j, matrix[i, j].real, matrix[i, j].imag]
            row += [arr[i, j] for _, arr in extras]
            rows.append(row)
    write_csv(path, header, rows)


def write_fit_csv(path, fit_params):
    """Fitted scalars, one (name, value) row each, sorted by name."""
    write_csv(path, ["name", "value"],
              ((name, fit_params[name]) for name in sorted(fit_params)))


def write_manifest(path, manifest):
    """Sorted-key JSON; rejects anything json cannot represent."""
    def default(obj):
        if isinstance(obj, (np.integer,)):
            return int(obj)
        if isinstance(obj, (np.floating,)):
            return float(obj)
        if isinstance(obj, np.ndarray):
            return obj.tolist()
        raise TypeError("manifest cannot serialize %r" % type(obj))

    text = json.dumps(manifest, sort_keys=True, indent=2, default=default,
                      allow_nan=False)
    with open(path, "w", newline="") as fh:
        fh.write(text + "\n")


def read_manifest(path):
    with open(path, "r") as fh:
        return json.load(fh)
