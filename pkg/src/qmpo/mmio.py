"""Matrix Market reader/writer for real matrices (coordinate and array)."""

import numpy as np
import scipy.sparse as sp

from .errors import (MatrixMarketError, MatrixMarketFieldError, MatrixMarketHeaderError,
                     MatrixMarketIndexError)

_FORMATS = ("coordinate", "array")
_REAL_FIELDS = ("real", "double", "integer")
_SYMMETRIES = ("general", "symmetric")


def _parse_header(line):
    parts = line.strip().split()
    if len(parts) != 5 or parts[0] != "%%MatrixMarket" or parts[1].lower() != "matrix":
        raise MatrixMarketHeaderError("expected '%%MatrixMarket matrix <format> <field> <symmetry>'", 1)
    fmt, fld, symm = (p.lower() for p in parts[2:])
    if fmt not in _FORMATS:
        raise MatrixMarketHeaderError(f"unknown format {fmt!r}", 1)
    if fld not in _REAL_FIELDS:
        raise MatrixMarketFieldError(f"field {fld!r} is not real", 1)
    if symm not in _SYMMETRIES:
        raise MatrixMarketHeaderError(f"unsupported symmetry {symm!r}", 1)
    return fmt, symm


def _data_lines(lines):
    for lineno, line in enumerate(lines, start=1):
        if lineno == 1:
            continue
        s = line.strip()
        if not s or s.startswith("%"):
            continue
        yield lineno, s.split()


def _float(tok, lineno):
    try:
        return float(tok)
    except ValueError:
        raise MatrixMarketError(f"cannot parse value {tok!r}", lineno) from None


def _int(tok, lineno):
    try:
        return int(tok)
    except ValueError:
        raise MatrixMarketError(f"cannot parse integer {tok!r}", lineno) from None


def read_matrix_market(path):
    """Read a real Matrix Market file.

    Array files give a dense ``ndarray``, coordinate files a CSR matrix.
    Symmetric files are expanded to both triangles.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise MatrixMarketHeaderError("empty file", 1)
    fmt, symm = _parse_header(lines[0])
    body = _data_lines(lines)
    try:
        lineno, size = next(body)
    except StopIteration:
        raise MatrixMarketHeaderError("missing size line", len(lines)) from None
    if fmt == "coordinate":
        return _read_coordinate(body, size, lineno, symm)
    return _read_array(body, size, lineno, symm)


def _read_coordinate(body, size, lineno, symm):
    if len(size) != 3:
        raise MatrixMarketHeaderError("coordinate size line needs 'rows cols nnz'", lineno)
    m, n, nnz = (_int(t, lineno) for t in size)
    if symm == "symmetric" and m != n:
        raise MatrixMarketHeaderError("symmetric matrix must be square", lineno)
    rows, cols, vals = [], [], []
    last = lineno
    for lineno, tok in body:
        last = lineno
        if len(tok) != 3:
            raise MatrixMarketError("coordinate entry needs 'i j value'", lineno)
        i, j, v = _int(tok[0], lineno), _int(tok[1], lineno), _float(tok[2], lineno)
        if not (1 <= i <= m and 1 <= j <= n):
            raise MatrixMarketIndexError(f"index ({i}, {j}) outside {m} x {n}", lineno)
        if symm == "symmetric" and i < j:
            raise MatrixMarketIndexError(f"entry ({i}, {j}) above the diagonal of a symmetric file", lineno)
        rows.append(i - 1)
        cols.append(j - 1)
        vals.append(v)
        if symm == "symmetric" and i != j:
            rows.append(j - 1)
            cols.append(i - 1)
            vals.append(v)
    count = sum(1 for r, c in zip(rows, cols) if symm == "general" or r >= c)
    if count != nnz:
        raise MatrixMarketError(f"expected {nnz} entries, found {count}", last)
    return sp.csr_matrix((vals, (rows, cols)), shape=(m, n))


def _read_array(body, size, lineno, symm):
    if len(size) != 2:
        raise MatrixMarketHeaderError("array size line needs 'rows cols'", lineno)
    m, n = (_int(t, lineno) for t in size)
    if symm == "symmetric" and m != n:
        raise MatrixMarketHeaderError("symmetric matrix must be square", lineno)
    if symm == "symmetric":
        slots = [(i, j) for j in range(n) for i in range(j, m)]
    else:
        slots = [(i, j) for j in range(n) for i in range(m)]
    A = np.zeros((m, n))
    idx = 0
    last = lineno
    for lineno, tok in body:
        last = lineno
        for t in tok:
            if idx >= len(slots):
                raise MatrixMarketIndexError(f"more than {len(slots)} values", lineno)
            i, j = slots[idx]
            A[i, j] = _float(t, lineno)
            if symm == "symmetric":
                A[j, i] = A[i, j]
            idx += 1
    if idx != len(slots):
        raise MatrixMarketError(f"expected {len(slots)} values, found {idx}", last)
    return A


def write_matrix_market(path, matrix, symmetric=None, comment=None):
    """Write a dense array (array format) or sparse matrix (coordinate format).

    Values are printed with 17 significant digits.  ``symmetric=None``
    detects exact symmetry of square matrices and stores one triangle.
    """
    is_sparse = sp.issparse(matrix)
    if not is_sparse:
        matrix = np.atleast_2d(np.asarray(matrix, dtype=float))
    m, n = matrix.shape
    if symmetric is None:
        if m != n:
            symmetric = False
        elif is_sparse:
            symmetric = (matrix != matrix.T).nnz == 0
        else:
            symmetric = bool(np.array_equal(matrix, matrix.T))
    symm = "symmetric" if symmetric else "general"
    out = []
    if is_sparse:
        out.append(f"%%MatrixMarket matrix coordinate real {symm}")
        if comment:
            out.append(f"% {comment}")
        coo = sp.coo_matrix(matrix)
        coo.sum_duplicates()
        keep = coo.row >= coo.col if symmetric else np.ones(coo.nnz, dtype=bool)
        r, c, v = coo.row[keep], coo.col[keep], coo.data[keep]
        order = np.lexsort((r, c))
        out.append(f"{m} {n} {len(v)}")
        out.extend(f"{r[t] + 1} {c[t] + 1} {v[t]:.17g}" for t in order)
    else:
        out.append(f"%%MatrixMarket matrix array real {symm}")
        if comment:
            out.append(f"% {comment}")
        out.append(f"{m} {n}")
        for j in range(n):
            start = j if symmetric else 0
            out.extend(f"{matrix[i, j]:.17g}" for i in range(start, m))
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(out) + "\n")
