"""JSON and CSV serialization of solve reports and certificates.

JSON floats use the shortest round-trip representation and non-finite
values become ``null``; CSV floats carry 17 significant digits.  Identical
runs give byte-identical files apart from the wall-time fields.
"""

import csv
import io
import json
import math

import numpy as np

HISTORY_HEADER = ("k", "f", "kkt", "du", "wall_ms")
COMPARE_HEADER = ("solver", "f", "f_err_rel", "kkt", "wall_ms", "steps", "termination")


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, np.bool_):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    return obj


def dumps(obj):
    """Deterministic JSON text (sorted keys, NaN -> null)."""
    return json.dumps(_clean(obj), indent=2, sort_keys=True, allow_nan=False) + "\n"


def report_dict(report, problem=None, config=None, include_u=False):
    """Plain-dict view of a :class:`qmpo.driver.SolveReport`."""
    d = {
        "solver": report.solver,
        "termination": report.termination,
        "diagnostic": report.diagnostic,
        "objective": report.objective,
        "kkt_residual": report.kkt_residual,
        "scale": report.scale,
        "unscaled_objective": report.unscaled_objective,
        "unscaled_kkt_residual": report.unscaled_kkt,
        "steps": report.steps,
        "basis_dim": report.basis_dim,
        "wall_ms": report.wall_ms,
        "feasibility": float(np.linalg.norm(report.U.T @ report.U - np.eye(report.U.shape[1]))),
        "Lambda": report.Lambda,
        "history": [
            {"k": c.k, "f": c.f, "kkt": c.kkt, "du": c.du, "wall_ms": c.wall_ms}
            for c in report.history
        ],
    }
    if problem is not None:
        d["problem"] = {"name": problem.name, "source": problem.source,
                        "n": problem.n, "l": problem.l, "operator": problem.H.kind}
    if config is not None:
        d["config"] = {"eps_f": config.eps_f, "eps_u": config.eps_u, "eps_g": config.eps_g,
                       "k_max": config.k_max, "solve_every": config.solve_every,
                       "m_max": config.m_max, "seed": config.seed}
    if include_u:
        d["U"] = report.U
    return d


def write_json(path, obj):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g") if math.isfinite(v) else ""
    return str(v)


def csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def history_csv(report):
    """Checkpoint history with header ``k,f,kkt,du,wall_ms``."""
    rows = [(c.k, c.f, c.kkt, c.du, c.wall_ms) for c in report.history]
    return csv_text(HISTORY_HEADER, rows)


def certificate_csv(cert):
    header, rows = cert.csv_rows()
    return csv_text(header, rows)


def write_text(path, text):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)
