"""Fixed-format MPS export."""
from __future__ import annotations

import math
import re

from .model import EQ, GE, LE

_ROW_TYPE = {LE: "L", GE: "G", EQ: "E"}


def _mps_name(name, used, prefix):
    # fixed-format MPS fields are 8 characters wide and cannot contain blanks
    base = re.sub(r"\s+", "_", name)
    if len(base) <= 8 and base not in used:
        used.add(base)
        return base
    i = len(used)
    while True:
        cand = f"{prefix}{i}"
        if cand not in used:
            used.add(cand)
            return cand
        i += 1


def _num(v):
    s = repr(float(v))
    if len(s) > 12:
        s = f"{v:.6e}"
        if float(s) != float(v):
            s = repr(float(v))
    return s


def export_mps(model):
    """Return the model as a fixed-format MPS document.

    Names longer than eight characters are replaced by generated ``C<n>``/``X<n>``
    identifiers; numeric fields use round-trip ``repr`` when the exact value does
    not fit the column width, so coefficients survive a re-read exactly.
    """
    used_rows = {"COST"}
    row_names = [_mps_name(n, used_rows, "C") for n in model.con_names]
    used_cols = set()
    col_names = [_mps_name(n, used_cols, "X") for n in model.var_names]

    lines = [f"NAME          {model.name[:8] or 'MODEL'}", "ROWS", " N  COST"]
    for name, sense in zip(row_names, model.senses):
        lines.append(f" {_ROW_TYPE[sense]}  {name}")

    csc = model.matrix().tocsc()
    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for j, cname in enumerate(col_names):
        is_int = model.integer[j]
        if is_int and not in_int:
            lines.append(f"    MARKER{marker:<4d}             'MARKER'                 'INTORG'")
            marker += 1
            in_int = True
        elif not is_int and in_int:
            lines.append(f"    MARKER{marker:<4d}             'MARKER'                 'INTEND'")
            marker += 1
            in_int = False
        entries = []
        if model.obj[j] != 0.0:
            entries.append(("COST", model.obj[j]))
        start, end = csc.indptr[j], csc.indptr[j + 1]
        for r, v in zip(csc.indices[start:end], csc.data[start:end]):
            entries.append((row_names[r], v))
        if not entries:
            # keep the column visible so bounds can refer to it
            entries.append(("COST", 0.0))
        for rname, v in entries:
            lines.append(f"    {cname:<8s}  {rname:<8s}  {_num(v):>12s}")
    if in_int:
        lines.append(f"    MARKER{marker:<4d}             'MARKER'                 'INTEND'")

    lines.append("RHS")
    if model.obj_constant:
        # MPS convention: the objective RHS holds minus the constant
        lines.append(f"    RHS       {'COST':<8s}  {_num(-model.obj_constant):>12s}")
    for name, rhs in zip(row_names, model.rhs):
        if rhs != 0.0:
            lines.append(f"    RHS       {name:<8s}  {_num(rhs):>12s}")

    lines.append("BOUNDS")
    for j, cname in enumerate(col_names):
        lo, hi = model.lb[j], model.ub[j]
        if model.integer[j] and lo == 0.0 and hi == 1.0:
            lines.append(f" BV BND       {cname:<8s}")
            continue
        if lo == hi:
            lines.append(f" FX BND       {cname:<8s}  {_num(lo):>12s}")
            continue
        if lo == -math.inf and hi == math.inf:
            lines.append(f" FR BND       {cname:<8s}")
            continue
        if lo == -math.inf:
            lines.append(f" MI BND       {cname:<8s}")
        elif lo != 0.0:
            lines.append(f" LO BND       {cname:<8s}  {_num(lo):>12s}")
        if hi != math.inf:
            lines.append(f" UP BND       {cname:<8s}  {_num(hi):>12s}")
        elif model.integer[j]:
            lines.append(f" PL BND       {cname:<8s}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"
