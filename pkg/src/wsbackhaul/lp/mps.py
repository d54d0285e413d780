"""Fixed-format MPS export and import.

Names are mangled to 8-character identifiers (``R0000001`` for rows,
``C0000001`` for columns); the table mapping them back is written as
``* MAP`` comment lines at the top of the file and returned separately.
Numbers are written with ``repr`` so a round trip is bit-exact, which means
a value field can run past the classic 12-character width.  The reader
splits on whitespace and accepts both layouts.
"""

from __future__ import annotations

import math

from .problem import EQ, GE, LE, LpError, LpProblem

OBJ_ROW = "OBJ"
MARK_START = "'INTORG'"
MARK_END = "'INTEND'"


class MpsError(LpError):
    def __init__(self, msg: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {msg}" if line is not None else msg)


def mangle_names(p: LpProblem) -> tuple[list[str], list[str]]:
    rows = [f"R{k + 1:07d}" for k in range(p.n_rows)]
    cols = [f"C{j + 1:07d}" for j in range(p.n_vars)]
    if p.n_rows > 9_999_999 or p.n_vars > 9_999_999:
        raise MpsError("problem too large for 8-character names")
    return rows, cols


def _fields(*parts: str) -> str:
    # classic column layout: 2-3, 5-12, 15-22, 25-36, 40-47, 50-61
    out = " " + (parts[0] if parts else "").ljust(2)
    starts = (4, 14, 24, 39, 49)
    for part, start in zip(parts[1:], starts):
        out = out.ljust(start) if len(out) < start else out + " "
        out += part
    return out.rstrip()


def _num(v: float) -> str:
    return repr(float(v))


def write_mps(p: LpProblem) -> bytes:
    rows, cols = mangle_names(p)
    lines = [f"* {p.name}"]
    lines += [f"* MAP {cols[j]} {name}" for j, name in enumerate(p.var_names)]
    lines += [f"* MAP {rows[k]} {name}" for k, name in enumerate(p.row_names)]
    lines.append(f"NAME          {_safe_name(p.name)}")
    lines += ["OBJSENSE", "    MAX", "ROWS", _fields("N", OBJ_ROW)]
    for k in range(p.n_rows):
        lines.append(_fields(p.row_sense[k], rows[k]))
    lines.append("COLUMNS")
    by_col: list[list[tuple[int, float]]] = [[] for _ in range(p.n_vars)]
    for k in range(p.n_rows):
        for j, v in zip(p.row_cols[k], p.row_vals[k]):
            by_col[j].append((k, v))
    in_int = False
    n_marker = 0
    for j in range(p.n_vars):
        if p.integer[j] != in_int:
            tag = MARK_START if p.integer[j] else MARK_END
            lines.append(_fields("", f"MARKER{n_marker:02d}", "'MARKER'", "", tag))
            n_marker += 1
            in_int = p.integer[j]
        # always list the objective entry so every column is declared
        lines.append(_fields("", cols[j], OBJ_ROW, _num(p.obj[j])))
        for k, v in sorted(by_col[j]):
            lines.append(_fields("", cols[j], rows[k], _num(v)))
    if in_int:
        lines.append(_fields("", f"MARKER{n_marker:02d}", "'MARKER'", "", MARK_END))
    lines.append("RHS")
    for k in range(p.n_rows):
        if p.rhs[k] != 0.0 or math.copysign(1.0, p.rhs[k]) < 0:
            lines.append(_fields("", "RHS", rows[k], _num(p.rhs[k])))
    lines.append("BOUNDS")
    for j in range(p.n_vars):
        lo, hi = p.lb[j], p.ub[j]
        c = cols[j]
        if lo == hi:
            lines.append(_fields("FX", "BND", c, _num(lo)))
            continue
        if lo == -math.inf:
            lines.append(_fields("MI", "BND", c))
        elif lo != 0.0 or math.copysign(1.0, lo) < 0 or p.integer[j]:
            lines.append(_fields("LO", "BND", c, _num(lo)))
        if hi == math.inf:
            if p.integer[j]:
                lines.append(_fields("PL", "BND", c))
        else:
            lines.append(_fields("UP", "BND", c, _num(hi)))
    lines.append("ENDATA")
    return ("\n".join(lines) + "\n").encode("ascii")


def _safe_name(name: str) -> str:
    s = "".join(ch if ch.isalnum() or ch in "_-." else "_" for ch in name)
    return s[:8] or "PROBLEM"


def mangling_table(p: LpProblem) -> str:
    rows, cols = mangle_names(p)
    out = ["kind,mps_name,name"]
    out += [f"column,{c},{n}" for c, n in zip(cols, p.var_names)]
    out += [f"row,{r},{n}" for r, n in zip(rows, p.row_names)]
    return "\n".join(out) + "\n"


def _float(tok: str, line: int) -> float:
    try:
        return float(tok)
    except ValueError:
        raise MpsError(f"bad number {tok!r}", line) from None


def read_mps(data: bytes | str) -> LpProblem:
    text = data.decode("ascii") if isinstance(data, bytes) else data
    names: dict[str, str] = {}
    title = "problem"
    section = None
    maximize = False
    obj_row = None
    row_order: list[str] = []
    row_sense: dict[str, str] = {}
    col_order: list[str] = []
    col_int: dict[str, bool] = {}
    obj: dict[str, float] = {}
    entries: dict[str, list[tuple[str, float]]] = {}
    rhs: dict[str, float] = {}
    bounds: dict[str, list] = {}
    in_int = False
    ended = False
    first_comment = True

    for ln, raw in enumerate(text.splitlines(), start=1):
        if not raw.strip():
            continue
        if raw.startswith("*"):
            tok = raw[1:].split()
            if len(tok) == 3 and tok[0] == "MAP":
                names[tok[1]] = tok[2]
            elif first_comment and len(tok) == 1:
                title = tok[0]
            first_comment = False
            continue
        if ended:
            raise MpsError("content after ENDATA", ln)
        tok = raw.split()
        if not raw[0].isspace():
            head = tok[0]
            if head == "NAME":
                section = "NAME"
            elif head in ("OBJSENSE", "ROWS", "COLUMNS", "RHS", "BOUNDS"):
                section = head
                if head == "OBJSENSE" and len(tok) > 1:
                    maximize = _objsense(tok[1], ln)
            elif head == "RANGES":
                raise MpsError("RANGES section is not supported", ln)
            elif head == "ENDATA":
                ended = True
            else:
                raise MpsError(f"unknown section {head!r}", ln)
            continue
        if section == "OBJSENSE":
            maximize = _objsense(tok[0], ln)
        elif section == "ROWS":
            if len(tok) != 2:
                raise MpsError("ROWS entry needs a type and a name", ln)
            kind, name = tok
            if kind == "N":
                if obj_row is None:
                    obj_row = name
                continue
            if kind not in (LE, EQ, GE):
                raise MpsError(f"bad row type {kind!r}", ln)
            if name in row_sense:
                raise MpsError(f"duplicate row {name!r}", ln)
            row_order.append(name)
            row_sense[name] = kind
        elif section == "COLUMNS":
            if len(tok) >= 3 and tok[1] == "'MARKER'":
                if tok[-1] == MARK_START:
                    in_int = True
                elif tok[-1] == MARK_END:
                    in_int = False
                else:
                    raise MpsError(f"bad marker {tok[-1]!r}", ln)
                continue
            if len(tok) not in (3, 5):
                raise MpsError("COLUMNS entry needs 3 or 5 fields", ln)
            col = tok[0]
            if col not in col_int:
                col_order.append(col)
                col_int[col] = in_int
                entries[col] = []
            elif col != col_order[-1]:
                raise MpsError(f"column {col!r} is not contiguous", ln)
            for rname, val in zip(tok[1::2], tok[2::2]):
                v = _float(val, ln)
                if rname == obj_row:
                    obj[col] = v
                elif rname in row_sense:
                    entries[col].append((rname, v))
                else:
                    raise MpsError(f"unknown row {rname!r}", ln)
        elif section == "RHS":
            if len(tok) not in (3, 5):
                raise MpsError("RHS entry needs 3 or 5 fields", ln)
            for rname, val in zip(tok[1::2], tok[2::2]):
                if rname not in row_sense:
                    raise MpsError(f"unknown row {rname!r}", ln)
                rhs[rname] = _float(val, ln)
        elif section == "BOUNDS":
            kind = tok[0]
            if kind in ("MI", "PL", "FR", "BV"):
                if len(tok) < 3:
                    raise MpsError("bound entry needs a column name", ln)
                col, val = tok[2], None
            else:
                if len(tok) != 4:
                    raise MpsError("bound entry needs type, set, column and value", ln)
                col, val = tok[2], _float(tok[3], ln)
            if col not in col_int:
                raise MpsError(f"unknown column {col!r}", ln)
            if kind not in ("LO", "UP", "FX", "MI", "PL", "FR", "BV"):
                raise MpsError(f"bad bound type {kind!r}", ln)
            bounds.setdefault(col, []).append((kind, val))
        else:
            raise MpsError("data line outside any section", ln)
    if not ended:
        raise MpsError("missing ENDATA")

    p = LpProblem(names.get(title, title))
    for col in col_order:
        lo, hi = 0.0, math.inf
        if col_int[col]:
            hi = 1.0  # binary unless told otherwise
        for kind, val in bounds.get(col, []):
            if kind == "LO":
                lo = val
            elif kind == "UP":
                hi = val
            elif kind == "FX":
                lo = hi = val
            elif kind == "MI":
                lo = -math.inf
            elif kind == "PL":
                hi = math.inf
            elif kind == "FR":
                lo, hi = -math.inf, math.inf
            elif kind == "BV":
                lo, hi = 0.0, 1.0
        c = obj.get(col, 0.0)
        p.add_var(names.get(col, col), lo, hi, c if maximize else -c, col_int[col])
    col_idx = {col: j for j, col in enumerate(col_order)}
    per_row: dict[str, dict[int, float]] = {r: {} for r in row_order}
    for col in col_order:
        for rname, v in entries[col]:
            per_row[rname][col_idx[col]] = v
    for r in row_order:
        coeffs = dict(sorted(per_row[r].items()))
        p.add_row(names.get(r, r), coeffs, row_sense[r], rhs.get(r, 0.0))
    return p


def _objsense(tok: str, ln: int) -> bool:
    if tok in ("MAX", "MAXIMIZE"):
        return True
    if tok in ("MIN", "MINIMIZE"):
        return False
    raise MpsError(f"bad objective sense {tok!r}", ln)
