"""Sparse SDPA (.dat-s) export and import of compiled problems.

SDPA's primal reads  min c.x  s.t.  X = sum_i x_i F_i - F0 >= 0.  Our
canonical form  max b.y  s.t.  C + sum_i y_i A_i >= 0  maps onto it with
x = y, c = -b, F_i = A_i, F0 = -C; the SDPA optimum is the negative of
ours.  Diagonal blocks are encoded with negative block sizes, and only
upper-triangle entries are written.
"""

from __future__ import annotations

import numpy as np
from scipy import sparse

from .solver import _Block, _Compiled, compile_problem


def export_sdpa(problem_or_compiled, comment="generated by gmewit") -> str:
    comp = (
        problem_or_compiled
        if isinstance(problem_or_compiled, _Compiled)
        else compile_problem(problem_or_compiled, require_coverage=False)
    )
    lines = [f'"{comment}', f'"maximize b.y; SDPA minimizes c.x with c = -b']
    lines.append(f"{comp.m} = mDIM")
    lines.append(f"{len(comp.blocks)} = nBLOCK")
    sizes = [
        str(block.size if block.kind == "dense" else -block.size)
        for block in comp.blocks
    ]
    lines.append("{" + ", ".join(sizes) + "} = bLOCKsTRUCT")
    lines.append(" ".join(_fmt(-v) for v in comp.b))

    entries = []

    def emit(mat_no, blk_no, mat, kind):
        if kind == "dense":
            rows, cols = np.nonzero(np.triu(mat))
            for r, c in zip(rows, cols):
                entries.append((mat_no, blk_no, int(r) + 1, int(c) + 1, mat[r, c]))
        else:
            for i, v in enumerate(mat):
                if v != 0.0:
                    entries.append((mat_no, blk_no, i + 1, i + 1, v))

    for blk_no, block in enumerate(comp.blocks, start=1):
        if block.kind == "dense":
            emit(0, blk_no, -block.const, "dense")
        else:
            emit(0, blk_no, -block.const, "diag")
        for gi, mat in block.terms:
            _, off, n = comp.groups[gi]
            dense = mat.toarray() if sparse.issparse(mat) else np.asarray(mat)
            for i in range(n):
                row = dense[i]
                if block.kind == "dense":
                    emit(off + i + 1, blk_no, row.reshape(block.size, block.size), "dense")
                else:
                    emit(off + i + 1, blk_no, row, "diag")

    for mat_no, blk_no, r, c, v in entries:
        lines.append(f"{mat_no} {blk_no} {r} {c} {_fmt(v)}")
    return "\n".join(lines) + "\n"


def _fmt(v):
    return format(float(v), ".17g")


def import_sdpa(text: str) -> _Compiled:
    """Parse .dat-s text back into the canonical compiled form."""
    rows = []
    for raw in text.splitlines():
        line = raw.strip()
        if not line or line.startswith(('"', "*")):
            continue
        rows.append(line)
    m = int(rows[0].split()[0])
    nblock = int(rows[1].split()[0])
    struct_line = rows[2]
    for ch in "{}(),=":
        struct_line = struct_line.replace(ch, " ")
    sizes = [int(tok) for tok in struct_line.split() if _is_int(tok)][:nblock]
    cost_line = rows[3]
    for ch in "{}(),":
        cost_line = cost_line.replace(ch, " ")
    c = np.array([float(tok) for tok in cost_line.split()])
    if c.shape[0] != m:
        raise ValueError("objective vector length does not match mDIM")

    consts = []
    terms_data = []
    for size in sizes:
        if size > 0:
            consts.append(np.zeros((size, size)))
            terms_data.append([dict() for _ in range(m)])
        else:
            consts.append(np.zeros(-size))
            terms_data.append([dict() for _ in range(m)])

    for line in rows[4:]:
        toks = line.split()
        if len(toks) != 5:
            raise ValueError(f"bad entry line: {line!r}")
        mat_no, blk, i, j = (int(t) for t in toks[:4])
        val = float(toks[4])
        blk -= 1
        size = sizes[blk]
        if mat_no == 0:
            if size > 0:
                consts[blk][i - 1, j - 1] = -val
                consts[blk][j - 1, i - 1] = -val
            else:
                consts[blk][i - 1] = -val
        else:
            store = terms_data[blk][mat_no - 1]
            if size > 0:
                store[(i - 1, j - 1)] = val
                store[(j - 1, i - 1)] = val
            else:
                if i != j:
                    raise ValueError("off-diagonal entry in a diagonal block")
                store[i - 1] = val

    blocks = []
    for blk, size in enumerate(sizes):
        if size > 0:
            dim = size
            mats = np.zeros((m, dim * dim))
            for i, store in enumerate(terms_data[blk]):
                for (r, cc), v in store.items():
                    mats[i, r * dim + cc] = v
            blocks.append(_Block("dense", dim, consts[blk], [(0, mats)]))
        else:
            dim = -size
            mats = sparse.lil_matrix((m, dim))
            for i, store in enumerate(terms_data[blk]):
                for d, v in store.items():
                    mats[i, d] = v
            blocks.append(_Block("diag", dim, consts[blk], [(0, mats.tocsr())]))

    groups = [("y", 0, m)]
    return _Compiled(groups, m, -c, blocks, {"y": ("real", m)})


def _is_int(tok):
    try:
        int(tok)
        return True
    except ValueError:
        return False
