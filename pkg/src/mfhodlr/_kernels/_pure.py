"""Pure-numpy fallback implementations of the hot kernels.

Signatures and numerical behaviour match ``_core`` exactly; the compiled
module is just faster on the per-row / per-pivot loops.
"""

import heapq

import numpy as np

#: relative pivot magnitude below which a pivot counts as numerically zero
ZERO_PIVOT_RATIO = 1e-14

#: provable single-step growth bound of complete pivoting, plus rounding slack
PIVOT_GROWTH_BOUND = 2.0 * (1.0 + 1e-10)


class PivotMonotonicityError(RuntimeError):
    """Raised when a pivot grows beyond the complete-pivoting step bound.

    Complete pivoting guarantees ``|u_{k+1,k+1}| <= 2 |u_kk|``; exceeding that
    means the pivot search is broken, so the factorization refuses to go on.
    """


def full_pivot_lu(block, eps, max_rank):
    """Partial factorization of a dense block with full (complete) pivoting.

    Elimination stops before pivot ``r`` as soon as ``|u_{r+1,r+1}/u_11| <
    eps``, when ``max_rank`` pivots have been taken, or when the next pivot is
    numerically zero relative to the first.

    Returns
    -------
    lu : ndarray, shape of ``block``
        In-place factors: strictly-lower multipliers in the first ``rank``
        columns, U rows on and above the diagonal.
    row_perm, col_perm : int arrays
        Original row/column index of each pivoted position.
    rank : int
    next_ratio : float
        ``|u_{rank+1,rank+1}/u_11|`` at the stopping point (0.0 when the block
        was exhausted).
    """
    lu = np.array(block, dtype=np.float64, copy=True)
    m, n = lu.shape
    row_perm = np.arange(m, dtype=np.int64)
    col_perm = np.arange(n, dtype=np.int64)
    kmax = min(m, n, int(max_rank))
    u11 = 0.0
    prev = 0.0
    rank = 0
    next_ratio = 0.0
    for k in range(min(m, n)):
        sub = np.abs(lu[k:, k:])
        flat = int(np.argmax(sub))
        di, dj = divmod(flat, n - k)
        piv = sub[di, dj]
        if k == 0:
            u11 = piv
            if u11 == 0.0:
                return lu, row_perm, col_perm, 0, 0.0
        else:
            if piv > prev * PIVOT_GROWTH_BOUND:
                raise PivotMonotonicityError(
                    f"pivot {k} magnitude {piv:.3e} exceeds twice the previous {prev:.3e}"
                )
            next_ratio = piv / u11
            if next_ratio < eps or piv <= ZERO_PIVOT_RATIO * u11:
                rank = k
                return lu, row_perm, col_perm, rank, next_ratio
        if k == kmax:
            rank = kmax
            next_ratio = piv / u11
            return lu, row_perm, col_perm, rank, next_ratio
        i, j = k + di, k + dj
        if i != k:
            lu[[k, i], :] = lu[[i, k], :]
            row_perm[[k, i]] = row_perm[[i, k]]
        if j != k:
            lu[:, [k, j]] = lu[:, [j, k]]
            col_perm[[k, j]] = col_perm[[j, k]]
        prev = abs(lu[k, k])
        if k + 1 < m:
            lu[k + 1 :, k] /= lu[k, k]
            if k + 1 < n:
                lu[k + 1 :, k + 1 :] -= np.outer(lu[k + 1 :, k], lu[k, k + 1 :])
        rank = k + 1
    return lu, row_perm, col_perm, rank, 0.0


def ilut_factor(n, indptr, indices, data, cap, drop_tol):
    """Dual-threshold incomplete LU of a CSR matrix.

    Per row, entries below ``drop_tol`` times the 2-norm of the original row
    are dropped and at most ``cap`` off-diagonal entries of largest magnitude
    are kept in each of the L and U parts. The diagonal is always kept.

    Returns CSR triples ``(L_indptr, L_indices, L_data)`` for the strictly
    lower factor (unit diagonal implied) and ``(U_indptr, U_indices, U_data)``
    for the upper factor including the diagonal.
    """
    u_rows_idx = []
    u_rows_val = []
    u_diag = np.zeros(n)
    l_rows_idx = []
    l_rows_val = []
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        cols = indices[lo:hi]
        vals = data[lo:hi]
        delta = drop_tol * float(np.sqrt(np.dot(vals, vals)))
        w = dict(zip(cols.tolist(), vals.tolist()))
        heap = [c for c in w if c < i]
        heapq.heapify(heap)
        lpart = {}
        while heap:
            k = heapq.heappop(heap)
            if k in lpart or k not in w:
                continue
            wk = w.pop(k) / u_diag[k]
            if abs(wk) < delta:
                continue
            lpart[k] = wk
            for j, uv in zip(u_rows_idx[k], u_rows_val[k]):
                if j == k:
                    continue
                if j in w:
                    w[j] -= wk * uv
                else:
                    w[j] = -wk * uv
                    if j < i:
                        heapq.heappush(heap, j)

        if len(lpart) > cap:
            # ties broken toward the smaller column index
            kept = sorted(lpart, key=lambda c: (-abs(lpart[c]), c))[:cap]
            lpart = {c: lpart[c] for c in kept}
        lidx = np.array(sorted(lpart), dtype=np.int64)
        l_rows_idx.append(lidx)
        l_rows_val.append(np.array([lpart[c] for c in lidx], dtype=np.float64))

        diag = w.pop(i, 0.0)
        upart = {j: v for j, v in w.items() if j > i and abs(v) >= delta}
        if len(upart) > cap:
            kept = sorted(upart, key=lambda c: (-abs(upart[c]), c))[:cap]
            upart = {c: upart[c] for c in kept}
        if diag == 0.0:
            raise ValueError(f"ILUT zero pivot in row {i}")
        u_diag[i] = diag
        uidx = np.array([i] + sorted(upart), dtype=np.int64)
        uval = np.array([diag] + [upart[c] for c in sorted(upart)], dtype=np.float64)
        u_rows_idx.append(uidx)
        u_rows_val.append(uval)

    def pack(rows_idx, rows_val):
        ptr = np.zeros(n + 1, dtype=np.int64)
        ptr[1:] = np.cumsum([len(r) for r in rows_idx])
        if ptr[-1]:
            idx = np.concatenate(rows_idx)
            val = np.concatenate(rows_val)
        else:
            idx = np.zeros(0, dtype=np.int64)
            val = np.zeros(0, dtype=np.float64)
        return ptr, idx, val

    lp, li, lv = pack(l_rows_idx, l_rows_val)
    up, ui, uv = pack(u_rows_idx, u_rows_val)
    return lp, li, lv, up, ui, uv


def solve_lower_unit_csr(indptr, indices, data, b):
    """Forward substitution with a strictly-lower CSR factor, unit diagonal."""
    x = np.array(b, dtype=np.float64, copy=True)
    n = len(indptr) - 1
    for i in range(n):
        lo, hi = indptr[i], indptr[i + 1]
        if hi > lo:
            x[i] -= np.dot(data[lo:hi], x[indices[lo:hi]])
    return x


def solve_upper_csr(indptr, indices, data, b):
    """Backward substitution with an upper CSR factor, diagonal stored first."""
    x = np.array(b, dtype=np.float64, copy=True)
    n = len(indptr) - 1
    for i in range(n - 1, -1, -1):
        lo, hi = indptr[i], indptr[i + 1]
        if hi > lo + 1:
            x[i] -= np.dot(data[lo + 1 : hi], x[indices[lo + 1 : hi]])
        x[i] /= data[lo]
    return x
