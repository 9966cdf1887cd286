# Compiled kernels: full-pivot LU, ILUT row elimination, CSR triangular
# solves. Semantics mirror _pure.py exactly; only the loop machinery differs.

import numpy as np

cimport cython
cimport numpy as cnp
from libc.math cimport fabs, sqrt

cnp.import_array()

DEF ZERO_PIVOT_RATIO = 1e-14
# provable single-step growth bound of complete pivoting, plus rounding slack
DEF PIVOT_GROWTH_BOUND = 2.0 * (1.0 + 1e-10)


class PivotMonotonicityError(RuntimeError):
    pass


@cython.boundscheck(False)
@cython.wraparound(False)
def full_pivot_lu(block, double eps, max_rank):
    cdef cnp.ndarray[cnp.float64_t, ndim=2] lu = np.array(
        block, dtype=np.float64, copy=True, order="C"
    )
    cdef Py_ssize_t m = lu.shape[0]
    cdef Py_ssize_t n = lu.shape[1]
    cdef cnp.ndarray[cnp.int64_t, ndim=1] row_perm = np.arange(m, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] col_perm = np.arange(n, dtype=np.int64)
    cdef Py_ssize_t kmax = min(m, n, <Py_ssize_t> int(max_rank))
    cdef Py_ssize_t k, i, j, bi, bj, t
    cdef double piv, u11 = 0.0, prev = 0.0, v, tmp, next_ratio = 0.0
    cdef Py_ssize_t rank = 0
    cdef double[:, ::1] a = lu
    cdef cnp.int64_t itmp

    for k in range(min(m, n)):
        piv = -1.0
        bi = k
        bj = k
        for i in range(k, m):
            for j in range(k, n):
                v = fabs(a[i, j])
                if v > piv:
                    piv = v
                    bi = i
                    bj = j
        if k == 0:
            u11 = piv
            if u11 == 0.0:
                return lu, row_perm, col_perm, 0, 0.0
        else:
            if piv > prev * PIVOT_GROWTH_BOUND:
                raise PivotMonotonicityError(
                    "pivot %d magnitude %.3e exceeds twice the previous %.3e" % (k, piv, prev)
                )
            next_ratio = piv / u11
            if next_ratio < eps or piv <= ZERO_PIVOT_RATIO * u11:
                return lu, row_perm, col_perm, k, next_ratio
        if k == kmax:
            return lu, row_perm, col_perm, kmax, piv / u11
        if bi != k:
            for t in range(n):
                tmp = a[k, t]
                a[k, t] = a[bi, t]
                a[bi, t] = tmp
            itmp = row_perm[k]
            row_perm[k] = row_perm[bi]
            row_perm[bi] = itmp
        if bj != k:
            for t in range(m):
                tmp = a[t, k]
                a[t, k] = a[t, bj]
                a[t, bj] = tmp
            itmp = col_perm[k]
            col_perm[k] = col_perm[bj]
            col_perm[bj] = itmp
        prev = fabs(a[k, k])
        for i in range(k + 1, m):
            a[i, k] /= a[k, k]
            v = a[i, k]
            for j in range(k + 1, n):
                a[i, j] -= v * a[k, j]
        rank = k + 1
    return lu, row_perm, col_perm, rank, 0.0


cdef inline void _heap_push(cnp.int64_t* heap, Py_ssize_t* size, cnp.int64_t val):
    cdef Py_ssize_t i = size[0]
    cdef Py_ssize_t parent
    heap[i] = val
    size[0] += 1
    while i > 0:
        parent = (i - 1) >> 1
        if heap[parent] <= heap[i]:
            break
        heap[i] = heap[parent]
        heap[parent] = val
        i = parent


cdef inline cnp.int64_t _heap_pop(cnp.int64_t* heap, Py_ssize_t* size):
    cdef cnp.int64_t top = heap[0]
    cdef Py_ssize_t n = size[0] - 1
    cdef cnp.int64_t last = heap[n]
    cdef Py_ssize_t i = 0, child
    size[0] = n
    while True:
        child = 2 * i + 1
        if child >= n:
            break
        if child + 1 < n and heap[child + 1] < heap[child]:
            child += 1
        if heap[child] >= last:
            break
        heap[i] = heap[child]
        i = child
    heap[i] = last
    return top


@cython.boundscheck(False)
@cython.wraparound(False)
cdef Py_ssize_t _keep_largest(double* w, cnp.int64_t* cand, Py_ssize_t ncand,
                              Py_ssize_t cap):
    # drop smallest-magnitude candidates (zeroing them in w) until cap
    # remain; magnitude ties are dropped from the larger column index
    cdef Py_ssize_t worst, t
    cdef double wmin, v
    while ncand > cap:
        worst = 0
        wmin = fabs(w[cand[0]])
        for t in range(1, ncand):
            v = fabs(w[cand[t]])
            if v < wmin or (v == wmin and cand[t] > cand[worst]):
                wmin = v
                worst = t
        w[cand[worst]] = 0.0
        cand[worst] = cand[ncand - 1]
        ncand -= 1
    return ncand


@cython.boundscheck(False)
@cython.wraparound(False)
def ilut_factor(Py_ssize_t n, indptr, indices, data, Py_ssize_t cap, double drop_tol):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ap = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] aj = np.ascontiguousarray(indices, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] ax = np.ascontiguousarray(data, dtype=np.float64)

    cdef cnp.ndarray[cnp.int64_t, ndim=1] l_ptr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] l_idx = np.zeros(max(n * cap, 1), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] l_val = np.zeros(max(n * cap, 1), dtype=np.float64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] u_ptr = np.zeros(n + 1, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] u_idx = np.zeros(max(n * (cap + 1), 1), dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] u_val = np.zeros(max(n * (cap + 1), 1), dtype=np.float64)

    cdef cnp.ndarray[cnp.float64_t, ndim=1] w_arr = np.zeros(max(n, 1), dtype=np.float64)
    cdef cnp.ndarray[cnp.uint8_t, ndim=1] occ = np.zeros(max(n, 1), dtype=np.uint8)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] heap_arr = np.zeros(max(n, 1), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] lcand_arr = np.zeros(max(n, 1), dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ucand_arr = np.zeros(max(n, 1), dtype=np.int64)

    cdef double* w = &w_arr[0]
    cdef cnp.int64_t* heap = &heap_arr[0]
    cdef cnp.int64_t* lcand = &lcand_arr[0]
    cdef cnp.int64_t* ucand = &ucand_arr[0]

    cdef Py_ssize_t heap_size, nl, nu
    cdef Py_ssize_t i, p, k, j, t, pos
    cdef double tnorm, delta, wk, v, diag
    cdef Py_ssize_t lnz = 0, unz = 0

    for i in range(n):
        heap_size = 0
        nl = 0
        nu = 0
        tnorm = 0.0
        for p in range(ap[i], ap[i + 1]):
            j = aj[p]
            v = ax[p]
            tnorm += v * v
            w[j] = v
            occ[j] = 1
            if j < i:
                _heap_push(heap, &heap_size, j)
            elif j > i:
                ucand[nu] = j
                nu += 1
        delta = drop_tol * sqrt(tnorm) if tnorm > 0.0 else 0.0

        # eliminate below-diagonal entries in ascending column order
        while heap_size > 0:
            k = <Py_ssize_t> _heap_pop(heap, &heap_size)
            if not occ[k]:
                continue
            occ[k] = 0
            wk = w[k] / u_val[u_ptr[k]]
            w[k] = 0.0
            if fabs(wk) < delta:
                continue
            lcand[nl] = k
            w[k] = wk
            nl += 1
            for p in range(u_ptr[k] + 1, u_ptr[k + 1]):
                j = u_idx[p]
                if occ[j]:
                    w[j] -= wk * u_val[p]
                else:
                    w[j] = -wk * u_val[p]
                    occ[j] = 1
                    if j < i:
                        _heap_push(heap, &heap_size, j)
                    elif j > i:
                        ucand[nu] = j
                        nu += 1

        # L part: keep at most cap entries of largest magnitude
        nl = _keep_largest(w, lcand, nl, cap)
        lcand_arr[:nl].sort()
        pos = lnz
        for t in range(nl):
            l_idx[pos] = lcand[t]
            l_val[pos] = w[lcand[t]]
            w[lcand[t]] = 0.0
            pos += 1
        lnz = pos
        l_ptr[i + 1] = lnz

        # U part: diagonal always kept, then at most cap off-diagonal entries
        diag = 0.0
        if occ[i]:
            diag = w[i]
            w[i] = 0.0
            occ[i] = 0
        if diag == 0.0:
            raise ValueError("ILUT zero pivot in row %d" % i)
        pos = 0
        for t in range(nu):
            j = ucand[t]
            occ[j] = 0
            if fabs(w[j]) >= delta:
                ucand[pos] = j
                pos += 1
            else:
                w[j] = 0.0
        nu = _keep_largest(w, ucand, pos, cap)
        ucand_arr[:nu].sort()
        pos = unz
        u_idx[pos] = i
        u_val[pos] = diag
        pos += 1
        for t in range(nu):
            u_idx[pos] = ucand[t]
            u_val[pos] = w[ucand[t]]
            w[ucand[t]] = 0.0
            pos += 1
        unz = pos
        u_ptr[i + 1] = unz

    return (
        l_ptr,
        l_idx[:lnz].copy(),
        l_val[:lnz].copy(),
        u_ptr,
        u_idx[:unz].copy(),
        u_val[:unz].copy(),
    )


@cython.boundscheck(False)
@cython.wraparound(False)
def solve_lower_unit_csr(indptr, indices, data, b):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dv = np.ascontiguousarray(data, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.array(b, dtype=np.float64, copy=True)
    cdef Py_ssize_t n = ip.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double s
    for i in range(n):
        s = x[i]
        for p in range(ip[i], ip[i + 1]):
            s -= dv[p] * x[ix[p]]
        x[i] = s
    return x


@cython.boundscheck(False)
@cython.wraparound(False)
def solve_upper_csr(indptr, indices, data, b):
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ip = np.ascontiguousarray(indptr, dtype=np.int64)
    cdef cnp.ndarray[cnp.int64_t, ndim=1] ix = np.ascontiguousarray(indices, dtype=np.int64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] dv = np.ascontiguousarray(data, dtype=np.float64)
    cdef cnp.ndarray[cnp.float64_t, ndim=1] x = np.array(b, dtype=np.float64, copy=True)
    cdef Py_ssize_t n = ip.shape[0] - 1
    cdef Py_ssize_t i, p
    cdef double s
    for i in range(n - 1, -1, -1):
        s = x[i]
        for p in range(ip[i] + 1, ip[i + 1]):
            s -= dv[p] * x[ix[p]]
        x[i] = s / dv[ip[i]]
    return x
