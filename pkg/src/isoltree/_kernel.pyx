# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled search kernel. Semantics mirror ``_kernel_py`` exactly."""

from libc.stdlib cimport malloc, free

BACKEND = "compiled"

ctypedef unsigned long long u64
ctypedef long long i64


cdef inline int popcount(u64 x) nogil:
    cdef int c = 0
    while x:
        x &= x - 1
        c += 1
    return c


cdef struct SearchCtx:
    i64 *hosts
    u64 *masks
    int *order        # all positions, most-used-first
    int *cand         # filtered repeated-leaf candidates, same order
    int n
    int n_cand
    int d, q, r, s, s_r
    int *chosen
    unsigned char *in_chosen
    int n_chosen
    u64 out_common
    int out_unique
    u64 out_umask


cdef void _sort_order(SearchCtx *c) nogil:
    # insertion sort on (free hosts, free port count, index); n is small
    cdef int i, j, k
    cdef i64 h
    cdef int p
    for i in range(c.n):
        c.order[i] = i
    for i in range(1, c.n):
        k = c.order[i]
        h = c.hosts[k]
        p = popcount(c.masks[k])
        j = i - 1
        while j >= 0 and (
            c.hosts[c.order[j]] > h
            or (c.hosts[c.order[j]] == h and popcount(c.masks[c.order[j]]) > p)
            or (c.hosts[c.order[j]] == h and popcount(c.masks[c.order[j]]) == p
                and c.order[j] > k)
        ):
            c.order[j + 1] = c.order[j]
            j -= 1
        c.order[j + 1] = k


cdef bint _unique_scan(SearchCtx *c, u64 common) nogil:
    cdef int at, u
    cdef u64 um
    for at in range(c.n):
        u = c.order[at]
        if c.in_chosen[u] or c.hosts[u] < c.r:
            continue
        um = c.masks[u] & common
        if popcount(um) >= c.s_r:
            c.out_unique = u
            c.out_umask = um
            return True
    return False


cdef bint _dfs(SearchCtx *c, int pos, u64 common) nogil:
    cdef int at, i
    cdef u64 nc
    if c.n_chosen == c.q:
        if c.r == 0:
            c.out_common = common
            c.out_unique = -1
            c.out_umask = 0
            return True
        if _unique_scan(c, common):
            c.out_common = common
            return True
        return False
    for at in range(pos, c.n_cand):
        if c.n_cand - at < c.q - c.n_chosen:
            break
        i = c.cand[at]
        nc = common & c.masks[i]
        if popcount(nc) < c.s:
            continue
        c.chosen[c.n_chosen] = i
        c.in_chosen[i] = 1
        c.n_chosen += 1
        if _dfs(c, at + 1, nc):
            return True
        c.n_chosen -= 1
        c.in_chosen[i] = 0
    return False


cdef bint _run(SearchCtx *c) nogil:
    cdef int at, i
    _sort_order(c)
    c.n_cand = 0
    for at in range(c.n):
        i = c.order[at]
        if c.hosts[i] >= c.d and popcount(c.masks[i]) >= c.s:
            c.cand[c.n_cand] = i
            c.n_cand += 1
    if c.n_cand < c.q:
        return False
    c.n_chosen = 0
    return _dfs(c, 0, <u64>0xFFFFFFFFFFFFFFFF)


cdef class _Scratch:
    """Working buffers sized for one search range."""
    cdef SearchCtx ctx
    cdef int cap

    def __cinit__(self, int cap):
        self.cap = cap
        self.ctx.hosts = <i64 *>malloc(cap * sizeof(i64))
        self.ctx.masks = <u64 *>malloc(cap * sizeof(u64))
        self.ctx.order = <int *>malloc(cap * sizeof(int))
        self.ctx.cand = <int *>malloc(cap * sizeof(int))
        self.ctx.chosen = <int *>malloc(cap * sizeof(int))
        self.ctx.in_chosen = <unsigned char *>malloc(cap)
        if (self.ctx.hosts == NULL or self.ctx.masks == NULL or self.ctx.order == NULL
                or self.ctx.cand == NULL or self.ctx.chosen == NULL
                or self.ctx.in_chosen == NULL):
            raise MemoryError()

    def __dealloc__(self):
        free(self.ctx.hosts)
        free(self.ctx.masks)
        free(self.ctx.order)
        free(self.ctx.cand)
        free(self.ctx.chosen)
        free(self.ctx.in_chosen)


cdef _load(_Scratch sc, hosts, masks, int lo, int n):
    cdef int i
    for i in range(n):
        sc.ctx.hosts[i] = hosts[lo + i]
        sc.ctx.masks[i] = masks[lo + i]
        sc.ctx.in_chosen[i] = 0
    sc.ctx.n = n


cdef _result(_Scratch sc):
    chosen = [sc.ctx.chosen[i] for i in range(sc.ctx.n_chosen)]
    umask = sc.ctx.out_umask if sc.ctx.out_unique >= 0 else 0
    return chosen, int(sc.ctx.out_common), sc.ctx.out_unique, int(umask)


def pick_leaf(free_hosts, int need):
    cdef int best = -1
    cdef i64 best_free = -1
    cdef int i
    cdef i64 f
    for i in range(len(free_hosts)):
        f = free_hosts[i]
        if f >= need and (best < 0 or f < best_free):
            best = i
            best_free = f
    return best


def find_plan(free_hosts, masks, int d, int q, int r, int s, int s_r):
    cdef int n = len(free_hosts)
    if q < 1 or n == 0:
        return None
    sc = _Scratch(n)
    _load(sc, free_hosts, masks, 0, n)
    sc.ctx.d = d
    sc.ctx.q = q
    sc.ctx.r = r
    sc.ctx.s = s
    sc.ctx.s_r = s_r
    if not _run(&sc.ctx):
        return None
    return _result(sc)


def search_level2(free_hosts, masks, free_per_subtree, int n, int m1, int m2,
                  int m3, int w2, int ceil_o):
    cdef int d, q, r, s, s_r, k, ki, phase, d_max
    sub_order = sorted(range(m3), key=lambda kk: (free_per_subtree[kk], kk))
    sc = _Scratch(m2)
    d_max = min(n, m1)
    for phase in range(2):
        for d in range(d_max, 0, -1):
            if phase == 0 and d % ceil_o != 0:
                continue
            if phase == 1 and d % ceil_o == 0:
                continue
            q = n // d
            r = n - q * d
            if q + (1 if r else 0) > m2:
                continue
            s = (d + ceil_o - 1) // ceil_o
            s_r = (r + ceil_o - 1) // ceil_o
            if s > w2:
                continue
            for ki in range(m3):
                k = sub_order[ki]
                _load(sc, free_hosts, masks, k * m2, m2)
                sc.ctx.d = d
                sc.ctx.q = q
                sc.ctx.r = r
                sc.ctx.s = s
                sc.ctx.s_r = s_r
                if _run(&sc.ctx):
                    return d, q, r, s, s_r, k, _result(sc)
    return None


def search_level3(whole_free, rep_masks, int units, int m2, int m3, int w3,
                  int ceil_o):
    cdef int d, q, r, s, s_r, phase, d_max
    sc = _Scratch(m3)
    d_max = min(units, m2)
    for phase in range(2):
        for d in range(d_max, 0, -1):
            if phase == 0 and d % ceil_o != 0:
                continue
            if phase == 1 and d % ceil_o == 0:
                continue
            q = units // d
            r = units - q * d
            if q + (1 if r else 0) > m3:
                continue
            s = (d + ceil_o - 1) // ceil_o
            s_r = (r + ceil_o - 1) // ceil_o
            if s > w3:
                continue
            _load(sc, whole_free, rep_masks, 0, m3)
            sc.ctx.d = d
            sc.ctx.q = q
            sc.ctx.r = r
            sc.ctx.s = s
            sc.ctx.s_r = s_r
            if _run(&sc.ctx):
                return d, q, r, s, s_r, 0, _result(sc)
    return None
