# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the hot kernels (see _kernels_py for the contract)."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow as c_pow, fabs, isfinite, NAN
from libc.stdint cimport uint32_t, int64_t, uint8_t

cnp.import_array()

BACKEND = "cython"

cdef uint32_t CRC_TABLE[256]
cdef double REL_TOL = 1e-9


cdef void _init_table():
    cdef uint32_t c
    cdef int n, k
    for n in range(256):
        c = <uint32_t>n
        for k in range(8):
            if c & 1:
                c = 0xEDB88320 ^ (c >> 1)
            else:
                c = c >> 1
        CRC_TABLE[n] = c


_init_table()


cdef inline uint32_t _crc(const unsigned char[:] data):
    cdef uint32_t c = 0xFFFFFFFF
    cdef Py_ssize_t i
    for i in range(data.shape[0]):
        c = CRC_TABLE[(c ^ data[i]) & 0xFF] ^ (c >> 8)
    return c ^ 0xFFFFFFFF


def crc32(bytes data):
    if len(data) == 0:
        return 0
    return int(_crc(data))


def crc32_many(strings):
    cdef Py_ssize_t n = len(strings), i
    out = np.empty(n, dtype=np.int64)
    cdef int64_t[:] o = out
    cdef bytes b
    for i in range(n):
        b = (<str>strings[i]).encode("utf-8")
        o[i] = 0 if len(b) == 0 else <int64_t>_crc(b)
    return out


def cross_indices(sizes):
    cdef Py_ssize_t k = len(sizes), t, r
    if k == 0:
        return []
    cdef int64_t total = 1
    for t in range(k):
        total *= <int64_t>sizes[t]
    outs = [np.empty(total, dtype=np.int64) for _ in range(k)]
    if total == 0:
        return outs
    cdef int64_t stride, size, idx
    cdef int64_t[:] o
    stride = 1
    for t in range(k - 1, -1, -1):
        size = <int64_t>sizes[t]
        o = outs[t]
        for r in range(total):
            o[r] = (r // stride) % size
        stride *= size
    return outs


cdef inline bint _rows_equal(const int64_t[:, :] keys, Py_ssize_t a, Py_ssize_t b):
    cdef Py_ssize_t c
    for c in range(keys.shape[1]):
        if keys[a, c] != keys[b, c]:
            return False
    return True


def unique_first(bits, keys):
    bits_arr = np.ascontiguousarray(bits, dtype=np.bool_)
    cdef Py_ssize_t m = bits_arr.shape[0]
    out = np.zeros(m, dtype=np.bool_)
    idx = np.flatnonzero(bits_arr)
    if idx.shape[0] == 0:
        return out
    key_arr = np.ascontiguousarray(np.asarray(keys, dtype=np.int64).reshape(m, -1))
    cdef uint8_t[:] o = out.view(np.uint8)
    if key_arr.shape[1] == 0:
        o[idx[0]] = 1
        return out
    sub = np.ascontiguousarray(key_arr[idx])
    # lexsort is stable, so within a group rows stay in ascending index order
    order = np.lexsort(sub.T[::-1]).astype(np.int64)
    cdef const int64_t[:, :] kv = sub
    cdef const int64_t[:] ov = order
    cdef const int64_t[:] iv = idx.astype(np.int64)
    cdef Py_ssize_t j, n = ov.shape[0]
    o[iv[ov[0]]] = 1
    for j in range(1, n):
        if not _rows_equal(kv, ov[j], ov[j - 1]):
            o[iv[ov[j]]] = 1
    return out


cdef inline bint _feq(double a, double b):
    if a == b:
        return True
    if not (isfinite(a) and isfinite(b)):
        return False
    return fabs(a - b) <= REL_TOL * (fabs(a) if fabs(a) > fabs(b) else fabs(b))


def member(keys_i, keys_f, table_i, table_f, tolerant):
    cdef const int64_t[:, :] ki = np.ascontiguousarray(keys_i, dtype=np.int64)
    cdef const double[:, :] kf = np.ascontiguousarray(keys_f, dtype=np.float64)
    cdef const int64_t[:, :] ti = np.ascontiguousarray(table_i, dtype=np.int64)
    cdef const double[:, :] tf = np.ascontiguousarray(table_f, dtype=np.float64)
    cdef const uint8_t[:] tol = np.ascontiguousarray(tolerant, dtype=np.uint8)
    cdef Py_ssize_t m = ki.shape[0], k = ki.shape[1], n = ti.shape[0]
    cdef Py_ssize_t i, j, c
    cdef bint ok
    out = np.zeros(m, dtype=np.bool_)
    cdef uint8_t[:] o = out.view(np.uint8)
    for i in range(m):
        for j in range(n):
            ok = True
            for c in range(k):
                if tol[c]:
                    if not _feq(kf[i, c], tf[j, c]):
                        ok = False
                        break
                elif ki[i, c] != ti[j, c]:
                    ok = False
                    break
            if ok:
                o[i] = 1
                break
    return out


def pow_vec(a, b):
    a_arr, b_arr = np.broadcast_arrays(np.asarray(a, dtype=np.float64),
                                       np.asarray(b, dtype=np.float64))
    shape = a_arr.shape
    cdef const double[:] av = np.ascontiguousarray(a_arr).reshape(-1)
    cdef const double[:] bv = np.ascontiguousarray(b_arr).reshape(-1)
    out = np.empty(av.shape[0], dtype=np.float64)
    cdef double[:] o = out
    cdef Py_ssize_t i
    cdef double x, y
    for i in range(av.shape[0]):
        x = av[i]
        y = bv[i]
        if x == 0.0 and y < 0.0:
            o[i] = NAN
        else:
            o[i] = c_pow(x, y)
            if o[i] != o[i]:
                o[i] = NAN  # glibc returns -nan for a negative base; keep one NaN
    return out.reshape(shape)
