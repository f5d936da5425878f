# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops. See ``_kernels_py.py`` for the reference semantics."""

from libc.math cimport log1p

import numpy as np


def metropolis_run(long long[::1] state, double[::1] unary, double[:, ::1] pair,
                   bint periodic, bint heavy, double[::1] sq,
                   long long[::1] sites, long long[::1] props, double[::1] logu,
                   long long thin, long long phase, long long[:, ::1] out):
    cdef Py_ssize_t d = state.shape[0]
    cdef Py_ssize_t T = sites.shape[0]
    cdef Py_ssize_t n_out = out.shape[0]
    cdef Py_ssize_t t, j, s
    cdef long long x, y, left, right
    cdef double delta, total = 0.0, new_total = 0.0
    cdef Py_ssize_t rec = 0
    cdef long long acc = 0
    if heavy:
        for j in range(d):
            total += sq[state[j]]
    for t in range(T):
        s = sites[t]
        x = state[s]
        y = props[t]
        if y >= x:
            y += 1
        if heavy:
            new_total = total - sq[x] + sq[y]
            delta = log1p(total) - log1p(new_total)
        else:
            delta = unary[y] - unary[x]
            if s > 0:
                left = state[s - 1]
                delta += pair[left, y] - pair[left, x]
            elif periodic:
                left = state[d - 1]
                delta += pair[left, y] - pair[left, x]
            if s < d - 1:
                right = state[s + 1]
                delta += pair[y, right] - pair[x, right]
            elif periodic:
                right = state[0]
                delta += pair[y, right] - pair[x, right]
        if logu[t] < delta:
            state[s] = y
            acc += 1
            if heavy:
                total = new_total
        if (phase + t + 1) % thin == 0 and rec < n_out:
            for j in range(d):
                out[rec, j] = state[j]
            rec += 1
    return rec, acc
