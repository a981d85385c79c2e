# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner-product kernel for the constant-Q transform.

Computes exactly the same per-bin, per-frame sums as the numpy backend in
palmsonic.cqt; the two are cross-checked in the test suite and timed against
each other in benchmarks/bench_cqt.py.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()


def direct_cqt(
    double[::1] x_padded,
    double[::1] kernel_real,
    double[::1] kernel_imag,
    long[::1] offsets,
    long[::1] taps,
    long[::1] starts,
    long hop_len,
    double[:, :, ::1] out_ri,
):
    """Fill out_ri[k, i] with sum_m x[starts[k] + i*hop + m] * kernel_k[m].

    out_ri is a (n_bins, n_frames, 2) float view of the complex output, last
    axis holding (real, imag). kernel_real/imag hold all per-bin kernels back
    to back; offsets[k] is the first tap of bin k and taps[k] its length.
    x_padded must be long enough that every indexed sample exists (the caller
    pads by the widest half window on both sides).
    """
    cdef Py_ssize_t n_bins = out_ri.shape[0]
    cdef Py_ssize_t n_frames = out_ri.shape[1]
    cdef Py_ssize_t k, i, m
    cdef long base, off, width
    cdef double acc_r, acc_i, sample

    with nogil:
        for k in range(n_bins):
            off = offsets[k]
            width = taps[k]
            for i in range(n_frames):
                base = starts[k] + i * hop_len
                acc_r = 0.0
                acc_i = 0.0
                for m in range(width):
                    sample = x_padded[base + m]
                    acc_r += sample * kernel_real[off + m]
                    acc_i += sample * kernel_imag[off + m]
                out_ri[k, i, 0] = acc_r
                out_ri[k, i, 1] = acc_i
