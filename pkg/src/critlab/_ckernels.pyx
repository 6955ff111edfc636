# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled statevector kernels.

All routines operate on a circuit lowered to "stages" (see ``critlab.qsim``):
a stage is a 2x2 matrix acting on one bit of the basis index (kind 0 general,
kind 2 real, kind 3 of the form [[c, -is], [-is, c]]) or a diagonal phase
vector (kind 1).  Signatures mirror ``critlab._pykernels`` exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.string cimport memcpy

cnp.import_array()

ctypedef double complex cplx



cdef inline unsigned long long _parity(unsigned long long x) noexcept nogil:
    x ^= x >> 32
    x ^= x >> 16
    x ^= x >> 8
    x ^= x >> 4
    x ^= x >> 2
    x ^= x >> 1
    return x & 1


cdef inline void _apply_mat(cplx* v, Py_ssize_t dim, Py_ssize_t m,
                            cplx a00, cplx a01, cplx a10, cplx a11) noexcept nogil:
    cdef Py_ssize_t base = 0, lo, i, j
    cdef cplx x, y
    while base < dim:
        for lo in range(m):
            i = base + lo
            j = i + m
            x = v[i]
            y = v[j]
            v[i] = a00 * x + a01 * y
            v[j] = a10 * x + a11 * y
        base += 2 * m


cdef inline void _apply_diag(cplx* v, const cplx* d, Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(dim):
        v[i] = v[i] * d[i]


cdef inline void _apply_diag_conj(cplx* v, const cplx* d, Py_ssize_t dim) noexcept nogil:
    cdef Py_ssize_t i
    for i in range(dim):
        v[i] = v[i] * d[i].conjugate()


cdef inline void _apply_real(double* v, Py_ssize_t dim, Py_ssize_t m,
                             double a00, double a01, double a10, double a11) noexcept nogil:
    # real 2x2 matrix acting on interleaved (re, im) doubles
    cdef Py_ssize_t base = 0, t, w = 2 * m, n2 = 2 * dim
    cdef double x, y
    cdef double* p
    cdef double* q
    while base < n2:
        p = v + base
        q = p + w
        for t in range(w):
            x = p[t]
            y = q[t]
            p[t] = a00 * x + a01 * y
            q[t] = a10 * x + a11 * y
        base += 2 * w


cdef inline void _apply_rx(double* v, Py_ssize_t dim, Py_ssize_t m,
                           double c, double s) noexcept nogil:
    # [[c, -i s], [-i s, c]] on interleaved doubles
    cdef Py_ssize_t base = 0, t, w = 2 * m, n2 = 2 * dim
    cdef double xr, xi, yr, yi
    cdef double* p
    cdef double* q
    while base < n2:
        p = v + base
        q = p + w
        for t in range(0, w, 2):
            xr = p[t]
            xi = p[t + 1]
            yr = q[t]
            yi = q[t + 1]
            p[t] = c * xr + s * yi
            p[t + 1] = c * xi - s * yr
            q[t] = c * yr + s * xi
            q[t + 1] = c * yi - s * xr
        base += 2 * w


cdef inline void _apply_stage(cplx* v, Py_ssize_t dim, Py_ssize_t s,
                              const signed char[::1] kind, const long long[::1] bit,
                              const cplx[:, ::1] mats, const long long[::1] didx,
                              const cplx[:, ::1] diags) noexcept nogil:
    cdef Py_ssize_t m = (<Py_ssize_t>1) << bit[s]
    cdef signed char k = kind[s]
    if k == 1:
        _apply_diag(v, &diags[didx[s], 0], dim)
    elif k == 2:
        _apply_real(<double*>v, dim, m, mats[s, 0].real, mats[s, 1].real,
                    mats[s, 2].real, mats[s, 3].real)
    elif k == 3:
        _apply_rx(<double*>v, dim, m, mats[s, 0].real, -mats[s, 1].imag)
    else:
        _apply_mat(v, dim, m, mats[s, 0], mats[s, 1], mats[s, 2], mats[s, 3])


cdef inline void _unapply_stage(cplx* v, Py_ssize_t dim, Py_ssize_t s,
                                const signed char[::1] kind, const long long[::1] bit,
                                const cplx[:, ::1] mats, const long long[::1] didx,
                                const cplx[:, ::1] diags) noexcept nogil:
    cdef Py_ssize_t m = (<Py_ssize_t>1) << bit[s]
    cdef signed char k = kind[s]
    if k == 1:
        _apply_diag_conj(v, &diags[didx[s], 0], dim)
    elif k == 2:
        _apply_real(<double*>v, dim, m, mats[s, 0].real, mats[s, 2].real,
                    mats[s, 1].real, mats[s, 3].real)
    elif k == 3:
        _apply_rx(<double*>v, dim, m, mats[s, 0].real, mats[s, 1].imag)
    else:
        _apply_mat(v, dim, m, mats[s, 0].conjugate(), mats[s, 2].conjugate(),
                   mats[s, 1].conjugate(), mats[s, 3].conjugate())


cdef inline void _apply_pauli(const cplx* src, cplx* dst, Py_ssize_t dim,
                              unsigned long long xm, unsigned long long zm,
                              cplx coef) noexcept nogil:
    cdef Py_ssize_t b
    cdef unsigned long long ub
    for b in range(dim):
        ub = <unsigned long long>b
        if _parity(ub & zm):
            dst[ub ^ xm] = -coef * src[b]
        else:
            dst[ub ^ xm] = coef * src[b]


cdef inline cplx _pauli_overlap(const cplx* bra, const cplx* ket, Py_ssize_t dim,
                                unsigned long long xm, unsigned long long zm) noexcept nogil:
    # <bra| P |ket> without the i^nY factor
    cdef const double* br = <const double*>bra
    cdef const double* kt = <const double*>ket
    cdef Py_ssize_t b
    cdef unsigned long long j
    cdef double re = 0.0, im = 0.0, sg
    for b in range(dim):
        j = (<unsigned long long>b) ^ xm
        sg = 1.0 - 2.0 * <double>_parity((<unsigned long long>b) & zm)
        re += sg * (br[2 * j] * kt[2 * b] + br[2 * j + 1] * kt[2 * b + 1])
        im += sg * (br[2 * j] * kt[2 * b + 1] - br[2 * j + 1] * kt[2 * b])
    return re + 1j * im


def forward(const cplx[::1] psi0, const signed char[::1] kind, const long long[::1] bit,
            const cplx[:, ::1] mats, const long long[::1] didx, const cplx[:, ::1] diags):
    """Return every intermediate state: row ``s`` is the input to stage ``s``."""
    cdef Py_ssize_t n_st = kind.shape[0]
    cdef Py_ssize_t dim = psi0.shape[0]
    out_arr = np.empty((n_st + 1, dim), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    cdef Py_ssize_t s
    with nogil:
        memcpy(&out[0, 0], &psi0[0], dim * sizeof(cplx))
        for s in range(n_st):
            memcpy(&out[s + 1, 0], &out[s, 0], dim * sizeof(cplx))
            _apply_stage(&out[s + 1, 0], dim, s, kind, bit, mats, didx, diags)
    return out_arr


def run(const cplx[::1] psi0, const signed char[::1] kind, const long long[::1] bit,
        const cplx[:, ::1] mats, const long long[::1] didx, const cplx[:, ::1] diags):
    cdef Py_ssize_t n_st = kind.shape[0]
    cdef Py_ssize_t dim = psi0.shape[0]
    out_arr = np.array(psi0, dtype=np.complex128, copy=True)
    cdef cplx[::1] out = out_arr
    cdef Py_ssize_t s
    with nogil:
        for s in range(n_st):
            _apply_stage(&out[0], dim, s, kind, bit, mats, didx, diags)
    return out_arr


def jacobian_rows(const cplx[:, ::1] states, const long long[::1] start,
                  const long long[::1] xm, const long long[::1] zm, const cplx[::1] coef,
                  const signed char[::1] kind, const long long[::1] bit,
                  const cplx[:, ::1] mats, const long long[::1] didx, const cplx[:, ::1] diags):
    """Row ``c`` = stages[start[c]:] applied to ``coef[c] * P_c states[start[c]]``."""
    cdef Py_ssize_t n_col = start.shape[0]
    cdef Py_ssize_t n_st = kind.shape[0]
    cdef Py_ssize_t dim = states.shape[1]
    out_arr = np.empty((n_col, dim), dtype=np.complex128)
    cdef cplx[:, ::1] out = out_arr
    cdef Py_ssize_t c, s
    with nogil:
        for c in range(n_col):
            _apply_pauli(&states[start[c], 0], &out[c, 0], dim,
                         <unsigned long long>xm[c], <unsigned long long>zm[c], coef[c])
            for s in range(start[c], n_st):
                _apply_stage(&out[c, 0], dim, s, kind, bit, mats, didx, diags)
    return out_arr


def apply_paulis(const cplx[::1] v, const long long[::1] xm, const long long[::1] zm,
                 const cplx[::1] coef):
    """Return sum_t coef[t] * P_t v for Pauli strings given by bit masks."""
    cdef Py_ssize_t n_t = xm.shape[0]
    cdef Py_ssize_t dim = v.shape[0]
    out_arr = np.zeros(dim, dtype=np.complex128)
    tmp_arr = np.empty(dim, dtype=np.complex128)
    cdef cplx[::1] out = out_arr
    cdef cplx[::1] tmp = tmp_arr
    cdef Py_ssize_t t, i
    with nogil:
        for t in range(n_t):
            _apply_pauli(&v[0], &tmp[0], dim, <unsigned long long>xm[t],
                         <unsigned long long>zm[t], coef[t])
            for i in range(dim):
                out[i] = out[i] + tmp[i]
    return out_arr


def adjoint_gradient(const cplx[::1] final, const cplx[::1] hpsi,
                     const long long[::1] par_stage, const long long[::1] xm,
                     const long long[::1] zm, const cplx[::1] coef,
                     const long long[::1] slot, Py_ssize_t n_slots,
                     const signed char[::1] kind, const long long[::1] bit,
                     const cplx[:, ::1] mats, const long long[::1] didx,
                     const cplx[:, ::1] diags):
    """Gradient of <psi|H|psi> by reverse sweep; ``par_stage`` must be non-decreasing."""
    cdef Py_ssize_t n_st = kind.shape[0]
    cdef Py_ssize_t dim = final.shape[0]
    cdef Py_ssize_t n_par = par_stage.shape[0]
    psi_arr = np.array(final, dtype=np.complex128, copy=True)
    lam_arr = np.array(hpsi, dtype=np.complex128, copy=True)
    grad_arr = np.zeros(n_slots, dtype=np.float64)
    cdef cplx[::1] psi = psi_arr
    cdef cplx[::1] lam = lam_arr
    cdef double[::1] grad = grad_arr
    cdef Py_ssize_t s, k = n_par - 1
    cdef cplx ov
    with nogil:
        for s in range(n_st - 1, -1, -1):
            while k >= 0 and par_stage[k] == s:
                ov = _pauli_overlap(&lam[0], &psi[0], dim,
                                    <unsigned long long>xm[k], <unsigned long long>zm[k])
                grad[slot[k]] += 2.0 * (coef[k] * ov).real
                k -= 1
            _unapply_stage(&psi[0], dim, s, kind, bit, mats, didx, diags)
            _unapply_stage(&lam[0], dim, s, kind, bit, mats, didx, diags)
    return grad_arr


def diag_phase(const double[::1] theta, const double[:, ::1] signs):
    """``exp(-i * theta @ signs)`` for +-1 sign rows, as a product of unit phases."""
    cdef Py_ssize_t k = signs.shape[0], dim = signs.shape[1]
    out_arr = np.ones(dim, dtype=np.complex128)
    cdef double[::1] out = out_arr.view(np.float64)
    cdef double[::1] c = np.cos(theta)
    cdef double[::1] s = np.sin(theta)
    cdef Py_ssize_t b, r
    cdef double re, im, t, si
    with nogil:
        for r in range(k):
            for b in range(dim):
                si = -s[r] * signs[r, b]
                re = out[2 * b]
                im = out[2 * b + 1]
                out[2 * b] = re * c[r] - im * si
                out[2 * b + 1] = re * si + im * c[r]
    return out_arr
