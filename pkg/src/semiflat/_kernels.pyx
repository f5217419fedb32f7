# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled RK4 frame transport; same contract as _kernels_py.rk4_transport."""

cdef extern from "complex.h":
    double complex conj(double complex z) nogil
    double creal(double complex z) nogil


cdef inline void _rhs(double complex* fp, double complex dp, double complex psi,
                      double complex a, double b, double complex* out, double* df) noexcept nogil:
    cdef int i
    for i in range(3):
        out[i] = dp * (psi * fp[i] + a * conj(fp[i]))
        df[i] = 2.0 * creal(dp * fp[i])
    out[2] = out[2] + conj(dp) * b


def rk4_transport(const double complex[:] dp, const double complex[:] psi_p,
                  const double complex[:] A, const double[:] B, double h,
                  const double[:] f0, const double complex[:] fp0,
                  double[:, :] f_out, double complex[:, :] fp_out):
    cdef Py_ssize_t n = f_out.shape[0] - 1
    cdef Py_ssize_t k, i0, i1, i2
    cdef int i
    cdef double complex fp[3]
    cdef double complex y[3]
    cdef double complex k1[3]
    cdef double complex k2[3]
    cdef double complex k3[3]
    cdef double complex k4[3]
    cdef double f[3]
    cdef double l1[3]
    cdef double l2[3]
    cdef double l3[3]
    cdef double l4[3]
    for i in range(3):
        f[i] = f0[i]
        fp[i] = fp0[i]
        f_out[0, i] = f[i]
        fp_out[0, i] = fp[i]
    with nogil:
        for k in range(n):
            i0 = 2 * k
            i1 = i0 + 1
            i2 = i0 + 2
            _rhs(fp, dp[i0], psi_p[i0], A[i0], B[i0], k1, l1)
            for i in range(3):
                y[i] = fp[i] + 0.5 * h * k1[i]
            _rhs(y, dp[i1], psi_p[i1], A[i1], B[i1], k2, l2)
            for i in range(3):
                y[i] = fp[i] + 0.5 * h * k2[i]
            _rhs(y, dp[i1], psi_p[i1], A[i1], B[i1], k3, l3)
            for i in range(3):
                y[i] = fp[i] + h * k3[i]
            _rhs(y, dp[i2], psi_p[i2], A[i2], B[i2], k4, l4)
            for i in range(3):
                fp[i] = fp[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])
                f[i] = f[i] + h / 6.0 * (l1[i] + 2.0 * l2[i] + 2.0 * l3[i] + l4[i])
                f_out[k + 1, i] = f[i]
                fp_out[k + 1, i] = fp[i]
    return f_out, fp_out
