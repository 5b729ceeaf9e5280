# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the classical hot loops (see _pykernels for the reference)."""
import numpy as np
from libc.math cimport cos, exp, log, sqrt


cdef inline double _horner(const double[::1] c, double x) noexcept nogil:
    cdef Py_ssize_t k = c.shape[0] - 1
    cdef double out = c[k]
    while k > 0:
        k -= 1
        out = out * x + c[k]
    return out


def langevin_steps(double[::1] x, double[::1] p, const double[:, ::1] noise, double t0, double dt,
                   double mass, double gamma, double diffusion, force_coeffs,
                   double drive_amplitude, double drive_frequency):
    cdef const double[::1] fc = np.ascontiguousarray(force_coeffs, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], steps = noise.shape[0], s, i
    cdef double decay = exp(-2.0 * gamma * dt)
    cdef double kick, half = 0.5 * dt, drive0, drive1, t
    if gamma > 0:
        kick = sqrt(diffusion * (1.0 - exp(-4.0 * gamma * dt)) / (2.0 * gamma))
    else:
        kick = sqrt(2.0 * diffusion * dt)
    with nogil:
        for s in range(steps):
            t = t0 + s * dt
            drive0 = drive_amplitude * cos(drive_frequency * t)
            drive1 = drive_amplitude * cos(drive_frequency * (t + dt))
            for i in range(n):
                p[i] -= half * (_horner(fc, x[i]) + drive0)
                x[i] += half * p[i] / mass
                p[i] *= decay
                p[i] += kick * noise[s, i]
                x[i] += half * p[i] / mass
                p[i] -= half * (_horner(fc, x[i]) + drive1)


def tangent_log_growth(x0, p0, double t0, double dt, int steps_per_period, int periods, int skip,
                       double mass, force_coeffs, curvature_coeffs,
                       double drive_amplitude, double drive_frequency):
    cdef const double[::1] fc = np.ascontiguousarray(force_coeffs, dtype=np.float64)
    cdef const double[::1] cc = np.ascontiguousarray(curvature_coeffs, dtype=np.float64)
    cdef double[::1] x = np.array(x0, dtype=np.float64)
    cdef double[::1] p = np.array(p0, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], i
    out = np.zeros(n)
    cdef double[::1] total = out
    cdef int period, k
    cdef long step
    cdef double half = 0.5 * dt, t, xi, pi, dxi, dpi, norm, drive0, drive1
    cdef double start = 1.0 / sqrt(2.0)
    with nogil:
        for i in range(n):
            xi, pi, dxi, dpi = x[i], p[i], start, start
            step = 0
            for period in range(periods):
                for k in range(steps_per_period):
                    t = t0 + step * dt
                    drive0 = drive_amplitude * cos(drive_frequency * t)
                    drive1 = drive_amplitude * cos(drive_frequency * (t + dt))
                    pi -= half * (_horner(fc, xi) + drive0)
                    dpi -= half * _horner(cc, xi) * dxi
                    xi += dt * pi / mass
                    dxi += dt * dpi / mass
                    pi -= half * (_horner(fc, xi) + drive1)
                    dpi -= half * _horner(cc, xi) * dxi
                    step += 1
                norm = sqrt(dxi * dxi + dpi * dpi)
                if period >= skip:
                    total[i] += log(norm)
                dxi /= norm
                dpi /= norm
    return out
