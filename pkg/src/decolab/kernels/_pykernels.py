"""Pure numpy implementations of the classical hot loops.

Both functions mirror the compiled versions operation for operation so the
two backends agree to rounding.
"""
from __future__ import annotations

import math

import numpy as np


def _horner(coeffs: np.ndarray, x: np.ndarray) -> np.ndarray:
    out = np.full_like(x, coeffs[-1])
    for c in coeffs[-2::-1]:
        out = out * x + c
    return out


def langevin_steps(x, p, noise, t0, dt, mass, gamma, diffusion, force_coeffs, drive_amplitude, drive_frequency):
    """Advance the ensemble in place by ``noise.shape[0]`` BAOAB steps.

    ``force_coeffs`` are the ascending polynomial coefficients of V'(x);
    the drive adds F cos(omega t) to V'.
    """
    force_coeffs = np.asarray(force_coeffs, dtype=float)
    decay = math.exp(-2.0 * gamma * dt)
    if gamma > 0:
        kick = math.sqrt(diffusion * (1.0 - math.exp(-4.0 * gamma * dt)) / (2.0 * gamma))
    else:
        kick = math.sqrt(2.0 * diffusion * dt)
    half = 0.5 * dt
    for s in range(noise.shape[0]):
        t = t0 + s * dt
        p -= half * (_horner(force_coeffs, x) + drive_amplitude * math.cos(drive_frequency * t))
        x += half * p / mass
        p *= decay
        p += kick * noise[s]
        x += half * p / mass
        p -= half * (_horner(force_coeffs, x) + drive_amplitude * math.cos(drive_frequency * (t + dt)))


def tangent_log_growth(
    x, p, t0, dt, steps_per_period, periods, skip, mass, force_coeffs, curvature_coeffs, drive_amplitude, drive_frequency
):
    """Velocity Verlet with the linearized flow; returns the summed log stretch per trajectory.

    The tangent vector starts at (1, 1)/sqrt(2) and is renormalized once per period;
    the first ``skip`` periods are discarded.
    """
    force_coeffs = np.asarray(force_coeffs, dtype=float)
    curvature_coeffs = np.asarray(curvature_coeffs, dtype=float)
    x = np.array(x, dtype=float)
    p = np.array(p, dtype=float)
    dx = np.full_like(x, 1.0 / math.sqrt(2.0))
    dp = np.full_like(x, 1.0 / math.sqrt(2.0))
    total = np.zeros_like(x)
    half = 0.5 * dt
    step = 0
    for period in range(periods):
        for _ in range(steps_per_period):
            t = t0 + step * dt
            p -= half * (_horner(force_coeffs, x) + drive_amplitude * math.cos(drive_frequency * t))
            dp -= half * _horner(curvature_coeffs, x) * dx
            x += dt * p / mass
            dx += dt * dp / mass
            p -= half * (_horner(force_coeffs, x) + drive_amplitude * math.cos(drive_frequency * (t + dt)))
            dp -= half * _horner(curvature_coeffs, x) * dx
            step += 1
        norm = np.sqrt(dx * dx + dp * dp)
        if period >= skip:
            total += np.log(norm)
        dx /= norm
        dp /= norm
    return total
