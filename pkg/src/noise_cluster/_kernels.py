"""Hot numeric kernels: rotating-frame Hamiltonian assembly and an adaptive
Dormand-Prince 5(4) integrator for the Schrodinger and Lindblad propagators.

Written in numba-compatible form and jitted when the numba lane is active
(see ``_backend``); the identical source runs as the pure-numpy fallback.
Pulses are packed as float64 rows:
(qubit0, shape_code, amplitude, t0, t_pulse, sigma, freq, phase),
with shape_code 0 = gaussian, 1 = gaussian_square and qubit0 zero-based.
"""

from __future__ import annotations

import math

import numpy as np

from ._backend import jit_kernel

SHAPE_GAUSSIAN = 0
SHAPE_GAUSSIAN_SQUARE = 1

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 0.2, 0.3, 0.8, 8.0 / 9.0
_A21 = 0.2
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (
    9017.0 / 3168.0,
    -355.0 / 33.0,
    46732.0 / 5247.0,
    49.0 / 176.0,
    -5103.0 / 18656.0,
)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
# 5th-order minus embedded 4th-order weights (error estimator)
_E1, _E3, _E4, _E5, _E6, _E7 = (
    35.0 / 384.0 - 5179.0 / 57600.0,
    500.0 / 1113.0 - 7571.0 / 16695.0,
    125.0 / 192.0 - 393.0 / 640.0,
    -2187.0 / 6784.0 + 92097.0 / 339200.0,
    11.0 / 84.0 - 187.0 / 2100.0,
    -1.0 / 40.0,
)


@jit_kernel
def envelope_kernel(shape_code, amplitude, t0, t_pulse, sigma, t):
    if t < t0 or t > t0 + t_pulse:
        return 0.0
    if shape_code == SHAPE_GAUSSIAN:
        center = t0 + 0.5 * t_pulse
    else:
        rise_end = t0 + 3.0 * sigma
        fall_start = t0 + t_pulse - 3.0 * sigma
        if rise_end <= t <= fall_start:
            return amplitude
        center = rise_end if t < rise_end else fall_start
    x = (t - center) / sigma
    return amplitude * math.exp(-0.5 * x * x)


@jit_kernel
def _assemble_hamiltonian(out, t, energies, hint, splus, pulses):
    """Rotating-frame H(t) = e^{iH_q t}(H_int + H_dr(t))e^{-iH_q t}."""
    dim = energies.shape[0]
    for a in range(dim):
        for b in range(dim):
            out[a, b] = hint[a, b]
    for p in range(pulses.shape[0]):
        om = envelope_kernel(
            int(pulses[p, 1]), pulses[p, 2], pulses[p, 3], pulses[p, 4], pulses[p, 5], t
        )
        if om != 0.0:
            q = int(pulses[p, 0])
            arg = pulses[p, 6] * t + pulses[p, 7]
            c = om * complex(math.cos(arg), -math.sin(arg))
            cc = c.conjugate()
            for a in range(dim):
                for b in range(dim):
                    s = splus[q, a, b]
                    if s != 0.0:
                        out[a, b] += c * s
                        out[b, a] += cc * s.conjugate()
    for a in range(dim):
        for b in range(dim):
            if a != b:
                arg = (energies[a] - energies[b]) * t
                out[a, b] *= complex(math.cos(arg), math.sin(arg))


@jit_kernel
def _build_liouvillian(out, ham, diss):
    """out = -i(H (x) I - I (x) H^T) + diss, row-stacking convention."""
    dim = ham.shape[0]
    n2 = dim * dim
    for i in range(n2):
        for j in range(n2):
            out[i, j] = diss[i, j]
    for a in range(dim):
        for c in range(dim):
            h = -1j * ham[a, c]
            if h != 0.0:
                for b in range(dim):
                    out[a * dim + b, c * dim + b] += h
    for b in range(dim):
        for d in range(dim):
            h = 1j * ham[d, b]
            if h != 0.0:
                for a in range(dim):
                    out[a * dim + b, a * dim + d] += h


@jit_kernel
def _rhs(t, y, energies, hint, splus, pulses, diss, lindblad, ham, liou):
    _assemble_hamiltonian(ham, t, energies, hint, splus, pulses)
    if lindblad:
        _build_liouvillian(liou, ham, diss)
        return np.dot(liou, y)
    return -1j * np.dot(ham, y)


@jit_kernel
def integrate_propagator(
    energies, hint, splus, pulses, diss, lindblad, t0, t1, rtol, atol, max_step
):
    """Propagate dY/dt = L(t) Y (Lindblad) or -iH(t) Y (unitary) from Y = I.

    Returns (Y, accepted_steps, est_error) where est_error accumulates the
    Frobenius norms of the embedded-pair local error estimates.
    """
    dim = energies.shape[0]
    m = dim * dim if lindblad else dim
    y = np.zeros((m, m), dtype=np.complex128)
    for i in range(m):
        y[i, i] = 1.0
    ham = np.zeros((dim, dim), dtype=np.complex128)
    liou = np.zeros((m, m), dtype=np.complex128)

    span = t1 - t0
    if span <= 0.0:
        return y, 0, 0.0
    h = min(max_step, span)
    t = t0
    k1 = _rhs(t, y, energies, hint, splus, pulses, diss, lindblad, ham, liou)
    n_steps = 0
    est_error = 0.0
    min_step = span * 1e-14
    while t < t1:
        if h > t1 - t:
            h = t1 - t
        y2 = y + h * (_A21 * k1)
        k2 = _rhs(t + _C2 * h, y2, energies, hint, splus, pulses, diss, lindblad, ham, liou)
        y3 = y + h * (_A31 * k1 + _A32 * k2)
        k3 = _rhs(t + _C3 * h, y3, energies, hint, splus, pulses, diss, lindblad, ham, liou)
        y4 = y + h * (_A41 * k1 + _A42 * k2 + _A43 * k3)
        k4 = _rhs(t + _C4 * h, y4, energies, hint, splus, pulses, diss, lindblad, ham, liou)
        y5 = y + h * (_A51 * k1 + _A52 * k2 + _A53 * k3 + _A54 * k4)
        k5 = _rhs(t + _C5 * h, y5, energies, hint, splus, pulses, diss, lindblad, ham, liou)
        y6 = y + h * (_A61 * k1 + _A62 * k2 + _A63 * k3 + _A64 * k4 + _A65 * k5)
        k6 = _rhs(t + h, y6, energies, hint, splus, pulses, diss, lindblad, ham, liou)
        ynew = y + h * (_B1 * k1 + _B3 * k3 + _B4 * k4 + _B5 * k5 + _B6 * k6)
        k7 = _rhs(t + h, ynew, energies, hint, splus, pulses, diss, lindblad, ham, liou)
        err = h * (_E1 * k1 + _E3 * k3 + _E4 * k4 + _E5 * k5 + _E6 * k6 + _E7 * k7)

        # scaled RMS error over entries
        acc = 0.0
        for i in range(m):
            for j in range(m):
                scale = atol + rtol * max(abs(y[i, j]), abs(ynew[i, j]))
                r = abs(err[i, j]) / scale
                acc += r * r
        err_norm = math.sqrt(acc / (m * m))

        if err_norm <= 1.0:
            t += h
            y = ynew
            k1 = k7
            n_steps += 1
            e2 = 0.0
            for i in range(m):
                for j in range(m):
                    e2 += abs(err[i, j]) ** 2
            est_error += math.sqrt(e2)
        if err_norm == 0.0:
            factor = 5.0
        else:
            factor = 0.9 * err_norm ** (-0.2)
            if factor < 0.2:
                factor = 0.2
            elif factor > 5.0:
                factor = 5.0
        h = min(h * factor, max_step)
        if h < min_step:
            raise ValueError("step size underflow in adaptive integrator")
    return y, n_steps, est_error
