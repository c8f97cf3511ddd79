"""Compiled right-hand sides and the embedded Runge-Kutta loop.

The loop body ``_dopri_loop`` is written once.  It resolves its right-hand
side through the module globals ``FIELD`` and ``GUARD``: compiled with numba
it uses the built-in kernels below (and is cached on disk), while
:func:`python_loop` rebinds those names to arbitrary Python callables.
Near a prescribed-time singularity the linear phase oscillates with
frequency ~ (T - t)^-2, so millions of steps are routine and must not run
through the interpreter.
"""

from __future__ import annotations

import math
import types

import numba
import numpy as np
from scipy.integrate import RK45

# Dormand-Prince 5(4) tableau with its 4th-order dense output.
RK_A = np.ascontiguousarray(RK45.A, dtype=float)
RK_B = np.ascontiguousarray(RK45.B, dtype=float)
RK_C = np.ascontiguousarray(RK45.C, dtype=float)
RK_E = np.ascontiguousarray(RK45.E, dtype=float)
RK_P = np.ascontiguousarray(RK45.P, dtype=float)
N_STAGES = RK_B.size

# field kinds
PT_DIFFERENTIATOR = 0   # params (T,)
SUPERTWIST_PLUS = 1     # params (k1, k2); region x1 > 0
SUPERTWIST_MINUS = 2    # params (k1, k2); region x1 < 0
PT_LOG_OSCILLATOR = 3   # params (T,)
PERIODIC_EVEN = 4       # params ()
PERIODIC_ODD = 5        # params ()
CONSTANT = 6            # params: the vector
LINEAR = 7              # params: row-major n x n matrix

# loop status codes
DONE, EVENT, UNDERFLOW, BUDGET, NONFINITE = 0, 1, 2, 3, 4


@numba.njit(cache=True)
def eval_field(kind, t, x, p, out):
    if kind == PT_DIFFERENTIATOR:
        tau = p[0] - t
        out[0] = -4.0 / tau * x[0] + x[1]
        out[1] = -(2.0 / tau**2 + 1.0 / tau**4) * x[0]
    elif kind == SUPERTWIST_PLUS:
        out[0] = -p[0] * math.sqrt(abs(x[0])) + x[1]
        out[1] = -p[1]
    elif kind == SUPERTWIST_MINUS:
        out[0] = p[0] * math.sqrt(abs(x[0])) + x[1]
        out[1] = p[1]
    elif kind == PT_LOG_OSCILLATOR:
        tau = p[0] - t
        out[0] = -x[0] / tau + x[1]
        out[1] = -x[0] / tau**2
    elif kind == PERIODIC_EVEN:
        # floor(t) even: -A(ceil(t) - t) x, with 1 - (ceil(t) - t) = t - floor(t)
        u = t - math.floor(t)
        out[0] = 4.0 / u * x[0] - x[1]
        out[1] = (2.0 / u**2 + 1.0 / u**4) * x[0]
    elif kind == PERIODIC_ODD:
        # floor(t) odd: A(t - floor(t)) x, with 1 - (t - floor(t)) = floor(t) + 1 - t
        w = math.floor(t) + 1.0 - t
        out[0] = -4.0 / w * x[0] + x[1]
        out[1] = -(2.0 / w**2 + 1.0 / w**4) * x[0]
    elif kind == CONSTANT:
        for i in range(x.shape[0]):
            out[i] = p[i]
    elif kind == LINEAR:
        n = x.shape[0]
        for i in range(n):
            s = 0.0
            for j in range(n):
                s += p[i * n + j] * x[j]
            out[i] = s
    else:
        for i in range(x.shape[0]):
            out[i] = math.nan


@numba.njit(cache=True)
def eval_field_many(kind, p, t, x):
    out = np.empty_like(x)
    for i in range(t.shape[0]):
        eval_field(kind, t[i], x[i], p, out[i])
    return out


@numba.njit(cache=True)
def linear_guard(t, x, G, b, out):
    for i in range(G.shape[0]):
        s = b[i]
        for j in range(x.shape[0]):
            s += G[i, j] * x[j]
        out[i] = s


FIELD = eval_field
GUARD = linear_guard


def _dopri_loop(kind, p, t, x0, t_stop, stops, h, rtol, atol, h_max, t_sing, clamp,
                G, b, watch, wsign, max_steps, single, A, B, C, E):
    n = x0.shape[0]
    ns = B.shape[0]
    K = np.empty((ns + 1, n))
    x = x0.copy()
    y = np.empty(n)
    x_new = np.empty(n)
    sig = np.empty(G.shape[0])
    cap = 1024
    ts = np.empty(cap)
    xs = np.empty((cap, n))
    ts[0] = t
    xs[0, :] = x
    m = 1
    stop_idx = np.full(stops.shape[0], -1, dtype=np.int64)
    js = 0
    ev_t = math.nan
    ev_h = math.nan
    ev_K = np.zeros((ns + 1, n))
    ev_x = np.zeros(n)
    ev_xnew = np.zeros(n)
    nsteps = 0
    rejected = False

    FIELD(kind, t, x, p, K[0])
    for i in range(n):
        if not math.isfinite(K[0, i]):
            return (NONFINITE, t, x, h, ts[:m], xs[:m], stop_idx, ev_t, ev_h, ev_x, ev_xnew, ev_K, nsteps)

    status = DONE
    while t < t_stop:
        target = t_stop
        if js < stops.shape[0] and stops[js] < target:
            target = stops[js]
        hh = min(h, h_max)
        if t_sing > t:
            hh = min(hh, clamp * (t_sing - t))
        if hh < 1e-14 * max(1.0, abs(t)):
            status = UNDERFLOW
            break
        if nsteps >= max_steps:
            status = BUDGET
            break
        nsteps += 1
        last = t + hh >= target
        t_new = target if last else t + hh
        hh = t_new - t

        for s in range(1, ns):
            for i in range(n):
                acc = 0.0
                for r in range(s):
                    acc += A[s, r] * K[r, i]
                y[i] = x[i] + hh * acc
            FIELD(kind, t + C[s] * hh, y, p, K[s])
        for i in range(n):
            acc = 0.0
            for r in range(ns):
                acc += B[r] * K[r, i]
            x_new[i] = x[i] + hh * acc
        FIELD(kind, t_new, x_new, p, K[ns])

        err = 0.0
        for i in range(n):
            e = 0.0
            for r in range(ns + 1):
                e += E[r] * K[r, i]
            sc = atol + rtol * max(abs(x[i]), abs(x_new[i]))
            err += (hh * e / sc) ** 2
        err = math.sqrt(err / n)
        if not math.isfinite(err):
            h = 0.2 * hh
            rejected = True
            continue

        if err <= 1.0:
            hit = False
            if watch.shape[0] > 0:
                GUARD(t_new, x_new, G, b, sig)
                for w in range(watch.shape[0]):
                    if sig[watch[w]] * wsign[w] < 0.0:
                        hit = True
            if hit:
                ev_t = t
                ev_h = hh
                ev_x[:] = x
                ev_xnew[:] = x_new
                ev_K[:, :] = K
                status = EVENT
                break
            t = t_new
            x[:] = x_new
            K[0, :] = K[ns, :]
            if m == cap:
                cap *= 2
                ts2 = np.empty(cap)
                xs2 = np.empty((cap, n))
                ts2[:m] = ts[:m]
                xs2[:m] = xs[:m]
                ts = ts2
                xs = xs2
            ts[m] = t
            xs[m, :] = x
            m += 1
            if last and js < stops.shape[0] and target == stops[js]:
                stop_idx[js] = m - 1
                js += 1
            fac = 10.0 if err == 0.0 else min(10.0, 0.9 * err ** -0.2)
            if rejected:
                fac = min(1.0, fac)
            rejected = False
            h = hh * fac
            if single:
                break
        else:
            h = hh * max(0.2, 0.9 * err ** -0.2)
            rejected = True

    return (status, t, x, h, ts[:m], xs[:m], stop_idx, ev_t, ev_h, ev_x, ev_xnew, ev_K, nsteps)


compiled_loop = numba.njit(cache=True)(_dopri_loop)


def python_loop(field, guard):
    """The same loop running in the interpreter with Python callables.

    ``field(kind, t, x, p, out)`` and ``guard(t, x, G, b, out)`` follow the
    signatures of :func:`eval_field` and :func:`linear_guard`.
    """
    g = dict(_dopri_loop.__globals__)
    g["FIELD"] = field
    g["GUARD"] = guard
    return types.FunctionType(_dopri_loop.__code__, g, "python_loop")


def dense_eval(t_a, x_a, h, K, theta):
    """4th-order continuous extension of a DOPRI step at fraction ``theta``."""
    theta = np.asarray(theta, dtype=float)
    Q = K.T @ RK_P
    powers = np.stack([theta ** (j + 1) for j in range(RK_P.shape[1])], axis=-1)
    return x_a + h * powers @ Q.T
