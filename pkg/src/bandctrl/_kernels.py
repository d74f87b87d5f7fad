"""Compiled inner loops for reflected-path simulation.

The projection scheme books each overshoot into the matching local time at
the step's left endpoint; running costs accumulate by discounted trapezoid.
Kernels are restricted to quadratic running costs; generic costs go through
the numpy fallback in sde.py.
"""

import numpy as np
from numba import njit

# per-path output columns of band_costs_quadratic
RUN, UP_D, DN_D, UP_T, DN_T, MAXABS = range(6)

# per-path output columns of two_player_band_quadratic
TP_RUN, TP_UP_D, TP_DN_D, TP_UP_T, TP_DN_T, TP_MAXABS, \
    TP_Y_MEAN, TP_Y2_MEAN, TP_XBAR_MEAN, TP_XBAR2_MEAN = range(10)


@njit(cache=True)
def band_costs_quadratic(z, x0, c, sig, dt, a, s0, off, disc, out):
    """Reflect x in [-c, c] against scaled noise rows z and accumulate costs.

    z: (npaths, nsteps) standard normals, one row per path.
    disc: (nsteps+1,) discount factors e^{-rho t_k}.
    out: (npaths, 6) run cost, discounted/raw local times, max |x| after t=0.
    """
    npaths, nsteps = z.shape
    sq = sig * np.sqrt(dt)
    for p in range(npaths):
        x = x0
        up_d = 0.0
        dn_d = 0.0
        up_t = 0.0
        dn_t = 0.0
        if x > c:
            dn_d += x - c
            dn_t += x - c
            x = c
        elif x < -c:
            up_d += -c - x
            up_t += -c - x
            x = -c
        run = 0.0
        f_prev = disc[0] * (a * (x - s0) ** 2 + off)
        mx = 0.0
        for k in range(nsteps):
            x += sq * z[p, k]
            if x > c:
                e = x - c
                dn_d += disc[k] * e
                dn_t += e
                x = c
            elif x < -c:
                e = -c - x
                up_d += disc[k] * e
                up_t += e
                x = -c
            ax = x if x >= 0.0 else -x
            if ax > mx:
                mx = ax
            f_new = disc[k + 1] * (a * (x - s0) ** 2 + off)
            run += 0.5 * dt * (f_prev + f_new)
            f_prev = f_new
        out[p, 0] = run
        out[p, 1] = up_d
        out[p, 2] = dn_d
        out[p, 3] = up_t
        out[p, 4] = dn_t
        out[p, 5] = mx


@njit(cache=True)
def two_player_band_quadratic(z, x1_0, x2_0, l11, l21, l22, c, dt, a, s0, off,
                              a1, a2, policy, win_start, disc, out):
    """Joint two-player simulation with the spread reflected in [-c, c].

    z: (npaths, nsteps, 2) iid normals; the players' Brownian terms are
    w1 = l11 z0, w2 = l21 z0 + l22 z1 (Cholesky factors of sigma sigma^T).
    policy 0: player 2 absorbs both edges (xi^{2,+} at +c, xi^{2,-} at -c).
    policy 1: player 1 contracts at +c, player 2 contracts at -c.
    Window averages of y and the benchmark start at step index win_start.
    """
    npaths, nsteps, _ = z.shape
    sqdt = np.sqrt(dt)
    for p in range(npaths):
        x1 = x1_0
        x2 = x2_0
        up_d = 0.0
        dn_d = 0.0
        up_t = 0.0
        dn_t = 0.0
        y = x1 - x2
        if y > c:
            e = y - c
            dn_d += e
            dn_t += e
            if policy == 0:
                x2 = x1 - c
            else:
                x1 = x2 + c
        elif y < -c:
            e = -c - y
            up_d += e
            up_t += e
            x2 = x1 + c
        y = x1 - x2
        run = 0.0
        f_prev = disc[0] * (a * (y - s0) ** 2 + off)
        mx = 0.0
        sy = 0.0
        sy2 = 0.0
        sb = 0.0
        sb2 = 0.0
        nwin = 0
        for k in range(nsteps):
            x1 += l11 * z[p, k, 0] * sqdt
            x2 += (l21 * z[p, k, 0] + l22 * z[p, k, 1]) * sqdt
            y = x1 - x2
            if y > c:
                e = y - c
                dn_d += disc[k] * e
                dn_t += e
                if policy == 0:
                    x2 = x1 - c
                else:
                    x1 = x2 + c
                y = c
            elif y < -c:
                e = -c - y
                up_d += disc[k] * e
                up_t += e
                x2 = x1 + c
                y = -c
            ay = y if y >= 0.0 else -y
            if ay > mx:
                mx = ay
            if k >= win_start:
                xb = a1 * x1 + a2 * x2
                sy += y
                sy2 += y * y
                sb += xb
                sb2 += xb * xb
                nwin += 1
            f_new = disc[k + 1] * (a * (y - s0) ** 2 + off)
            run += 0.5 * dt * (f_prev + f_new)
            f_prev = f_new
        out[p, 0] = run
        out[p, 1] = up_d
        out[p, 2] = dn_d
        out[p, 3] = up_t
        out[p, 4] = dn_t
        out[p, 5] = mx
        out[p, 6] = sy / nwin
        out[p, 7] = sy2 / nwin
        out[p, 8] = sb / nwin
        out[p, 9] = sb2 / nwin
