"""Compiled inner loops for the serial-chain algorithms.

Spatial vectors are world-frame, referred to the world origin, ordered
[angular; linear].
"""

import numpy as np
from numba import njit


@njit(cache=True)
def frames_kernel(q, axis, origin):
    n = q.shape[0]
    R = np.empty((n, 3, 3))
    p = np.empty((n, 3))
    z = np.empty((n, 3))
    S = np.empty((n, 6))
    Rp = np.eye(3)
    pp = np.zeros(3)
    for i in range(n):
        for r in range(3):
            acc = pp[r]
            for k in range(3):
                acc += Rp[r, k] * origin[i, k, 3]
            p[i, r] = acc
        Rj = Rp @ np.ascontiguousarray(origin[i, :3, :3])
        x, y, w = axis[i, 0], axis[i, 1], axis[i, 2]
        c, s = np.cos(q[i]), np.sin(q[i])
        C = 1.0 - c
        Ra = np.empty((3, 3))
        Ra[0, 0] = c + x * x * C
        Ra[0, 1] = x * y * C - w * s
        Ra[0, 2] = x * w * C + y * s
        Ra[1, 0] = y * x * C + w * s
        Ra[1, 1] = c + y * y * C
        Ra[1, 2] = y * w * C - x * s
        Ra[2, 0] = w * x * C - y * s
        Ra[2, 1] = w * y * C + x * s
        Ra[2, 2] = c + w * w * C
        Ri = Rj @ Ra
        R[i] = Ri
        for r in range(3):
            z[i, r] = Ri[r, 0] * x + Ri[r, 1] * y + Ri[r, 2] * w
        S[i, 0] = z[i, 0]
        S[i, 1] = z[i, 1]
        S[i, 2] = z[i, 2]
        S[i, 3] = p[i, 1] * z[i, 2] - p[i, 2] * z[i, 1]
        S[i, 4] = p[i, 2] * z[i, 0] - p[i, 0] * z[i, 2]
        S[i, 5] = p[i, 0] * z[i, 1] - p[i, 1] * z[i, 0]
        Rp = Ri
        pp = p[i]
    return R, p, z, S


@njit(cache=True)
def inertia_kernel(R, p, mass, com, inertia):
    n = mass.shape[0]
    out = np.zeros((n, 6, 6))
    for i in range(n):
        Ri = R[i]
        c = p[i] + Ri @ com[i]
        Ic = Ri @ inertia[i] @ Ri.T
        m = mass[i]
        # skew(c) @ skew(c).T = |c|^2 I - c c^T
        cc = c[0] * c[0] + c[1] * c[1] + c[2] * c[2]
        for r in range(3):
            for k in range(3):
                out[i, r, k] = Ic[r, k] - m * c[r] * c[k]
            out[i, r, r] += m * cc
            out[i, 3 + r, 3 + r] = m
        # m * skew(c) in the upper-right block, its transpose lower-left
        out[i, 0, 4] = -m * c[2]
        out[i, 0, 5] = m * c[1]
        out[i, 1, 3] = m * c[2]
        out[i, 1, 5] = -m * c[0]
        out[i, 2, 3] = -m * c[1]
        out[i, 2, 4] = m * c[0]
        for r in range(3):
            for k in range(3):
                out[i, 3 + k, r] = out[i, r, 3 + k]
    return out


@njit(cache=True)
def _crm(v, m, out):
    out[0] = v[1] * m[2] - v[2] * m[1]
    out[1] = v[2] * m[0] - v[0] * m[2]
    out[2] = v[0] * m[1] - v[1] * m[0]
    out[3] = v[4] * m[2] - v[5] * m[1] + v[1] * m[5] - v[2] * m[4]
    out[4] = v[5] * m[0] - v[3] * m[2] + v[2] * m[3] - v[0] * m[5]
    out[5] = v[3] * m[1] - v[4] * m[0] + v[0] * m[4] - v[1] * m[3]


@njit(cache=True)
def _crf(v, f, out):
    out[0] = v[1] * f[2] - v[2] * f[1] + v[4] * f[5] - v[5] * f[4]
    out[1] = v[2] * f[0] - v[0] * f[2] + v[5] * f[3] - v[3] * f[5]
    out[2] = v[0] * f[1] - v[1] * f[0] + v[3] * f[4] - v[4] * f[3]
    out[3] = v[1] * f[5] - v[2] * f[4]
    out[4] = v[2] * f[3] - v[0] * f[5]
    out[5] = v[0] * f[4] - v[1] * f[3]


@njit(cache=True)
def rnea_kernel(S, I, qd, qdd, gravity):
    n = S.shape[0]
    v = np.zeros(6)
    a = np.zeros(6)
    a[3] = -gravity[0]
    a[4] = -gravity[1]
    a[5] = -gravity[2]
    f = np.empty((n, 6))
    sq = np.empty(6)
    c = np.empty(6)
    h = np.empty(6)
    for i in range(n):
        for k in range(6):
            sq[k] = S[i, k] * qd[i]
            v[k] += sq[k]
        _crm(v, sq, c)
        for k in range(6):
            a[k] += S[i, k] * qdd[i] + c[k]
        Iv = I[i] @ v
        fi = I[i] @ a
        _crf(v, Iv, h)
        for k in range(6):
            f[i, k] = fi[k] + h[k]
    tau = np.empty(n)
    F = np.zeros(6)
    for i in range(n - 1, -1, -1):
        acc = 0.0
        for k in range(6):
            F[k] += f[i, k]
            acc += S[i, k] * F[k]
        tau[i] = acc
    return tau


@njit(cache=True)
def crba_kernel(S, I):
    n = S.shape[0]
    M = np.empty((n, n))
    Ic = np.zeros((6, 6))
    for j in range(n - 1, -1, -1):
        Ic += I[j]
        Fj = Ic @ S[j]
        for i in range(j + 1):
            val = 0.0
            for k in range(6):
                val += S[i, k] * Fj[k]
            M[i, j] = val
            M[j, i] = val
    return M


@njit(cache=True)
def spatial_velocities(S, qd):
    n = S.shape[0]
    out = np.empty((n, 6))
    v = np.zeros(6)
    for i in range(n):
        for k in range(6):
            v[k] += S[i, k] * qd[i]
            out[i, k] = v[k]
    return out
