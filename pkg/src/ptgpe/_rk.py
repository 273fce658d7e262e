"""Adaptive Dormand-Prince 5(4) integrators for the shooting problems.

Both kernels integrate outward on the half line s in [0, x_max] and land
exactly on every grid node (the recorded samples double as dense output on
the solver grid); inside a node interval the embedded error estimate drives
adaptive sub-steps.  Delta wells are events: the integration is split at the
well node and the derivative jump psi' -> psi' - w*psi is applied there
analytically.  In regularized mode the jump is disabled and a smooth
two-Gaussian well potential enters the right-hand side instead.

Status codes: 0 converged, 1 solution blew up, 2 step size underflow.
"""

import numpy as np
from numba import njit

# Dormand-Prince 5(4) tableau
_C2, _C3, _C4, _C5 = 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0
_A21 = 1.0 / 5.0
_A31, _A32 = 3.0 / 40.0, 9.0 / 40.0
_A41, _A42, _A43 = 44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0
_A51, _A52, _A53, _A54 = 19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0
_A61, _A62, _A63, _A64, _A65 = (9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0,
                                49.0 / 176.0, -5103.0 / 18656.0)
_B1, _B3, _B4, _B5, _B6 = 35.0 / 384.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0
_E1, _E3, _E4, _E5, _E6, _E7 = (71.0 / 57600.0, -71.0 / 16695.0, 71.0 / 1920.0,
                                -17253.0 / 339200.0, 22.0 / 525.0, -1.0 / 40.0)

_BLOWUP = 1e6  # normalized states are O(1); anything beyond this is hopeless
_MAX_FACTOR = 5.0
_MIN_FACTOR = 0.2
_SAFETY = 0.9


@njit(cache=True)
def _pot(s, va1, s1, va2, s2, xw):
    d = s - xw
    return va1 * np.exp(-0.5 * (d / s1) ** 2) + va2 * np.exp(-0.5 * (d / s2) ** 2)


@njit(cache=True)
def integrate_half(psi0, dpsi0, kappa, g, jump_w,
                   regularized, va1, s1, va2, s2, xw,
                   dx, n_nodes, i_well, rtol, atol, out_psi):
    """March psi'' = (kappa^2 + V) psi - g |psi|^2 psi from node 0 to the edge.

    Records psi at every node in out_psi; returns (status, dpsi_end, s_fail).
    """
    k2 = kappa * kappa
    psi = psi0
    dpsi = dpsi0
    out_psi[0] = psi
    h = dx
    min_h = 1e-13 * dx

    # FSAL stage cache
    if regularized:
        acc = (k2 + _pot(0.0, va1, s1, va2, s2, xw)) * psi \
            - g * (psi.real * psi.real + psi.imag * psi.imag) * psi
    else:
        acc = k2 * psi - g * (psi.real * psi.real + psi.imag * psi.imag) * psi
    k1p = dpsi
    k1d = acc

    h_well = s1 / 3.0  # resolve the narrow lobe even when sigma < dx
    for j in range(n_nodes - 1):
        s = j * dx
        s_end = s + dx
        while s < s_end - 1e-14 * dx:
            if h > s_end - s:
                h = s_end - s
            if regularized and h > h_well:
                if s + h > xw - 6.0 * s2 and s < xw + 6.0 * s2:
                    h = h_well
            if h < min_h or h < 4e-16 * s:  # step no longer advances s
                return 2, dpsi, s
            # stages (k1 from FSAL cache)
            p2 = psi + h * (_A21 * k1p)
            d2 = dpsi + h * (_A21 * k1d)
            if regularized:
                v = _pot(s + _C2 * h, va1, s1, va2, s2, xw)
                a2 = (k2 + v) * p2 - g * (p2.real * p2.real + p2.imag * p2.imag) * p2
            else:
                a2 = k2 * p2 - g * (p2.real * p2.real + p2.imag * p2.imag) * p2
            k2p, k2d = d2, a2

            p3 = psi + h * (_A31 * k1p + _A32 * k2p)
            d3 = dpsi + h * (_A31 * k1d + _A32 * k2d)
            if regularized:
                v = _pot(s + _C3 * h, va1, s1, va2, s2, xw)
                a3 = (k2 + v) * p3 - g * (p3.real * p3.real + p3.imag * p3.imag) * p3
            else:
                a3 = k2 * p3 - g * (p3.real * p3.real + p3.imag * p3.imag) * p3
            k3p, k3d = d3, a3

            p4 = psi + h * (_A41 * k1p + _A42 * k2p + _A43 * k3p)
            d4 = dpsi + h * (_A41 * k1d + _A42 * k2d + _A43 * k3d)
            if regularized:
                v = _pot(s + _C4 * h, va1, s1, va2, s2, xw)
                a4 = (k2 + v) * p4 - g * (p4.real * p4.real + p4.imag * p4.imag) * p4
            else:
                a4 = k2 * p4 - g * (p4.real * p4.real + p4.imag * p4.imag) * p4
            k4p, k4d = d4, a4

            p5 = psi + h * (_A51 * k1p + _A52 * k2p + _A53 * k3p + _A54 * k4p)
            d5 = dpsi + h * (_A51 * k1d + _A52 * k2d + _A53 * k3d + _A54 * k4d)
            if regularized:
                v = _pot(s + _C5 * h, va1, s1, va2, s2, xw)
                a5 = (k2 + v) * p5 - g * (p5.real * p5.real + p5.imag * p5.imag) * p5
            else:
                a5 = k2 * p5 - g * (p5.real * p5.real + p5.imag * p5.imag) * p5
            k5p, k5d = d5, a5

            p6 = psi + h * (_A61 * k1p + _A62 * k2p + _A63 * k3p + _A64 * k4p + _A65 * k5p)
            d6 = dpsi + h * (_A61 * k1d + _A62 * k2d + _A63 * k3d + _A64 * k4d + _A65 * k5d)
            if regularized:
                v = _pot(s + h, va1, s1, va2, s2, xw)
                a6 = (k2 + v) * p6 - g * (p6.real * p6.real + p6.imag * p6.imag) * p6
            else:
                a6 = k2 * p6 - g * (p6.real * p6.real + p6.imag * p6.imag) * p6
            k6p, k6d = d6, a6

            pn = psi + h * (_B1 * k1p + _B3 * k3p + _B4 * k4p + _B5 * k5p + _B6 * k6p)
            dn = dpsi + h * (_B1 * k1d + _B3 * k3d + _B4 * k4d + _B5 * k5d + _B6 * k6d)
            if regularized:
                v = _pot(s + h, va1, s1, va2, s2, xw)
                an = (k2 + v) * pn - g * (pn.real * pn.real + pn.imag * pn.imag) * pn
            else:
                an = k2 * pn - g * (pn.real * pn.real + pn.imag * pn.imag) * pn
            k7p, k7d = dn, an

            ep = h * (_E1 * k1p + _E3 * k3p + _E4 * k4p + _E5 * k5p + _E6 * k6p + _E7 * k7p)
            ed = h * (_E1 * k1d + _E3 * k3d + _E4 * k4d + _E5 * k5d + _E6 * k6d + _E7 * k7d)
            sc_p = atol + rtol * max(abs(psi), abs(pn))
            sc_d = atol + rtol * max(abs(dpsi), abs(dn))
            err = np.sqrt(0.5 * ((abs(ep) / sc_p) ** 2 + (abs(ed) / sc_d) ** 2))

            if err != err:  # NaN from overflow inside the stages: hard reject
                h = h * _MIN_FACTOR
                if h < min_h:
                    return 1, dpsi, s
            elif err <= 1.0:
                s += h
                psi, dpsi = pn, dn
                k1p, k1d = k7p, k7d
                if abs(psi) > _BLOWUP or abs(dpsi) > _BLOWUP:
                    return 1, dpsi, s
                if err == 0.0:
                    fac = _MAX_FACTOR
                else:
                    fac = min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
                h = h * fac
            else:
                h = h * max(_MIN_FACTOR, _SAFETY * err ** -0.2)
                if h < min_h:
                    return 2, dpsi, s
        out_psi[j + 1] = psi
        if (not regularized) and (j + 1 == i_well):
            dpsi = dpsi - jump_w * psi
            k1p = dpsi  # refresh FSAL cache; the acceleration part only sees psi
    return 0, dpsi, 0.0


@njit(cache=True)
def integrate_mirror(psi0, dpsi0, kappa, g, wu, wv,
                     dx, n_nodes, i_well, rtol, atol, out_u, out_v):
    """Coupled mirror-field system u'' = k^2 u - g u^2 v, v'' = k^2 v - g v^2 u.

    u represents psi(x) and v represents psi(-x) on x >= 0; the mirror
    initial conditions v(0) = u(0), v'(0) = -u'(0) are built in.  Derivative
    jumps -wu*u and -wv*v act at the well node.  Returns
    (status, du_end, dv_end, s_fail).
    """
    k2 = kappa * kappa
    u = psi0
    du = dpsi0
    v = psi0
    dv = -dpsi0
    out_u[0] = u
    out_v[0] = v
    h = dx
    min_h = 1e-13 * dx

    k1u, k1a = du, k2 * u - g * u * u * v
    k1v, k1b = dv, k2 * v - g * v * v * u

    for j in range(n_nodes - 1):
        s = j * dx
        s_end = s + dx
        while s < s_end - 1e-14 * dx:
            if h > s_end - s:
                h = s_end - s
            if h < min_h or h < 4e-16 * s:  # step no longer advances s
                return 2, du, dv, s

            u2 = u + h * (_A21 * k1u); du2 = du + h * (_A21 * k1a)
            v2 = v + h * (_A21 * k1v); dv2 = dv + h * (_A21 * k1b)
            k2u, k2a = du2, k2 * u2 - g * u2 * u2 * v2
            k2v, k2b = dv2, k2 * v2 - g * v2 * v2 * u2

            u3 = u + h * (_A31 * k1u + _A32 * k2u); du3 = du + h * (_A31 * k1a + _A32 * k2a)
            v3 = v + h * (_A31 * k1v + _A32 * k2v); dv3 = dv + h * (_A31 * k1b + _A32 * k2b)
            k3u, k3a = du3, k2 * u3 - g * u3 * u3 * v3
            k3v, k3b = dv3, k2 * v3 - g * v3 * v3 * u3

            u4 = u + h * (_A41 * k1u + _A42 * k2u + _A43 * k3u)
            du4 = du + h * (_A41 * k1a + _A42 * k2a + _A43 * k3a)
            v4 = v + h * (_A41 * k1v + _A42 * k2v + _A43 * k3v)
            dv4 = dv + h * (_A41 * k1b + _A42 * k2b + _A43 * k3b)
            k4u, k4a = du4, k2 * u4 - g * u4 * u4 * v4
            k4v, k4b = dv4, k2 * v4 - g * v4 * v4 * u4

            u5 = u + h * (_A51 * k1u + _A52 * k2u + _A53 * k3u + _A54 * k4u)
            du5 = du + h * (_A51 * k1a + _A52 * k2a + _A53 * k3a + _A54 * k4a)
            v5 = v + h * (_A51 * k1v + _A52 * k2v + _A53 * k3v + _A54 * k4v)
            dv5 = dv + h * (_A51 * k1b + _A52 * k2b + _A53 * k3b + _A54 * k4b)
            k5u, k5a = du5, k2 * u5 - g * u5 * u5 * v5
            k5v, k5b = dv5, k2 * v5 - g * v5 * v5 * u5

            u6 = u + h * (_A61 * k1u + _A62 * k2u + _A63 * k3u + _A64 * k4u + _A65 * k5u)
            du6 = du + h * (_A61 * k1a + _A62 * k2a + _A63 * k3a + _A64 * k4a + _A65 * k5a)
            v6 = v + h * (_A61 * k1v + _A62 * k2v + _A63 * k3v + _A64 * k4v + _A65 * k5v)
            dv6 = dv + h * (_A61 * k1b + _A62 * k2b + _A63 * k3b + _A64 * k4b + _A65 * k5b)
            k6u, k6a = du6, k2 * u6 - g * u6 * u6 * v6
            k6v, k6b = dv6, k2 * v6 - g * v6 * v6 * u6

            un = u + h * (_B1 * k1u + _B3 * k3u + _B4 * k4u + _B5 * k5u + _B6 * k6u)
            dun = du + h * (_B1 * k1a + _B3 * k3a + _B4 * k4a + _B5 * k5a + _B6 * k6a)
            vn = v + h * (_B1 * k1v + _B3 * k3v + _B4 * k4v + _B5 * k5v + _B6 * k6v)
            dvn = dv + h * (_B1 * k1b + _B3 * k3b + _B4 * k4b + _B5 * k5b + _B6 * k6b)
            k7u, k7a = dun, k2 * un - g * un * un * vn
            k7v, k7b = dvn, k2 * vn - g * vn * vn * un

            eu = h * (_E1 * k1u + _E3 * k3u + _E4 * k4u + _E5 * k5u + _E6 * k6u + _E7 * k7u)
            ea = h * (_E1 * k1a + _E3 * k3a + _E4 * k4a + _E5 * k5a + _E6 * k6a + _E7 * k7a)
            ev = h * (_E1 * k1v + _E3 * k3v + _E4 * k4v + _E5 * k5v + _E6 * k6v + _E7 * k7v)
            eb = h * (_E1 * k1b + _E3 * k3b + _E4 * k4b + _E5 * k5b + _E6 * k6b + _E7 * k7b)
            sc_u = atol + rtol * max(abs(u), abs(un))
            sc_a = atol + rtol * max(abs(du), abs(dun))
            sc_v = atol + rtol * max(abs(v), abs(vn))
            sc_b = atol + rtol * max(abs(dv), abs(dvn))
            err = np.sqrt(0.25 * ((abs(eu) / sc_u) ** 2 + (abs(ea) / sc_a) ** 2
                                  + (abs(ev) / sc_v) ** 2 + (abs(eb) / sc_b) ** 2))

            if err != err:  # NaN from overflow inside the stages: hard reject
                h = h * _MIN_FACTOR
                if h < min_h:
                    return 1, du, dv, s
            elif err <= 1.0:
                s += h
                u, du, v, dv = un, dun, vn, dvn
                k1u, k1a, k1v, k1b = k7u, k7a, k7v, k7b
                if abs(u) > _BLOWUP or abs(v) > _BLOWUP:
                    return 1, du, dv, s
                if err == 0.0:
                    fac = _MAX_FACTOR
                else:
                    fac = min(_MAX_FACTOR, max(_MIN_FACTOR, _SAFETY * err ** -0.2))
                h = h * fac
            else:
                h = h * max(_MIN_FACTOR, _SAFETY * err ** -0.2)
                if h < min_h:
                    return 2, du, dv, s
        out_u[j + 1] = u
        out_v[j + 1] = v
        if j + 1 == i_well:
            du = du - wu * u
            dv = dv - wv * v
            k1u = du  # refresh FSAL cache; accelerations only see u, v
            k1v = dv
    return 0, du, dv, 0.0
