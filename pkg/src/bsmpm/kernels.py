"""Numba-compiled particle/grid transfer and constitutive kernels.

Basis data is stored per axis (first index, p+1 values and derivatives per
axis); tensor products are formed on the fly inside the transfer loops.
All scatter loops are serial with a fixed particle order, so accumulation
is deterministic and equivalent to the sequential definition. Gather and
per-particle loops write independent slots only.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OK = -1

# failure codes paired with the offending particle index
ERR_INVERTED = 1
ERR_NO_CONVERGENCE = 2


@njit(cache=True, inline="always")
def _axis_eval(cf, p, nel, h, x_min, x_max, x, values, derivs):
    """Values/derivatives of the supported window at x from per-element
    polynomial coefficients cf (nel, p+1, p+1) in the local coordinate.
    Returns the element (= first supported function index), or -1 when x is
    outside [x_min, x_max]."""
    if x < x_min or x > x_max:
        return -1
    s = (x - x_min) / h
    e = int(s)
    if e < 0:
        e = 0
    if e > nel - 1:
        e = nel - 1
    u = s - e
    for r in range(p + 1):
        v = cf[e, r, p]
        d = 0.0
        for k in range(p - 1, -1, -1):
            d = d * u + v
            v = v * u + cf[e, r, k]
        values[r] = v
        derivs[r] = d / h
    return e


@njit(cache=True)
def compute_axis_tables(
    pos, p,
    cfx, cfy, cfz,
    nelx, nely, nelz,
    hx, hy, hz,
    x0, y0, z0, x1, y1, z1,
    first, avals, aderivs,
):
    """Per-axis basis windows for every particle.

    Fills first (n, 3) with the first supported index per axis and
    avals/aderivs (n, 3, p+1). Returns the first out-of-domain particle
    index, or OK."""
    n = pos.shape[0]
    for ip in range(n):
        ix = _axis_eval(cfx, p, nelx, hx, x0, x1, pos[ip, 0],
                        avals[ip, 0], aderivs[ip, 0])
        iy = _axis_eval(cfy, p, nely, hy, y0, y1, pos[ip, 1],
                        avals[ip, 1], aderivs[ip, 1])
        iz = _axis_eval(cfz, p, nelz, hz, z0, z1, pos[ip, 2],
                        avals[ip, 2], aderivs[ip, 2])
        if ix < 0 or iy < 0 or iz < 0:
            return ip
        first[ip, 0] = ix
        first[ip, 1] = iy
        first[ip, 2] = iz
    return OK


@njit(cache=True)
def scatter_mass_momentum(first, avals, p1, nbx, nby,
                          mass, vel, grid_m, grid_mv):
    n = first.shape[0]
    for ip in range(n):
        m = mass[ip]
        vx = vel[ip, 0]
        vy = vel[ip, 1]
        vz = vel[ip, 2]
        for c in range(p1):
            base_z = (first[ip, 2] + c) * nby
            for b in range(p1):
                myz = m * avals[ip, 1, b] * avals[ip, 2, c]
                row = (base_z + first[ip, 1] + b) * nbx + first[ip, 0]
                for a in range(p1):
                    w = avals[ip, 0, a] * myz
                    j = row + a
                    grid_m[j] += w
                    grid_mv[j, 0] += w * vx
                    grid_mv[j, 1] += w * vy
                    grid_mv[j, 2] += w * vz


@njit(cache=True)
def scatter_momentum(first, avals, p1, nbx, nby, mass, vel, grid_mv):
    n = first.shape[0]
    for ip in range(n):
        m = mass[ip]
        vx = vel[ip, 0]
        vy = vel[ip, 1]
        vz = vel[ip, 2]
        for c in range(p1):
            base_z = (first[ip, 2] + c) * nby
            for b in range(p1):
                myz = m * avals[ip, 1, b] * avals[ip, 2, c]
                row = (base_z + first[ip, 1] + b) * nbx + first[ip, 0]
                for a in range(p1):
                    w = avals[ip, 0, a] * myz
                    j = row + a
                    grid_mv[j, 0] += w * vx
                    grid_mv[j, 1] += w * vy
                    grid_mv[j, 2] += w * vz


@njit(cache=True)
def scatter_all(first, avals, aderivs, p1, nbx, nby,
                mass, vel, sigma, volume, body, f_part,
                grid_m, grid_mv, grid_fint, grid_fext):
    """Fused scatter of mass, momentum, internal force -grad(N)·sigma·V,
    and external force N·(m b + f_part)."""
    n = first.shape[0]
    for ip in range(n):
        m = mass[ip]
        v = volume[ip]
        vx = vel[ip, 0]
        vy = vel[ip, 1]
        vz = vel[ip, 2]
        fx = m * body[0] + f_part[ip, 0]
        fy = m * body[1] + f_part[ip, 1]
        fz = m * body[2] + f_part[ip, 2]
        s00 = sigma[ip, 0, 0]
        s01 = sigma[ip, 0, 1]
        s02 = sigma[ip, 0, 2]
        s11 = sigma[ip, 1, 1]
        s12 = sigma[ip, 1, 2]
        s22 = sigma[ip, 2, 2]
        s10 = sigma[ip, 1, 0]
        s20 = sigma[ip, 2, 0]
        s21 = sigma[ip, 2, 1]
        for c in range(p1):
            base_z = (first[ip, 2] + c) * nby
            nzc = avals[ip, 2, c]
            dzc = aderivs[ip, 2, c]
            for b in range(p1):
                nyb = avals[ip, 1, b]
                dyb = aderivs[ip, 1, b]
                nyz = nyb * nzc
                dyz = dyb * nzc
                ndz = nyb * dzc
                row = (base_z + first[ip, 1] + b) * nbx + first[ip, 0]
                for a in range(p1):
                    nxa = avals[ip, 0, a]
                    gx = aderivs[ip, 0, a] * nyz
                    gy = nxa * dyz
                    gz = nxa * ndz
                    w = nxa * nyz
                    j = row + a
                    grid_m[j] += w * m
                    grid_mv[j, 0] += w * m * vx
                    grid_mv[j, 1] += w * m * vy
                    grid_mv[j, 2] += w * m * vz
                    grid_fint[j, 0] -= v * (gx * s00 + gy * s10 + gz * s20)
                    grid_fint[j, 1] -= v * (gx * s01 + gy * s11 + gz * s21)
                    grid_fint[j, 2] -= v * (gx * s02 + gy * s12 + gz * s22)
                    grid_fext[j, 0] += w * fx
                    grid_fext[j, 1] += w * fy
                    grid_fext[j, 2] += w * fz


@njit(cache=True)
def gather_kinematics(first, avals, p1, nbx, nby,
                      grid_a, grid_v_new, vel, pos, dt):
    """Particle velocity/position update from nodal acceleration and
    updated nodal velocity, both gathered at the old positions."""
    n = first.shape[0]
    for ip in range(n):
        ax = 0.0
        ay = 0.0
        az = 0.0
        vx = 0.0
        vy = 0.0
        vz = 0.0
        for c in range(p1):
            base_z = (first[ip, 2] + c) * nby
            for b in range(p1):
                nyz = avals[ip, 1, b] * avals[ip, 2, c]
                row = (base_z + first[ip, 1] + b) * nbx + first[ip, 0]
                for a in range(p1):
                    w = avals[ip, 0, a] * nyz
                    j = row + a
                    ax += w * grid_a[j, 0]
                    ay += w * grid_a[j, 1]
                    az += w * grid_a[j, 2]
                    vx += w * grid_v_new[j, 0]
                    vy += w * grid_v_new[j, 1]
                    vz += w * grid_v_new[j, 2]
        vel[ip, 0] += dt * ax
        vel[ip, 1] += dt * ay
        vel[ip, 2] += dt * az
        pos[ip, 0] += dt * vx
        pos[ip, 1] += dt * vy
        pos[ip, 2] += dt * vz


@njit(cache=True)
def advance_and_rescatter(first, avals, p1, nbx, nby,
                          grid_a, grid_v_new, mass, vel, pos, dt, grid_mv):
    """gather_kinematics fused with the re-scatter of the updated particle
    momentum (one pass over the basis window per particle)."""
    n = first.shape[0]
    for ip in range(n):
        ax = 0.0
        ay = 0.0
        az = 0.0
        vx = 0.0
        vy = 0.0
        vz = 0.0
        for c in range(p1):
            base_z = (first[ip, 2] + c) * nby
            for b in range(p1):
                nyz = avals[ip, 1, b] * avals[ip, 2, c]
                row = (base_z + first[ip, 1] + b) * nbx + first[ip, 0]
                for a in range(p1):
                    w = avals[ip, 0, a] * nyz
                    j = row + a
                    ax += w * grid_a[j, 0]
                    ay += w * grid_a[j, 1]
                    az += w * grid_a[j, 2]
                    vx += w * grid_v_new[j, 0]
                    vy += w * grid_v_new[j, 1]
                    vz += w * grid_v_new[j, 2]
        ux = vel[ip, 0] + dt * ax
        uy = vel[ip, 1] + dt * ay
        uz = vel[ip, 2] + dt * az
        vel[ip, 0] = ux
        vel[ip, 1] = uy
        vel[ip, 2] = uz
        pos[ip, 0] += dt * vx
        pos[ip, 1] += dt * vy
        pos[ip, 2] += dt * vz
        m = mass[ip]
        for c in range(p1):
            base_z = (first[ip, 2] + c) * nby
            for b in range(p1):
                myz = m * avals[ip, 1, b] * avals[ip, 2, c]
                row = (base_z + first[ip, 1] + b) * nbx + first[ip, 0]
                for a in range(p1):
                    w = avals[ip, 0, a] * myz
                    j = row + a
                    grid_mv[j, 0] += w * ux
                    grid_mv[j, 1] += w * uy
                    grid_mv[j, 2] += w * uz


@njit(cache=True)
def gather_velocity_gradient(first, avals, aderivs, p1, nbx, nby, grid_v, L):
    """L[ip][a][b] = d v_a / d x_b gathered from nodal velocities."""
    n = first.shape[0]
    for ip in range(n):
        l00 = 0.0
        l01 = 0.0
        l02 = 0.0
        l10 = 0.0
        l11 = 0.0
        l12 = 0.0
        l20 = 0.0
        l21 = 0.0
        l22 = 0.0
        for c in range(p1):
            base_z = (first[ip, 2] + c) * nby
            nzc = avals[ip, 2, c]
            dzc = aderivs[ip, 2, c]
            for b in range(p1):
                nyb = avals[ip, 1, b]
                dyb = aderivs[ip, 1, b]
                nyz = nyb * nzc
                dyz = dyb * nzc
                ndz = nyb * dzc
                row = (base_z + first[ip, 1] + b) * nbx + first[ip, 0]
                for a in range(p1):
                    nxa = avals[ip, 0, a]
                    gx = aderivs[ip, 0, a] * nyz
                    gy = nxa * dyz
                    gz = nxa * ndz
                    j = row + a
                    l00 += grid_v[j, 0] * gx
                    l01 += grid_v[j, 0] * gy
                    l02 += grid_v[j, 0] * gz
                    l10 += grid_v[j, 1] * gx
                    l11 += grid_v[j, 1] * gy
                    l12 += grid_v[j, 1] * gz
                    l20 += grid_v[j, 2] * gx
                    l21 += grid_v[j, 2] * gy
                    l22 += grid_v[j, 2] * gz
        L[ip, 0, 0] = l00
        L[ip, 0, 1] = l01
        L[ip, 0, 2] = l02
        L[ip, 1, 0] = l10
        L[ip, 1, 1] = l11
        L[ip, 1, 2] = l12
        L[ip, 2, 0] = l20
        L[ip, 2, 1] = l21
        L[ip, 2, 2] = l22


@njit(cache=True)
def scatter_scalar_volume(first, avals, p1, nbx, nby, q, volume, num, den):
    n = first.shape[0]
    for ip in range(n):
        qv = q[ip] * volume[ip]
        v = volume[ip]
        for c in range(p1):
            base_z = (first[ip, 2] + c) * nby
            for b in range(p1):
                nyz = avals[ip, 1, b] * avals[ip, 2, c]
                row = (base_z + first[ip, 1] + b) * nbx + first[ip, 0]
                for a in range(p1):
                    w = avals[ip, 0, a] * nyz
                    j = row + a
                    num[j] += w * qv
                    den[j] += w * v


@njit(cache=True)
def gather_scalar(first, avals, p1, nbx, nby, nodal, out):
    n = first.shape[0]
    for ip in range(n):
        acc = 0.0
        for c in range(p1):
            base_z = (first[ip, 2] + c) * nby
            for b in range(p1):
                nyz = avals[ip, 1, b] * avals[ip, 2, c]
                row = (base_z + first[ip, 1] + b) * nbx + first[ip, 0]
                for a in range(p1):
                    acc += avals[ip, 0, a] * nyz * nodal[row + a]
        out[ip] = acc


# ------------------------------------------------------ per-particle material


@njit(cache=True, inline="always")
def _elastic_one(sig, d, w, dt, lam, mu, tmp):
    """Jaumann hypoelastic increment on one 3x3 state, symmetrized."""
    trd = d[0, 0] + d[1, 1] + d[2, 2]
    for a in range(3):
        for b in range(3):
            rot = 0.0
            for c in range(3):
                rot += w[a, c] * sig[c, b]
                rot += sig[a, c] * w[b, c]
            inc = 2.0 * mu * d[a, b] + rot
            if a == b:
                inc += lam * trd
            tmp[a, b] = sig[a, b] + dt * inc
    for a in range(3):
        for b in range(3):
            sig[a, b] = 0.5 * (tmp[a, b] + tmp[b, a])


@njit(cache=True, inline="always")
def _radial_return_one(sig, eps_p, mu, sig_y, hard_a, hard_m, max_iter, tol):
    """Radial return of one trial state; returns the updated equivalent
    plastic strain, or -1.0 when the scalar Newton solve fails."""
    sq23 = np.sqrt(2.0 / 3.0)
    p = (sig[0, 0] + sig[1, 1] + sig[2, 2]) / 3.0
    snorm2 = 0.0
    for a in range(3):
        for b in range(3):
            s = sig[a, b]
            if a == b:
                s -= p
            snorm2 += s * s
    snorm = np.sqrt(snorm2)
    k0 = sig_y * (1.0 + hard_a * eps_p) ** hard_m
    f = snorm - sq23 * k0
    if f <= 0.0:
        return eps_p
    dg = f / (2.0 * mu)  # exact for perfect plasticity
    if hard_a != 0.0 and hard_m != 0.0:
        converged = False
        for _ in range(max_iter):
            e_new = eps_p + sq23 * dg
            base = 1.0 + hard_a * e_new
            k = sig_y * base**hard_m
            g = snorm - 2.0 * mu * dg - sq23 * k
            if abs(g) <= tol:
                converged = True
                break
            kp = sig_y * hard_a * hard_m * base ** (hard_m - 1.0)
            gp = -2.0 * mu - (2.0 / 3.0) * kp
            dg -= g / gp
            if dg < 0.0:
                dg = 0.0
        if not converged:
            return -1.0
    scale = 1.0 - 2.0 * mu * dg / snorm
    for a in range(3):
        for b in range(3):
            s = sig[a, b]
            if a == b:
                s -= p
            s *= scale
            if a == b:
                s += p
            sig[a, b] = s
    return eps_p + sq23 * dg


@njit(cache=True)
def elastic_rate_batch(sigma, D, W, dt, lam, mu):
    tmp = np.empty((3, 3))
    for ip in range(sigma.shape[0]):
        _elastic_one(sigma[ip], D[ip], W[ip], dt, lam, mu, tmp)


@njit(cache=True)
def radial_return_batch(sigma, eps_p, mu, sig_y, hard_a, hard_m,
                        max_iter, tol):
    """Batch radial return; returns the first non-converged particle
    index, or OK."""
    for ip in range(sigma.shape[0]):
        e = _radial_return_one(
            sigma[ip], eps_p[ip], mu, sig_y, hard_a, hard_m, max_iter, tol
        )
        if e < 0.0:
            return ip
        eps_p[ip] = e
    return OK


@njit(cache=True)
def update_deformation(L, dt, F, V0, V):
    """F <- (I + dt L) F and V <- det(F) V0. Returns the first inverted
    particle index, or OK."""
    n = F.shape[0]
    G = np.empty((3, 3))
    for ip in range(n):
        for a in range(3):
            for b in range(3):
                acc = 0.0
                for c in range(3):
                    acc += dt * L[ip, a, c] * F[ip, c, b]
                G[a, b] = F[ip, a, b] + acc
        det = (
            G[0, 0] * (G[1, 1] * G[2, 2] - G[1, 2] * G[2, 1])
            - G[0, 1] * (G[1, 0] * G[2, 2] - G[1, 2] * G[2, 0])
            + G[0, 2] * (G[1, 0] * G[2, 1] - G[1, 1] * G[2, 0])
        )
        if not det > 0.0:
            return ip
        for a in range(3):
            for b in range(3):
                F[ip, a, b] = G[a, b]
        V[ip] = det * V0[ip]
    return OK


@njit(cache=True)
def particle_update(L, recon_div, use_projection, dt,
                    F, V0, V, sigma, eps_p,
                    lam, mu, plastic, sig_y, hard_a, hard_m,
                    max_iter, tol, work, hyd):
    """Fused per-particle tail of a MUSL step.

    Replaces the trace of L by the reconstructed projected divergence (when
    enabled, in place, so L holds the gradient actually used), updates the
    deformation gradient and volume, performs the constitutive update, and
    emits per-particle midpoint stress power (without the dt factor) and
    hydrostatic stress. Returns (code, particle) on failure, (OK, -1)
    otherwise."""
    n = F.shape[0]
    G = np.empty((3, 3))
    d = np.empty((3, 3))
    w = np.empty((3, 3))
    old = np.empty((3, 3))
    tmp = np.empty((3, 3))
    for ip in range(n):
        if use_projection:
            div = L[ip, 0, 0] + L[ip, 1, 1] + L[ip, 2, 2]
            corr = (recon_div[ip] - div) / 3.0
            L[ip, 0, 0] += corr
            L[ip, 1, 1] += corr
            L[ip, 2, 2] += corr

        for a in range(3):
            for b in range(3):
                acc = 0.0
                for c in range(3):
                    acc += dt * L[ip, a, c] * F[ip, c, b]
                G[a, b] = F[ip, a, b] + acc
        det = (
            G[0, 0] * (G[1, 1] * G[2, 2] - G[1, 2] * G[2, 1])
            - G[0, 1] * (G[1, 0] * G[2, 2] - G[1, 2] * G[2, 0])
            + G[0, 2] * (G[1, 0] * G[2, 1] - G[1, 1] * G[2, 0])
        )
        if not det > 0.0:
            return ERR_INVERTED, ip
        for a in range(3):
            for b in range(3):
                F[ip, a, b] = G[a, b]
        V[ip] = det * V0[ip]

        for a in range(3):
            for b in range(3):
                d[a, b] = 0.5 * (L[ip, a, b] + L[ip, b, a])
                w[a, b] = 0.5 * (L[ip, a, b] - L[ip, b, a])
                old[a, b] = sigma[ip, a, b]
        _elastic_one(sigma[ip], d, w, dt, lam, mu, tmp)
        if plastic:
            e = _radial_return_one(
                sigma[ip], eps_p[ip], mu, sig_y, hard_a, hard_m, max_iter, tol
            )
            if e < 0.0:
                return ERR_NO_CONVERGENCE, ip
            eps_p[ip] = e

        pw = 0.0
        for a in range(3):
            for b in range(3):
                pw += 0.5 * (old[a, b] + sigma[ip, a, b]) * d[a, b]
        work[ip] = pw * V[ip]
        hyd[ip] = (sigma[ip, 0, 0] + sigma[ip, 1, 1] + sigma[ip, 2, 2]) / 3.0
    return OK, -1


@njit(cache=True)
def divide_by_mass(num, mass, cutoff, out):
    """out = num / mass per node where mass exceeds cutoff, else zero."""
    for j in range(mass.shape[0]):
        if mass[j] > cutoff:
            inv = 1.0 / mass[j]
            out[j, 0] = num[j, 0] * inv
            out[j, 1] = num[j, 1] * inv
            out[j, 2] = num[j, 2] * inv
        else:
            out[j, 0] = 0.0
            out[j, 1] = 0.0
            out[j, 2] = 0.0


@njit(cache=True)
def accel_from_forces(f_int, f_ext, mass, cutoff, out):
    for j in range(mass.shape[0]):
        if mass[j] > cutoff:
            inv = 1.0 / mass[j]
            out[j, 0] = (f_int[j, 0] + f_ext[j, 0]) * inv
            out[j, 1] = (f_int[j, 1] + f_ext[j, 1]) * inv
            out[j, 2] = (f_int[j, 2] + f_ext[j, 2]) * inv
        else:
            out[j, 0] = 0.0
            out[j, 1] = 0.0
            out[j, 2] = 0.0


@njit(cache=True)
def lumped_values(num, den, cutoff, out):
    """Nodal lumped-projection values num / den where den exceeds cutoff."""
    for j in range(num.shape[0]):
        out[j] = num[j] / den[j] if den[j] > cutoff else 0.0


@njit(cache=True)
def trace_of(L, out):
    for ip in range(L.shape[0]):
        out[ip] = L[ip, 0, 0] + L[ip, 1, 1] + L[ip, 2, 2]


@njit(cache=True)
def apply_hydrostatic_correction(sigma, recon, hyd):
    """sigma += (recon - hyd) I per particle (double-projected stress)."""
    for ip in range(sigma.shape[0]):
        corr = recon[ip] - hyd[ip]
        sigma[ip, 0, 0] += corr
        sigma[ip, 1, 1] += corr
        sigma[ip, 2, 2] += corr


@njit(cache=True)
def hydrostatic_of(sigma, out):
    for ip in range(sigma.shape[0]):
        out[ip] = (sigma[ip, 0, 0] + sigma[ip, 1, 1] + sigma[ip, 2, 2]) / 3.0


@njit(cache=True)
def corrected_stress(sigma, recon, hyd, out):
    """out = sigma + (recon - hyd) I, leaving sigma untouched."""
    for ip in range(sigma.shape[0]):
        corr = recon[ip] - hyd[ip]
        for a in range(3):
            for b in range(3):
                out[ip, a, b] = sigma[ip, a, b]
        out[ip, 0, 0] += corr
        out[ip, 1, 1] += corr
        out[ip, 2, 2] += corr
