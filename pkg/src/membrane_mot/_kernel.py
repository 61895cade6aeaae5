"""Numba inner loops for atom propagation.

All physics here is scalar per atom so results are bit-identical no matter
how atoms are batched into chunks or distributed over workers.  The public
modules (`dynamics`, `fit`) own the readable reference implementations;
agreement between the two is locked by tests.
"""

import numpy as np
from numba import njit

# Atom status codes shared with dynamics.py
ACTIVE = 0
LOST_MEMBRANE = 1
LOST_BRIDGE = 2
LOST_BACKGROUND = 3
ESCAPED = 4

# Region kind codes
REGION_SPHERE = 0
REGION_CYLINDER = 1

HBAR = 1.0545718176461565e-34  # J s, CODATA value used throughout
KB = 1.380649e-23              # J/K
TAPER_WIDTH = 0.5              # relative width of the sub-Doppler friction cut-off


@njit(cache=True)
def _sd_taper(speed, vcap):
    u = speed / vcap
    if u <= 1.0:
        return 1.0
    return np.exp(-(((u - 1.0) / TAPER_WIDTH) ** 2))


@njit(cache=True)
def _solid_crossing(dn, de1, de2, dp0, dhalf, dholer, dbhw,
                    ax, ay, az, bx, by, bz):
    """Crossing of segment a->b with the solid membrane/bridge.

    Returns (code, tfrac): code 0 none, 1 membrane, 2 bridge.
    """
    d0 = (ax - dp0[0]) * dn[0] + (ay - dp0[1]) * dn[1] + (az - dp0[2]) * dn[2]
    d1 = (bx - dp0[0]) * dn[0] + (by - dp0[1]) * dn[1] + (bz - dp0[2]) * dn[2]
    if d0 == d1:
        return 0, 0.0
    if (d0 > 0.0 and d1 > 0.0) or (d0 < 0.0 and d1 < 0.0):
        return 0, 0.0
    t = d0 / (d0 - d1)
    x = ax + t * (bx - ax)
    y = ay + t * (by - ay)
    z = az + t * (bz - az)
    u = (x - dp0[0]) * de1[0] + (y - dp0[1]) * de1[1] + (z - dp0[2]) * de1[2]
    v = (x - dp0[0]) * de2[0] + (y - dp0[1]) * de2[1] + (z - dp0[2]) * de2[2]
    if abs(u) > dhalf or abs(v) > dhalf:
        return 0, t
    if u * u + v * v > dholer * dholer:
        return 1, t
    if dbhw > 0.0 and abs(v) <= dbhw:
        return 2, t
    return 0, t


@njit(cache=True)
def _force_terms(px, py, pz, vx, vy, vz, s_scratch,
                 bdir, borig, bpeak, bw2, bdet, bpol,
                 isat, gamma, kwn, ezs, mass,
                 qaxis, qgrad, qcenter,
                 dev_present, dn, de1, de2, dp0, dhalf, dholer, dtrans):
    """Scattering rates and drift force (no gravity) for one atom.

    Returns (fx, fy, fz, rtot, sax, say, saz) where sa* are the per-axis
    absorption-direction sums sum_i R_i * khat_i,alpha^2 used for recoil
    diffusion.  Per-beam saturations are left in ``s_scratch``.
    """
    nb = bdir.shape[0]
    s_tot = 0.0
    for i in range(nb):
        dx = px - borig[i, 0]
        dy = py - borig[i, 1]
        dz = pz - borig[i, 2]
        proj = dx * bdir[i, 0] + dy * bdir[i, 1] + dz * bdir[i, 2]
        r2 = dx * dx + dy * dy + dz * dz - proj * proj
        if r2 < 0.0:
            r2 = 0.0
        intensity = bpeak[i] * np.exp(-2.0 * r2 / bw2[i])
        if dev_present:
            code, _ = _solid_crossing(dn, de1, de2, dp0, dhalf, dholer, -1.0,
                                      borig[i, 0], borig[i, 1], borig[i, 2],
                                      px, py, pz)
            if code == 1:
                intensity *= dtrans
        s_scratch[i] = intensity / isat
        s_tot += s_scratch[i]

    # Quadrupole field at the atom
    cx = px - qcenter[0]
    cy = py - qcenter[1]
    cz = pz - qcenter[2]
    zax = cx * qaxis[0] + cy * qaxis[1] + cz * qaxis[2]
    bx = qgrad * (zax * qaxis[0] - 0.5 * (cx - zax * qaxis[0]))
    by = qgrad * (zax * qaxis[1] - 0.5 * (cy - zax * qaxis[1]))
    bz = qgrad * (zax * qaxis[2] - 0.5 * (cz - zax * qaxis[2]))

    fx = 0.0
    fy = 0.0
    fz = 0.0
    rtot = 0.0
    sax = 0.0
    say = 0.0
    saz = 0.0
    hk = HBAR * kwn
    for i in range(nb):
        kv = vx * bdir[i, 0] + vy * bdir[i, 1] + vz * bdir[i, 2]
        bproj = bx * bdir[i, 0] + by * bdir[i, 1] + bz * bdir[i, 2]
        deff = bdet[i] - kwn * kv + bpol[i] * ezs * bproj
        x = 2.0 * deff / gamma
        rate = 0.5 * gamma * s_scratch[i] / (1.0 + s_tot + x * x)
        rtot += rate
        fx += hk * rate * bdir[i, 0]
        fy += hk * rate * bdir[i, 1]
        fz += hk * rate * bdir[i, 2]
        sax += rate * bdir[i, 0] * bdir[i, 0]
        say += rate * bdir[i, 1] * bdir[i, 1]
        saz += rate * bdir[i, 2] * bdir[i, 2]
    return fx, fy, fz, rtot, sax, say, saz


@njit(cache=True)
def _in_region(px, py, pz, region_kind, rc, raxis, rr, rhalfh):
    dx = px - rc[0]
    dy = py - rc[1]
    dz = pz - rc[2]
    if region_kind == REGION_SPHERE:
        return dx * dx + dy * dy + dz * dz <= rr * rr
    h = dx * raxis[0] + dy * raxis[1] + dz * raxis[2]
    if abs(h) > rhalfh:
        return False
    rho2 = dx * dx + dy * dy + dz * dz - h * h
    return rho2 <= rr * rr


@njit(cache=True)
def propagate_window(pos, vel, status, born_step, g0, g1, dt,
                     normals, uniforms, noise_on, bg_on,
                     bdir, borig, bpeak, bw2, bdet, bpol,
                     isat, gamma, kwn, ezs, mass,
                     qaxis, qgrad, qcenter,
                     dev_present, dn, de1, de2, dp0, dhalf, dholer, dbhw, dtrans,
                     sd_gamma, sd_teq, sd_vcap,
                     gravity, bg_rate, escape_r, center,
                     sample_stride, n_samples, inregion,
                     region_kind, rc, raxis, rr, rhalfh,
                     capture_speed, capture_time, term_time,
                     record_traj, traj):
    """Advance every live atom of a chunk through global steps [g0, g1).

    Semi-implicit Euler with per-step noise kicks (photon recoil plus, when
    ``sd_gamma`` > 0, the matched diffusion of the in-trap sub-Doppler
    closure; ``noise_on`` masters both).  Losses are membrane/bridge
    collision (segment test), background (uniform per step) and escape
    beyond ``escape_r``.  Each atom only reads its own rows of ``normals``
    and ``uniforms`` so results do not depend on chunking.
    """
    n_atoms = pos.shape[0]
    s_scratch = np.empty(bdir.shape[0])
    inv_mass = 1.0 / mass
    hk_m = HBAR * kwn * inv_mass
    esc2 = escape_r * escape_r
    cs2 = capture_speed * capture_speed

    for i in range(n_atoms):
        if status[i] != ACTIVE or born_step[i] >= g1:
            continue
        j0 = born_step[i] - g0
        if j0 < 0:
            j0 = 0
        px = pos[i, 0]
        py = pos[i, 1]
        pz = pos[i, 2]
        vx = vel[i, 0]
        vy = vel[i, 1]
        vz = vel[i, 2]
        for j in range(j0, g1 - g0):
            g = g0 + j
            fx, fy, fz, rtot, sax, say, saz = _force_terms(
                px, py, pz, vx, vy, vz, s_scratch,
                bdir, borig, bpeak, bw2, bdet, bpol,
                isat, gamma, kwn, ezs, mass,
                qaxis, qgrad, qcenter,
                dev_present, dn, de1, de2, dp0, dhalf, dholer, dtrans)
            sd_var = 0.0
            if sd_gamma > 0.0:
                taper = _sd_taper(np.sqrt(vx * vx + vy * vy + vz * vz), sd_vcap)
                fx -= sd_gamma * taper * vx
                fy -= sd_gamma * taper * vy
                fz -= sd_gamma * taper * vz
                sd_var = 2.0 * sd_gamma * taper * KB * sd_teq * inv_mass * inv_mass
            nvx = vx + (fx * inv_mass + gravity[0]) * dt
            nvy = vy + (fy * inv_mass + gravity[1]) * dt
            nvz = vz + (fz * inv_mass + gravity[2]) * dt
            if noise_on and (rtot > 0.0 or sd_var > 0.0):
                third = rtot / 3.0
                hk2 = hk_m * hk_m
                nvx += np.sqrt((hk2 * (sax + third) + sd_var) * dt) * normals[i, j, 0]
                nvy += np.sqrt((hk2 * (say + third) + sd_var) * dt) * normals[i, j, 1]
                nvz += np.sqrt((hk2 * (saz + third) + sd_var) * dt) * normals[i, j, 2]
            npx = px + nvx * dt
            npy = py + nvy * dt
            npz = pz + nvz * dt

            if dev_present:
                code, tf = _solid_crossing(dn, de1, de2, dp0, dhalf, dholer, dbhw,
                                           px, py, pz, npx, npy, npz)
                if code != 0:
                    status[i] = LOST_MEMBRANE if code == 1 else LOST_BRIDGE
                    term_time[i] = (g + tf) * dt
                    px = px + tf * (npx - px)
                    py = py + tf * (npy - py)
                    pz = pz + tf * (npz - pz)
                    vx, vy, vz = nvx, nvy, nvz
                    break
            if bg_on and uniforms[i, j] < bg_rate * dt:
                status[i] = LOST_BACKGROUND
                term_time[i] = (g + 1) * dt
                px, py, pz = npx, npy, npz
                vx, vy, vz = nvx, nvy, nvz
                break
            dxc = npx - center[0]
            dyc = npy - center[1]
            dzc = npz - center[2]
            if dxc * dxc + dyc * dyc + dzc * dzc > esc2:
                status[i] = ESCAPED
                term_time[i] = (g + 1) * dt
                px, py, pz = npx, npy, npz
                vx, vy, vz = nvx, nvy, nvz
                break

            px, py, pz = npx, npy, npz
            vx, vy, vz = nvx, nvy, nvz

            if record_traj:
                traj[i, g + 1, 0] = px
                traj[i, g + 1, 1] = py
                traj[i, g + 1, 2] = pz
                traj[i, g + 1, 3] = vx
                traj[i, g + 1, 4] = vy
                traj[i, g + 1, 5] = vz

            if capture_time[i] < 0.0 and vx * vx + vy * vy + vz * vz <= cs2:
                if _in_region(px, py, pz, region_kind, rc, raxis, rr, rhalfh):
                    capture_time[i] = (g + 1) * dt
            if (g + 1) % sample_stride == 0:
                s_idx = (g + 1) // sample_stride
                if s_idx < n_samples:
                    if _in_region(px, py, pz, region_kind, rc, raxis, rr, rhalfh):
                        inregion[i, s_idx] = 1

        pos[i, 0] = px
        pos[i, 1] = py
        pos[i, 2] = pz
        vel[i, 0] = vx
        vel[i, 1] = vy
        vel[i, 2] = vz


@njit(cache=True)
def capture_probe(pos0, vel0, dt, max_steps,
                  bdir, borig, bpeak, bw2, bdet, bpol,
                  isat, gamma, kwn, ezs, mass,
                  qaxis, qgrad, qcenter,
                  dev_present, dn, de1, de2, dp0, dhalf, dholer, dbhw, dtrans,
                  sd_gamma, sd_teq, sd_vcap,
                  gravity, escape_r, center,
                  cap_radius, dwell_steps):
    """Deterministic (noise-free) capture test for one atom.

    Returns 1 when the atom enters and stays inside the ``cap_radius``
    sphere around the trap center for ``dwell_steps`` consecutive steps
    before hitting a surface, escaping, or running out of time.
    """
    s_scratch = np.empty(bdir.shape[0])
    inv_mass = 1.0 / mass
    esc2 = escape_r * escape_r
    cap2 = cap_radius * cap_radius
    px, py, pz = pos0[0], pos0[1], pos0[2]
    vx, vy, vz = vel0[0], vel0[1], vel0[2]
    inside = 0
    for _ in range(max_steps):
        fx, fy, fz, _, _, _, _ = _force_terms(
            px, py, pz, vx, vy, vz, s_scratch,
            bdir, borig, bpeak, bw2, bdet, bpol,
            isat, gamma, kwn, ezs, mass,
            qaxis, qgrad, qcenter,
            dev_present, dn, de1, de2, dp0, dhalf, dholer, dtrans)
        if sd_gamma > 0.0:
            taper = _sd_taper(np.sqrt(vx * vx + vy * vy + vz * vz), sd_vcap)
            fx -= sd_gamma * taper * vx
            fy -= sd_gamma * taper * vy
            fz -= sd_gamma * taper * vz
        vx += (fx * inv_mass + gravity[0]) * dt
        vy += (fy * inv_mass + gravity[1]) * dt
        vz += (fz * inv_mass + gravity[2]) * dt
        npx = px + vx * dt
        npy = py + vy * dt
        npz = pz + vz * dt
        if dev_present:
            code, _ = _solid_crossing(dn, de1, de2, dp0, dhalf, dholer, dbhw,
                                      px, py, pz, npx, npy, npz)
            if code != 0:
                return 0
        px, py, pz = npx, npy, npz
        dxc = px - center[0]
        dyc = py - center[1]
        dzc = pz - center[2]
        if dxc * dxc + dyc * dyc + dzc * dzc > esc2:
            return 0
        dxt = px - qcenter[0]
        dyt = py - qcenter[1]
        dzt = pz - qcenter[2]
        if dxt * dxt + dyt * dyt + dzt * dzt <= cap2:
            inside += 1
            if inside >= dwell_steps:
                return 1
        else:
            inside = 0
    return 0
