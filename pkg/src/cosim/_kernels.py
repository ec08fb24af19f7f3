"""Compiled time-marching loops for the evolution backends.

These functions are deliberately flat: plain arrays in, plain arrays out, no
Python objects, so numba can keep the whole time loop in machine code. All
Hamiltonians are passed in angular-frequency units (rad/s); the drivers in
``dynamics`` do the unit bookkeeping.

Return codes: 0 ok, 1 state-norm/trace drift, 2 line-flux blow-up.
"""

from __future__ import annotations

import numpy as np
from numba import njit

OK = 0
ERR_NORM = 1
ERR_BLOWUP = 2

_CHECK_EVERY = 4096


@njit(cache=True)
def _expm_step(h, psi, dt):
    """psi <- exp(-i h dt) psi for Hermitian h (rad/s)."""
    w, v = np.linalg.eigh(h)
    coef = np.conj(v.T) @ psi
    coef *= np.exp(-1j * w * dt)
    return v @ coef


@njit(cache=True)
def evolve_loop(
    psi, h0,
    drive_ops, drive_vals,
    tap_ops, tap_gain, tap_feel, tap_back, tap_igain, tap_nodes, tap_transmon,
    n_ops,
    mldt2, dmp2, inv_diag, kdiag, koff, short,
    src_nodes, src_vals,
    phi_prev, phi,
    dt, nsteps, stride, probe_nodes, leapfrog,
    pops_out, n_out, probe_out, norm_out,
):
    """Shared loop for the co-simulation and dense-evolution backends.

    The qubit amplitude vector lives on integer steps, the line flux on
    half-integer steps. Passing zero line nodes reduces this to a pure
    Hamiltonian evolution.
    """
    dim = psi.shape[0]
    nc = drive_ops.shape[0]
    nt = tap_ops.shape[0]
    ntr = n_ops.shape[0]
    nline = phi.shape[0]
    npr = probe_nodes.shape[0]
    ns = src_nodes.shape[0]

    psi_prev = psi.copy()
    n_now = np.zeros(ntr)
    n_new = np.zeros(ntr)
    for l in range(ntr):
        n_now[l] = np.real(np.conj(psi) @ (n_ops[l] @ psi))
    f = np.zeros(nline)
    kphi = np.zeros(nline)

    for m in range(nsteps):
        if m % stride == 0:
            idx = m // stride
            for i in range(dim):
                pops_out[idx, i] = abs(psi[i]) ** 2
            for l in range(ntr):
                n_out[l, idx] = n_now[l]
            for p in range(npr):
                node = probe_nodes[p]
                probe_out[p, idx] = (phi[node] - phi_prev[node]) / dt
            norm_out[idx] = np.sqrt(np.real(np.conj(psi) @ psi))

        # qubit Hamiltonian with the line voltage frozen at the integer step
        h = h0.copy()
        for c in range(nc):
            h += drive_vals[c, m] * drive_ops[c]
        for t in range(nt):
            if tap_feel[t] != 0:
                node = tap_nodes[t]
                vt = (phi[node] - phi_prev[node]) / dt
                h += (tap_gain[t] * vt) * tap_ops[t]

        if leapfrog != 0 and m > 0:
            psi_new = psi_prev - (2j * dt) * (h @ psi)
        else:
            psi_new = _expm_step(h, psi, dt)
        psi_prev = psi
        psi = psi_new

        for l in range(ntr):
            n_new[l] = np.real(np.conj(psi) @ (n_ops[l] @ psi))

        if nline > 0:
            for i in range(nline):
                f[i] = 0.0
            for t in range(nt):
                if tap_back[t] != 0:
                    l = tap_transmon[t]
                    f[tap_nodes[t]] += tap_igain[t] * (n_new[l] - n_now[l]) / dt
            for s in range(ns):
                f[src_nodes[s]] += src_vals[s, m]

            for i in range(nline):
                acc = kdiag[i] * phi[i]
                if i > 0:
                    acc += koff[i - 1] * phi[i - 1]
                if i < nline - 1:
                    acc += koff[i] * phi[i + 1]
                kphi[i] = acc
            peak = 0.0
            for i in range(nline):
                if short[i] != 0:
                    phi_new_i = 0.0
                else:
                    phi_new_i = (f[i] - kphi[i]
                                 + mldt2[i] * (2.0 * phi[i] - phi_prev[i])
                                 + dmp2[i] * phi_prev[i]) * inv_diag[i]
                phi_prev[i] = phi[i]
                phi[i] = phi_new_i
                a = abs(phi_new_i)
                if a > peak:
                    peak = a
            # physical node flux is ~1e-10 Wb; 1 Wb means the leapfrog exploded
            if not np.isfinite(peak) or peak > 1.0:
                return ERR_BLOWUP, psi

        for l in range(ntr):
            n_now[l] = n_new[l]

        if m % _CHECK_EVERY == 0:
            nrm = np.real(np.conj(psi) @ psi)
            if abs(nrm - 1.0) > 1e-4:
                return ERR_NORM, psi

    idx = nsteps // stride
    for i in range(dim):
        pops_out[idx, i] = abs(psi[i]) ** 2
    for l in range(ntr):
        n_out[l, idx] = n_now[l]
    for p in range(npr):
        node = probe_nodes[p]
        probe_out[p, idx] = (phi[node] - phi_prev[node]) / dt
    norm_out[idx] = np.sqrt(np.real(np.conj(psi) @ psi))
    return OK, psi


@njit(cache=True)
def _vbar_res(g, a, omega, rho_r, t):
    """g Tr{(a e^{-i w t} + a+ e^{i w t}) rho_R}, real by Hermiticity."""
    ph = np.exp(-1j * omega * t)
    acc = 0.0j
    nf = rho_r.shape[0]
    for i in range(nf):
        for j in range(nf):
            x = a[i, j] * ph + np.conj(a[j, i] * ph)
            acc += x * rho_r[j, i]
    return g * np.real(acc)


@njit(cache=True)
def _n_expect(n_lab, freq_diff, rho_q, t):
    nq = rho_q.shape[0]
    acc = 0.0j
    for i in range(nq):
        for j in range(nq):
            acc += n_lab[i, j] * np.exp(1j * freq_diff[i, j] * t) * rho_q[j, i]
    return np.real(acc)


@njit(cache=True)
def _comm(amat, rho):
    return amat @ rho - rho @ amat


@njit(cache=True)
def _rho_r_rate(g, a, omega, rho_r, n_val, t):
    ph = np.exp(-1j * omega * t)
    x = a * ph + np.conj(a.T) * np.conj(ph)
    return (-1j * g * n_val) * _comm(x, rho_r)


@njit(cache=True)
def _rho_q_rate(n_lab, freq_diff, rho_q, vtot, t):
    nmat = n_lab * np.exp(1j * freq_diff * t)
    return (-1j * vtot) * _comm(nmat, rho_q)


@njit(cache=True)
def born_loop(
    rho_q, rho_r,
    n_lab, freq_diff, a, omega, g,
    vd_vals,
    dt, nsteps, stride,
    pops_out, n_out, vr_out, trace_out, top_out,
):
    """Staggered leapfrog for the factorized qubit/resonator density matrices.

    rho_q advances on integer steps, rho_r on half-integer steps; the field
    seen by each subsystem is the average of the two adjacent samples of the
    other. Interaction-picture phases are evaluated analytically each step.
    The second starting value of each three-term recurrence comes from a
    single fourth-order step.
    """
    nq = rho_q.shape[0]
    nf = rho_r.shape[0]

    # ---- bootstrap -----------------------------------------------------
    # rho_r at t = dt/2 (RK4 with the qubit frozen at its initial state)
    h = 0.5 * dt
    n0 = _n_expect(n_lab, freq_diff, rho_q, 0.0)
    nh = n0  # <n> varies on drive time scales; constant over the half step
    k1 = _rho_r_rate(g, a, omega, rho_r, n0, 0.0)
    k2 = _rho_r_rate(g, a, omega, rho_r + 0.5 * h * k1, nh, 0.5 * h)
    k3 = _rho_r_rate(g, a, omega, rho_r + 0.5 * h * k2, nh, 0.5 * h)
    k4 = _rho_r_rate(g, a, omega, rho_r + h * k3, nh, h)
    rho_r_half = rho_r + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    # rho_q at t = dt (RK4; resonator field linearly extrapolated)
    vr0 = _vbar_res(g, a, omega, rho_r, 0.0)
    vrh = _vbar_res(g, a, omega, rho_r_half, 0.5 * dt)

    q1 = _rho_q_rate(n_lab, freq_diff, rho_q, vr0 + vd_vals[0], 0.0)
    vmid = 0.5 * (vd_vals[0] + vd_vals[1]) + vrh
    q2 = _rho_q_rate(n_lab, freq_diff, rho_q + 0.5 * dt * q1, vmid, 0.5 * dt)
    q3 = _rho_q_rate(n_lab, freq_diff, rho_q + 0.5 * dt * q2, vmid, 0.5 * dt)
    vend = vd_vals[1] + (2.0 * vrh - vr0)
    q4 = _rho_q_rate(n_lab, freq_diff, rho_q + dt * q3, vend, dt)
    rho_q_next = rho_q + (dt / 6.0) * (q1 + 2.0 * q2 + 2.0 * q3 + q4)

    # rho_r at t = 3 dt / 2 (RK4 over a full step from the half sample)
    n1 = _n_expect(n_lab, freq_diff, rho_q_next, dt)
    k1 = _rho_r_rate(g, a, omega, rho_r_half, 0.5 * (n0 + n1), 0.5 * dt)
    k2 = _rho_r_rate(g, a, omega, rho_r_half + 0.5 * dt * k1, n1, dt)
    k3 = _rho_r_rate(g, a, omega, rho_r_half + 0.5 * dt * k2, n1, dt)
    k4 = _rho_r_rate(g, a, omega, rho_r_half + dt * k3, n1, 1.5 * dt)
    rho_r_next = rho_r_half + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)

    rq_prev = rho_q          # integer step m-1
    rq = rho_q_next          # integer step m
    rr_prev = rho_r_half     # half step m-1/2
    rr = rho_r_next          # half step m+1/2
    n_prev = n0
    n_curr = n1

    # sample m = 0
    for i in range(nq):
        pops_out[0, i] = np.real(rho_q[i, i])
    n_out[0] = n0
    vr_out[0] = vr0
    trace_out[0] = 0.0
    top_out[0] = np.real(rho_r[nf - 1, nf - 1])
    max_top = top_out[0]

    for m in range(1, nsteps):
        t_m = m * dt
        if m % stride == 0:
            idx = m // stride
            for i in range(nq):
                pops_out[idx, i] = np.real(rq[i, i])
            n_out[idx] = n_curr
            vr_out[idx] = 0.5 * (_vbar_res(g, a, omega, rr_prev, t_m - 0.5 * dt)
                                 + _vbar_res(g, a, omega, rr, t_m + 0.5 * dt))
            tr = 0.0
            for i in range(nq):
                tr += np.real(rq[i, i])
            trace_out[idx] = abs(tr - 1.0)
            top = np.real(rr[nf - 1, nf - 1])
            top_out[idx] = top
            if top > max_top:
                max_top = top
            if trace_out[idx] > 1e-8:
                return ERR_NORM, rq, max_top

        vr_lo = _vbar_res(g, a, omega, rr_prev, t_m - 0.5 * dt)
        vr_hi = _vbar_res(g, a, omega, rr, t_m + 0.5 * dt)
        vtot = vr_lo + vr_hi + 2.0 * vd_vals[m]
        nmat = n_lab * np.exp(1j * freq_diff * t_m)
        rq_new = rq_prev - (1j * dt * vtot) * _comm(nmat, rq)

        n_new = _n_expect(n_lab, freq_diff, rq_new, t_m + dt)
        ph = np.exp(-1j * omega * (t_m + 0.5 * dt))
        x = a * ph + np.conj(a.T) * np.conj(ph)
        rr_new = rr_prev - (1j * dt * g * (n_new + n_prev)) * _comm(x, rr)

        rq_prev = rq
        rq = rq_new
        rr_prev = rr
        rr = rr_new
        n_prev = n_curr
        n_curr = n_new

    idx = nsteps // stride
    for i in range(nq):
        pops_out[idx, i] = np.real(rq[i, i])
    n_out[idx] = n_curr
    t_m = nsteps * dt
    vr_out[idx] = 0.5 * (_vbar_res(g, a, omega, rr_prev, t_m - 0.5 * dt)
                         + _vbar_res(g, a, omega, rr, t_m + 0.5 * dt))
    tr = 0.0
    for i in range(nq):
        tr += np.real(rq[i, i])
    trace_out[idx] = abs(tr - 1.0)
    top = np.real(rr[nf - 1, nf - 1])
    top_out[idx] = top
    if top > max_top:
        max_top = top
    if trace_out[idx] > 1e-8:
        return ERR_NORM, rq, max_top
    return OK, rq, max_top
