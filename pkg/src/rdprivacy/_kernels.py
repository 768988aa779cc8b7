"""Hot inner loops, each in a numba and a pure-numpy flavour.

Set ``RDPRIVACY_DISABLE_NUMBA=1`` to force the numpy path. Both flavours are
always importable (``*_numba`` / ``*_numpy``) so they can be benchmarked and
cross-checked; the unsuffixed names are the ones the solvers use.

All logarithms here are natural; callers convert to bits.
"""
from __future__ import annotations

import os

import numpy as np

try:
    import numba
    from numba import njit
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False

_FLAG = os.environ.get("RDPRIVACY_DISABLE_NUMBA", "").strip().lower()
USE_NUMBA = HAVE_NUMBA and _FLAG not in ("1", "true", "yes", "on")

GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)


# ---------------------------------------------------------------------------
# Blahut-Arimoto at a fixed slope

def ba_solve_numpy(p, a, q0, tol, max_iter):
    """Alternating minimization for R(D) at a fixed slope.

    ``a[x, y] = exp(s * (d[x, y] - min_y d[x, y]))`` (row shift is harmless).
    Stops when Blahut's upper/lower bound gap on R drops below ``tol`` nats.
    Returns (conditional Q, output marginal q, iterations).
    """
    q = q0.copy()
    it = 0
    for it in range(1, max_iter + 1):
        den = a @ q
        c = (p / den) @ a
        live = q > 0
        logc = np.log(c[live])
        gap = logc.max() - (q[live] * logc).sum()
        q = q * c
        q /= q.sum()
        if gap < tol:
            break
    Q = a * q[None, :]
    Q /= Q.sum(axis=1, keepdims=True)
    return Q, q, it


# ---------------------------------------------------------------------------
# Majorize-minimize step for the auxiliary channel p(u | s)

def mm_solve_numpy(pxz, s_of_x, h_of_x, ns, nh, cost, alpha, q0, tol, max_iter):
    """Minimize alpha*I(X;U|Z) + (1-alpha)*I(X_h;U|Z) + <cost, q>.

    ``pxz[x, z]`` is the source/side-information joint, ``q[s, u]`` the
    channel from encoder input ``s_of_x[x]``; ``cost[s, u]`` is the
    per-input conditional linear cost. Each step minimizes a majorizer and
    is therefore monotone. Stops when sum_s p(s) KL(q_new || q) < tol.
    """
    nx, nz = pxz.shape
    nu = q0.shape[1]
    beta = 1.0 - alpha
    S = np.zeros((nx, ns))
    S[np.arange(nx), s_of_x] = 1.0
    Hm = np.zeros((nx, nh))
    Hm[np.arange(nx), h_of_x] = 1.0
    ps = S.T @ pxz.sum(axis=1)
    pz = pxz.sum(axis=0)
    live_s = ps > 0
    psafe = np.where(live_s, ps, 1.0)
    pzsafe = np.where(pz > 0, pz, 1.0)
    phz_x = np.einsum("xh,xz->hzx", Hm, pxz)  # p(h, z) split by x
    q = q0.copy()
    it = 0
    for it in range(1, max_iter + 1):
        qx = q[s_of_x]                                   # (nx, nu)
        puz = pxz.T @ qx                                 # (nz, nu)
        phuz = np.einsum("hzx,xu->hzu", phz_x, qx)
        with np.errstate(divide="ignore", invalid="ignore"):
            lpu = np.where(puz > 0, np.log(puz / pzsafe[:, None]), 0.0)
            lph = np.where(phuz > 0, np.log(phuz / np.where(puz > 0, puz, 1.0)[None]), 0.0)
        inner = alpha * lpu[None, :, :] - beta * lph[h_of_x]   # (nx, nz, nu)
        acc = S.T @ np.einsum("xz,xzu->xu", pxz, inner)
        with np.errstate(divide="ignore"):
            lq = np.log(q)
        logits = acc / psafe[:, None] + beta * np.where(q > 0, lq, 0.0) - cost
        logits = np.where(q > 0, logits, -np.inf)
        logits -= logits.max(axis=1, keepdims=True)
        qn = np.exp(logits)
        qn /= qn.sum(axis=1, keepdims=True)
        qn[~live_s] = q[~live_s]
        with np.errstate(divide="ignore", invalid="ignore"):
            kl_terms = np.where(qn > 0, qn * (np.log(qn) - np.where(q > 0, lq, 0.0)), 0.0)
        kl = float((ps[:, None] * kl_terms).sum())
        q = qn
        if kl < tol:
            break
    return q, it


# ---------------------------------------------------------------------------
# Exhaustive scan over quantized channels

def brute_scan_numpy(pxz, s_of_x, h_of_x, r_of_x, nh, active, comps, qlevel,
                     dist, dmax, hmin, chunk=1 << 16):
    """Minimum I(X;U|Z) over channels whose rows are ``comps[k] / qlevel``.

    Rows of inactive inputs are irrelevant and fixed to ``comps[0]``. A
    channel counts as feasible when distortion (per-(u,z) best decoder)
    is <= dmax and H(X_h|U,Z) >= hmin (nats). Returns (best rate in nats,
    flat combination index or -1).
    """
    nx, nz = pxz.shape
    ncomp, nu = comps.shape
    nact = active.shape[0]
    ns = int(s_of_x.max()) + 1 if nx else 0
    total = ncomp ** nact
    rowq = comps.astype(float) / qlevel
    with np.errstate(divide="ignore", invalid="ignore"):
        rowqlq = np.where(rowq > 0, rowq * np.log(rowq), 0.0).sum(axis=1)
    ps = np.zeros(ns)
    np.add.at(ps, s_of_x, pxz.sum(axis=1))
    pz = pxz.sum(axis=0)
    Hm = np.zeros((nx, nh))
    Hm[np.arange(nx), h_of_x] = 1.0
    best = np.inf
    best_idx = -1
    radix = ncomp ** np.arange(nact, dtype=np.int64)
    for start in range(0, total, chunk):
        idx = np.arange(start, min(start + chunk, total), dtype=np.int64)
        digits = (idx[:, None] // radix[None, :]) % ncomp      # (b, nact)
        sel = np.zeros((idx.size, ns), dtype=np.int64)
        sel[:, active] = digits
        q = rowq[sel]                                          # (b, ns, nu)
        qx = q[:, s_of_x, :]                                   # (b, nx, nu)
        pxzu = pxz[None, :, :, None] * qx[:, :, None, :]       # (b, nx, nz, nu)
        # distortion with the best decoder per (u, z)
        costs = np.einsum("bxzu,xy->bzuy", pxzu, dist[r_of_x])
        dd = costs.min(axis=3).sum(axis=(1, 2))
        puz = pxzu.sum(axis=1)
        phuz = np.einsum("xh,bxzu->bhzu", Hm, pxzu)
        with np.errstate(divide="ignore", invalid="ignore"):
            hcond = -np.where(phuz > 0, phuz * np.log(phuz / puz[:, None]), 0.0).sum(axis=(1, 2, 3))
            hu_z = np.where(puz > 0, puz * np.log(puz / pz[None, :, None]), 0.0).sum(axis=(1, 2))
        rate = (ps[None, :] * rowqlq[sel]).sum(axis=1) - hu_z
        ok = (dd <= dmax) & (hcond >= hmin)
        if ok.any():
            cand = np.where(ok, rate, np.inf)
            k = int(np.argmin(cand))
            if cand[k] < best:
                best = float(cand[k])
                best_idx = int(idx[k])
    return best, best_idx


# ---------------------------------------------------------------------------
# Per-row sampling with a counter-based SplitMix64 stream

def _mix_numpy(z):
    with np.errstate(over="ignore"):  # uint64 arithmetic wraps by design
        z = (z ^ (z >> np.uint64(30))) * _M1
        z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def row_uniforms_numpy(seed, n):
    """One uniform in [0, 1) per row, keyed by (seed, row index)."""
    i = np.arange(1, n + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        key = _mix_numpy(np.uint64(seed) + i * GOLDEN)
        bits = _mix_numpy(key + GOLDEN)
    return (bits >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def sample_rows_numpy(seed, codes, cdf):
    u = row_uniforms_numpy(seed, codes.shape[0])
    out = np.empty(codes.shape[0], dtype=np.int64)
    for s in np.unique(codes):
        m = codes == s
        out[m] = np.searchsorted(cdf[s], u[m], side="right")
    return np.minimum(out, cdf.shape[1] - 1)


# ---------------------------------------------------------------------------
# numba twins

if HAVE_NUMBA:

    @njit(cache=True)
    def ba_solve_numba(p, a, q0, tol, max_iter):
        n, m = a.shape
        q = q0.copy()
        c = np.empty(m)
        it = 0
        for it in range(1, max_iter + 1):
            c[:] = 0.0
            for x in range(n):
                if p[x] == 0.0:
                    continue
                den = 0.0
                for y in range(m):
                    den += a[x, y] * q[y]
                w = p[x] / den
                for y in range(m):
                    c[y] += w * a[x, y]
            mx = -np.inf
            avg = 0.0
            tot = 0.0
            for y in range(m):
                if q[y] > 0.0:
                    lc = np.log(c[y])
                    if lc > mx:
                        mx = lc
                    avg += q[y] * lc
                    q[y] *= c[y]
                    tot += q[y]
            for y in range(m):
                q[y] /= tot
            if mx - avg < tol:
                break
        Q = np.empty((n, m))
        for x in range(n):
            tot = 0.0
            for y in range(m):
                Q[x, y] = a[x, y] * q[y]
                tot += Q[x, y]
            for y in range(m):
                Q[x, y] /= tot
        return Q, q, it

    @njit(cache=True)
    def mm_solve_numba(pxz, s_of_x, h_of_x, ns, nh, cost, alpha, q0, tol, max_iter):
        nx, nz = pxz.shape
        nu = q0.shape[1]
        beta = 1.0 - alpha
        ps = np.zeros(ns)
        pz = np.zeros(nz)
        for x in range(nx):
            for z in range(nz):
                ps[s_of_x[x]] += pxz[x, z]
                pz[z] += pxz[x, z]
        q = q0.copy()
        qn = np.empty_like(q)
        puz = np.empty((nz, nu))
        phuz = np.empty((nh, nz, nu))
        lpu = np.empty((nz, nu))
        lph = np.empty((nh, nz, nu))
        acc = np.empty((ns, nu))
        it = 0
        for it in range(1, max_iter + 1):
            puz[:] = 0.0
            phuz[:] = 0.0
            for x in range(nx):
                s = s_of_x[x]
                h = h_of_x[x]
                for z in range(nz):
                    w = pxz[x, z]
                    if w == 0.0:
                        continue
                    for u in range(nu):
                        v = w * q[s, u]
                        puz[z, u] += v
                        phuz[h, z, u] += v
            for z in range(nz):
                for u in range(nu):
                    lpu[z, u] = np.log(puz[z, u] / pz[z]) if puz[z, u] > 0.0 else 0.0
                    for h in range(nh):
                        lph[h, z, u] = np.log(phuz[h, z, u] / puz[z, u]) if phuz[h, z, u] > 0.0 else 0.0
            acc[:] = 0.0
            for x in range(nx):
                s = s_of_x[x]
                h = h_of_x[x]
                for z in range(nz):
                    w = pxz[x, z]
                    if w == 0.0:
                        continue
                    for u in range(nu):
                        acc[s, u] += w * (alpha * lpu[z, u] - beta * lph[h, z, u])
            kl = 0.0
            for s in range(ns):
                if ps[s] == 0.0:
                    for u in range(nu):
                        qn[s, u] = q[s, u]
                    continue
                mx = -np.inf
                for u in range(nu):
                    if q[s, u] > 0.0:
                        v = acc[s, u] / ps[s] + beta * np.log(q[s, u]) - cost[s, u]
                        qn[s, u] = v
                        if v > mx:
                            mx = v
                tot = 0.0
                for u in range(nu):
                    if q[s, u] > 0.0:
                        qn[s, u] = np.exp(qn[s, u] - mx)
                        tot += qn[s, u]
                    else:
                        qn[s, u] = 0.0
                for u in range(nu):
                    qn[s, u] /= tot
                    if qn[s, u] > 0.0:
                        kl += ps[s] * qn[s, u] * (np.log(qn[s, u]) - np.log(q[s, u]))
            q, qn = qn, q
            if kl < tol:
                break
        return q, it

    @njit(cache=True)
    def brute_scan_numba(pxz, s_of_x, h_of_x, r_of_x, nh, active, comps, qlevel,
                         dist, dmax, hmin):
        nx, nz = pxz.shape
        ncomp, nu = comps.shape
        nact = active.shape[0]
        ny = dist.shape[1]
        ns = 0
        for x in range(nx):
            if s_of_x[x] + 1 > ns:
                ns = s_of_x[x] + 1
        rowq = comps.astype(np.float64) / qlevel
        rowqlq = np.zeros(ncomp)
        for k in range(ncomp):
            for u in range(nu):
                v = rowq[k, u]
                if v > 0.0:
                    rowqlq[k] += v * np.log(v)
        ps = np.zeros(ns)
        pz = np.zeros(nz)
        for x in range(nx):
            for z in range(nz):
                ps[s_of_x[x]] += pxz[x, z]
                pz[z] += pxz[x, z]
        sel = np.zeros(ns, dtype=np.int64)
        digits = np.zeros(nact, dtype=np.int64)
        puz = np.empty((nz, nu))
        phuz = np.empty((nh, nz, nu))
        cst = np.empty((nz, nu, ny))
        total = 1
        for j in range(nact):
            total *= ncomp
        best = np.inf
        best_idx = -1
        for idx in range(total):
            for j in range(nact):
                sel[active[j]] = digits[j]
            cst[:] = 0.0
            puz[:] = 0.0
            phuz[:] = 0.0
            for x in range(nx):
                s = s_of_x[x]
                h = h_of_x[x]
                r = r_of_x[x]
                k = sel[s]
                for z in range(nz):
                    w = pxz[x, z]
                    if w == 0.0:
                        continue
                    for u in range(nu):
                        v = w * rowq[k, u]
                        if v == 0.0:
                            continue
                        puz[z, u] += v
                        phuz[h, z, u] += v
                        for y in range(ny):
                            cst[z, u, y] += v * dist[r, y]
            dd = 0.0
            for z in range(nz):
                for u in range(nu):
                    mn = cst[z, u, 0]
                    for y in range(1, ny):
                        if cst[z, u, y] < mn:
                            mn = cst[z, u, y]
                    dd += mn
            if dd <= dmax:
                hc = 0.0
                hu = 0.0
                for z in range(nz):
                    for u in range(nu):
                        if puz[z, u] > 0.0:
                            hu += puz[z, u] * np.log(puz[z, u] / pz[z])
                            for h in range(nh):
                                if phuz[h, z, u] > 0.0:
                                    hc -= phuz[h, z, u] * np.log(phuz[h, z, u] / puz[z, u])
                if hc >= hmin:
                    rate = -hu
                    for s in range(ns):
                        rate += ps[s] * rowqlq[sel[s]]
                    if rate < best:
                        best = rate
                        best_idx = idx
            # advance mixed-radix counter
            j = 0
            while j < nact:
                digits[j] += 1
                if digits[j] < ncomp:
                    break
                digits[j] = 0
                j += 1
        return best, best_idx

    @njit(cache=True)
    def _mix_numba(z):
        z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return z ^ (z >> np.uint64(31))

    @njit(cache=True)
    def sample_rows_numba(seed, codes, cdf):
        n = codes.shape[0]
        m = cdf.shape[1]
        out = np.empty(n, dtype=np.int64)
        g = np.uint64(0x9E3779B97F4A7C15)
        sd = np.uint64(seed)
        scale = 1.0 / 9007199254740992.0
        for i in range(n):
            key = _mix_numba(sd + np.uint64(i + 1) * g)
            bits = _mix_numba(key + g)
            u = np.float64(bits >> np.uint64(11)) * scale
            row = codes[i]
            j = 0
            while j < m - 1 and cdf[row, j] <= u:
                j += 1
            out[i] = j
        return out

else:  # pragma: no cover
    ba_solve_numba = mm_solve_numba = brute_scan_numba = sample_rows_numba = None


if USE_NUMBA:
    ba_solve = ba_solve_numba
    mm_solve = mm_solve_numba
    brute_scan = brute_scan_numba
    sample_rows = sample_rows_numba
else:
    ba_solve = ba_solve_numpy
    mm_solve = mm_solve_numpy
    brute_scan = brute_scan_numpy
    sample_rows = sample_rows_numpy

BACKEND = "numba" if USE_NUMBA else "numpy"
