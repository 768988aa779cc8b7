"""Flattened arrays for the equivocation-distortion problems.

Source tuples ``x`` enumerate the attributes in schema order; ``s`` is the
encoder input (tuple over the encoded attributes), ``h`` the private tuple,
``r`` the public tuple and ``y`` the reconstruction tuple. A solution is a
pair ``(q, dec)``: channel ``q[s, u]`` and deterministic decoder
``dec[u, z] -> y``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from .source import SourceSpec

LN2 = math.log(2.0)


def _xlogy_sum(p: np.ndarray, ratio: np.ndarray) -> float:
    m = p > 0
    return float((p[m] * np.log(ratio[m])).sum())


def _index_of(shape_all, attrs_all, keep, grids) -> np.ndarray:
    if not keep:
        return np.zeros(grids[0].size, dtype=np.int64)
    dims = [shape_all[attrs_all.index(a)] for a in keep]
    return np.ravel_multi_index([grids[attrs_all.index(a)].ravel() for a in keep], dims).astype(np.int64)


@dataclass
class Problem:
    spec: SourceSpec
    pxz: np.ndarray          # (nx, nz)
    s_of_x: np.ndarray
    h_of_x: np.ndarray
    r_of_x: np.ndarray
    ns: int
    nh: int
    ny: int
    dist: list               # per constraint, (nr, ny)
    D: tuple
    ps: np.ndarray
    pz: np.ndarray

    @classmethod
    def compile(cls, spec: SourceSpec, D=None) -> "Problem":
        roles = spec.roles
        shape = spec.joint.shape[:-1]
        nz = spec.joint.shape[-1]
        pxz = np.ascontiguousarray(spec.joint.mass.reshape(-1, nz))
        grids = np.indices(shape)
        attrs = list(roles.all)
        s_of_x = _index_of(shape, attrs, roles.encoded, grids)
        h_of_x = _index_of(shape, attrs, roles.private, grids)
        r_of_x = _index_of(shape, attrs, roles.public, grids)
        size = lambda names: int(np.prod([shape[attrs.index(a)] for a in names]))
        ns, nh = size(roles.encoded), size(roles.private)
        dist = spec.distortion_matrices()
        ps = np.bincount(s_of_x, weights=pxz.sum(axis=1), minlength=ns)
        D = spec.utility.bounds if D is None else tuple(D)
        return cls(spec, pxz, s_of_x, h_of_x, r_of_x, ns, nh, dist[0].shape[1], dist, D,
                   ps, pxz.sum(axis=0))

    @property
    def L(self) -> int:
        return len(self.dist)

    @property
    def nz(self) -> int:
        return self.pxz.shape[1]

    @property
    def active_s(self) -> np.ndarray:
        return np.flatnonzero(self.ps > 0)

    @property
    def active_z(self) -> np.ndarray:
        return np.flatnonzero(self.pz > 0)

    @property
    def support_bound(self) -> int:
        """Carathéodory-style aux alphabet bound, one extra symbol per extra constraint."""
        nr = self.dist[0].shape[0]
        return nr * self.nh + 1 + self.L

    def with_bounds(self, D) -> "Problem":
        return Problem(self.spec, self.pxz, self.s_of_x, self.h_of_x, self.r_of_x, self.ns,
                       self.nh, self.ny, self.dist, tuple(D), self.ps, self.pz)

    # -- derived tables -----------------------------------------------------

    def p_r(self) -> np.ndarray:
        return np.bincount(self.r_of_x, weights=self.pxz.sum(axis=1), minlength=self.dist[0].shape[0])

    def p_rz(self) -> np.ndarray:
        out = np.zeros((self.dist[0].shape[0], self.nz))
        np.add.at(out, self.r_of_x, self.pxz)
        return out

    def function_decoder(self) -> np.ndarray:
        """All maps (active z) -> y; unsupported z decode to symbol 0."""
        az = self.active_z
        funcs = np.array(list(itertools.product(range(self.ny), repeat=az.size)), dtype=np.int64)
        dec = np.zeros((funcs.shape[0], self.nz), dtype=np.int64)
        dec[:, az] = funcs
        return dec

    def function_count(self) -> int:
        return self.ny ** self.active_z.size

    def dbar(self, dec: np.ndarray) -> list[np.ndarray]:
        """Joint-weighted distortion tables ``sum_{x in s, z} p(x,z) d(r(x), dec[u,z])``."""
        out = []
        for d in self.dist:
            per_x = np.einsum("xz,xzu->xu", self.pxz, d[self.r_of_x][:, dec.T])  # (nx, nu)
            t = np.zeros((self.ns, dec.shape[0]))
            np.add.at(t, self.s_of_x, per_x)
            out.append(t)
        return out

    def best_decoder(self, q: np.ndarray, weights=None) -> np.ndarray:
        """Per-(u, z) reconstruction minimizing the (weighted) expected distortion."""
        weights = np.ones(self.L) if weights is None else np.asarray(weights, float)
        d = sum(w * dl for w, dl in zip(weights, self.dist))
        pxzu = self.pxz[:, :, None] * q[self.s_of_x][:, None, :]
        cost = np.einsum("xzu,xy->uzy", pxzu, d[self.r_of_x])
        return cost.argmin(axis=2)

    # -- evaluation ---------------------------------------------------------

    def evaluate(self, q: np.ndarray, dec: np.ndarray) -> tuple[float, float, tuple]:
        """(rate, equivocation) in bits and per-constraint distortions."""
        pxzu = self.pxz[:, :, None] * q[self.s_of_x][:, None, :]
        puz = pxzu.sum(axis=0)
        phuz = np.zeros((self.nh,) + puz.shape)
        np.add.at(phuz, self.h_of_x, pxzu)
        equiv = -_xlogy_sum(phuz, phuz / np.where(puz > 0, puz, 1.0)[None]) / LN2
        psu = self.ps[:, None] * q
        pu_z = puz / np.where(self.pz > 0, self.pz, 1.0)[:, None]
        # I(S;U|Z) = -H(U|S) + H(U|Z) with U - S - Z
        rate = (_xlogy_sum(psu, q) - _xlogy_sum(puz, pu_z)) / LN2
        dist = tuple(float((t * q).sum()) for t in self.dbar(dec))
        return max(0.0, rate), max(0.0, equiv), dist

    def h_private_given_z(self) -> float:
        phz = np.zeros((self.nh, self.nz))
        np.add.at(phz, self.h_of_x, self.pxz)
        return max(0.0, -_xlogy_sum(phz, phz / np.where(self.pz > 0, self.pz, 1.0)[None]) / LN2)

    def h_private_given_public_z(self) -> float:
        nr = self.dist[0].shape[0]
        prhz = np.zeros((nr, self.nh, self.nz))
        np.add.at(prhz, (self.r_of_x, self.h_of_x), self.pxz)
        prz = prhz.sum(axis=1, keepdims=True)
        return max(0.0, -_xlogy_sum(prhz, prhz / np.where(prz > 0, prz, 1.0)) / LN2)

    def cleanup(self, q: np.ndarray) -> np.ndarray:
        """Clip, renormalize rows; rows of zero-probability inputs copy p(u)."""
        q = np.clip(np.asarray(q, dtype=float), 0.0, None)
        q[q.sum(axis=1) <= 0] = 1.0
        q /= q.sum(axis=1, keepdims=True)
        pu = self.ps @ q
        q[self.ps == 0] = pu / pu.sum()
        return q

    # -- simple feasible channels --------------------------------------------

    def _lp_decoder(self, weights_in: np.ndarray, dist_in: list[np.ndarray]):
        """Randomized map ``W[i, y]`` with sum_i w_i sum_y W d_l <= D_l, or None.

        ``dist_in[l][i, y]`` is the cost of output y for input class i, already
        weighted by the class probability.
        """
        n_in, ny = dist_in[0].shape
        live = weights_in > 0
        if self.L == 1:
            W = np.zeros((n_in, ny))
            W[np.arange(n_in), dist_in[0].argmin(axis=1)] = 1.0
            ok = float((W * dist_in[0]).sum()) <= self.D[0] + 1e-12
            return W if ok else None
        idx = np.flatnonzero(live)
        nv = idx.size * ny
        A_ub = np.array([dl[idx].ravel() for dl in dist_in])
        A_eq = np.kron(np.eye(idx.size), np.ones(ny))
        scale = np.array([max(D, 1e-9) for D in self.D])
        res = linprog((A_ub / scale[:, None]).sum(axis=0), A_ub=A_ub, b_ub=np.array(self.D),
                      A_eq=A_eq, b_eq=np.ones(idx.size), bounds=(0, None), method="highs")
        if res.status != 0:
            return None
        W = np.zeros((n_in, ny))
        W[:, 0] = 1.0
        W[idx] = np.clip(res.x.reshape(idx.size, ny), 0, None)
        W /= W.sum(axis=1, keepdims=True)
        if any(float((W * dl).sum()) > D + 1e-9 for dl, D in zip(dist_in, self.D)):
            return None
        return W

    def reveal_public(self):
        """Channel letting U be a (randomized) reconstruction of X_r only.

        Achieves equivocation at least H(X_h | X_r, Z). Returns (q, dec) or None
        when the distortion bounds cannot be met at all.
        """
        pr = self.p_r()
        W = self._lp_decoder(pr, [pr[:, None] * d for d in self.dist])
        if W is None:
            return None
        # r is a function of s because public attributes are encoded
        r_of_s = np.zeros(self.ns, dtype=np.int64)
        r_of_s[self.s_of_x] = self.r_of_x
        q = W[r_of_s]
        dec = np.repeat(np.arange(self.ny)[:, None], self.nz, axis=1)
        return self.cleanup(q), dec

    def reveal_nothing(self):
        """U independent of the source; decoder uses Z alone. Zero rate and leakage."""
        prz = self.p_rz()
        W = self._lp_decoder(self.pz, [np.einsum("rz,ry->zy", prz, d) for d in self.dist])
        if W is None:
            return None
        ys = [np.flatnonzero(W[z] > 1e-12) for z in range(self.nz)]
        combos = list(itertools.product(*ys))
        if len(combos) > 4096:
            return None
        dec = np.array(combos, dtype=np.int64).reshape(len(combos), self.nz)
        pu = np.prod([W[z, dec[:, z]] for z in range(self.nz)], axis=0)
        q = np.repeat((pu / pu.sum())[None], self.ns, axis=0)
        return q, dec

    # -- support handling -------------------------------------------------------

    def prune(self, q: np.ndarray, dec: np.ndarray, eps: float = 1e-13):
        """Merge symbols with identical decoder rows, then drop unused ones."""
        rows, inv = np.unique(dec, axis=0, return_inverse=True)
        if rows.shape[0] < dec.shape[0]:
            merged = np.zeros((q.shape[0], rows.shape[0]))
            np.add.at(merged.T, inv.ravel(), q.T)
            q, dec = merged, rows
        pu = self.ps @ q
        keep = pu > eps * max(pu.max(), 1.0)
        if keep.all():
            return q, dec
        return self.cleanup(q[:, keep]), dec[keep]

    def atoms(self, q: np.ndarray, dec: np.ndarray):
        """Per-symbol posterior p(s|u) and the linear coefficients of each objective."""
        pu = self.ps @ q
        post = self.ps[:, None] * q / pu[None, :]                        # (ns, nu)
        psz = np.zeros((self.ns, self.nz))
        np.add.at(psz, self.s_of_x, self.pxz)
        pz_s = psz / np.where(self.ps > 0, self.ps, 1.0)[:, None]
        pz_u = post.T @ pz_s                                              # (nu, nz)
        with np.errstate(divide="ignore", invalid="ignore"):
            kl_s = np.where(post > 0, post * np.log(post / np.where(self.ps > 0, self.ps, 1)[:, None]), 0).sum(axis=0)
            kl_z = np.where(pz_u > 0, pz_u * np.log(pz_u / np.where(self.pz > 0, self.pz, 1)[None]), 0).sum(axis=1)
        rate = (kl_s - kl_z) / LN2
        # p(h, z | u) via p(x, z | s)
        phz_s = np.zeros((self.ns, self.nh, self.nz))
        np.add.at(phz_s, (self.s_of_x, self.h_of_x), self.pxz)
        phz_s /= np.where(self.ps > 0, self.ps, 1.0)[:, None, None]
        phz_u = np.einsum("su,shz->uhz", post, phz_s)
        with np.errstate(divide="ignore", invalid="ignore"):
            equiv = -np.where(phz_u > 0, phz_u * np.log(phz_u / pz_u[:, None, :]), 0).sum(axis=(1, 2)) / LN2
        dist = [(t * q).sum(axis=0) / pu for t in self.dbar(dec)]
        return pu, post, rate, equiv, dist

    def reduce_support(self, q: np.ndarray, dec: np.ndarray, mode: str, E: float | None = None):
        """Re-weight the atoms with a vertex LP so at most ns + L + 1 symbols remain.

        ``mode`` is ``"gamma"`` (maximize equivocation) or ``"rate"`` (minimize
        rate subject to the current equivocation level).
        """
        pu, post, rate, equiv, dist = self.atoms(q, dec)
        act = self.active_s
        A_eq = post[act]
        b_eq = self.ps[act]
        cur_d = [float(pu @ dl) for dl in dist]
        A_ub = [dl for dl in dist]
        b_ub = [max(c, D) if c <= D + 1e-9 else c for c, D in zip(cur_d, self.D)]
        if mode == "gamma":
            c = -equiv
        else:
            c = rate
            A_ub.append(-equiv)
            b_ub.append(-(float(pu @ equiv) if E is None else min(float(pu @ equiv), E)))
        for presolve in (True, False):
            # presolve can declare bounds near 1e-8 infeasible; the plain simplex does not
            res = linprog(c, A_ub=np.array(A_ub), b_ub=np.array(b_ub), A_eq=A_eq, b_eq=b_eq,
                          bounds=(0, None), method="highs-ds", options={"presolve": presolve})
            if res.status == 0:
                break
        else:
            return q, dec
        w = np.clip(res.x, 0, None)
        keep = w > 1e-14
        qn = post[:, keep] * w[keep][None, :] / np.where(self.ps > 0, self.ps, 1.0)[:, None]
        return self.cleanup(qn), dec[keep]
