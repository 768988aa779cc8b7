"""Equivocation-distortion function and rate-distortion-equivocation region.

The auxiliary variable U ranges over decoder functions z -> reconstruction,
so the decoder is fixed (``g(u, z) = u(z)``). This loses nothing: merging
symbols of U that decode identically can only raise equivocation and lower
rate. With the decoder fixed, maximal equivocation and minimal rate are
convex programs in the channel p(u | encoder input), solved exactly. When
the function alphabet is too large, an alternating decoder/channel search
with seeded restarts takes over.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from . import _kernels
from ._conic import ConicModel
from ._mm import mm_gamma, mm_rate
from ._problem import Problem
from .errors import (InfeasibleDistortionError, InfeasiblePrivacyError, RDPrivacyError,
                     UnsupportedModelError, ValidationError)
from .prob import (Alphabet, Channel, JointPmf, attach_channel, conditional_entropy,
                   mutual_information)
from .rd import rate_distortion
from .source import SourceSpec

log = logging.getLogger(__name__)

CASES = ("census-K1", "no-side-info", "wyner-ziv-markov", "general")
METHODS = ("auto", "conic", "mm", "alternating")
EQUIV_SLACK = 1e-6      # E above Gamma(D) by more than this is infeasible
FEAS_TOL = 1e-7         # accepted constraint violation of a returned channel
MAX_FUNCTIONS = 512
DEFAULT_RESTARTS = 16
REDUCE_TOL = FEAS_TOL   # objective loss accepted when cutting support to the bound


@dataclass
class AuxChannelSolution:
    """Channel p(u | attributes) with its decoder and achieved quantities.

    ``decoder[u, z]`` indexes ``reconstruction``, the list of public
    reconstruction tuples.
    """

    aux_alphabet: Alphabet
    channel: Channel
    decoder: np.ndarray
    reconstruction: tuple
    rate: float
    equivocation: float
    distortion: tuple
    meta: dict = field(default_factory=dict)

    def decode(self, u: int, z: int = 0) -> tuple[str, ...]:
        return self.reconstruction[int(self.decoder[u, z])]

    def recompute(self, spec: SourceSpec) -> tuple[float, float, tuple]:
        """Rate, equivocation and distortions recomputed from the stored channel."""
        joint = attach_channel(spec.joint, self.channel)
        u = self.aux_alphabet.name
        attrs, z = spec.roles.all, spec.side_axis.name
        rate = mutual_information(joint, attrs, u) - mutual_information(joint, z, u)
        equiv = conditional_entropy(joint, spec.roles.private, (z, u))
        prob = Problem.compile(spec)
        mass = joint.mass.reshape(prob.pxz.shape + (self.aux_alphabet.size,))
        dist = tuple(float(np.einsum("xzu,xzu->", mass, d[prob.r_of_x][:, self.decoder.T]))
                     for d in prob.dist)
        return rate, equiv, dist

    def verify(self, spec: SourceSpec, tol: float = 1e-8) -> bool:
        rate, equiv, dist = self.recompute(spec)
        return (abs(rate - self.rate) <= tol and abs(equiv - self.equivocation) <= tol
                and all(abs(a - b) <= tol for a, b in zip(dist, self.distortion)))

    def to_dict(self) -> dict:
        return {
            "aux_symbols": list(self.aux_alphabet.symbols),
            "channel": self.channel.matrix().tolist(),
            "channel_inputs": list(self.channel.input_names),
            "decoder": [[",".join(self.decode(u, z)) for z in range(self.decoder.shape[1])]
                        for u in range(self.decoder.shape[0])],
            "rate": self.rate,
            "equivocation": self.equivocation,
            "distortion": list(self.distortion),
        }


class RDEResult(NamedTuple):
    value: float
    solution: AuxChannelSolution


@dataclass
class TradeoffPoint:
    D: tuple
    E: float
    R: float
    feasible: bool
    solution: AuxChannelSolution | None = None
    reason: str | None = None


# ---------------------------------------------------------------------------
# dispatch

def _z_constant(spec: SourceSpec) -> bool:
    pz = spec.joint.mass.reshape(-1, spec.side_axis.size).sum(axis=0)
    return int((pz > 0).sum()) <= 1


def dispatch_special_case(spec: SourceSpec) -> str:
    """Tag selecting the solver path.

    census-K1: a single attribute, no side information and one constraint,
    solved through the classical R(D). no-side-info: Z constant.
    wyner-ziv-markov: X_h - X_r - Z holds. general: everything else.
    """
    z_const = _z_constant(spec)
    if spec.K == 1 and z_const and spec.utility.L == 1:
        return "census-K1"
    if z_const:
        return "no-side-info"
    joint = spec.joint
    priv_only = tuple(a for a in spec.roles.private if a not in spec.roles.public)
    if not priv_only:
        return "wyner-ziv-markov"
    leak = mutual_information(joint, priv_only, spec.side_axis.name, spec.roles.public)
    return "wyner-ziv-markov" if leak <= 1e-12 else "general"


# ---------------------------------------------------------------------------
# internals

def _bounds(spec: SourceSpec, D) -> tuple[float, ...]:
    if D is None:
        return spec.utility.bounds
    if np.ndim(D) == 0:
        D = (float(D),)
    D = tuple(float(v) for v in D)
    if len(D) == 1 and spec.utility.L > 1:
        D = D * spec.utility.L
    if len(D) != spec.utility.L:
        raise ValidationError(f"expected {spec.utility.L} distortion values, got {len(D)}")
    if any(not math.isfinite(v) or v < 0 for v in D):
        raise ValidationError(f"distortion bounds must be finite and >= 0, got {D}")
    return D


def _aux_name(spec: SourceSpec) -> str:
    name = "U"
    while name in spec.joint.names:
        name = "_" + name
    return name


def _package(prob: Problem, q: np.ndarray, dec: np.ndarray, meta: dict) -> AuxChannelSolution:
    spec = prob.spec
    rate, equiv, dist = prob.evaluate(q, dec)
    u = Alphabet(_aux_name(spec), [f"u{k}" for k in range(dec.shape[0])])
    kernel = q[prob.s_of_x].reshape(spec.joint.shape[:-1] + (dec.shape[0],))
    ch = Channel(spec.attribute_alphabets, [u], kernel, tol=1e-9)
    meta = dict(meta, aux_size=int(dec.shape[0]), support_bound=prob.support_bound,
                backend=_kernels.BACKEND)
    if prob.L > 1:
        meta["support_bound_heuristic"] = True
    return AuxChannelSolution(u, ch, np.asarray(dec, dtype=np.int64),
                              tuple(spec.reconstruction_tuples()), rate, equiv, dist, meta)


def _feasible(prob: Problem, q, dec, E: float | None = None) -> bool:
    _, h, dist = prob.evaluate(q, dec)
    if any(d > D + FEAS_TOL for d, D in zip(dist, prob.D)):
        return False
    return E is None or h >= E - FEAS_TOL


def _finish(prob: Problem, q, dec, mode: str, E: float | None = None):
    q, dec = prob.prune(q, dec)
    if dec.shape[0] > prob.support_bound:
        q2, dec2 = prob.reduce_support(q, dec, mode, E)
        if _feasible(prob, q2, dec2, E) and dec2.shape[0] <= dec.shape[0]:
            r0, h0, _ = prob.evaluate(q, dec)
            r1, h1, _ = prob.evaluate(q2, dec2)
            # the LP re-weights atoms of a solver output, so allow solver-level noise
            better = h1 >= h0 - REDUCE_TOL if mode == "gamma" else r1 <= r0 + REDUCE_TOL
            if better:
                q, dec = prob.prune(q2, dec2)
    return q, dec


def _resolve_method(spec, method, aux_size, max_functions, prob) -> str:
    if method not in METHODS:
        raise ValidationError(f"unknown method {method!r}; use one of {METHODS}")
    case = dispatch_special_case(spec)
    if method == "auto":
        if case == "census-K1" and aux_size is None:
            return "rd"
        method = "conic"
    if method in ("conic", "mm") and (aux_size is not None or prob.function_count() > max_functions):
        method = "alternating"
    if method == "mm" and prob.L != 1:
        raise UnsupportedModelError("the MM path supports a single distortion constraint")
    return method


def _alternating(prob: Problem, mode: str, E: float | None, m: int, restarts: int, seed: int):
    """Alternate decoder (per-(u,z) best reconstruction) and channel solves."""
    rng = np.random.default_rng(seed)
    sign = 1.0 if mode == "gamma" else -1.0
    best, best_val = None, -math.inf
    for _ in range(restarts):
        dec = rng.integers(0, prob.ny, size=(m, prob.nz))
        val_prev = -math.inf
        for _ in range(50):
            model = ConicModel(prob, dec)
            q = model.max_equivocation(prob.D) if mode == "gamma" else model.min_rate(prob.D, E)
            if q is None or not _feasible(prob, q, dec, E):
                break
            r, h, _ = prob.evaluate(q, dec)
            val = sign * (h if mode == "gamma" else r)
            if val <= val_prev + 1e-12:
                break
            val_prev = val
            if val > best_val:
                best, best_val = (q, dec), val
            new_dec = prob.best_decoder(q)
            if np.array_equal(new_dec, dec):
                break
            dec = new_dec
    return best


def _gamma_core(prob: Problem, method: str, aux_size, restarts, seed):
    """(q, dec, meta) maximizing equivocation, or raise if D is infeasible."""
    pub = prob.reveal_public()
    if pub is None:
        raise InfeasibleDistortionError(f"distortion bounds {prob.D} cannot be met")
    nothing = prob.reveal_nothing()
    if nothing is not None and _feasible(prob, *nothing):
        return nothing[0], nothing[1], {"path": "zero-leakage"}
    cands = [(pub, "reveal-public")]
    if method == "alternating":
        m = aux_size or prob.support_bound
        res = _alternating(prob, "gamma", None, m, restarts, seed)
        if res is not None:
            cands.append((res, "alternating"))
    else:
        dec = prob.function_decoder()
        q = None
        if method == "mm":
            q = mm_gamma(prob, dec)
        if q is None:
            model = ConicModel(prob, dec)
            q = model.max_equivocation(prob.D)
            if q is None or not _feasible(prob, q, dec):
                q = model.max_equivocation(prob.D, slack=1e-9)
        if q is not None:
            cands.append(((q, dec), method))
    feas = [(prob.evaluate(*c)[1], c, tag) for c, tag in cands if _feasible(prob, *c)]
    h, (q, dec), tag = max(feas, key=lambda t: t[0])
    q, dec = _finish(prob, q, dec, "gamma")
    return q, dec, {"path": tag}


def _rd_solution(prob: Problem, spec: SourceSpec):
    d = prob.dist[0]
    prior_axes = spec.attribute_alphabets
    prior = JointPmf(prior_axes, spec.joint.mass.sum(axis=-1), tol=1e-9)
    pt = rate_distortion(prior, d, prob.D[0])
    q = prob.cleanup(pt.channel.matrix())
    dec = np.repeat(np.arange(prob.ny)[:, None], prob.nz, axis=1)
    return q, dec, {"path": "rate-distortion", "slope": pt.slope}


def _prepare(spec, D, method, aux_size, max_functions):
    prob = Problem.compile(spec, _bounds(spec, D))
    method = _resolve_method(spec, method, aux_size, max_functions, prob)
    meta = {"case": dispatch_special_case(spec), "method": method}
    return prob, method, meta


# ---------------------------------------------------------------------------
# public API

def gamma_of_d(spec: SourceSpec, D=None, *, method: str = "auto", aux_size: int | None = None,
               restarts: int = DEFAULT_RESTARTS, seed: int = 0,
               max_functions: int = MAX_FUNCTIONS) -> RDEResult:
    """Maximal equivocation H(X_h | U, Z) in bits under the distortion bounds."""
    prob, method, meta = _prepare(spec, D, method, aux_size, max_functions)
    if method == "rd":
        q, dec, extra = _rd_solution(prob, spec)
    else:
        q, dec, extra = _gamma_core(prob, method, aux_size, restarts, seed)
    sol = _package(prob, q, dec, dict(meta, **extra))
    return RDEResult(sol.equivocation, sol)


def rate_de(spec: SourceSpec, D=None, E: float | None = None, *, method: str = "auto",
            aux_size: int | None = None, restarts: int = DEFAULT_RESTARTS, seed: int = 0,
            max_functions: int = MAX_FUNCTIONS, gamma: RDEResult | None = None) -> RDEResult:
    """Minimal rate I(X;U) - I(Z;U) in bits meeting distortion and equivocation bounds.

    ``gamma`` may pass a precomputed Gamma(D) result for the same bounds.
    """
    E = spec.privacy.E if E is None else float(E)
    if not (math.isfinite(E) and E >= 0):
        raise ValidationError(f"equivocation bound must be finite and >= 0, got {E!r}")
    prob, method, meta = _prepare(spec, D, method, aux_size, max_functions)
    if gamma is None:
        gamma = gamma_of_d(spec, prob.D, method=meta["method"] if method != "rd" else "auto",
                           aux_size=aux_size, restarts=restarts, seed=seed,
                           max_functions=max_functions)
    g = gamma.value
    if E > g + EQUIV_SLACK:
        raise InfeasiblePrivacyError(f"E={E} exceeds the maximal equivocation {g:.9f} at D={prob.D}")
    meta["gamma"] = g
    if method == "rd":
        q, dec, extra = _rd_solution(prob, spec)
        sol = _package(prob, q, dec, dict(meta, **extra))
        return RDEResult(sol.rate, sol)

    E_eff = min(E, g)
    nothing = prob.reveal_nothing()
    if nothing is not None and _feasible(prob, *nothing):
        sol = _package(prob, *nothing, dict(meta, path="zero-leakage"))
        return RDEResult(sol.rate, sol)
    gsol = gamma.solution
    gq = gsol.channel.matrix()[_first_rows(prob)]
    cands = [((prob.cleanup(gq), gsol.decoder), "gamma")]
    pub = prob.reveal_public()
    if pub is not None:
        cands.append((pub, "reveal-public"))
    if method == "alternating":
        m = aux_size or prob.support_bound
        res = _alternating(prob, "rate", E_eff, m, restarts, seed)
        if res is not None:
            cands.append((res, "alternating"))
    else:
        dec = prob.function_decoder()
        q = mm_rate(prob, dec, E_eff) if method == "mm" else None
        if q is None:
            model = ConicModel(prob, dec)
            q = model.min_rate(prob.D, E_eff)
            if q is None or not _feasible(prob, q, dec, E_eff):
                q = model.min_rate(prob.D, E_eff, slack=1e-9)
        if q is not None:
            cands.append(((q, dec), method))
    feas = [(prob.evaluate(*c)[0], c, tag) for c, tag in cands if _feasible(prob, *c, E_eff)]
    if not feas:
        raise InfeasiblePrivacyError(f"no channel reaches E={E} at D={prob.D}")
    r, (q, dec), tag = min(feas, key=lambda t: t[0])
    q, dec = _finish(prob, q, dec, "rate", E_eff)
    sol = _package(prob, q, dec, dict(meta, path=tag))
    return RDEResult(sol.rate, sol)


def _first_rows(prob: Problem) -> np.ndarray:
    """Map encoder input s to one source tuple x carrying it."""
    first = np.zeros(prob.ns, dtype=np.int64)
    first[prob.s_of_x[::-1]] = np.arange(prob.s_of_x.size)[::-1]
    return first


def tradeoff_region(spec: SourceSpec, D_grid: Sequence, E_grid: Sequence[float],
                    **kw) -> list[TradeoffPoint]:
    """A TradeoffPoint per (D, E) pair; infeasible pairs are flagged."""
    D_grid, E_grid = list(D_grid), [float(e) for e in E_grid]
    if not D_grid or not E_grid:
        raise ValidationError("tradeoff grids must be non-empty")
    out = []
    for D in D_grid:
        Dv = _bounds(spec, D)
        try:
            gamma = gamma_of_d(spec, Dv, **kw)
        except InfeasibleDistortionError as exc:
            out.extend(TradeoffPoint(Dv, E, math.nan, False, reason=str(exc)) for E in E_grid)
            continue
        for E in E_grid:
            try:
                r, sol = rate_de(spec, Dv, E, gamma=gamma, **kw)
                out.append(TradeoffPoint(Dv, E, r, True, sol))
            except RDPrivacyError as exc:
                out.append(TradeoffPoint(Dv, E, math.nan, False, reason=str(exc)))
    return out
