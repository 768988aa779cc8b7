"""Exhaustive search over quantized auxiliary channels.

Every row of p(u | s) is a composition of ``q`` into ``|U|`` parts divided by
``q``; the decoder picks the best reconstruction per (u, z). The minimum
feasible rate is an upper bound on R(D, E) that tightens as ``q`` grows.
"""
from __future__ import annotations

import itertools
import math

import numpy as np

from . import _kernels
from ._problem import LN2, Problem
from .errors import SizeError, UnsupportedModelError, ValidationError
from .source import SourceSpec

MAX_PAIRS = 4
MAX_AUX = 4
MAX_LEVEL = 32
BUDGET = 50_000_000


def compositions(total: int, parts: int) -> np.ndarray:
    """All non-negative integer vectors of length ``parts`` summing to ``total``."""
    rows = []
    for bars in itertools.combinations(range(total + parts - 1), parts - 1):
        edges = (-1,) + bars + (total + parts - 1,)
        rows.append([edges[i + 1] - edges[i] - 1 for i in range(parts)])
    return np.array(rows, dtype=np.int64).reshape(-1, parts)


def _check(prob: Problem, q: int, m: int):
    nr = prob.dist[0].shape[0]
    if prob.L != 1:
        raise UnsupportedModelError("brute force handles a single distortion constraint")
    if nr * prob.nh > MAX_PAIRS:
        raise SizeError(f"|X_r x X_h| = {nr * prob.nh} exceeds {MAX_PAIRS}")
    if not 1 <= m <= MAX_AUX:
        raise SizeError(f"aux alphabet size {m} outside 1..{MAX_AUX}")
    if not (isinstance(q, (int, np.integer)) and 1 <= q <= MAX_LEVEL):
        raise SizeError(f"quantization level {q!r} outside 1..{MAX_LEVEL}")
    count = math.comb(q + m - 1, m - 1) ** prob.active_s.size
    if count > BUDGET:
        raise SizeError(f"{count} channels exceed the enumeration budget {BUDGET}")


def brute_force_search(spec: SourceSpec, D=None, E: float | None = None, q: int = 32,
                       aux_size: int | None = None):
    """(rate in bits, channel q[s, u], decoder dec[u, z]); rate is inf if nothing is feasible."""
    D = spec.utility.bounds if D is None else (tuple(D) if np.ndim(D) else (float(D),))
    E = spec.privacy.E if E is None else float(E)
    if any(not math.isfinite(v) for v in D) or not math.isfinite(E):
        raise ValidationError("bounds must be finite")
    prob = Problem.compile(spec, D)
    m = aux_size if aux_size is not None else min(MAX_AUX, prob.function_count())
    _check(prob, q, m)
    comps = compositions(int(q), m)
    active = prob.active_s.astype(np.int64)
    best, idx = _kernels.brute_scan(prob.pxz, prob.s_of_x, prob.h_of_x, prob.r_of_x, prob.nh,
                                    active, comps, float(q), np.ascontiguousarray(prob.dist[0]),
                                    D[0] + 1e-12, E * LN2 - 1e-12)
    if idx < 0:
        return math.inf, None, None
    digits = (idx // comps.shape[0] ** np.arange(active.size)) % comps.shape[0]
    chan = np.tile(comps[0] / q, (prob.ns, 1))
    chan[active] = comps[digits] / q
    dec = prob.best_decoder(chan)
    return max(0.0, best / LN2), chan, dec


def brute_force_rde(spec: SourceSpec, D=None, E: float | None = None, q: int = 32,
                    aux_size: int | None = None) -> float:
    """Minimal rate in bits over channels with entries in multiples of 1/q."""
    return brute_force_search(spec, D, E, q, aux_size)[0]
