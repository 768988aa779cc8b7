"""Bracketed scalar root search shared by the multiplier searches."""
from __future__ import annotations

from typing import Any, Callable, NamedTuple


class Probe(NamedTuple):
    t: float
    g: float
    payload: Any


def illinois(f: Callable[[float], Probe], lo: Probe, hi: Probe, xtol: float,
             ftol: float, max_eval: int = 80) -> tuple[Probe, Probe]:
    """Shrink a bracket with ``lo.g <= 0 < hi.g`` using Illinois false position.

    Stops once ``lo.g >= -ftol`` (lo is feasible and tight) or the bracket
    is narrower than ``xtol``. Every fourth step is a plain bisection so a
    flat or discontinuous ``g`` still converges.
    """
    flo, fhi = lo.g, hi.g
    last = 0
    for k in range(max_eval):
        if lo.g >= -ftol or abs(hi.t - lo.t) <= xtol:
            break
        t = lo.t - flo * (hi.t - lo.t) / (fhi - flo)
        if k % 4 == 3 or not (min(lo.t, hi.t) < t < max(lo.t, hi.t)):
            t = 0.5 * (lo.t + hi.t)
        p = f(t)
        if p.g <= 0:
            lo, flo = p, p.g
            if last == -1:
                fhi *= 0.5
            last = -1
        else:
            hi, fhi = p, p.g
            if last == 1:
                flo *= 0.5
            last = 1
    return lo, hi
