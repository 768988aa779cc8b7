"""Classical rate-distortion function of a discrete memoryless source."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import _kernels
from .errors import InfeasibleDistortionError, ValidationError
from ._search import Probe, illinois
from .prob import Alphabet, Channel, JointPmf

LN2 = math.log(2.0)


@dataclass(frozen=True)
class DistortionMatrix:
    """``values[i, j]`` is the cost of reproducing source symbol i as j."""

    values: np.ndarray
    reconstruction: Alphabet | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 2 or 0 in v.shape:
            raise ValidationError("distortion matrix must be a non-empty 2-D array")
        if not np.all(np.isfinite(v)) or np.any(v < 0):
            raise ValidationError("distortion entries must be finite and non-negative")
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        if self.reconstruction is not None and self.reconstruction.size != v.shape[1]:
            raise ValidationError("reconstruction alphabet size does not match columns")

    @classmethod
    def hamming(cls, n: int, reconstruction: Alphabet | None = None) -> "DistortionMatrix":
        return cls(1.0 - np.eye(n), reconstruction)

    @property
    def shape(self):
        return self.values.shape

    def output_alphabet(self) -> Alphabet:
        if self.reconstruction is not None:
            return self.reconstruction
        return Alphabet("xhat", [str(j) for j in range(self.values.shape[1])])


@dataclass
class RDPoint:
    D: float
    R: float
    distortion: float
    channel: Channel | None
    slope: float
    iterations: int = 0
    error: str | None = None
    meta: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.error is None


def _as_matrix(d) -> DistortionMatrix:
    return d if isinstance(d, DistortionMatrix) else DistortionMatrix(np.asarray(d, dtype=float))


def _prior_vector(prior: JointPmf, d: DistortionMatrix) -> np.ndarray:
    p = prior.mass.ravel()
    if p.size != d.shape[0]:
        raise ValidationError(f"prior has {p.size} symbols, distortion matrix has {d.shape[0]} rows")
    return p


def distortion_bounds(prior: JointPmf, d) -> tuple[float, float]:
    """(D_min, D_max): best per-symbol distortion and best constant output."""
    d = _as_matrix(d)
    p = _prior_vector(prior, d)
    v = d.values
    return float(p @ v.min(axis=1)), float((p @ v).min())


def mutual_information_bits(p: np.ndarray, Q: np.ndarray) -> float:
    """I(X; Xhat) for input pmf ``p`` and channel matrix ``Q``."""
    out = p @ Q
    joint = p[:, None] * Q
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(joint > 0, joint * np.log(Q / out[None, :]), 0.0)
    return max(0.0, float(terms.sum()) / LN2)


class _BASolver:
    """Slope-parametrized solves with warm starts on the active alphabet."""

    def __init__(self, p, v, tol, max_iter):
        self.p = p
        self.v = v - v.min(axis=1, keepdims=True)
        self.v_raw = v
        self.tol = tol
        self.max_iter = max_iter
        self.q = np.full(v.shape[1], 1.0 / v.shape[1])
        self.iterations = 0

    def solve(self, s: float):
        a = np.exp(s * self.v)
        q0 = 0.999 * self.q + 0.001 / self.q.size  # keep every column alive
        Q, q, it = _kernels.ba_solve(self.p, a, q0, self.tol, self.max_iter)
        self.iterations += int(it)
        self.q = q
        return Q, float(self.p @ (Q * self.v_raw).sum(axis=1))


def _full_channel(prior: JointPmf, d: DistortionMatrix, active, Q_active) -> Channel:
    v = d.values
    Q = np.zeros(v.shape)
    Q[np.arange(v.shape[0]), v.argmin(axis=1)] = 1.0
    Q[active] = Q_active
    out = d.output_alphabet()
    if out.name in prior.names:
        out = out.renamed(out.name + "_hat")
    return Channel(prior.axes, [out], Q.reshape(prior.shape + (v.shape[1],)), tol=1e-9)


def rate_distortion(prior: JointPmf, d, D: float, tol: float = 1e-12,
                    max_iter: int = 100_000) -> RDPoint:
    """R(D) in bits together with an achieving test channel.

    Brackets the Lagrange slope, bisects it (Illinois variant on the slope),
    and finally time-shares the two bracketing channels so the achieved
    distortion hits ``D``.
    """
    d = _as_matrix(d)
    p_full = _prior_vector(prior, d)
    d_min, d_max = distortion_bounds(prior, d)
    if D < d_min - 1e-12:
        raise InfeasibleDistortionError(f"D={D} is below the minimum achievable {d_min}")
    v = d.values
    if D >= d_max:
        j = int(np.argmin(p_full @ v))
        Q = np.zeros(v.shape)
        Q[:, j] = 1.0
        ch = _full_channel(prior, d, np.ones(v.shape[0], bool), Q)
        return RDPoint(D, 0.0, d_max, ch, 0.0)

    active = p_full > 0
    p = p_full[active] / p_full[active].sum()
    solver = _BASolver(p, v[active], tol, max_iter)

    def f(s):
        Q, dist = solver.solve(s)
        return Probe(s, dist - D, (Q, dist))

    # slope bracket: lo gives distortion <= D, hi gives > D
    first = f(-1.0)
    lo = hi = None
    if first.g <= 0:
        lo = first
        while hi is None:
            pr = f(lo.t * 0.5)
            if pr.g > 0:
                hi = pr
            elif abs(pr.t) < 1e-12:
                lo = hi = pr  # numerically at D_max
            else:
                lo = pr
    else:
        hi = first
        while lo is None:
            pr = f(hi.t * 2.0)
            if pr.g <= 0 or pr.t < -1e7:
                lo = pr
            else:
                hi = pr

    if lo is not hi:
        lo, hi = illinois(f, lo, hi, xtol=1e-14 * max(1.0, abs(lo.t)), ftol=1e-13, max_eval=200)
    s_used = lo.t
    Q, dist = lo.payload
    if lo is not hi and dist < D < hi.payload[1]:
        theta = (hi.payload[1] - D) / (hi.payload[1] - dist)
        Q = theta * Q + (1.0 - theta) * hi.payload[0]
        dist = float(p @ (Q * v[active]).sum(axis=1))
    ch = _full_channel(prior, d, active, Q)
    rate = mutual_information_bits(p, Q)
    return RDPoint(D, rate, dist, ch, s_used / LN2, solver.iterations)


def rd_curve(prior: JointPmf, d, grid: Sequence[float], **kw) -> list[RDPoint]:
    """One point per grid value; infeasible values yield an error entry."""
    out = []
    for D in grid:
        try:
            out.append(rate_distortion(prior, d, float(D), **kw))
        except InfeasibleDistortionError as exc:
            out.append(RDPoint(float(D), math.nan, math.nan, None, math.nan, error=str(exc)))
    return out
