"""Per-row sanitization with the optimal channel, and auditing.

Each row's output is drawn from the plan channel conditioned on the row's
encoded attributes, with a uniform from a counter-based SplitMix64 stream
keyed by (seed, row index). Reruns with the same seed are byte-identical
and a row's draw does not depend on any other row.

Without side information the channel outputs reconstruction tuples
directly. With side information the plan publishes the auxiliary symbol U
together with the decoder table g(u, z), since the reconstruction depends
on Z, which only the user holds.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from ._problem import LN2, Problem
from .errors import SchemaError, ValidationError
from .prob import Alphabet, Channel
from .rde import TradeoffPoint, _bounds, dispatch_special_case, rate_de
from .source import Database, SourceSpec

MAX_SEED = 2 ** 64


def _alph_doc(a: Alphabet) -> dict:
    return {"name": a.name, "symbols": list(a.symbols)}


@dataclass
class SanitizationPlan:
    """Memoryless channel from encoded-attribute tuples to published symbols.

    ``decoder`` is None when the outputs are reconstruction tuples; otherwise
    ``decoder[u, z]`` indexes ``reconstruction`` (the user's g(U, Z)).
    """

    operating_point: TradeoffPoint
    channel: Channel
    seed: int = 0
    decoder: np.ndarray | None = None
    reconstruction: tuple = ()
    side_info: Alphabet | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (isinstance(self.seed, (int, np.integer)) and 0 <= int(self.seed) < MAX_SEED):
            raise ValidationError(f"seed must be an unsigned 64-bit integer, got {self.seed!r}")
        self.seed = int(self.seed)

    @property
    def publishes_aux(self) -> bool:
        return self.decoder is not None

    def to_dict(self) -> dict:
        op = self.operating_point
        doc = {
            "seed": self.seed,
            "operating_point": {"D": list(op.D), "E": op.E, "R": op.R},
            "inputs": [_alph_doc(a) for a in self.channel.input_axes],
            "outputs": [_alph_doc(a) for a in self.channel.output_axes],
            "channel": self.channel.matrix().tolist(),
            "meta": self.meta,
        }
        if self.decoder is not None:
            doc["decoder"] = self.decoder.tolist()
            doc["reconstruction"] = [list(t) for t in self.reconstruction]
            doc["side_info"] = _alph_doc(self.side_info)
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "SanitizationPlan":
        try:
            ins = [Alphabet(a["name"], a["symbols"]) for a in doc["inputs"]]
            outs = [Alphabet(a["name"], a["symbols"]) for a in doc["outputs"]]
            ch = Channel(ins, outs, np.asarray(doc["channel"], dtype=float), tol=1e-9)
            op = doc["operating_point"]
            point = TradeoffPoint(tuple(op["D"]), float(op["E"]), float(op["R"]), True)
            dec = side = None
            rec = ()
            if "decoder" in doc:
                dec = np.asarray(doc["decoder"], dtype=np.int64)
                rec = tuple(tuple(t) for t in doc["reconstruction"])
                side = Alphabet(doc["side_info"]["name"], doc["side_info"]["symbols"])
            return cls(point, ch, int(doc["seed"]), dec, rec, side, dict(doc.get("meta", {})))
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed plan document: {exc}") from None

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> "SanitizationPlan":
        try:
            return cls.from_dict(json.loads(text))
        except json.JSONDecodeError as exc:
            raise ValidationError(f"plan is not valid JSON: {exc}") from None


@dataclass
class AuditReport:
    distortion: tuple
    targets: tuple
    equivocation: float
    target_E: float
    n: int
    meta: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"distortion": list(self.distortion), "D": list(self.targets),
                "equivocation": self.equivocation, "E": self.target_E, "n": self.n,
                "meta": self.meta}


def _encoded_axes(spec: SourceSpec) -> list[Alphabet]:
    return [spec.alphabet(a) for a in spec.roles.encoded]


def _channel_over_encoded(spec: SourceSpec, sol) -> np.ndarray:
    """Solution channel re-indexed by encoded tuples (it only depends on them)."""
    prob = Problem.compile(spec)
    q = np.zeros((prob.ns, sol.aux_alphabet.size))
    full = sol.channel.matrix()
    q[prob.s_of_x] = full
    return q


def synthesize_channel(spec: SourceSpec, D=None, E: float | None = None, seed: int = 0,
                       **kw) -> SanitizationPlan:
    """Plan realizing the rate-minimizing channel at (D, E)."""
    E = spec.privacy.E if E is None else float(E)
    R, sol = rate_de(spec, D, E, **kw)
    point = TradeoffPoint(_bounds(spec, D), E, R, True, sol)
    q = _channel_over_encoded(spec, sol)
    ins = _encoded_axes(spec)
    meta = {"case": dispatch_special_case(spec), "rate": R, "equivocation": sol.equivocation,
            "distortion": list(sol.distortion), "backend": _kernels.BACKEND}
    in_shape = tuple(a.size for a in ins)
    if spec.side_axis.size == 1 or meta["case"] in ("census-K1", "no-side-info"):
        # fold the decoder in: outputs are reconstruction tuples
        ny = len(sol.reconstruction)
        z = int(np.argmax(spec.joint.mass.reshape(-1, spec.side_axis.size).sum(axis=0)))
        fold = np.zeros((sol.aux_alphabet.size, ny))
        fold[np.arange(sol.aux_alphabet.size), sol.decoder[:, z]] = 1.0
        kernel = (q @ fold).reshape(in_shape + tuple(a.size for a in spec.reconstruction))
        ch = Channel(ins, spec.reconstruction, kernel, tol=1e-9)
        return SanitizationPlan(point, ch, seed, meta=meta)
    kernel = q.reshape(in_shape + (sol.aux_alphabet.size,))
    ch = Channel(ins, [sol.aux_alphabet], kernel, tol=1e-9)
    return SanitizationPlan(point, ch, seed, sol.decoder.copy(), sol.reconstruction,
                            spec.side_axis, meta=meta)


def _input_codes(db: Database, axes) -> np.ndarray:
    cols = []
    for a in axes:
        try:
            j = db.names.index(a.name)
        except ValueError:
            raise SchemaError(f"database lacks column {a.name!r} required by the plan") from None
        if db.schema[j] != a:
            raise SchemaError(f"column {a.name!r} alphabet differs from the plan's")
        cols.append(db.codes[:, j])
    if not cols:
        return np.zeros(db.n, dtype=np.int64)
    return np.ravel_multi_index(cols, [a.size for a in axes]).astype(np.int64)


def sanitize(db: Database, plan: SanitizationPlan) -> Database:
    """Apply the plan row by row; output columns are the channel outputs."""
    codes = _input_codes(db, plan.channel.input_axes)
    cdf = np.cumsum(plan.channel.matrix(), axis=1)
    cdf[:, -1] = 1.0
    out = _kernels.sample_rows(np.uint64(plan.seed), np.ascontiguousarray(codes),
                               np.ascontiguousarray(cdf))
    shape = [a.size for a in plan.channel.output_axes]
    cols = np.stack(np.unravel_index(out, shape), axis=1) if db.n else np.zeros((0, len(shape)))
    return Database(plan.channel.output_axes, cols.astype(np.int64))


def _reconstructed(sdb: Database, spec: SourceSpec, db: Database,
                   plan: SanitizationPlan | None) -> np.ndarray:
    """Reconstruction tuple index per row."""
    if plan is not None and plan.publishes_aux:
        u_name = plan.channel.output_axes[0].name
        u = sdb.column(u_name)
        z_name = plan.side_info.name
        if z_name not in db.names:
            raise SchemaError(f"decoding needs side-information column {z_name!r} in the database")
        return plan.decoder[u, db.column(z_name)]
    return _input_codes(sdb, spec.reconstruction)


def _model_channel(spec: SourceSpec, db: Database, sdb: Database, plan, y: np.ndarray):
    """p(y | s, z) from the plan, or estimated from row pairs when no plan is given."""
    ns = int(np.prod([a.size for a in _encoded_axes(spec)]))
    nz, ny = spec.side_axis.size, len(spec.reconstruction_tuples())
    if plan is None:
        s = _input_codes(db, _encoded_axes(spec))
        counts = np.zeros((ns, ny))
        np.add.at(counts, (s, y), 1.0)
        tot = counts.sum(axis=1, keepdims=True)
        W = np.where(tot > 0, counts / np.where(tot > 0, tot, 1), 1.0 / ny)
        return np.repeat(W[:, None, :], nz, axis=1), "empirical"
    q = plan.channel.matrix()
    if not plan.publishes_aux:
        return np.repeat(q[:, None, :], nz, axis=1), "plan"
    fold = np.zeros((q.shape[1], nz, ny))
    for z in range(nz):
        fold[np.arange(q.shape[1]), z, plan.decoder[:, z]] = 1.0
    return np.einsum("su,uzy->szy", q, fold), "plan"


def audit(db: Database, sdb: Database, spec: SourceSpec,
          plan: SanitizationPlan | None = None) -> AuditReport:
    """Empirical distortions plus model equivocation H(X_h | Xhat_r, Z)."""
    if db.n != sdb.n:
        raise ValidationError(f"row counts differ: {db.n} original vs {sdb.n} sanitized")
    if db.n == 0:
        raise ValidationError("cannot audit an empty database")
    r = _input_codes(db, [spec.alphabet(a) for a in spec.roles.public])
    y = _reconstructed(sdb, spec, db, plan)
    dist = tuple(float(d[r, y].mean()) for d in spec.distortion_matrices())
    prob = Problem.compile(spec)
    W, source = _model_channel(spec, db, sdb, plan, y)
    # p(h, y, z) = sum_x p(x, z) W(y | s(x), z)
    pxzy = prob.pxz[:, :, None] * W[prob.s_of_x]
    phyz = np.zeros((prob.nh,) + pxzy.shape[1:])
    np.add.at(phyz, prob.h_of_x, pxzy)
    pyz = phyz.sum(axis=0, keepdims=True)
    m = phyz > 0
    equiv = -float((phyz[m] * np.log((phyz / np.where(pyz > 0, pyz, 1.0))[m])).sum()) / LN2
    meta = {"channel": source, "label": "H(X_h | Xhat_r, Z)"}
    if plan is not None:
        meta["seed"] = plan.seed
    return AuditReport(dist, spec.utility.bounds, max(0.0, equiv), spec.privacy.E, db.n, meta)
