"""Database source model: attribute roles, requirements, model files, CSV."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np
import yaml

from .errors import CSVRowError, SchemaError, ValidationError
from .prob import LOAD_TOL, Alphabet, JointPmf, normalize_exact

NO_SIDE_INFO = "_no_side_info"
DISTORTIONS = ("hamming", "squared")


@dataclass(frozen=True)
class AttributeRoles:
    all: tuple[str, ...]
    public: tuple[str, ...]
    private: tuple[str, ...]
    encoded: tuple[str, ...] = ()

    def __post_init__(self):
        for name in ("all", "public", "private", "encoded"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
        if not self.encoded:
            object.__setattr__(self, "encoded", self.all)
        every = set(self.all)
        if len(every) != len(self.all):
            raise ValidationError("attribute names must be unique")
        for label, group in (("public", self.public), ("private", self.private),
                             ("encoded", self.encoded)):
            if len(set(group)) != len(group):
                raise ValidationError(f"{label} set repeats an attribute")
            unknown = set(group) - every
            if unknown:
                raise ValidationError(f"{label} set names unknown attributes {sorted(unknown)}")
        if set(self.public) | set(self.private) != every:
            raise ValidationError("public and private sets must together cover every attribute")
        if not self.public or not self.private:
            raise ValidationError("public and private sets must be non-empty")
        if not set(self.public) <= set(self.encoded):
            raise ValidationError("encoded set must contain every public attribute")

    @property
    def K(self) -> int:
        return len(self.all)


@dataclass(frozen=True)
class DistortionTable:
    rows: tuple[str, ...]
    cols: tuple[str, ...]
    matrix: tuple[tuple[float, ...], ...]

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.shape != (len(self.rows), len(self.cols)):
            raise ValidationError("distortion table shape does not match its labels")
        if not np.all(np.isfinite(m)) or np.any(m < 0):
            raise ValidationError("distortion table entries must be finite and non-negative")
        object.__setattr__(self, "rows", tuple(map(str, self.rows)))
        object.__setattr__(self, "cols", tuple(map(str, self.cols)))
        object.__setattr__(self, "matrix", tuple(tuple(float(v) for v in r) for r in m))

    def lookup(self, a: str, b: str) -> float:
        try:
            return self.matrix[self.rows.index(a)][self.cols.index(b)]
        except ValueError:
            raise ValidationError(f"distortion table has no entry for ({a!r}, {b!r})") from None


@dataclass(frozen=True)
class UtilityConstraint:
    """Average distortion bound on a function of some public attributes.

    ``f`` maps tuples of symbols (over ``attributes``) to value labels; None
    means identity. ``g`` is ``"hamming"``, ``"squared"`` or a table over
    value labels.
    """

    D: float
    g: str | DistortionTable = "hamming"
    attributes: tuple[str, ...] = ()
    f: Mapping[tuple[str, ...], str] | None = None

    def __post_init__(self):
        object.__setattr__(self, "attributes", tuple(self.attributes))
        if not (isinstance(self.D, (int, float)) and math.isfinite(self.D) and self.D >= 0):
            raise ValidationError(f"distortion bound must be finite and >= 0, got {self.D!r}")
        object.__setattr__(self, "D", float(self.D))
        if isinstance(self.g, str) and self.g not in DISTORTIONS:
            raise ValidationError(f"unknown distortion {self.g!r}; use {DISTORTIONS} or a table")
        if self.f is not None:
            object.__setattr__(self, "f", {tuple(map(str, k)): str(v) for k, v in self.f.items()})

    def value(self, symbols: tuple[str, ...]):
        if self.f is None:
            return symbols
        try:
            return self.f[symbols]
        except KeyError:
            raise ValidationError(f"utility function undefined on {symbols}") from None

    def cost(self, a, b) -> float:
        if isinstance(self.g, DistortionTable):
            key = lambda v: v if isinstance(v, str) else ",".join(v)
            return self.g.lookup(key(a), key(b))
        if isinstance(a, str):
            a, b = (a,), (b,)
        if self.g == "hamming":
            return float(sum(x != y for x, y in zip(a, b)))
        try:
            return float(sum((float(x) - float(y)) ** 2 for x, y in zip(a, b)))
        except ValueError:
            raise ValidationError("squared distortion needs numeric symbol labels") from None


@dataclass(frozen=True)
class UtilitySpec:
    constraints: tuple[UtilityConstraint, ...]

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        if not self.constraints:
            raise ValidationError("at least one utility constraint is required")

    @property
    def L(self) -> int:
        return len(self.constraints)

    @property
    def bounds(self) -> tuple[float, ...]:
        return tuple(c.D for c in self.constraints)


@dataclass(frozen=True)
class PrivacySpec:
    E: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.E) and self.E >= 0):
            raise ValidationError(f"equivocation bound must be finite and >= 0, got {self.E!r}")


@dataclass(frozen=True)
class SourceSpec:
    """Joint source/side-information pmf plus roles and requirements.

    ``joint`` has one axis per attribute in ``roles.all`` order followed by
    the side-information axis (a one-symbol alphabet when absent).
    """

    roles: AttributeRoles
    joint: JointPmf
    reconstruction: tuple[Alphabet, ...]
    utility: UtilitySpec
    privacy: PrivacySpec = field(default_factory=PrivacySpec)
    has_side_info: bool = False

    def __post_init__(self):
        names = self.roles.all + (self.side_axis.name,)
        if self.joint.names != names:
            raise ValidationError(f"joint axes {self.joint.names} do not match {names}")
        if len(self.reconstruction) != len(self.roles.public):
            raise ValidationError("need one reconstruction alphabet per public attribute")
        public = set(self.roles.public)
        for c in self.utility.constraints:
            if not set(c.attributes) <= public:
                raise ValidationError("utility constraints may only involve public attributes")
        self.distortion_matrices()  # validates f and g against the alphabets

    @property
    def side_axis(self) -> Alphabet:
        return self.joint.axes[-1]

    @property
    def K(self) -> int:
        return self.roles.K

    def alphabet(self, name: str) -> Alphabet:
        return self.joint.axis(name)

    @property
    def attribute_alphabets(self) -> tuple[Alphabet, ...]:
        return self.joint.axes[:-1]

    def public_tuples(self) -> list[tuple[str, ...]]:
        return list(itertools.product(*(self.alphabet(n).symbols for n in self.roles.public)))

    def reconstruction_tuples(self) -> list[tuple[str, ...]]:
        return list(itertools.product(*(a.symbols for a in self.reconstruction)))

    def distortion_matrices(self) -> list[np.ndarray]:
        """Per constraint: distortion between public tuples and reconstruction tuples."""
        src, rec = self.public_tuples(), self.reconstruction_tuples()
        out = []
        for c in self.utility.constraints:
            attrs = c.attributes or self.roles.public
            pos = [self.roles.public.index(a) for a in attrs]
            fs = [c.value(tuple(t[i] for i in pos)) for t in src]
            fr = [c.value(tuple(t[i] for i in pos)) for t in rec]
            out.append(np.array([[c.cost(a, b) for b in fr] for a in fs]))
        return out

    def with_side_info_dropped(self) -> "SourceSpec":
        """Same source with the side information marginalized to a constant."""
        mass = self.joint.mass.sum(axis=-1, keepdims=True)
        joint = JointPmf(self.attribute_alphabets + (Alphabet(NO_SIDE_INFO, ["0"]),), mass, tol=1e-9)
        return SourceSpec(self.roles, joint, self.reconstruction, self.utility, self.privacy, False)

    def with_requirements(self, D=None, E=None) -> "SourceSpec":
        utility = self.utility
        if D is not None:
            D = _as_tuple(D, utility.L)
            utility = UtilitySpec(tuple(UtilityConstraint(d, c.g, c.attributes, c.f)
                                        for c, d in zip(utility.constraints, D)))
        privacy = self.privacy if E is None else PrivacySpec(float(E))
        return SourceSpec(self.roles, self.joint, self.reconstruction, utility, privacy,
                          self.has_side_info)


def _as_tuple(D, L: int) -> tuple[float, ...]:
    if np.ndim(D) == 0:
        return (float(D),) * L
    D = tuple(float(v) for v in D)
    if len(D) != L:
        raise ValidationError(f"expected {L} distortion values, got {len(D)}")
    return D


def make_spec(alphabets: Mapping[str, Sequence[str]], mass, public: Sequence[str],
              private: Sequence[str], utility: Sequence[UtilityConstraint] | UtilityConstraint,
              E: float = 0.0, side_info: str | None = None, encoded: Sequence[str] = (),
              reconstruction: Mapping[str, Sequence[str]] | None = None,
              tol: float = LOAD_TOL) -> SourceSpec:
    """Build a SourceSpec from plain Python values.

    ``alphabets`` is ordered; its keys other than ``side_info`` are the
    attributes. ``mass`` is indexed in the same axis order.
    """
    names = list(alphabets)
    attrs = tuple(n for n in names if n != side_info)
    if side_info is not None and side_info not in alphabets:
        raise ValidationError(f"side information {side_info!r} has no alphabet")
    axes = {n: Alphabet(n, alphabets[n]) for n in names}
    mass = np.asarray(mass, dtype=float)
    shape = tuple(axes[n].size for n in names)
    if mass.size != int(np.prod(shape)):
        raise ValidationError(f"pmf has {mass.size} values, alphabets need {shape}")
    mass = mass.reshape(shape)
    if np.any(mass < 0) or not np.all(np.isfinite(mass)):
        raise ValidationError("pmf contains negative or non-finite mass")
    total = math.fsum(mass.ravel())
    if abs(total - 1.0) > tol:
        raise ValidationError(f"pmf sums to {total!r}, not 1 within {tol}")
    if side_info is None:
        mass = mass[..., None]
        zaxis = Alphabet(NO_SIDE_INFO, ["0"])
    else:
        order = [names.index(n) for n in attrs] + [names.index(side_info)]
        mass = np.transpose(mass, order)
        zaxis = axes[side_info]
    mass = normalize_exact(mass)
    joint = JointPmf([axes[n] for n in attrs] + [zaxis], mass, tol=1e-12)
    roles = AttributeRoles(attrs, tuple(public), tuple(private), tuple(encoded))
    reconstruction = reconstruction or {}
    rec = tuple(Alphabet(f"{n}_hat", reconstruction.get(n, axes[n].symbols)) for n in roles.public)
    if isinstance(utility, UtilityConstraint):
        utility = [utility]
    return SourceSpec(roles, joint, rec, UtilitySpec(tuple(utility)), PrivacySpec(float(E)),
                      side_info is not None)


# ---------------------------------------------------------------------------
# model documents

def _parse_g(raw) -> str | DistortionTable:
    if isinstance(raw, str):
        return raw
    if isinstance(raw, Mapping) and "matrix" in raw:
        return DistortionTable(tuple(raw.get("rows", ())), tuple(raw.get("cols", ())),
                               tuple(map(tuple, raw["matrix"])))
    raise ValidationError(f"cannot parse distortion {raw!r}")


def _parse_f(raw) -> dict | None:
    if raw is None or raw == "identity":
        return None
    if not isinstance(raw, Mapping):
        raise ValidationError("utility function must be 'identity' or a mapping")
    return {tuple(s.strip() for s in str(k).split(",")): str(v) for k, v in raw.items()}


def spec_from_dict(doc: Mapping[str, Any]) -> SourceSpec:
    try:
        alph = {str(k): [str(s) for s in v] for k, v in doc["alphabets"].items()}
        side = doc.get("side_info")
        attrs = [str(a) for a in doc.get("attributes", [n for n in alph if n != side])]
        roles = doc["roles"]
        pmf = doc["pmf"]
        axes = [str(a) for a in pmf.get("axes", attrs + ([side] if side else []))]
        utility_raw = doc["utility"]
    except (KeyError, TypeError, AttributeError) as exc:
        raise ValidationError(f"model document is missing a field: {exc}") from None
    expected = attrs + ([side] if side else [])
    if sorted(axes) != sorted(expected):
        raise ValidationError(f"pmf axes {axes} must be a permutation of {expected}")
    for n in expected:
        if n not in alph:
            raise ValidationError(f"no alphabet declared for {n!r}")
    values = np.asarray(pmf["values"], dtype=float)
    shape = [len(alph[n]) for n in axes]
    if values.size != int(np.prod(shape)):
        raise ValidationError(f"pmf has {values.size} values, axes need {shape}")
    values = np.transpose(values.reshape(shape), [axes.index(n) for n in expected])
    if isinstance(utility_raw, Mapping):
        utility_raw = [utility_raw]
    constraints = []
    for u in utility_raw:
        if "D" not in u:
            raise ValidationError("each utility constraint needs a bound D")
        constraints.append(UtilityConstraint(
            D=u["D"], g=_parse_g(u.get("g", "hamming")),
            attributes=tuple(u.get("attributes", ())), f=_parse_f(u.get("f"))))
    privacy = doc.get("privacy") or {}
    return make_spec({n: alph[n] for n in expected}, values,
                     public=[str(a) for a in roles.get("public", [])],
                     private=[str(a) for a in roles.get("private", [])],
                     encoded=[str(a) for a in roles.get("encoded", [])],
                     utility=constraints, E=float(privacy.get("E", 0.0)), side_info=side,
                     reconstruction={str(k): [str(s) for s in v]
                                     for k, v in (doc.get("reconstruction") or {}).items()})


def load_spec(document: str) -> SourceSpec:
    """Parse a JSON or YAML model document."""
    try:
        doc = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        raise ValidationError(f"model document does not parse: {exc}") from None
    if not isinstance(doc, Mapping):
        raise ValidationError("model document must be a mapping")
    return spec_from_dict(doc)


def load_spec_file(path: str | Path) -> SourceSpec:
    return load_spec(Path(path).read_text(encoding="utf-8"))


def spec_to_dict(spec: SourceSpec) -> dict:
    side = spec.side_axis.name if spec.has_side_info else None
    alph = {a.name: list(a.symbols) for a in spec.attribute_alphabets}
    axes = list(spec.roles.all)
    mass = spec.joint.mass
    if side:
        alph[side] = list(spec.side_axis.symbols)
        axes.append(side)
    else:
        mass = mass[..., 0]
    utility = []
    for c in spec.utility.constraints:
        entry: dict[str, Any] = {"D": c.D}
        if isinstance(c.g, DistortionTable):
            entry["g"] = {"rows": list(c.g.rows), "cols": list(c.g.cols),
                          "matrix": [list(r) for r in c.g.matrix]}
        else:
            entry["g"] = c.g
        if c.attributes:
            entry["attributes"] = list(c.attributes)
        if c.f is not None:
            entry["f"] = {",".join(k): v for k, v in c.f.items()}
        utility.append(entry)
    doc = {
        "alphabets": alph,
        "attributes": list(spec.roles.all),
        "roles": {"public": list(spec.roles.public), "private": list(spec.roles.private),
                  "encoded": list(spec.roles.encoded)},
        "reconstruction": {n: list(a.symbols) for n, a in zip(spec.roles.public, spec.reconstruction)},
        "pmf": {"axes": axes, "values": [float(v) for v in mass.ravel()]},
        "utility": utility,
        "privacy": {"E": spec.privacy.E},
    }
    if side:
        doc["side_info"] = side
    return doc


def dump_spec(spec: SourceSpec) -> str:
    return json.dumps(spec_to_dict(spec), indent=2)


# ---------------------------------------------------------------------------
# databases

@dataclass(frozen=True, eq=False)
class Database:
    """Rows of symbol codes; ``codes[i, j]`` indexes ``schema[j].symbols``."""

    schema: tuple[Alphabet, ...]
    codes: np.ndarray

    def __post_init__(self):
        codes = np.asarray(self.codes, dtype=np.int64).reshape(-1, len(self.schema))
        sizes = np.array([a.size for a in self.schema])
        if codes.size and (np.any(codes < 0) or np.any(codes >= sizes[None, :])):
            raise ValidationError("database codes out of alphabet range")
        codes.flags.writeable = False
        object.__setattr__(self, "schema", tuple(self.schema))
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_rows(cls, schema: Sequence[Alphabet], rows) -> "Database":
        schema = tuple(schema)
        codes = [[a.index(str(v)) for a, v in zip(schema, row)] for row in rows]
        return cls(schema, np.array(codes, dtype=np.int64).reshape(-1, len(schema)))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.schema)

    @property
    def n(self) -> int:
        return self.codes.shape[0]

    def __len__(self) -> int:
        return self.n

    def column(self, name: str) -> np.ndarray:
        try:
            return self.codes[:, self.names.index(name)]
        except ValueError:
            raise SchemaError(f"database has no column {name!r}") from None

    @property
    def rows(self) -> list[tuple[str, ...]]:
        syms = [a.symbols for a in self.schema]
        return [tuple(s[c] for s, c in zip(syms, row)) for row in self.codes.tolist()]

    def to_csv(self) -> str:
        syms = [np.array(a.symbols, dtype=object) for a in self.schema]
        cols = [s[self.codes[:, j]] for j, s in enumerate(syms)]
        lines = [",".join(self.names)]
        if self.n:
            lines.extend(",".join(r) for r in zip(*cols))
        return "\n".join(lines) + "\n"

    def __eq__(self, other):
        if not isinstance(other, Database):
            return NotImplemented
        return self.schema == other.schema and np.array_equal(self.codes, other.codes)


def ingest_csv(text: str, schema: Mapping[str, Alphabet] | Sequence[Alphabet]) -> Database:
    """Parse CSV text whose header names exactly the schema's columns."""
    if not isinstance(schema, Mapping):
        schema = {a.name: a for a in schema}
    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("CSV has no header row") from None
    missing = [n for n in schema if n not in header]
    if missing:
        raise SchemaError(f"CSV is missing columns {missing}")
    extra = [h for h in header if h not in schema]
    if extra or len(set(header)) != len(header):
        raise SchemaError(f"CSV has unexpected or repeated columns {extra or header}")
    cols = tuple(schema[h] for h in header)
    lookup = [{s: i for i, s in enumerate(a.symbols)} for a in cols]
    codes = []
    for row in reader:
        line = reader.line_num
        if not row or (len(row) == 1 and not row[0].strip()):
            continue
        row = [c.rstrip() for c in row]
        if len(row) != len(cols):
            raise CSVRowError(f"expected {len(cols)} cells, found {len(row)}", line)
        try:
            codes.append([lk[c] for lk, c in zip(lookup, row)])
        except KeyError as exc:
            raise CSVRowError(f"symbol {exc.args[0]!r} not in its column's alphabet", line) from None
    return Database(cols, np.array(codes, dtype=np.int64).reshape(-1, len(cols)))


def estimate_empirical(db: Database) -> JointPmf:
    """Relative-frequency pmf over the database's product alphabet."""
    if db.n == 0:
        raise ValidationError("cannot estimate a pmf from an empty database")
    shape = tuple(a.size for a in db.schema)
    flat = np.ravel_multi_index(db.codes.T, shape)
    counts = np.bincount(flat, minlength=int(np.prod(shape))).astype(float)
    return JointPmf(db.schema, normalize_exact(counts / db.n).reshape(shape), tol=1e-12)


def spec_schema(spec: SourceSpec) -> dict[str, Alphabet]:
    out = {a.name: a for a in spec.attribute_alphabets}
    if spec.has_side_info:
        out[spec.side_axis.name] = spec.side_axis
    return out
