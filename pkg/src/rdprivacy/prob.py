"""Finite-alphabet probability arithmetic.

Every distribution is a dense tensor with one labelled axis per random
variable. Axes are addressed by alphabet name. Information quantities are in
bits and use the convention ``0 log 0 = 0``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import math

import numpy as np

from .errors import AxisError, ValidationError

LOAD_TOL = 1e-9
CHANNEL_TOL = 1e-12


@dataclass(frozen=True)
class Alphabet:
    name: str
    symbols: tuple[str, ...]

    def __post_init__(self):
        symbols = tuple(str(s) for s in self.symbols)
        object.__setattr__(self, "symbols", symbols)
        if not self.name:
            raise ValidationError("alphabet name must be non-empty")
        if len(symbols) == 0:
            raise ValidationError(f"alphabet {self.name!r} has no symbols")
        if len(set(symbols)) != len(symbols):
            raise ValidationError(f"alphabet {self.name!r} has repeated symbols")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        try:
            return self.symbols.index(symbol)
        except ValueError:
            raise ValidationError(f"{symbol!r} is not a symbol of {self.name!r}") from None

    def renamed(self, name: str) -> "Alphabet":
        return Alphabet(name, self.symbols)

    def __len__(self) -> int:
        return len(self.symbols)


def _as_names(axes: str | Iterable[str]) -> tuple[str, ...]:
    if isinstance(axes, str):
        return (axes,)
    return tuple(axes)


def _check_unique(names: Sequence[str]) -> None:
    if len(set(names)) != len(names):
        raise AxisError(f"repeated axis names in {list(names)}")


def normalize_exact(mass: np.ndarray) -> np.ndarray:
    """Scale to unit total; repeated so renormalizing is a fixed point."""
    for _ in range(4):
        total = math.fsum(mass.ravel())
        if total == 1.0:
            break
        mass = mass / total
    return mass


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.flags.writeable = False
    return a


class JointPmf:
    """Probability mass over the product of ``axes``.

    The constructor checks that ``mass`` is non-negative and sums to one
    within ``tol``, then renormalizes exactly.
    """

    __slots__ = ("axes", "mass")

    def __init__(self, axes: Sequence[Alphabet], mass, tol: float = LOAD_TOL):
        axes = tuple(axes)
        _check_unique([a.name for a in axes])
        mass = np.asarray(mass, dtype=float)
        shape = tuple(a.size for a in axes)
        if mass.size != int(np.prod(shape, dtype=np.int64)):
            raise ValidationError(f"mass has {mass.size} cells, axes need {shape}")
        mass = mass.reshape(shape)
        if not np.all(np.isfinite(mass)):
            raise ValidationError("mass contains non-finite values")
        if np.any(mass < 0):
            raise ValidationError("mass contains negative entries")
        total = mass.sum()
        if abs(total - 1.0) > tol:
            raise ValidationError(f"mass sums to {total!r}, not 1")
        self.axes = axes
        self.mass = _frozen(normalize_exact(mass))

    @classmethod
    def from_weights(cls, axes: Sequence[Alphabet], weights) -> "JointPmf":
        """Normalize arbitrary non-negative weights into a pmf."""
        w = np.asarray(weights, dtype=float)
        total = w.sum()
        if not total > 0:
            raise ValidationError("weights must have positive total")
        return cls(axes, w / total, tol=np.inf)

    @classmethod
    def uniform(cls, axes: Sequence[Alphabet]) -> "JointPmf":
        return cls.from_weights(axes, np.ones([a.size for a in axes]))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.axes)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.mass.shape

    def axis(self, name: str) -> Alphabet:
        return self.axes[self.axis_index(name)]

    def axis_index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise AxisError(f"unknown axis {name!r}; have {list(self.names)}") from None

    def transpose(self, order: Iterable[str]) -> "JointPmf":
        order = _as_names(order)
        idx = [self.axis_index(n) for n in order]
        if sorted(idx) != list(range(len(self.axes))):
            raise AxisError(f"{list(order)} is not a permutation of {list(self.names)}")
        return JointPmf([self.axes[i] for i in idx], np.transpose(self.mass, idx), tol=np.inf)

    def __eq__(self, other):
        if not isinstance(other, JointPmf):
            return NotImplemented
        return self.axes == other.axes and np.array_equal(self.mass, other.mass)

    def __repr__(self):
        return f"JointPmf(axes={list(self.names)}, shape={self.shape})"


class Channel:
    """Conditional pmf of ``output_axes`` given ``input_axes``.

    ``kernel`` has shape ``input_shape + output_shape``.
    """

    __slots__ = ("input_axes", "output_axes", "kernel")

    def __init__(self, input_axes: Sequence[Alphabet], output_axes: Sequence[Alphabet],
                 kernel, tol: float = CHANNEL_TOL):
        input_axes, output_axes = tuple(input_axes), tuple(output_axes)
        _check_unique([a.name for a in input_axes + output_axes])
        in_shape = tuple(a.size for a in input_axes)
        out_shape = tuple(a.size for a in output_axes)
        kernel = np.asarray(kernel, dtype=float)
        if kernel.size != int(np.prod(in_shape + out_shape, dtype=np.int64)):
            raise ValidationError(f"kernel has {kernel.size} cells, expected {in_shape + out_shape}")
        kernel = kernel.reshape(in_shape + out_shape)
        if np.any(kernel < 0) or not np.all(np.isfinite(kernel)):
            raise ValidationError("channel kernel has negative or non-finite entries")
        out_dims = tuple(range(len(in_shape), kernel.ndim))
        sums = kernel.sum(axis=out_dims)
        if np.any(np.abs(sums - 1.0) > tol):
            raise ValidationError(f"channel rows deviate from 1 by {np.abs(sums - 1).max():.3g}")
        self.input_axes = input_axes
        self.output_axes = output_axes
        self.kernel = _frozen(kernel)

    @classmethod
    def from_matrix(cls, source: Alphabet, target: Alphabet, matrix) -> "Channel":
        return cls([source], [target], matrix)

    @classmethod
    def identity(cls, source: Alphabet, target_name: str) -> "Channel":
        return cls([source], [source.renamed(target_name)], np.eye(source.size))

    @classmethod
    def constant(cls, source: Sequence[Alphabet], target: Alphabet, symbol: int = 0) -> "Channel":
        source = tuple(source)
        k = np.zeros(tuple(a.size for a in source) + (target.size,))
        k[..., symbol] = 1.0
        return cls(source, [target], k)

    @property
    def input_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.input_axes)

    @property
    def output_names(self) -> tuple[str, ...]:
        return tuple(a.name for a in self.output_axes)

    def matrix(self) -> np.ndarray:
        """Kernel flattened to (input combinations, output combinations)."""
        n_in = int(np.prod([a.size for a in self.input_axes], dtype=np.int64))
        return self.kernel.reshape(n_in, -1)

    def __repr__(self):
        return f"Channel({list(self.input_names)} -> {list(self.output_names)})"


def _indices(p: JointPmf, names: Iterable[str]) -> tuple[int, ...]:
    names = _as_names(names)
    _check_unique(names)
    return tuple(p.axis_index(n) for n in names)


def _entropy_of(mass: np.ndarray) -> float:
    m = mass[mass > 0]
    return float(-(m * np.log2(m)).sum())


def _marginal_mass(p: JointPmf, keep: tuple[int, ...]) -> np.ndarray:
    drop = tuple(i for i in range(p.mass.ndim) if i not in keep)
    m = p.mass.sum(axis=drop) if drop else p.mass
    # sum() keeps remaining axes in original order; reorder to `keep`
    remaining = sorted(keep)
    return np.transpose(m, [remaining.index(i) for i in keep])


def entropy(p: JointPmf) -> float:
    """Shannon entropy of the full joint, in bits."""
    return _entropy_of(p.mass)


def marginalize(p: JointPmf, keep: str | Iterable[str]) -> JointPmf:
    idx = _indices(p, keep)
    if not idx:
        raise AxisError("keep set must be non-empty")
    return JointPmf.from_weights([p.axes[i] for i in idx], _marginal_mass(p, idx))


def _joint_entropy(p: JointPmf, idx: tuple[int, ...]) -> float:
    if not idx:
        return 0.0
    return _entropy_of(_marginal_mass(p, idx))


def conditional_entropy(p: JointPmf, target: str | Iterable[str],
                        given: str | Iterable[str] = ()) -> float:
    """H(target | given) in bits."""
    t = _indices(p, target)
    g = _indices(p, given)
    if set(t) & set(g):
        raise AxisError("target and given axes overlap")
    if not t:
        raise AxisError("target set must be non-empty")
    return max(0.0, _joint_entropy(p, t + g) - _joint_entropy(p, g))


def mutual_information(p: JointPmf, left: str | Iterable[str], right: str | Iterable[str],
                       given: str | Iterable[str] = ()) -> float:
    """I(left; right | given) in bits, clipped at zero."""
    a, b, c = _indices(p, left), _indices(p, right), _indices(p, given)
    if set(a) & set(b) or set(a) & set(c) or set(b) & set(c):
        raise AxisError("axis sets overlap")
    if not a or not b:
        raise AxisError("axis sets must be non-empty")
    h = _joint_entropy
    val = h(p, a + c) + h(p, b + c) - h(p, a + b + c) - h(p, c)
    return max(0.0, val)


def attach_channel(prior: JointPmf, ch: Channel) -> JointPmf:
    """Joint of ``prior`` axes and channel outputs, mass p(x) ch(y|x)."""
    in_idx = [prior.axis_index(n) for n in ch.input_names]
    for n in ch.output_names:
        if n in prior.names:
            raise AxisError(f"channel output {n!r} collides with a prior axis")
    for a in ch.input_axes:
        if prior.axes[prior.axis_index(a.name)] != a:
            raise AxisError(f"alphabet of {a.name!r} differs between prior and channel")
    n = prior.mass.ndim
    out_ids = list(range(n, n + len(ch.output_axes)))
    mass = np.einsum(prior.mass, list(range(n)), ch.kernel, in_idx + out_ids,
                     list(range(n)) + out_ids)
    return JointPmf(prior.axes + ch.output_axes, mass, tol=1e-10)


def compose(first: Channel, second: Channel) -> Channel:
    """Cascade ``first`` then ``second``; second's inputs must be first's outputs."""
    if second.input_axes != first.output_axes:
        raise AxisError("second channel must take the first channel's outputs as inputs")
    a = first.matrix() @ second.matrix()
    return Channel(first.input_axes, second.output_axes, a, tol=1e-10)
