"""Spec generators shared by the test modules."""
from __future__ import annotations

import numpy as np

from rdprivacy import UtilityConstraint, make_spec
from rdprivacy.prob import Alphabet, JointPmf

BITS = ["0", "1"]


def h2(p: float) -> float:
    """Binary entropy in bits."""
    if p <= 0 or p >= 1:
        return 0.0
    return float(-p * np.log2(p) - (1 - p) * np.log2(1 - p))


def bernoulli_spec(p: float = 0.5, D: float = 0.11, E: float = 0.0):
    """Single binary attribute, public and private, hamming utility."""
    return make_spec({"x": BITS}, [1 - p, p], ["x"], ["x"], UtilityConstraint(D), E=E)


def bernoulli_prior(p: float = 0.5) -> JointPmf:
    return JointPmf([Alphabet("x", BITS)], [1 - p, p])


def symbols(n: int) -> list[str]:
    return [str(i) for i in range(n)]


def census_spec(rng, n: int, D: float = 0.1):
    """K=1 spec over an n-ary alphabet with a random pmf."""
    p = rng.dirichlet(np.ones(n))
    return make_spec({"x": symbols(n)}, p, ["x"], ["x"], UtilityConstraint(D))


def pair_spec(rng, nr: int = 2, nh: int = 2, nz: int = 1, D: float = 0.1, E: float = 0.0,
              mass=None):
    """Public attribute r, private attribute h, optional side information z."""
    alph = {"r": symbols(nr), "h": symbols(nh)}
    side = None
    if nz > 1:
        alph["z"] = symbols(nz)
        side = "z"
    if mass is None:
        mass = rng.dirichlet(np.ones(nr * nh * nz))
    return make_spec(alph, mass, ["r"], ["h"], UtilityConstraint(D), E=E, side_info=side)


def independent_z_spec(rng, nz: int = 2, D: float = 0.1):
    """Binary (r, h) with Z drawn independently of both."""
    prh = rng.dirichlet(np.ones(4))
    pz = rng.dirichlet(np.ones(nz))
    return pair_spec(rng, nz=nz, D=D, mass=np.outer(prh, pz).ravel())


def independent_h_spec(rng, nr: int = 2, nh: int = 2, nz: int = 2, D: float = 0.1):
    """X_h independent of (X_r, Z)."""
    prz = rng.dirichlet(np.ones(nr * nz)).reshape(nr, 1, nz)
    ph = rng.dirichlet(np.ones(nh)).reshape(1, nh, 1)
    return pair_spec(rng, nr, nh, nz, D=D, mass=(prz * ph).ravel())


def public_prior(spec) -> JointPmf:
    """Marginal of the (single) public attribute as a prior for R(D)."""
    from rdprivacy import marginalize
    return marginalize(spec.joint, spec.roles.public)


def max_distortion(spec) -> float:
    """D_max of the single hamming constraint over the public attribute."""
    from rdprivacy import distortion_bounds
    d = spec.distortion_matrices()[0]
    return distortion_bounds(public_prior(spec), d)[1]
