"""Rotating double pendulum domain layer.

Two rigid pendula hang in a vertical plane that rotates uniformly about
the vertical axis through the upper pivot.  After scaling, the shape of
the system is captured by five dimensionless parameters (delta, sigma,
alpha, eta, chi), each in [-1, 1], and the rotation strength by
Q in [0, 1]; internally q = Q/(1-Q).

This module derives those parameters from physical data, evaluates the
potential / gradient / Hessian / mass matrix at a configuration, builds
the exact polynomial systems whose solutions are the equilibria and
bifurcations (in both trigonometric and half-tangent variables), and
covers the limiting single rotating pendulum.

Sign convention: the stored gradient is the equilibrium form
``[q(a sin θ + b sin φ)cos θ - 2(1+χ)sin θ, q(b sin θ + c sin φ)cos φ -
2(1-χ)sin φ]``, a positive multiple of the potential gradient; `hess` is
its Jacobian.  Zero sets and determinant signs agree with the unscaled
dynamics, and stability is judged from the normal-mode quadratic built
on -hess, under which both roots positive means oscillatory and stable.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Union

from .elim import PolySystem
from .polyring import Polynomial, VarSet, change_varset

__all__ = [
    "PhysicalParams",
    "ModelParams",
    "ReducedCoeffs",
    "Configuration",
    "LocalFields",
    "BIF_VARS",
    "PMMR_VARS",
    "HT_VARS",
    "TRIV_VARS",
    "derive_dimensionless",
    "reduced_coefficients",
    "kinetic_positive_definite",
    "chi_pmmr",
    "local_fields",
    "build_system",
    "trivial_bifurcation_poly",
    "normal_mode_quadratic",
    "single_pendulum_equilibria",
    "single_pendulum_nmr",
    "canonical_angle",
]

Num = Union[int, float, Fraction]

# variable sets shared by the polynomial builders; d = 1+delta, s = 1+sigma
BIF_VARS = VarSet(["c1", "s1", "c2", "s2", "qq", "d", "s", "chi"])
PMMR_VARS = VarSet(["c1", "s1", "c2", "s2", "qq", "d", "s"])
HT_VARS = VarSet(["t", "u", "qq", "delta", "sigma", "chi"])
TRIV_VARS = VarSet(["qq", "d", "s", "chi"])


def canonical_angle(x: float) -> float:
    """Reduce an angle to (-pi, pi]."""
    y = math.fmod(x, 2 * math.pi)
    if y > math.pi:
        y -= 2 * math.pi
    elif y <= -math.pi:
        y += 2 * math.pi
    return y


def _as_exact(v: Num) -> Fraction:
    if isinstance(v, float):
        if not math.isfinite(v):
            raise ValueError("non-finite parameter")
        return Fraction(v)
    return Fraction(v)


@dataclass(frozen=True)
class PhysicalParams:
    """Masses, lengths, moments of inertia, spin rate, gravity.

    ``l1`` may be negative (the first bob on the far side of the pivot)
    as long as the combined gravity coefficient stays non-negative.
    ``i*p`` are the moments about each pendulum's own axis, ``i*perp``
    transverse, ``i*n`` normal to the rotating plane.
    """

    m1: Num
    m2: Num
    l1: Num
    l: Num
    l2: Num
    i1p: Num = 0
    i1perp: Num = 0
    i1n: Num = 0
    i2p: Num = 0
    i2perp: Num = 0
    i2n: Num = 0
    omega_a: Num = 0
    g: Num = 1

    def __post_init__(self):
        for name in ("m1", "m2", "l", "l2", "g",
                     "i1p", "i1perp", "i1n", "i2p", "i2perp", "i2n"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        m1, m2 = self.m1, self.m2
        l1, l, l2 = self.l1, self.l, self.l2
        if self.i1p > m1 * l1 * l1 + m2 * l * l + self.i1perp:
            raise ValueError(
                "centrifugal coefficient Abar < 0: "
                "i1p exceeds m1*l1^2 + m2*l^2 + i1perp"
            )
        if self.i2p > m2 * l2 * l2 + self.i2perp:
            raise ValueError(
                "centrifugal coefficient Cbar < 0: "
                "i2p exceeds m2*l2^2 + i2perp"
            )
        if m1 * l1 + m2 * l < 0:
            raise ValueError("gravity coefficient K1 < 0: l1 below -m2*l/m1")

    def to_dict(self) -> dict:
        return {k: _num_out(getattr(self, k)) for k in (
            "m1", "m2", "l1", "l", "l2", "i1p", "i1perp", "i1n",
            "i2p", "i2perp", "i2n", "omega_a", "g")}

    @classmethod
    def from_dict(cls, d: Mapping) -> "PhysicalParams":
        return cls(**{k: _num_in(v) for k, v in d.items()})


@dataclass(frozen=True)
class ModelParams:
    """The five shape parameters plus rotation strength Q."""

    delta: Num
    sigma: Num
    alpha: Num = 0
    eta: Num = 0
    chi: Num = 0
    Q: Num = 0

    def __post_init__(self):
        for name in ("delta", "sigma", "alpha", "eta", "chi"):
            v = getattr(self, name)
            if not -1 <= v <= 1:
                raise ValueError(f"{name} = {v} outside [-1, 1]")
        if not 0 <= self.Q <= 1:
            raise ValueError(f"Q = {self.Q} outside [0, 1]")

    @property
    def q(self):
        """Q/(1-Q); infinite at Q = 1."""
        if self.Q == 1:
            raise ZeroDivisionError("q diverges at Q = 1")
        Q = self.Q
        if isinstance(Q, float):
            return Q / (1.0 - Q)
        return Fraction(Q) / (1 - Fraction(Q))

    def with_Q(self, Q: Num) -> "ModelParams":
        return ModelParams(self.delta, self.sigma, self.alpha,
                           self.eta, self.chi, Q)

    def to_dict(self) -> dict:
        return {
            "delta": _num_out(self.delta),
            "sigma": _num_out(self.sigma),
            "alpha": _num_out(self.alpha),
            "eta": _num_out(self.eta),
            "chi": _num_out(self.chi),
            "Q": _num_out(self.Q),
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ModelParams":
        return cls(**{k: _num_in(v) for k, v in d.items()})


def _num_out(v: Num):
    if isinstance(v, Fraction):
        if v.denominator == 1:
            return v.numerator
        return f"{v.numerator}/{v.denominator}"
    return v


def _num_in(v) -> Num:
    if isinstance(v, str):
        return Fraction(v)
    if isinstance(v, bool):
        raise ValueError("boolean is not a number")
    if isinstance(v, (int, Fraction)):
        return v
    if isinstance(v, float):
        return v
    raise ValueError(f"cannot read number from {v!r}")


@dataclass(frozen=True)
class ReducedCoeffs:
    """Centrifugal (a, b, c) and kinetic (at, bt, ct) quadratic-form
    coefficients, with the derived kinetic shape pair (dt, st)."""

    a: Num
    b: Num
    c: Num
    at: Num
    bt: Num
    ct: Num
    dt: Num
    st: Num

    def to_dict(self) -> dict:
        return {k: _num_out(getattr(self, k))
                for k in ("a", "b", "c", "at", "bt", "ct", "dt", "st")}


@dataclass(frozen=True)
class Configuration:
    theta: float
    phi: float

    def canonical(self) -> "Configuration":
        return Configuration(canonical_angle(self.theta),
                             canonical_angle(self.phi))


@dataclass(frozen=True)
class LocalFields:
    """Potential, scaled gradient and Hessian, and the kinetic mass
    matrix at one configuration."""

    V: float
    grad: tuple
    hess: tuple  # ((h11, h12), (h12, h22))
    mass: tuple  # ((at, bt*cos(phi-theta)), (…, ct))


# ---------------------------------------------------------------------
# parameter derivation


def derive_dimensionless(p: PhysicalParams):
    """Reduce physical data to (ModelParams, scales).

    The shape parameters depend only on coefficient ratios, so they are
    computed from the spin-independent shape factors and stay defined in
    the non-rotating limit.  scales carries omega (the time scale fixed
    by E = Ebar + K), the kinetic total E, centrifugal total Ebar, and
    gravity total K.
    """
    m1 = _as_exact(p.m1)
    m2 = _as_exact(p.m2)
    l1 = _as_exact(p.l1)
    l = _as_exact(p.l)
    l2 = _as_exact(p.l2)
    wa = _as_exact(p.omega_a)
    g = _as_exact(p.g)

    # kinetic and centrifugal shape factors (omega^2, omega_a^2 removed)
    a_sh = m1 * l1 ** 2 + m2 * l ** 2 + _as_exact(p.i1n)
    b_sh = m2 * l2 * l
    c_sh = m2 * l2 ** 2 + _as_exact(p.i2n)
    ab_sh = m1 * l1 ** 2 + m2 * l ** 2 + _as_exact(p.i1perp) - _as_exact(p.i1p)
    cb_sh = m2 * l2 ** 2 + _as_exact(p.i2perp) - _as_exact(p.i2p)
    e_sh = a_sh + 2 * b_sh + c_sh
    eb_sh = ab_sh + 2 * b_sh + cb_sh

    k1 = (m1 * l1 + m2 * l) * g
    k2 = m2 * l2 * g
    k = k1 + k2

    if eb_sh == 0:
        raise ValueError("degenerate: centrifugal coefficients all vanish")
    if ab_sh + cb_sh == 0:
        raise ValueError("degenerate: Abar + Cbar = 0, sigma undefined")
    if e_sh + eb_sh == 0:
        raise ValueError("degenerate: no inertia at all")
    if k == 0:
        raise ValueError("degenerate: no gravity coefficient, chi undefined")

    delta = (ab_sh + cb_sh - 2 * b_sh) / eb_sh
    sigma = (ab_sh - cb_sh) / (ab_sh + cb_sh)
    # the kinetic/centrifugal mismatch parameters; the shared b-shape
    # cancels, leaving ratios that survive b_sh = 0
    alpha = (e_sh - eb_sh) / (e_sh + eb_sh)
    eta = ((a_sh - c_sh) - (ab_sh - cb_sh)) / (e_sh + eb_sh)
    chi = (k1 - k2) / k

    ebar = eb_sh * wa ** 2
    e = ebar + k  # defines omega
    if e == 0:
        raise ValueError("degenerate: E = 0")
    omega_sq = e / e_sh
    Q = ebar / (ebar + k)

    m = ModelParams(delta=delta, sigma=sigma, alpha=alpha, eta=eta,
                    chi=chi, Q=Q)
    scales = {"omega": math.sqrt(float(omega_sq)), "E": e, "Ebar": ebar,
              "K": k}
    return m, scales


def reduced_coefficients(m: ModelParams) -> ReducedCoeffs:
    """Expand the shape parameters into quadratic-form coefficients.

    a = (1+delta)(1+sigma), b = 1-delta, c = (1+delta)(1-sigma); the
    kinetic versions are reached through x = (alpha+eta)/(1+alpha),
    y = (alpha-eta)/(1+alpha) as at = (1-x-y)a + 4x, bt = (1-x-y)b,
    ct = (1-x-y)c + 4y.  dt = 1 - bt and st = (at-ct)/(at+ct).
    """
    if m.alpha == -1:
        raise ValueError("alpha = -1: kinetic coefficients undefined")
    delta, sigma = m.delta, m.sigma
    a = (1 + delta) * (1 + sigma)
    b = 1 - delta
    c = (1 + delta) * (1 - sigma)
    x = (m.alpha + m.eta) / (1 + m.alpha)
    y = (m.alpha - m.eta) / (1 + m.alpha)
    w = 1 - x - y
    at = w * a + 4 * x
    bt = w * b
    ct = w * c + 4 * y
    if at + ct == 0:
        raise ValueError("at + ct = 0: kinetic shape ratio undefined")
    dt = 1 - bt
    st = (at - ct) / (at + ct)
    return ReducedCoeffs(a=a, b=b, c=c, at=at, bt=bt, ct=ct, dt=dt, st=st)


def kinetic_positive_definite(dt: Num, st: Num) -> Num:
    """4*dt - st^2 (1+dt)^2; non-negative iff the kinetic form is
    positive (semi)definite."""
    return 4 * dt - st ** 2 * (1 + dt) ** 2


def chi_pmmr(delta: Num, sigma: Num) -> Num:
    """The gravity-ratio value forced by point masses on massless rods."""
    den = 2 + sigma + delta * sigma
    if den == 0:
        raise ZeroDivisionError("chi_pmmr undefined: 2 + sigma(1+delta) = 0")
    return (2 * delta + sigma + delta * sigma) / den


# ---------------------------------------------------------------------
# local fields


def local_fields(m: ModelParams, c: Configuration) -> LocalFields:
    """Potential, gradient, Hessian, and mass matrix at a configuration."""
    if m.Q == 1:
        raise ValueError("Q = 1: q diverges")
    q = float(m.q)
    rc = reduced_coefficients(m)
    a, b, cc = float(rc.a), float(rc.b), float(rc.c)
    at, bt, ct = float(rc.at), float(rc.bt), float(rc.ct)
    chi = float(m.chi)
    s1, c1 = math.sin(c.theta), math.cos(c.theta)
    s2, c2 = math.sin(c.phi), math.cos(c.phi)

    V = (q / 2) * (a * s1 * s1 + 2 * b * s1 * s2 + cc * s2 * s2) \
        + 2 * (1 + chi) * c1 + 2 * (1 - chi) * c2
    g1 = q * (a * s1 + b * s2) * c1 - 2 * (1 + chi) * s1
    g2 = q * (b * s1 + cc * s2) * c2 - 2 * (1 - chi) * s2
    h11 = q * (a * c1 * c1 - (a * s1 + b * s2) * s1) - 2 * (1 + chi) * c1
    h12 = q * b * c1 * c2
    h22 = q * (cc * c2 * c2 - (b * s1 + cc * s2) * s2) - 2 * (1 - chi) * c2
    cd = math.cos(c.phi - c.theta)
    mass = ((at, bt * cd), (bt * cd, ct))
    return LocalFields(V=V, grad=(g1, g2),
                       hess=((h11, h12), (h12, h22)), mass=mass)


def normal_mode_quadratic(m: ModelParams, c: Configuration):
    """Coefficients (A2, A1, A0) of the generalized eigenvalue quadratic.

    A2 Ω² + A1 Ω + A0 = det(-Ω M + H) with H = -hess; at an equilibrium
    the roots Ω are the squared normal-mode frequencies (negative root:
    exponential pair).  A2 = det(M) and A0 = det(hess).
    """
    f = local_fields(m, c)
    (h11, h12), (_h21, h22) = f.hess
    (m11, m12), (_m21, m22) = f.mass
    a2 = m11 * m22 - m12 * m12
    a1 = m11 * h22 + m22 * h11 - 2 * m12 * h12
    a0 = h11 * h22 - h12 * h12
    return a2, a1, a0


# ---------------------------------------------------------------------
# polynomial system builders


def _grad_polys(vs: VarSet, a, b, c, one_plus_chi, one_minus_chi):
    """The two equilibrium polynomials over vs, given coefficient polys."""
    c1 = Polynomial.variable(vs, "c1")
    s1 = Polynomial.variable(vs, "s1")
    c2 = Polynomial.variable(vs, "c2")
    s2 = Polynomial.variable(vs, "s2")
    qq = Polynomial.variable(vs, "qq")
    g1 = qq * (a * s1 + b * s2) * c1 - 2 * one_plus_chi * s1
    g2 = qq * (b * s1 + c * s2) * c2 - 2 * one_minus_chi * s2
    return g1, g2


def _hessian_det_poly(vs: VarSet, a, b, c, one_plus_chi, one_minus_chi):
    c1 = Polynomial.variable(vs, "c1")
    s1 = Polynomial.variable(vs, "s1")
    c2 = Polynomial.variable(vs, "c2")
    s2 = Polynomial.variable(vs, "s2")
    qq = Polynomial.variable(vs, "qq")
    h11 = qq * (a * c1 * c1 - (a * s1 + b * s2) * s1) - 2 * one_plus_chi * c1
    h12 = qq * b * c1 * c2
    h22 = qq * (c * c2 * c2 - (b * s1 + c * s2) * s2) - 2 * one_minus_chi * c2
    return h11 * h22 - h12 * h12


def _bif_ingredients(vs: VarSet):
    d = Polynomial.variable(vs, "d")
    s = Polynomial.variable(vs, "s")
    a = d * s
    b = 2 - d
    c = d * (2 - s)
    return a, b, c


def build_system(kind: str) -> PolySystem:
    """The exact polynomial systems behind equilibria and bifurcations.

    ``equilibrium``: gradient zero plus Pythagorean constraints in
    (c1, s1, c2, s2, qq, d, s, chi), d = 1+delta, s = 1+sigma.
    ``bifurcation``: those plus the Hessian determinant.
    ``halftangent``: the gradient numerators under t = tan(theta/2),
    u = tan(phi/2), in (t, u, qq, delta, sigma, chi).
    ``pmmr_bifurcation``: the bifurcation system with chi replaced by
    its point-mass value, numerators taken, in (c1, s1, c2, s2, qq, d, s).
    """
    if kind in ("equilibrium", "bifurcation"):
        vs = BIF_VARS
        a, b, c = _bif_ingredients(vs)
        chi = Polynomial.variable(vs, "chi")
        g1, g2 = _grad_polys(vs, a, b, c, 1 + chi, 1 - chi)
        py1 = _pythagoras(vs, "c1", "s1")
        py2 = _pythagoras(vs, "c2", "s2")
        if kind == "equilibrium":
            polys = (("grad1", g1), ("grad2", g2),
                     ("pyth1", py1), ("pyth2", py2))
        else:
            hd = _hessian_det_poly(vs, a, b, c, 1 + chi, 1 - chi)
            polys = (("grad1", g1), ("grad2", g2), ("hess", hd),
                     ("pyth1", py1), ("pyth2", py2))
        return PolySystem(vs, polys, ("c1", "s1", "c2", "s2"))

    if kind == "halftangent":
        vs = HT_VARS
        work = VarSet(["c1", "s1", "c2", "s2", "t", "u",
                       "qq", "delta", "sigma", "chi"])
        delta = Polynomial.variable(work, "delta")
        sigma = Polynomial.variable(work, "sigma")
        chi = Polynomial.variable(work, "chi")
        a = (1 + delta) * (1 + sigma)
        b = 1 - delta
        c = (1 + delta) * (1 - sigma)
        g1, g2 = _grad_polys(work, a, b, c, 1 + chi, 1 - chi)
        t = Polynomial.variable(work, "t")
        u = Polynomial.variable(work, "u")
        one = Polynomial.constant(work, 1)
        subs = [("s1", 2 * t, one + t * t), ("c1", one - t * t, one + t * t),
                ("s2", 2 * u, one + u * u), ("c2", one - u * u, one + u * u)]
        polys = []
        for name, g in (("poly1", g1), ("poly2", g2)):
            for var, num, den in subs:
                g, _k = g.substitute_rational(var, num, den)
            g = _strip_positive_content(g)
            polys.append((name, change_varset(g, vs)))
        return PolySystem(vs, tuple(polys), ("t", "u"))

    if kind == "pmmr_bifurcation":
        base = build_system("bifurcation")
        vs = PMMR_VARS
        d = Polynomial.variable(BIF_VARS, "d")
        s = Polynomial.variable(BIF_VARS, "s")
        num = d + d * s - 2
        den = 2 + d * s - d
        polys = []
        for name, p in base.polys:
            numer, _k = p.substitute_rational("chi", num, den)
            polys.append((name, change_varset(_strip_positive_content(numer),
                                              vs)))
        return PolySystem(vs, tuple(polys), ("c1", "s1", "c2", "s2"))

    raise ValueError(f"unknown system kind {kind!r}")


def _pythagoras(vs: VarSet, cn: str, sn: str) -> Polynomial:
    c = Polynomial.variable(vs, cn)
    s = Polynomial.variable(vs, sn)
    return c * c + s * s - 1


def _strip_positive_content(p: Polynomial) -> Polynomial:
    prim, cont = p.normalize()
    return -prim if cont < 0 else prim


_CORNERS = {"dd": (1, 1), "du": (1, -1), "ud": (-1, 1), "uu": (-1, -1)}


def trivial_bifurcation_poly(which: str) -> Polynomial:
    """Hessian determinant at a trivial configuration, over (qq, d, s, chi).

    which selects the corner: dd = down-down (cos θ = cos φ = 1) through
    uu = up-up.  Built directly from the 2x2 corner Hessian, so it
    cross-checks the full bifurcation polynomial independently.
    """
    try:
        g1, g2 = _CORNERS[which]
    except KeyError:
        raise ValueError(f"unknown corner {which!r}") from None
    vs = TRIV_VARS
    qq = Polynomial.variable(vs, "qq")
    d = Polynomial.variable(vs, "d")
    s = Polynomial.variable(vs, "s")
    chi = Polynomial.variable(vs, "chi")
    a = d * s
    b = 2 - d
    c = d * (2 - s)
    h11 = qq * a - 2 * (1 + chi) * g1
    h22 = qq * c - 2 * (1 - chi) * g2
    h12sq = qq * qq * b * b  # (q b γ1 γ2)², γ's square away
    return h11 * h22 - h12sq


# ---------------------------------------------------------------------
# single rotating pendulum


def _single_d2v(Q: float, cos_theta: float) -> float:
    # second derivative of the scaled one-pendulum potential
    return -2 * Q * cos_theta * cos_theta + (1 - Q) * cos_theta + Q


def single_pendulum_equilibria(Q: float):
    """Equilibria of the single rotating pendulum with their classes.

    Returns [(theta, class), ...]: always theta = 0 and pi, plus the
    tilted pair ±arccos((1-Q)/Q) once Q exceeds 1/2 (at exactly 1/2 the
    branch still sits at 0).  Classes: stable, saddle, or degenerate.
    """
    if not 0 <= Q < 1:
        raise ValueError("Q must lie in [0, 1)")
    Q = float(Q)

    def classify(c):
        v = _single_d2v(Q, c)
        if abs(v) < 1e-12:
            return "degenerate"
        return "stable" if v > 0 else "saddle"

    out = [(0.0, classify(1.0)), (math.pi, classify(-1.0))]
    if Q > 0.5:
        c = (1 - Q) / Q
        th = math.acos(c)
        out.append((th, classify(c)))
        out.append((-th, classify(c)))
    return out


_SINGLE_IDS = ("zero", "pi", "nontrivial")


def single_pendulum_nmr(Q: float, eq: str):
    """Normal-mode rate at a single-pendulum equilibrium.

    eq is one of ``zero``, ``pi``, ``nontrivial``.  Returns
    (kind, rate): oscillatory rates are frequencies, exponential rates
    growth exponents; both are sqrt|d²V|.
    """
    if not 0 <= Q < 1:
        raise ValueError("Q must lie in [0, 1)")
    if eq not in _SINGLE_IDS:
        raise ValueError(f"unknown equilibrium id {eq!r}")
    Q = float(Q)
    if eq == "zero":
        c = 1.0
    elif eq == "pi":
        c = -1.0
    else:
        if Q < 0.5:
            raise ValueError("nontrivial equilibrium absent for Q < 1/2")
        c = (1 - Q) / Q
    v = _single_d2v(Q, c)
    kind = "oscillatory" if v >= 0 else "exponential"
    return kind, math.sqrt(abs(v))


# ---------------------------------------------------------------------
# serialization helpers


def load_params(text: str):
    """Parse a JSON object into PhysicalParams or ModelParams.

    Decimal literals are read exactly; strings accept "p/q" or decimal
    forms.  The key set decides which record is meant.
    """
    d = json.loads(text, parse_float=Fraction)
    keys = set(d)
    if keys & {"m1", "m2", "l"}:
        return PhysicalParams.from_dict(d)
    return ModelParams.from_dict(d)
