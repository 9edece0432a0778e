"""Numerics on top of the exact layer.

Real-root isolation by Sturm sequences, equilibrium enumeration through
the half-tangent elimination pipeline, bifurcation detection for the
vertical configurations, parameter-space scans of the bifurcation
polynomials, and a fixed-step integrator used as a dynamics sanity
check.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

import numpy as np

from . import model
from .elim import (
    dixon_matrix,
    dixon_polynomial,
    edf_determinant,
    strip_known_factors,
    sylvester_resultant,
)
from .model import Configuration, ModelParams
from .polyring import Polynomial, VarSet, change_varset

__all__ = [
    "Equilibrium",
    "RootInterval",
    "ScanGrid",
    "Trajectory",
    "isolate_real_roots",
    "trivial_bifurcation_q",
    "find_equilibria",
    "scan_surface",
    "simulate",
    "nontrivial_factor",
]

GRAD_TOL = 1e-10
CLASS_TOL = 1e-10
ROOT_WIDTH = Fraction(1, 10**12)


@dataclass(frozen=True)
class RootInterval:
    """An interval certified to contain exactly one real root."""

    lo: Fraction
    hi: Fraction
    refined: float

    def width(self) -> Fraction:
        return self.hi - self.lo


@dataclass(frozen=True)
class Equilibrium:
    config: Configuration
    residual: float
    omega_sq: tuple  # two real roots, ascending
    class_: str  # stable | saddle | unstable | degenerate
    origin: str  # trivial | nontrivial

    def to_dict(self) -> dict:
        return {
            "theta": self.config.theta,
            "phi": self.config.phi,
            "residual": self.residual,
            "omega_sq": list(self.omega_sq),
            "class": self.class_,
            "origin": self.origin,
        }


@dataclass(frozen=True)
class ScanGrid:
    """A rectangular sample grid: named axes plus one value per node.

    Axes are (name, lo, hi, count) with count evenly spaced samples
    including both endpoints (a single-sample axis sits at lo).  Values
    run in row-major order, last axis fastest.
    """

    axes: tuple  # of (name, float, float, int)
    values: tuple

    def __post_init__(self):
        n = 1
        for _name, _lo, _hi, count in self.axes:
            if count < 1:
                raise ValueError("axis needs at least one sample")
            n *= count
        if len(self.values) != n:
            raise ValueError("value count does not match axis sizes")

    def axis_samples(self, i: int) -> np.ndarray:
        name, lo, hi, count = self.axes[i]
        if count == 1:
            return np.array([lo])
        return np.linspace(lo, hi, count)

    def to_csv(self) -> str:
        header = ",".join([a[0] for a in self.axes] + ["value"])
        grids = np.meshgrid(*[self.axis_samples(i) for i in range(len(self.axes))],
                            indexing="ij")
        flat = [g.reshape(-1) for g in grids]
        lines = [header]
        for idx, v in enumerate(self.values):
            cells = [f"{flat[k][idx]:.17g}" for k in range(len(flat))]
            cells.append(f"{v:.17g}")
            lines.append(",".join(cells))
        return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class Trajectory:
    times: tuple
    states: tuple  # of (theta, phi, theta_dot, phi_dot)
    jacobi: tuple

    @property
    def drift(self) -> float:
        base = self.jacobi[0]
        return max(abs(j - base) for j in self.jacobi)


# ---------------------------------------------------------------------
# univariate real-root isolation


def _univariate_coeffs(p: Polynomial):
    """Extract (var, dense Fraction coefficient list, ascending)."""
    used = sorted(p.variables())
    if len(used) > 1:
        raise ValueError(f"polynomial is not univariate: uses {used}")
    if not used:
        return None, [Fraction(c) for c in p.terms.values()] or [Fraction(0)]
    var = used[0]
    i = p.vars.index(var)
    deg = p.degree(var)
    out = [Fraction(0)] * (deg + 1)
    for m, c in p.terms.items():
        out[m[i]] += Fraction(c)
    return var, out


def _horner(coeffs, x: Fraction) -> Fraction:
    acc = Fraction(0)
    for c in reversed(coeffs):
        acc = acc * x + c
    return acc


def _poly_div(a, b):
    """Univariate division over Q: returns remainder of a by b."""
    a = list(a)
    db, lb = len(b) - 1, b[-1]
    while len(a) - 1 >= db and any(a):
        da = len(a) - 1
        if not a[-1]:
            a.pop()
            continue
        f = a[-1] / lb
        shift = da - db
        for k in range(db + 1):
            a[shift + k] -= f * b[k]
        a.pop()
    while len(a) > 1 and not a[-1]:
        a.pop()
    return a or [Fraction(0)]


def _int_primitive(coeffs):
    """Scale to coprime integers, keeping sign."""
    den = 1
    for c in coeffs:
        den = den * c.denominator // math.gcd(den, c.denominator)
    ints = [int(c * den) for c in coeffs]
    g = 0
    for v in ints:
        g = math.gcd(g, abs(v))
    if g > 1:
        ints = [v // g for v in ints]
    return [Fraction(v) for v in ints]


def _sturm_chain(coeffs):
    deriv = [c * k for k, c in enumerate(coeffs)][1:]
    chain = [_int_primitive(coeffs), _int_primitive(deriv)]
    while len(chain[-1]) > 1 or chain[-1][0]:
        rem = _poly_div(chain[-2], chain[-1])
        if len(rem) == 1 and not rem[0]:
            break
        chain.append(_int_primitive([-c for c in rem]))
    return chain


def _sign_changes(chain, x: Fraction) -> int:
    prev = 0
    changes = 0
    for coeffs in chain:
        v = _horner(coeffs, x)
        s = (v > 0) - (v < 0)
        if s == 0:
            continue
        if prev and s != prev:
            changes += 1
        prev = s
    return changes


def isolate_real_roots(p: Polynomial, lo, hi) -> list:
    """Disjoint isolating intervals for the real roots of p in [lo, hi].

    Sturm counting on the square-free part locates the roots; each
    interval is then bisected below width 1e-12 and carries a float
    midpoint.  Root multiplicity does not produce duplicates.
    """
    if p.is_zero():
        raise ValueError("zero polynomial has no isolated roots")
    var, coeffs = _univariate_coeffs(p)
    lo, hi = Fraction(lo), Fraction(hi)
    if hi < lo:
        raise ValueError("empty interval")
    if var is None or len(coeffs) == 1:
        return []

    # square-free part: divide by gcd with the derivative
    sf = coeffs
    while True:
        deriv = [c * k for k, c in enumerate(sf)][1:]
        g = _univariate_gcd(sf, deriv)
        if len(g) == 1:
            break
        sf = _poly_quotient(sf, g)
    chain = _sturm_chain(sf)

    out = []
    if _horner(sf, lo) == 0:
        out.append(_refine_exact(lo))
    # Sturm counts roots in (a, b]
    work = [(lo, hi, _sign_changes(chain, lo) - _sign_changes(chain, hi))]
    boxes = []
    while work:
        a, b, n = work.pop()
        if n <= 0:
            continue
        if n == 1 and _horner(sf, b) != 0 or b - a < ROOT_WIDTH:
            boxes.append((a, b, n))
            continue
        mid = (a + b) / 2
        va = _sign_changes(chain, a)
        vm = _sign_changes(chain, mid)
        vb = _sign_changes(chain, b)
        work.append((a, mid, va - vm))
        work.append((mid, b, vm - vb))
    for a, b, _n in boxes:
        while b - a >= ROOT_WIDTH:
            mid = (a + b) / 2
            if _horner(sf, mid) == 0:
                a = b = mid
                break
            if _sign_changes(chain, a) - _sign_changes(chain, mid) >= 1:
                b = mid
            else:
                a = mid
        out.append(RootInterval(a, b, float((a + b) / 2)))
    out.sort(key=lambda r: r.lo)
    return out


def _refine_exact(x: Fraction) -> RootInterval:
    return RootInterval(x, x, float(x))


def _univariate_gcd(a, b):
    a, b = list(a), list(b)
    while len(b) > 1 or (b and b[0]):
        a, b = b, _poly_div(a, b)
        while len(b) > 1 and not b[-1]:
            b.pop()
        if len(b) == 1 and not b[0]:
            break
    return _int_primitive(a) if len(a) > 1 else [Fraction(1)]


def _poly_quotient(a, b):
    """Exact univariate quotient a / b."""
    a = list(a)
    out = [Fraction(0)] * (len(a) - len(b) + 1)
    lb = b[-1]
    for k in range(len(out) - 1, -1, -1):
        f = a[len(b) - 1 + k] / lb
        out[k] = f
        for j in range(len(b)):
            a[k + j] -= f * b[j]
    return out


# ---------------------------------------------------------------------
# trivial-configuration bifurcations


def _as_fraction(v) -> Fraction:
    if isinstance(v, float):
        return Fraction(v).limit_denominator(10**9)
    return Fraction(v)


def trivial_bifurcation_q(m, which: str) -> list:
    """Rotation strengths Q in [0, 1] at which the selected vertical
    configuration has a degenerate Hessian.

    m supplies delta, sigma, chi (a ModelParams or a 3-sequence).
    """
    if isinstance(m, ModelParams):
        delta, sigma, chi = m.delta, m.sigma, m.chi
    else:
        delta, sigma, chi = m
    p = model.trivial_bifurcation_poly(which)
    one = Polynomial.constant(p.vars, 1)
    for name, val in (("d", 1 + _as_fraction(delta)),
                      ("s", 1 + _as_fraction(sigma)),
                      ("chi", _as_fraction(chi))):
        p, _ = p.substitute_rational(
            name, Polynomial.constant(p.vars, val), one)
    if p.is_zero():
        return []
    _var, coeffs = _univariate_coeffs(p)
    if len(coeffs) == 1:
        return []
    bound = _cauchy_bound(coeffs)
    roots = isolate_real_roots(p, 0, bound)
    out = []
    for r in roots:
        q = r.refined
        Q = q / (1 + q)
        if 0 <= Q <= 1:
            out.append(Q)
    return sorted(out)


def _cauchy_bound(coeffs) -> Fraction:
    lead = abs(coeffs[-1])
    m = max(abs(c) for c in coeffs[:-1]) if len(coeffs) > 1 else Fraction(0)
    return 1 + m / lead


# ---------------------------------------------------------------------
# equilibrium enumeration


def _classify(omega_sq) -> str:
    lo, hi = omega_sq
    if abs(lo) <= CLASS_TOL or abs(hi) <= CLASS_TOL:
        return "degenerate"
    if lo > 0:
        return "stable"
    if hi < 0:
        return "unstable"
    return "saddle"


def _make_equilibrium(m: ModelParams, theta, phi, origin) -> Equilibrium:
    cfg = Configuration(model.canonical_angle(theta),
                        model.canonical_angle(phi))
    f = model.local_fields(m, cfg)
    residual = max(abs(f.grad[0]), abs(f.grad[1]))
    Hm = -np.array(f.hess)
    Mm = np.array(f.mass)
    evs = np.sort(np.linalg.eigvals(np.linalg.solve(Mm, Hm)).real)
    omega_sq = (float(evs[0]), float(evs[1]))
    return Equilibrium(config=cfg, residual=residual, omega_sq=omega_sq,
                       class_=_classify(omega_sq), origin=origin)


def _newton_polish(m: ModelParams, theta, phi):
    """Damped Newton iteration on the gradient; None if it fails."""
    f = model.local_fields(m, Configuration(theta, phi))
    res = max(abs(g) for g in f.grad)
    for _ in range(50):
        H = np.array(f.hess)
        try:
            step = np.linalg.solve(H, -np.array(f.grad))
        except np.linalg.LinAlgError:
            return None
        lam = 1.0
        while True:
            cand = Configuration(theta + lam * step[0], phi + lam * step[1])
            fc = model.local_fields(m, cand)
            rc = max(abs(g) for g in fc.grad)
            if rc <= res or lam < 1e-6:
                break
            lam /= 2
        theta, phi = cand.theta, cand.phi
        f, res = fc, rc
        if lam * float(np.hypot(*step)) < 1e-14:
            break
    if res >= GRAD_TOL:
        return None
    return theta, phi


def _specialized_halftangent(m: ModelParams, q: Fraction):
    sys_ = model.build_system("halftangent")
    polys = []
    for _name, p in sys_.polys:
        one = Polynomial.constant(p.vars, 1)
        for var, val in (("qq", q), ("delta", _as_fraction(m.delta)),
                         ("sigma", _as_fraction(m.sigma)),
                         ("chi", _as_fraction(m.chi))):
            p, _ = p.substitute_rational(
                var, Polynomial.constant(p.vars, val), one)
        polys.append(p)
    return polys


def find_equilibria(m: ModelParams, Q) -> list:
    """All equilibria at rotation strength Q, classified.

    The four vertical configurations are always present.  Nontrivial
    ones come from eliminating u out of the half-tangent pair at
    exact-rational parameters, isolating real t-roots, matching u by
    back-substitution, and polishing with damped Newton on the true
    floating-point gradient.  The output is closed under simultaneous
    negation of both angles.
    """
    if not 0 <= Q < 1:
        raise ValueError("Q must lie in [0, 1)")
    mq = m.with_Q(float(Q))
    out = []
    pi = math.pi
    for th in (0.0, pi):
        for ph in (0.0, pi):
            out.append(_make_equilibrium(mq, th, ph, "trivial"))

    qx = _as_fraction(Q)
    qfrac = qx / (1 - qx)
    p1, p2 = _specialized_halftangent(m, qfrac)
    found = []
    if p1.degree("u") >= 1 and p2.degree("u") >= 1:
        res = sylvester_resultant(p1, p2, "u")
        if not res.is_zero():
            vs = res.vars
            t = Polynomial.variable(vs, "t")
            u = Polynomial.variable(vs, "u")
            known = [t, u, 1 + t * t, 1 + u * u]
            quot, _mults = strip_known_factors(res, known)
            if quot.degree("t") >= 1:
                bound = _cauchy_bound(_univariate_coeffs(quot)[1])
                for ri in isolate_real_roots(quot, -bound, bound):
                    found.extend(_match_u(mq, p1, p2, ri.refined))
    # t = 0 solutions with u free fall outside the stripped factor;
    # recover them from poly2 at t = 0
    found.extend(_axis_candidates(mq, p1, p2))

    uniq = {}
    for th, ph in found:
        for sgn in (1, -1):
            e = _make_equilibrium(mq, sgn * th, sgn * ph, "nontrivial")
            if e.residual >= GRAD_TOL:
                continue
            key = (round(e.config.theta, 9), round(e.config.phi, 9))
            if any(abs(e.config.theta - o.config.theta) < 1e-8
                   and abs(e.config.phi - o.config.phi) < 1e-8
                   for o in out):
                continue
            uniq.setdefault(key, e)
    out.extend(sorted(uniq.values(),
                      key=lambda e: (e.config.theta, e.config.phi)))
    return out


def _u_candidates(poly, tval: float):
    """Real u-roots of a (t,u) polynomial at numeric t."""
    vs = poly.vars
    it = vs.index("t")
    iu = vs.index("u")
    deg = poly.degree("u")
    coeffs = [0.0] * (deg + 1)
    for mo, c in poly.terms.items():
        coeffs[mo[iu]] += float(c) * tval ** mo[it]
    arr = np.array(coeffs[::-1])
    nz = np.flatnonzero(np.abs(arr) > 1e-13)
    if nz.size == 0 or nz[0] == len(arr) - 1:
        return []
    arr = arr[nz[0]:]
    roots = np.roots(arr)
    return [float(r.real) for r in roots if abs(r.imag) < 1e-7]


def _match_u(mq, p1, p2, tval):
    cands = _u_candidates(p1, tval)
    if not cands:
        cands = _u_candidates(p2, tval)
    pairs = []
    for uval in cands:
        theta = 2 * math.atan(tval)
        phi = 2 * math.atan(uval)
        polished = _newton_polish(mq, theta, phi)
        if polished is None:
            warnings.warn(
                f"candidate near (theta={theta:.6f}, phi={phi:.6f}) did "
                "not converge; dropped", stacklevel=2)
            continue
        pairs.append(polished)
    return pairs


def _axis_candidates(mq, p1, p2):
    """Solutions with one angle vertical but not the other."""
    out = []
    for poly, fixed_var, free in ((p2, "t", "u"), (p1, "u", "t")):
        one = Polynomial.constant(poly.vars, 1)
        zerod, _ = poly.substitute_rational(
            fixed_var, Polynomial.zero(poly.vars), one)
        fv = Polynomial.variable(poly.vars, free)
        quot, _m = strip_known_factors(zerod, [fv, 1 + fv * fv])
        if quot.degree(free) < 1:
            continue
        bound = _cauchy_bound(_univariate_coeffs(quot)[1])
        for ri in isolate_real_roots(quot, -bound, bound):
            ang = 2 * math.atan(ri.refined)
            theta, phi = (0.0, ang) if fixed_var == "t" else (ang, 0.0)
            polished = _newton_polish(mq, theta, phi)
            if polished is not None:
                out.append(polished)
    return out


# ---------------------------------------------------------------------
# parameter-space scans


_SCAN_KINDS = ("dd", "du", "ud", "uu", "resultant-factor")


@functools.lru_cache(maxsize=None)
def nontrivial_factor(pmmr: bool) -> Polynomial:
    """The largest elimination factor beyond the four vertical ones.

    Runs the full cancellation-determinant pipeline on the bifurcation
    system (with the point-mass gravity ratio substituted when pmmr),
    strips the vertical-configuration factors, and returns the
    remaining irreducible condition on the parameters.
    """
    kind = "pmmr_bifurcation" if pmmr else "bifurcation"
    sys_ = model.build_system(kind)
    d = dixon_polynomial(sys_)
    aux = [v + "b" for v in sys_.elim_vars]
    mat = dixon_matrix(d, list(sys_.elim_vars), aux)
    fl = edf_determinant(mat, seeded_denominators=_corner_seeds(pmmr))
    big = max((f for f, _m, _p in fl.factors), key=lambda f: len(f.terms))
    quot, _mults = strip_known_factors(big, _corner_seeds(pmmr))
    return quot


def _corner_seeds(pmmr: bool):
    polys = []
    for which in ("dd", "du", "ud", "uu"):
        p = model.trivial_bifurcation_poly(which)
        if pmmr:
            d = Polynomial.variable(p.vars, "d")
            s = Polynomial.variable(p.vars, "s")
            num = d + d * s - 2
            den = 2 + d * s - d
            p, _ = p.substitute_rational("chi", num, den)
            p = change_varset(p.primitive(), VarSet(["qq", "d", "s"]))
        polys.append(p)
    return tuple(polys)


def _scan_poly(kind: str, pmmr: bool) -> Polynomial:
    if kind == "resultant-factor":
        return nontrivial_factor(pmmr)
    return model.trivial_bifurcation_poly(kind)


def scan_surface(kind: str, grid, pmmr: bool = False,
                 threads: int = 1) -> ScanGrid:
    """Sample a bifurcation polynomial over a rectangular grid.

    grid is a sequence of (name, lo, hi, count) axes.  With pmmr the
    axes are delta/sigma/Q and the gravity ratio is tied to the shape;
    otherwise d/s/chi/Q.  Values at Q = 1 are NaN (the spin ratio
    diverges).
    """
    if kind not in _SCAN_KINDS:
        raise ValueError(f"unknown scan kind {kind!r}")
    allowed = {"delta", "sigma", "Q"} if pmmr else {"d", "s", "chi", "Q"}
    axes = tuple((str(n), float(lo), float(hi), int(c))
                 for n, lo, hi, c in grid)
    names = [a[0] for a in axes]
    if len(set(names)) != len(names):
        raise ValueError("duplicate axis")
    bad = set(names) - allowed
    if bad:
        raise ValueError(f"axis mismatch: {sorted(bad)} not in {sorted(allowed)}")

    poly = _scan_poly(kind, pmmr)
    need = set(poly.variables())
    mesh = np.meshgrid(*[_axis_array(a) for a in axes], indexing="ij")
    env = {}
    if pmmr:
        delta = mesh[names.index("delta")] if "delta" in names else None
        sigma = mesh[names.index("sigma")] if "sigma" in names else None
        if delta is None or sigma is None or "Q" not in names:
            raise ValueError("pmmr scan needs delta, sigma and Q axes")
        env["d"] = 1.0 + delta
        env["s"] = 1.0 + sigma
        den = 2.0 + sigma * (1.0 + delta)
        with np.errstate(divide="ignore", invalid="ignore"):
            env["chi"] = (2.0 * delta + sigma * (1.0 + delta)) / den
    else:
        for nm in ("d", "s", "chi"):
            if nm in names:
                env[nm] = mesh[names.index(nm)]
        missing = {"d", "s", "chi"} & need - set(env)
        if missing:
            raise ValueError(f"axis mismatch: missing {sorted(missing)}")
    if "Q" in names:
        Qv = mesh[names.index("Q")]
        with np.errstate(divide="ignore", invalid="ignore"):
            env["qq"] = np.where(Qv < 1.0, Qv / (1.0 - Qv), np.nan)
    elif "qq" in need:
        raise ValueError("axis mismatch: missing Q")

    shape = mesh[0].shape if mesh else ()
    acc = np.zeros(shape)
    for mono, coef in poly.terms.items():
        term = np.full(shape, float(coef))
        for nm, e in zip(poly.vars.names, mono):
            if e:
                term = term * env[nm] ** e
        acc = acc + term
    return ScanGrid(axes=axes, values=tuple(float(v) for v in acc.reshape(-1)))


def _axis_array(axis):
    _name, lo, hi, count = axis
    if count == 1:
        return np.array([lo])
    return np.linspace(lo, hi, count)


# ---------------------------------------------------------------------
# dynamics sanity integrator


def _accel(co, q, chi, state):
    a, b, c, at, bt, ct = co
    theta, phi, td, pd = state
    s1, c1 = math.sin(theta), math.cos(theta)
    s2, c2 = math.sin(phi), math.cos(phi)
    g1 = q * (a * s1 + b * s2) * c1 - 2 * (1 + chi) * s1
    g2 = q * (b * s1 + c * s2) * c2 - 2 * (1 - chi) * s2
    dl = phi - theta
    cd, sd = math.cos(dl), math.sin(dl)
    m12 = bt * cd
    det = at * ct - m12 * m12
    if abs(det) < 1e-14:
        raise ValueError("singular mass matrix along trajectory")
    # velocity coupling from the configuration-dependent mass matrix
    f1 = g1 + bt * sd * pd * pd
    f2 = g2 - bt * sd * td * td
    return np.array([td, pd,
                     (ct * f1 - m12 * f2) / det,
                     (at * f2 - m12 * f1) / det])


def simulate(m: ModelParams, Q, state0, dt: float, n: int) -> Trajectory:
    """Fixed-step 4th-order integration of the equations of motion.

    state0 is (theta, phi, theta_dot, phi_dot).  The returned jacobi
    samples are the conserved energy integral (kinetic quadratic form
    minus the stored potential); their drift bounds integration error.
    """
    if dt <= 0 or n < 0:
        raise ValueError("need dt > 0 and n >= 0")
    mq = m.with_Q(float(Q))
    rcf = model.reduced_coefficients(mq)
    co = tuple(float(getattr(rcf, f)) for f in ("a", "b", "c", "at", "bt", "ct"))
    if model.kinetic_positive_definite(float(rcf.dt), float(rcf.st)) <= 0:
        warnings.warn("kinetic form not positive definite; mass matrix "
                      "may become singular", stacklevel=2)
    q = float(mq.q)
    chi = float(mq.chi)
    at, bt, ct = co[3], co[4], co[5]

    def jacobi(state):
        theta, phi, td, pd = state
        cdel = math.cos(phi - theta)
        kin = 0.5 * (at * td * td + 2 * bt * cdel * td * pd + ct * pd * pd)
        return kin - model.local_fields(mq, Configuration(theta, phi)).V

    y = np.array(state0, dtype=float)
    times = [0.0]
    states = [tuple(y)]
    jac = [jacobi(y)]
    for k in range(n):
        k1 = _accel(co, q, chi, y)
        k2 = _accel(co, q, chi, y + 0.5 * dt * k1)
        k3 = _accel(co, q, chi, y + 0.5 * dt * k2)
        k4 = _accel(co, q, chi, y + dt * k3)
        y = y + (dt / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)
        times.append((k + 1) * dt)
        states.append(tuple(y))
        jac.append(jacobi(y))
    return Trajectory(times=tuple(times), states=tuple(states),
                      jacobi=tuple(jac))
