"""End-to-end acceptance checks, one test per numbered claim.

The expensive Dixon eliminations are session fixtures so a full run
prices them once.  Everything here goes through public entry points
plus the corner-seed helper; oracles are recomputed from scratch in
the tests rather than borrowed from the library code under test.
"""

import math
import random
import resource
import time
from fractions import Fraction as F

import numpy as np
import pytest

from rdp import analysis, elim, model
from rdp.polyring import Polynomial, VarSet, change_varset

# mass ratio, length ratio, delta, sigma, chi for the nine point-mass
# models with unit upper rod and unit mass
TABLE_I = [
    (F(2, 3), F(3, 4), F(25, 73), F(31, 49), F(7, 13)),
    (F(2, 3), F(1), F(3, 11), F(3, 7), F(3, 7)),
    (F(2, 3), F(4, 3), F(29, 125), F(13, 77), F(7, 23)),
    (F(1), F(3, 4), F(17, 65), F(23, 41), F(5, 11)),
    (F(1), F(1), F(1, 5), F(1, 3), F(1, 3)),
    (F(1), F(4, 3), F(5, 29), F(1, 17), F(1, 5)),
    (F(3, 2), F(3, 4), F(35, 179), F(53, 107), F(11, 29)),
    (F(3, 2), F(1), F(1, 7), F(1, 4), F(1, 4)),
    (F(3, 2), F(4, 3), F(7, 55), F(-1, 31), F(1, 9)),
]


def point_masses(m, l2):
    return model.PhysicalParams(m1=1, m2=m, l1=1, l=1, l2=l2)


# ---------------------------------------------------------------------
# shared expensive fixtures


@pytest.fixture(scope="session")
def halftangent_resultants():
    sysm = model.build_system("halftangent")
    g1 = sysm.poly("poly1")
    g2 = sysm.poly("poly2")
    vs = g1.vars
    t = Polynomial.variable(vs, "t")
    u = Polynomial.variable(vs, "u")
    known = [t, u, 1 + t * t, 1 + u * u]
    out = {}
    for var in ("t", "u", "qq"):
        t0 = time.monotonic()
        r = elim.sylvester_resultant(g1, g2, var)
        quot, _mults = elim.strip_known_factors(r, known)
        main, _scale = quot.normalize()
        out[var] = (main, time.monotonic() - t0)
    return out


@pytest.fixture(scope="session")
def bifurcation_edf():
    sysm = model.build_system("bifurcation")
    d = elim.dixon_polynomial(sysm)
    mat = elim.dixon_matrix(
        d, ["c1", "s1", "c2", "s2"], ["c1b", "s1b", "c2b", "s2b"]
    )
    t0 = time.monotonic()
    fl = elim.edf_determinant(
        mat,
        seeded_denominators=analysis._corner_seeds(False),
        verify_points=20,
    )
    return mat, fl, time.monotonic() - t0


@pytest.fixture(scope="session")
def pmmr_edf():
    sysm = model.build_system("pmmr_bifurcation")
    d = elim.dixon_polynomial(sysm)
    mat = elim.dixon_matrix(
        d, ["c1", "s1", "c2", "s2"], ["c1b", "s1b", "c2b", "s2b"]
    )
    fl = elim.edf_determinant(
        mat,
        seeded_denominators=analysis._corner_seeds(True),
        verify_points=20,
    )
    return mat, fl


def dominant_factor(fl):
    return max((p for p, _m, _prov in fl.factors), key=len)


# ---------------------------------------------------------------------
# criteria 1 and 2: exact parameter ratios


def test_criterion_01_table_ratios_exact():
    t0 = time.monotonic()
    for m, l2, delta, sigma, chi in TABLE_I:
        mp, _scales = model.derive_dimensionless(point_masses(m, l2))
        assert mp.delta == delta
        assert mp.sigma == sigma
        assert mp.chi == chi
    assert time.monotonic() - t0 < 1.0


def test_criterion_02_chi_pmmr_matches_table():
    for _m, _l2, delta, sigma, chi in TABLE_I:
        assert model.chi_pmmr(delta, sigma) == chi


# ---------------------------------------------------------------------
# criterion 3: half-tangent resultants


def test_criterion_03_halftangent_resultants(halftangent_resultants):
    counts = {v: len(p) for v, (p, _el) in halftangent_resultants.items()}
    assert counts == {"t": 1290, "u": 1290, "qq": 32}
    for _v, (_p, elapsed) in halftangent_resultants.items():
        assert elapsed < 300


# ---------------------------------------------------------------------
# criteria 4 to 6: Dixon elimination of the bifurcation system


def test_criterion_04_dixon_divisibility(bifurcation_edf):
    mat, fl, elapsed = bifurcation_edf
    assert elapsed < 1800
    assert resource.getrusage(resource.RUSAGE_SELF).ru_maxrss < 4 * 1024 * 1024

    # edf_determinant already verified the product against the minor
    # determinant at 20 random rational points; spot-check 3 more here
    # so this test stands on its own
    rng = random.Random(7)
    for _ in range(3):
        assign = {
            n: F(rng.randint(-30, 30), rng.randint(1, 13))
            for n in mat.varset.names
        }
        want = elim._numeric_minor_det(
            mat, sorted(fl.rows), sorted(fl.cols), assign
        )
        assert fl.evaluate(assign) == want

    big = dominant_factor(fl)
    for corner in analysis._corner_seeds(False):
        prim = corner.primitive()
        mult = sum(m for p, m, _prov in fl.factors if p == prim)
        if mult == 0:
            _quot, mults = elim.strip_known_factors(big, [prim])
            mult = mults[0]
        assert mult >= 1


def test_criterion_05_dominant_factor_size(bifurcation_edf):
    _mat, fl, _elapsed = bifurcation_edf
    # corner seeds and the small parameter-subset factors come out as
    # separate entries, so the dominant factor is already the quotient
    big = dominant_factor(fl)
    assert big == big.primitive()
    assert len(big) == 6744


def test_criterion_06_pmmr_substitution(bifurcation_edf, pmmr_edf):
    _mat, fl, _elapsed = bifurcation_edf
    _pmat, pfl = pmmr_edf
    big = dominant_factor(fl)

    pm_big = dominant_factor(pfl)
    assert len(pm_big) == 1924

    vs = big.vars
    d = Polynomial.variable(vs, "d")
    s = Polynomial.variable(vs, "s")
    qq = Polynomial.variable(vs, "qq")
    den = 2 + d * s - d
    subbed, _k = big.substitute_rational("chi", d + d * s - 2, den)
    subbed = subbed.primitive()

    # the substitution numerator carries a structural cofactor: powers
    # of the cleared denominator and of parameter-plane factors the
    # direct elimination already exhibits; its dominant factor is what
    # must agree
    strips = [den, qq]
    for p, _m, _prov in pfl.factors:
        if 0 < p.degree() and len(p) < 1924 and p.variables() <= {"d", "s"}:
            strips.append(change_varset(p, vs))
    quot, _mults = elim.strip_known_factors(subbed, strips)
    assert change_varset(quot, pm_big.vars) == pm_big

    # onward to rotation strength Q: clear the q = Q/(1-Q) denominator
    vsq = VarSet(["qq", "d", "s", "Q"])
    pq = change_varset(pm_big, vsq)
    Qv = Polynomial.variable(vsq, "Q")
    one = Polynomial.constant(vsq, 1)
    numQ, _k = pq.substitute_rational("qq", Qv, one - Qv)
    quot, _mults = elim.strip_known_factors(numQ, [one - Qv, Qv])
    assert len(quot) == 3356


# ---------------------------------------------------------------------
# criterion 7: quadratic-formula oracle for one dd slice


def test_criterion_07_trivial_bifurcation_roots():
    got = analysis.trivial_bifurcation_q((F(1, 5), F(1, 3), F(1, 3)), "dd")
    assert len(got) == 2
    want = sorted(
        q / (1 + q)
        for q in ((10 - 5 * math.sqrt(2)) / 3, (10 + 5 * math.sqrt(2)) / 3)
    )
    for g, w in zip(got, want):
        assert 0 <= g <= 1
        assert abs(g - w) < 1e-6
    assert abs(got[0] - 0.494007) < 1e-6
    assert abs(got[1] - 0.850531) < 1e-6


# ---------------------------------------------------------------------
# criterion 8: the one-angle limit


def _numeric_d2(f, x, h=0.02):
    # 5-point stencil with one Richardson step; error is far below the
    # 1e-10 gate for trig-polynomial potentials at this h
    def five(hh):
        return (
            -f(x + 2 * hh)
            + 16 * f(x + hh)
            - 30 * f(x)
            + 16 * f(x - hh)
            - f(x - 2 * hh)
        ) / (12 * hh * hh)

    return (16 * five(h / 2) - five(h)) / 15


def test_criterion_08_single_pendulum_suite():
    # branch appears exactly at Q = 1/2
    at_half = model.single_pendulum_equilibria(F(1, 2))
    assert len(at_half) == 2
    assert at_half[0] == (0.0, "degenerate")
    assert len(model.single_pendulum_equilibria(0.5 + 1e-9)) == 4
    assert len(model.single_pendulum_equilibria(0.5 - 1e-9)) == 2
    # the tilted branch is defined from Q = 1/2 on (it sits at zero
    # there) and refuses anything below
    model.single_pendulum_nmr(0.5, "nontrivial")
    with pytest.raises(ValueError):
        model.single_pendulum_nmr(0.5 - 1e-9, "nontrivial")

    rng = random.Random(8)
    checked = 0
    for _ in range(100):
        Q = rng.uniform(0.01, 0.98)

        def pot(x):
            return -(1 - Q) * math.cos(x) - 0.5 * Q * math.sin(x) ** 2

        cases = [("zero", 0.0), ("pi", math.pi)]
        if Q > 0.5 + 1e-3:
            cases.append(("nontrivial", math.acos((1 - Q) / Q)))
        for eq, th in cases:
            kind, rate = model.single_pendulum_nmr(Q, eq)
            d2 = _numeric_d2(pot, th)
            assert abs(rate * rate - abs(d2)) < 1e-10
            if abs(d2) > 1e-8:
                assert (kind == "oscillatory") == (d2 > 0)
            checked += 1
    assert checked >= 100

    for _ in range(200):
        Q = rng.uniform(0.0, 0.999)
        n = len(model.single_pendulum_equilibria(Q))
        assert (n == 4) == (Q > 0.5)


# ---------------------------------------------------------------------
# criterion 9: dense Newton sweep oracle


_ANGLE_ORDER = ("c1", "s1", "c2", "s2")


def _float_terms(poly, fixed):
    """Specialize the parameter variables; keep (c1, s1, c2, s2) terms."""
    names = poly.vars.names
    out = {}
    for mono, coef in poly.terms.items():
        val = float(coef)
        exps = {}
        for name, e in zip(names, mono):
            if name in fixed:
                val *= fixed[name] ** e
            elif e:
                exps[name] = e
        key = tuple(exps.get(nm, 0) for nm in _ANGLE_ORDER)
        out[key] = out.get(key, 0.0) + val
    return [(v, k) for k, v in out.items() if v]


def _angle_eval(terms, C1, S1, C2, S2):
    acc = 0.0
    for v, (e0, e1, e2, e3) in terms:
        acc = acc + v * C1**e0 * S1**e1 * C2**e2 * S2**e3
    return acc


def _theta_derivative(terms):
    # d/dtheta with c1 = cos theta, s1 = sin theta
    out = {}
    for v, (e0, e1, e2, e3) in terms:
        if e0:
            k = (e0 - 1, e1 + 1, e2, e3)
            out[k] = out.get(k, 0.0) - v * e0
        if e1:
            k = (e0 + 1, e1 - 1, e2, e3)
            out[k] = out.get(k, 0.0) + v * e1
    return [(v, k) for k, v in out.items() if v]


def _phi_derivative(terms):
    out = {}
    for v, (e0, e1, e2, e3) in terms:
        if e2:
            k = (e0, e1, e2 - 1, e3 + 1)
            out[k] = out.get(k, 0.0) - v * e2
        if e3:
            k = (e0, e1, e2 + 1, e3 - 1)
            out[k] = out.get(k, 0.0) + v * e3
    return [(v, k) for k, v in out.items() if v]


def _wrap(a):
    w = a - 2 * math.pi * np.round(a / (2 * math.pi))
    return w


def _newton_sweep(delta, sigma, chi, Q, n=400):
    """All critical points of the potential from a dense Newton sweep."""
    sysm = model.build_system("equilibrium")
    fixed = {
        "qq": float(Q) / (1.0 - float(Q)),
        "d": 1.0 + float(delta),
        "s": 1.0 + float(sigma),
        "chi": float(chi),
    }
    t1 = _float_terms(sysm.poly("grad1"), fixed)
    t2 = _float_terms(sysm.poly("grad2"), fixed)
    rows = [
        (t1, _theta_derivative(t1), _phi_derivative(t1)),
        (t2, _theta_derivative(t2), _phi_derivative(t2)),
    ]

    base = np.linspace(-math.pi, math.pi, n, endpoint=False)
    TH, PH = np.meshgrid(base, base, indexing="ij")
    th = TH.ravel().copy()
    ph = PH.ravel().copy()
    for _ in range(30):
        C1, S1 = np.cos(th), np.sin(th)
        C2, S2 = np.cos(ph), np.sin(ph)
        g1 = _angle_eval(rows[0][0], C1, S1, C2, S2)
        g2 = _angle_eval(rows[1][0], C1, S1, C2, S2)
        j11 = _angle_eval(rows[0][1], C1, S1, C2, S2)
        j12 = _angle_eval(rows[0][2], C1, S1, C2, S2)
        j21 = _angle_eval(rows[1][1], C1, S1, C2, S2)
        j22 = _angle_eval(rows[1][2], C1, S1, C2, S2)
        det = j11 * j22 - j12 * j21
        ok = np.abs(det) > 1e-12
        inv = np.where(ok, det, 1.0)
        th = th - np.where(ok, (j22 * g1 - j12 * g2) / inv, 0.0)
        ph = ph - np.where(ok, (j11 * g2 - j21 * g1) / inv, 0.0)

    C1, S1 = np.cos(th), np.sin(th)
    C2, S2 = np.cos(ph), np.sin(ph)
    g1 = _angle_eval(rows[0][0], C1, S1, C2, S2)
    g2 = _angle_eval(rows[1][0], C1, S1, C2, S2)
    good = (np.abs(g1) < 1e-10) & (np.abs(g2) < 1e-10)
    pts = np.stack([_wrap(th[good]), _wrap(ph[good])], axis=1)
    if not pts.size:
        return []

    # collapse the converged cloud: quantized keys thin 160k points to a
    # handful of representatives, then a circular-distance pass merges
    # bin-edge stragglers while keeping full-precision coordinates
    _keys, idx = np.unique(
        np.round(pts * 1e5).astype(np.int64), axis=0, return_index=True
    )
    found = []
    for a, b in pts[np.sort(idx)]:
        for fa, fb in found:
            if abs(_wrap(a - fa)) < 1e-5 and abs(_wrap(b - fb)) < 1e-5:
                break
        else:
            found.append((float(a), float(b)))
    return found


def _same_config_sets(got, want, tol):
    if len(got) != len(want):
        return False
    for a, b in got:
        if not any(
            abs(_wrap(a - wa)) < tol and abs(_wrap(b - wb)) < tol
            for wa, wb in want
        ):
            return False
    return True


def test_criterion_09_equilibria_match_newton_oracle():
    nontrivial_rows = set()
    for m_ratio, l2, delta, sigma, chi in TABLE_I:
        mp = model.ModelParams(delta=delta, sigma=sigma, chi=chi)
        saw_nontrivial = False
        for k in range(1, 10):
            Q = F(k, 10)
            eqs = analysis.find_equilibria(mp, Q)
            for e in eqs:
                assert e.residual < 1e-10
            got = [(e.config.theta, e.config.phi) for e in eqs]
            want = _newton_sweep(delta, sigma, chi, Q)
            assert _same_config_sets(got, want, 1e-8), (
                m_ratio, l2, Q, sorted(got), sorted(want))
            if any(e.origin == "nontrivial" for e in eqs):
                saw_nontrivial = True
        if saw_nontrivial:
            nontrivial_rows.add((m_ratio, l2))
    assert nontrivial_rows == {
        (m, l2) for m, l2, _d, _s, _c in TABLE_I if l2 == F(4, 3)
    }


# ---------------------------------------------------------------------
# criterion 10: integrator sanity


def test_criterion_10_dynamics_sanity():
    mp = model.ModelParams(F(1, 5), F(1, 3), chi=F(1, 3))
    tr = analysis.simulate(mp, F(3, 10), (0.4, -0.3, 0.2, 0.1), 1e-3, 10000)
    assert tr.drift < 1e-6

    f = model.local_fields(mp.with_Q(0), model.Configuration(0.0, 0.0))
    H = -np.array(f.hess)
    Mm = np.array(f.mass)
    evals, evecs = np.linalg.eig(np.linalg.solve(Mm, H))
    k = int(np.argmax(evals))
    omega = math.sqrt(evals[k])
    v = evecs[:, k]
    a2, a1, a0 = model.normal_mode_quadratic(mp.with_Q(0),
                                             model.Configuration(0.0, 0.0))
    disc = math.sqrt(a1 * a1 - 4 * a2 * a0)
    pred = math.sqrt(max((-a1 + disc) / (2 * a2), (-a1 - disc) / (2 * a2)))
    assert abs(pred - omega) < 1e-8  # same quadratic, two routes

    eps = 1e-4
    dt = 1e-3
    tr = analysis.simulate(mp, 0, (eps * v[0], eps * v[1], 0.0, 0.0), dt, 20000)
    comp = np.array(tr.states)[:, 0 if abs(v[0]) > abs(v[1]) else 1]
    sign = np.sign(comp)
    sign = sign[sign != 0]
    crossings = np.nonzero(sign[1:] != sign[:-1])[0]
    assert len(crossings) > 6
    gaps = np.diff(crossings) * dt
    measured = math.pi / float(np.mean(gaps))
    assert abs(measured - omega) / omega < 0.01


# ---------------------------------------------------------------------
# criterion 11: randomized property suites, fixed seeds


def _random_poly(rng, vs, deg, nterms):
    p = Polynomial.zero(vs)
    for _ in range(nterms):
        mono = Polynomial.constant(vs, F(rng.randint(-9, 9), rng.randint(1, 4)))
        for name in vs.names:
            mono = mono * Polynomial.variable(vs, name, rng.randint(0, deg))
        p = p + mono
    return p


def test_criterion_11_property_suites():
    rng = random.Random(2026)

    # ring axioms
    vs = VarSet(["x", "y"])
    for _ in range(30):
        a = _random_poly(rng, vs, 3, 4)
        b = _random_poly(rng, vs, 3, 4)
        c = _random_poly(rng, vs, 3, 4)
        assert a + b == b + a
        assert a * b == b * a
        assert (a + b) * c == a * c + b * c
        assert (a * b) * c == a * (b * c)
        assert a - a == Polynomial.zero(vs)

    # resultant commutes with specialization that keeps both degrees
    vsa = VarSet(["x", "a"])
    one = Polynomial.constant(vsa, 1)
    done = 0
    while done < 20:
        p = _random_poly(rng, vsa, 2, 3)
        q = _random_poly(rng, vsa, 2, 3)
        if p.degree("x") == 0 or q.degree("x") == 0:
            continue
        val = F(rng.randint(-6, 6), rng.randint(1, 3))
        cv = Polynomial.constant(vsa, val)
        ps, _ = p.substitute_rational("a", cv, one)
        qs, _ = q.substitute_rational("a", cv, one)
        if ps.degree("x") != p.degree("x") or qs.degree("x") != q.degree("x"):
            continue  # leading coefficient died, formula picks up powers
        r = elim.sylvester_resultant(p, q, "x")
        r_spec, _ = r.substitute_rational("a", cv, one)
        assert r_spec == elim.sylvester_resultant(ps, qs, "x")
        done += 1

    # EDF factor product reproduces the exact determinant
    done = 0
    while done < 8:
        entries = [
            [_random_poly(rng, vs, 1, 2) for _ in range(3)] for _ in range(3)
        ]
        mat = elim.PolyMatrix(vs, entries)
        det = elim._determinant(mat)
        if det.is_zero():
            continue
        fl = elim.edf_determinant(mat, verify_points=2)
        assert fl.product() == det
        done += 1

    # equilibria come in +/- pairs
    done = 0
    while done < 10:
        mp = model.ModelParams(
            F(rng.randint(-8, 8), 10),
            F(rng.randint(-8, 8), 10),
            chi=F(rng.randint(-8, 8), 10),
        )
        Q = F(rng.choice([2, 5, 8]), 10)
        try:
            eqs = analysis.find_equilibria(mp, Q)
        except np.linalg.LinAlgError:
            continue  # kinetically degenerate draw
        pts = [(e.config.theta, e.config.phi) for e in eqs]
        for th, ph in pts:
            assert any(
                abs(_wrap(a + th)) < 1e-8 and abs(_wrap(b + ph)) < 1e-8
                for a, b in pts
            ), (mp, Q, th, ph)
        done += 1
