"""Variable elimination by resultants.

Three layers: classical Sylvester resultants for two polynomials, the
Dixon cancellation construction for n+1 polynomials in n variables, and
a fraction-free determinant engine that detects factors early (EDF)
instead of expanding one monolithic polynomial.

The engine performs division-free cross-multiplication elimination,
tracking per-row pending divisors (the Bareiss divisions, deferred) and
extracting row/column contents greedily.  The determinant of the
selected maximal minor is recovered as a signed product of detected
factors; the identity is verified by evaluation at random rational
points before the result is returned.
"""

from __future__ import annotations

import logging
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from . import _fastpoly as fp
from .polyring import (
    Polynomial,
    VarSet,
    _grlex_key,
    change_varset,
    exact_divide,
)
from ._fastpoly import fast_exact_divide

__all__ = [
    "PolySystem",
    "PolyMatrix",
    "FactorList",
    "sylvester_resultant",
    "dixon_polynomial",
    "dixon_matrix",
    "edf_determinant",
    "strip_known_factors",
]

_DUMP_AT = None  # (step, path) debug hook, scratch use only

_log = logging.getLogger(__name__)


def _try_row_div(entries, d, n):
    """Divide every nonzero entry by d, or None when any fails."""
    out = []
    for e in entries:
        if not e:
            out.append(e)
            continue
        q = fp.fdiv(e, d, n)
        if q is None:
            return None
        out.append(q)
    return out


def _gcd_profile(live, n):
    """Per-variable degree bound for the common factor of live entries.

    A variable absent from any entry is ruled out for free; the rest
    are bounded by the gcd degree of modular univariate images.  All
    zeros means the common factor is constant (up to evaluation luck,
    which only costs a wasted exact attempt, never correctness).
    """
    degs = [fp.fdegrees(e, n) for e in live]
    prof = []
    for v in range(n):
        if all(d[v] for d in degs):
            prof.append(fp.fimage_gcd_degree(live, n, v))
        else:
            prof.append(0)
    return prof


def _register_factor(registry, fd, n, varset):
    """Add the primitive core of fd to the candidate registry once."""
    if len(fd) > 200:
        return
    mono = fp.fmono_min([fd], n)
    if mono:
        fd = fp.fshift_down(fd, mono)
    fd = fp.fprimitive(fd)
    if fp._fis_const(fd):
        return
    for fd2, _p, _d in registry:
        if len(fd2) == len(fd) and fd2 == fd:
            return
    registry.append((fd, fp.to_poly(fd, varset), fp.fdegrees(fd, n)))


def _bank_into_pend(pend, fd, n):
    """Cancel an extracted factor against the deferred divisors.

    A row that failed its Bareiss division still holds the divisor as
    a literal polynomial factor; when content extraction later pulls a
    piece of that divisor out, recording it as content would double
    count, so it books against the pending divisors instead.  Shared
    parts cancel one divisor at a time, so a factor that straddles
    several divisors still drains them.  Returns the residue nothing
    absorbed, or None when the factor was banked completely.
    """
    j = 0
    while j < len(pend) and fd is not None:
        p = pend[j]
        q = fp.fdiv(p, fd, n)
        if q is not None:
            if q == {0: 1}:
                pend.pop(j)
            else:
                pend[j] = q
            return None
        if fp._fis_const(fd):
            j += 1
            continue
        if len(fd) + len(p) <= 1500:
            g = fp.fgcd(fd, p, n)
        else:
            g = fp.fgcd_modular(fd, p, n)
        if g is None or fp._fis_const(g):
            j += 1
            continue
        pq = fp.fdiv(p, g, n)
        fq = fp.fdiv(fd, g, n)
        if pq is None or fq is None:
            # primitive-part gcd need not divide over the integers;
            # leave this divisor alone rather than misbook a scalar
            j += 1
            continue
        if pq == {0: 1}:
            pend.pop(j)
        else:
            pend[j] = pq
            j += 1
        fd = None if fq == {0: 1} else fq
    return fd


def _extract_poly_factors(entries, n, varset, registry, pend=None):
    """Pull every common polynomial factor out of the entries.

    Factors found earlier in the elimination tend to reappear, so
    registered candidates are trial-divided first (filtered by the
    degree profile); the exact gcd chain runs only when the images
    insist on a factor no candidate explains.  Each factor cancels
    into a pending divisor when it can, and is recorded otherwise.
    Returns the reduced entries and the recorded factors.
    """
    factors = []
    while True:
        live = [e for e in entries if e]
        if not live:
            break
        if len(live) == 1:
            g = live[0]
            if fp._fis_const(g):
                break
            g = dict(g)
            entries = _try_row_div(entries, g, n)
        else:
            prof = _gcd_profile(live, n)
            if not any(prof):
                break
            g = None
            for fd, _poly, cd in registry:
                if any(a > b for a, b in zip(cd, prof)):
                    continue
                divided = _try_row_div(entries, fd, n)
                if divided is not None:
                    entries = divided
                    g = fd
                    break
            if g is None:
                gave_up = False
                for e in sorted(live, key=len):
                    if g is None:
                        g = e
                    elif fp.fdiv(e, g, n) is None:
                        # g no longer divides, so shrink it; when it
                        # does divide the gcd is g itself and the
                        # step costs one exact division
                        if len(g) + len(e) <= 1500:
                            g = fp.fgcd(g, e, n)
                        else:
                            # a remainder sequence on operands this
                            # big is hopeless; a verified modular
                            # divisor keeps the invariant that g
                            # divides every entry seen so far
                            g = fp.fgcd_modular(g, e, n)
                            if g is None:
                                _log.debug(
                                    "modular gcd gave up: sizes %s, "
                                    "profile %s",
                                    sorted(len(x) for x in live), prof,
                                )
                                gave_up = True
                                break
                    if fp._fis_const(g):
                        g = None
                        break
                if gave_up or g is None:
                    break
                divided = _try_row_div(entries, g, n)
                if divided is None:
                    break
                entries = divided
        res = g if pend is None else _bank_into_pend(pend, g, n)
        if res is not None:
            factors.append(fp.to_poly(res, varset))
        _register_factor(registry, g, n, varset)
    return entries, factors


@dataclass(frozen=True)
class PolySystem:
    """An ordered polynomial system with designated elimination variables."""

    varset: VarSet
    polys: tuple  # of (name, Polynomial)
    elim_vars: tuple  # of variable names

    def __post_init__(self):
        for name, p in self.polys:
            if p.is_zero():
                raise ValueError(f"system polynomial {name!r} is zero")
            if p.vars != self.varset:
                raise ValueError(f"system polynomial {name!r} over wrong VarSet")
        for v in self.elim_vars:
            if v not in self.varset:
                raise ValueError(f"elimination variable {v!r} not in VarSet")

    def __iter__(self):
        return iter(self.polys)

    def __len__(self):
        return len(self.polys)

    def poly(self, name: str) -> Polynomial:
        for n, p in self.polys:
            if n == name:
                return p
        raise KeyError(name)


class PolyMatrix:
    """A rectangular grid of polynomials over one VarSet."""

    __slots__ = ("varset", "entries", "row_labels", "col_labels")

    def __init__(self, varset, entries, row_labels=None, col_labels=None):
        entries = tuple(tuple(row) for row in entries)
        if entries:
            w = len(entries[0])
            if any(len(r) != w for r in entries):
                raise ValueError("ragged matrix")
        self.varset = varset
        self.entries = entries
        self.row_labels = row_labels
        self.col_labels = col_labels

    @property
    def nrows(self):
        return len(self.entries)

    @property
    def ncols(self):
        return len(self.entries[0]) if self.entries else 0

    def __getitem__(self, rc):
        r, c = rc
        return self.entries[r][c]

    def is_zero(self):
        return all(e.is_zero() for row in self.entries for e in row)

    def __repr__(self):
        return f"<PolyMatrix {self.nrows}x{self.ncols}>"


@dataclass(frozen=True)
class FactorList:
    """A determinant represented as sign · ∏ factor^multiplicity.

    Each factor is primitive with a positive leading coefficient, except
    constant factors, which carry the positive rational scale.
    Provenance records how a factor was detected: row/column `content`,
    a divided-out `seeded-denominator`, or a pivot `numerator` factor.
    """

    sign: int
    factors: tuple  # of (Polynomial, multiplicity, provenance)
    rows: tuple = ()  # selected pivot rows of the source matrix
    cols: tuple = ()

    def product(self) -> Polynomial:
        acc = None
        for poly, mult, _prov in self.factors:
            piece = poly ** mult
            acc = piece if acc is None else acc * piece
        if acc is None:
            raise ValueError("empty factor list has no product")
        return acc * self.sign

    def evaluate(self, assignment) -> Fraction:
        out = Fraction(self.sign)
        for poly, mult, _prov in self.factors:
            out *= Fraction(poly.evaluate(assignment)) ** mult
        return out

    def report(self) -> str:
        lines = [f"sign={'+1' if self.sign > 0 else '-1'}"]
        for poly, mult, _prov in self.factors:
            lines.append(f"mult={mult} terms={len(poly)} poly={poly}")
        return "\n".join(lines)

    def to_json(self) -> dict:
        return {
            "sign": self.sign,
            "factors": [
                {
                    "mult": mult,
                    "terms": len(poly),
                    "provenance": prov,
                    "poly": str(poly),
                }
                for poly, mult, prov in self.factors
            ],
        }

    def term_counts(self) -> list:
        return [len(poly) for poly, _m, _p in self.factors]


# ---------------------------------------------------------------------
# Sylvester resultant


def sylvester_resultant(p: Polynomial, q: Polynomial, var: str) -> Polynomial:
    """Resultant of p and q with respect to var, via the Sylvester matrix.

    The determinant is computed fraction-free with content extraction,
    then multiplied back out, so the result is the honest resultant
    including any content and repeated factors.
    """
    dp = p.degree(var)
    dq = q.degree(var)
    if dp <= 0 or dq <= 0:
        raise ValueError(f"both inputs need positive degree in {var!r}")
    pc = p.by_degree(var)
    qc = q.by_degree(var)
    zero = Polynomial.zero(p.vars)
    n = dp + dq
    rows = []
    for i in range(dq):
        row = [zero] * n
        for k in range(dp + 1):
            row[i + k] = pc.get(dp - k, zero)
        rows.append(row)
    for i in range(dp):
        row = [zero] * n
        for k in range(dq + 1):
            row[i + k] = qc.get(dq - k, zero)
        rows.append(row)
    return _determinant(PolyMatrix(p.vars, rows))


# ---------------------------------------------------------------------
# Dixon construction


def dixon_polynomial(system: PolySystem) -> Polynomial:
    """The Dixon polynomial of n+1 polynomials in n elimination variables.

    Built from the (n+1)x(n+1) cancellation matrix whose row k carries
    the system polynomials with the first k elimination variables
    replaced by auxiliary ones.  Successive rows differ in a single
    variable, so each row difference divides exactly by the
    corresponding (x_k - aux_k); performing those divided differences
    row by row realizes the overall division by the product, and the
    determinant of the transformed matrix is the Dixon polynomial
    itself.
    """
    n = len(system.elim_vars)
    if len(system.polys) != n + 1:
        raise ValueError(
            f"need {n + 1} polynomials for {n} elimination variables, "
            f"got {len(system.polys)}"
        )
    aux_names = _aux_names(system)
    wide = VarSet(tuple(system.varset.names) + tuple(aux_names))
    polys = [change_varset(p, wide) for _name, p in system.polys]

    # cancellation matrix: row k substitutes aux for the first k vars
    rows = [polys]
    for k in range(1, n + 1):
        prev = rows[-1]
        xk = system.elim_vars[k - 1]
        ak = aux_names[k - 1]
        rows.append([_swap_var(p, xk, ak, wide) for p in prev])

    # divided-difference transform, bottom row first so each step uses
    # the untransformed row above it
    for k in range(n, 0, -1):
        xk = Polynomial.variable(wide, system.elim_vars[k - 1])
        ak = Polynomial.variable(wide, aux_names[k - 1])
        div = xk - ak
        new_row = []
        for a, b in zip(rows[k], rows[k - 1]):
            quot = fast_exact_divide(a - b, div)
            if quot is None:
                raise ArithmeticError(
                    "cancellation row difference not divisible; "
                    "construction is inconsistent"
                )
            new_row.append(quot)
        rows[k] = new_row
    return _determinant(PolyMatrix(wide, rows))


def _aux_names(system: PolySystem) -> list:
    out = []
    for v in system.elim_vars:
        cand = v + "b"
        while cand in system.varset or cand in out:
            cand += "b"
        out.append(cand)
    return out


def _swap_var(p: Polynomial, old: str, new: str, varset: VarSet) -> Polynomial:
    i = varset.index(old)
    j = varset.index(new)
    out = {}
    for m, c in p.terms.items():
        if m[i]:
            lm = list(m)
            lm[j] += lm[i]
            lm[i] = 0
            m = tuple(lm)
        out[m] = out.get(m, 0) + c
    return Polynomial(varset, {m: c for m, c in out.items() if c})


def dixon_matrix(dixon_poly: Polynomial, elim_vars, aux_vars) -> PolyMatrix:
    """Coefficient matrix of the Dixon polynomial.

    Rows are indexed by the monomials in the original elimination
    variables, columns by monomials in the auxiliary ones, both in
    ascending graded-lex order; entries contain only parameters.
    """
    vs = dixon_poly.vars
    ei = [vs.index(v) for v in elim_vars]
    ai = [vs.index(v) for v in aux_vars]
    pi = [k for k in range(len(vs)) if k not in ei and k not in ai]
    buckets: dict = {}
    for m, c in dixon_poly.terms.items():
        rkey = tuple(m[k] for k in ei)
        ckey = tuple(m[k] for k in ai)
        pkey = tuple(m[k] for k in pi)
        buckets.setdefault((rkey, ckey), {})[pkey] = c
    row_keys = sorted({rk for rk, _ck in buckets}, key=_grlex_key)
    col_keys = sorted({ck for _rk, ck in buckets}, key=_grlex_key)
    # a system with no free parameters leaves constant entries; keep the
    # source variables rather than inventing an empty set
    param_set = VarSet([vs.names[k] for k in pi]) if pi else vs
    zero = Polynomial.zero(param_set)
    entries = []
    for rk in row_keys:
        row = []
        for ck in col_keys:
            terms = buckets.get((rk, ck))
            if not terms:
                row.append(zero)
            elif pi:
                row.append(Polynomial(param_set, terms))
            else:
                row.append(Polynomial.constant(param_set, terms[()]))
        entries.append(row)
    return PolyMatrix(param_set, entries, row_labels=row_keys, col_labels=col_keys)


# ---------------------------------------------------------------------
# factor stripping


def strip_known_factors(p: Polynomial, known: Iterable[Polynomial]):
    """Divide out maximal powers of the known factors.

    Returns (quotient, multiplicities).  The quotient is primitive with
    positive leading coefficient; p reconstructs as content · quotient ·
    ∏ known_i^mult_i.  Degree-0 known factors get multiplicity 0 (over
    the rationals every constant divides).
    """
    mults = []
    rem = p
    for k in known:
        if k.is_zero():
            raise ValueError("zero known factor")
        m = 0
        if k.degree() > 0 and not rem.is_zero():
            while True:
                q = fast_exact_divide(rem, k)
                if q is None:
                    break
                rem = q
                m += 1
        mults.append(m)
    return rem.primitive() if not rem.is_zero() else rem, mults


# ---------------------------------------------------------------------
# fraction-free elimination engine


class _Row:
    __slots__ = ("entries", "pend", "content", "index")

    def __init__(self, entries, index):
        self.entries = entries
        self.pend = []  # deferred Bareiss divisors
        self.content = []  # extracted (Polynomial) content factors
        self.index = index


def _int_content(p: Polynomial) -> Fraction:
    g = 0
    l = 1
    for c in p.terms.values():
        f = Fraction(c)
        g = math.gcd(g, f.numerator)
        l = l * f.denominator // math.gcd(l, f.denominator)
    return Fraction(g, l)


def _monomial_gcd(polys) -> tuple:
    acc = None
    for p in polys:
        for m in p.terms:
            if acc is None:
                acc = list(m)
            else:
                acc = [min(a, e) for a, e in zip(acc, m)]
                if not any(acc):
                    return tuple(acc)
    return tuple(acc) if acc else ()


def _divide_monomial(p: Polynomial, mono: tuple) -> Polynomial:
    return Polynomial(
        p.vars,
        {tuple(e - g for e, g in zip(m, mono)): c for m, c in p.terms.items()},
    )


def _extract_content(entries, varset):
    """Pull the scalar-and-monomial content out of a list of entries.

    Returns (new_entries, content_factors) where content_factors is a
    list of polynomials (a constant and/or a monomial) whose product
    times the new entries reconstructs the originals.  The remaining
    entries have integer coefficients with overall gcd 1.
    """
    live = [e for e in entries if not e.is_zero()]
    if not live:
        return entries, []
    g = Fraction(0)
    for e in live:
        c = _int_content(e)
        g = Fraction(
            math.gcd(g.numerator, c.numerator),
            (g.denominator * c.denominator)
            // math.gcd(g.denominator, c.denominator),
        )
        # keep scanning: the gcd can still shrink, the lcm still grow
    mono = _monomial_gcd(live)
    factors = []
    if g != 1:
        factors.append(Polynomial.constant(varset, g))
    if any(mono):
        factors.append(Polynomial(varset, {mono: 1}))
    if not factors:
        return entries, []
    inv = 1 / g
    out = []
    for e in entries:
        if e.is_zero():
            out.append(e)
            continue
        if any(mono):
            e = _divide_monomial(e, mono)
        if g != 1:
            e = e * inv
        out.append(e)
    return out, factors


def _try_divide_all(entries, d):
    out = []
    for e in entries:
        if e.is_zero():
            out.append(e)
            continue
        q = exact_divide(e, d)
        if q is None:
            return None
        out.append(q)
    return out


def _edf_core(matrix: PolyMatrix, require_square_full_rank=False, seeds=()):
    """Run the elimination; return raw bookkeeping.

    Output: (sign, pivots, row_contents, col_contents, pend_leftover,
    pivot_rows, pivot_cols) where the maximal-minor determinant equals
    sign · ∏ pivots · ∏ contents / ∏ pend_leftover.  Arithmetic runs on
    the packed integer representation from ``_fastpoly``.

    Row cleanups trial-divide by the seeded denominators first, then
    pull scalar/monomial content, then retry the deferred Bareiss
    divisions, and finally extract any common polynomial factor (the
    early factor detection that keeps entries from growing into full
    minors).  Columns get the content and gcd passes at each step.
    """
    varset = matrix.varset
    n = len(varset.names)
    nr, nc = matrix.nrows, matrix.ncols

    rows = []
    for i in range(nr):
        ents = []
        dens = []
        for e in matrix.entries[i]:
            fd, den = fp.from_poly_scaled(e)
            ents.append(fd)
            dens.append(den)
        lcm = 1
        for d in dens:
            lcm = lcm * d // math.gcd(lcm, d)
        r = _Row([fp.fscale(fd, lcm // d) for fd, d in zip(ents, dens)], i)
        if lcm > 1:
            r.content.append(Polynomial.constant(varset, Fraction(1, lcm)))
        rows.append(r)

    trace = _log.isEnabledFor(logging.DEBUG)

    # factors seen so far; trial-divided before any exact gcd attempt
    registry = []
    for fs, poly in seeds:
        _register_factor(registry, fs, n, varset)

    col_content: dict = {c: [] for c in range(nc)}
    active_rows = list(range(nr))
    active_cols = list(range(nc))
    sign = 1
    pivots = []  # packed dicts until the final conversion
    pivot_rows = []
    pivot_cols = []

    def row_cleanup(r: _Row):
        if not any(r.entries):
            return
        # deferred Bareiss divisions first, while the row still holds
        # the divisors whole; a single-term leftover (scalar times
        # monomial) is inert here, the assembly stage cancels it
        kept = []
        for d in r.pend:
            if len(d) == 1:
                kept.append(d)
                continue
            divided = _try_row_div(r.entries, d, n)
            if divided is not None:
                r.entries = divided
                continue
            # column extraction may already have taken the divisor's
            # scalar or monomial part out of one entry, so retry with
            # the core and bank the split-off term
            core, junk = fp.fsplit_junk(d, n)
            if junk is not None:
                divided = _try_row_div(r.entries, core, n)
                if divided is not None:
                    r.entries = divided
                    kept.append(junk)
                    continue
            kept.append(d)
        r.pend = kept
        for fs, poly in seeds:
            while True:
                divided = _try_row_div(r.entries, fs, n)
                if divided is None:
                    break
                r.entries = divided
                res = _bank_into_pend(r.pend, fs, n)
                if res is not None:
                    r.content.append(fp.to_poly(res, varset))
        live = [e for e in r.entries if e]
        g = 0
        for e in live:
            g = math.gcd(g, fp.fcontent(e))
            if g == 1:
                break
        mono = fp.fmono_min(live, n)
        if g > 1 or mono:
            out = []
            for e in r.entries:
                if e:
                    if mono:
                        e = fp.fshift_down(e, mono)
                    if g > 1:
                        e = fp.fscale_div(e, g)
                out.append(e)
            r.entries = out
            if g > 1:
                res = _bank_into_pend(r.pend, {0: g}, n)
                if res is not None:
                    r.content.append(fp.to_poly(res, varset))
            if mono:
                res = _bank_into_pend(r.pend, {mono: 1}, n)
                if res is not None:
                    r.content.append(fp.to_poly(res, varset))
        # early factor detection: whatever still divides the whole row
        # is a factor of the determinant, not of any one entry
        r.entries, facs = _extract_poly_factors(
            r.entries, n, varset, registry, pend=r.pend
        )
        r.content.extend(facs)

    for r in rows:
        row_cleanup(r)

    while active_rows and active_cols:
        # column contents over the active rows
        for c in active_cols:
            live = [rows[i].entries[c] for i in active_rows if rows[i].entries[c]]
            if not live:
                continue
            g = 0
            for e in live:
                g = math.gcd(g, fp.fcontent(e))
                if g == 1:
                    break
            mono = fp.fmono_min(live, n)
            if g > 1 or mono:
                if g > 1:
                    col_content[c].append(Polynomial.constant(varset, g))
                if mono:
                    col_content[c].append(
                        Polynomial(varset, {fp.unpack(mono, n): 1})
                    )
                for i in active_rows:
                    e = rows[i].entries[c]
                    if not e:
                        continue
                    if mono:
                        e = fp.fshift_down(e, mono)
                    if g > 1:
                        e = fp.fscale_div(e, g)
                    rows[i].entries[c] = e
            col_entries = [rows[i].entries[c] for i in active_rows]
            col_entries, facs = _extract_poly_factors(
                col_entries, n, varset, registry
            )
            if facs:
                col_content[c].extend(facs)
                for i, e in zip(active_rows, col_entries):
                    rows[i].entries[c] = e

        # pivot: globally minimal term count, ties by (row, col) position
        best = None
        for ri, i in enumerate(active_rows):
            ent = rows[i].entries
            for ci, c in enumerate(active_cols):
                e = ent[c]
                if not e:
                    continue
                key = (len(e), ri, ci)
                if best is None or key < best[0]:
                    best = (key, ri, ci)
        if best is None:
            break  # rank reached
        (_key, ri, ci) = best
        prow = rows[active_rows[ri]]
        pcol = active_cols[ci]
        pivot = prow.entries[pcol]
        sign *= -1 if (ri + ci) % 2 else 1
        pivots.append(pivot)
        pivot_rows.append(prow.index)
        pivot_cols.append(pcol)
        del active_rows[ri]
        del active_cols[ci]
        if len(pivot) > 1:
            _register_factor(registry, pivot, n, varset)

        for i in active_rows:
            r = rows[i]
            coef = r.entries[pcol]
            if not coef:
                continue  # row needs no update, so no extra multiplier
            new_entries = list(r.entries)
            for c in active_cols:
                new_entries[c] = fp.fcross(
                    pivot, r.entries[c], coef, prow.entries[c], n
                )
            new_entries[pcol] = {}
            r.entries = new_entries
            r.pend.append(pivot)
            row_cleanup(r)

        if trace:
            mx = max(
                (
                    len(rows[i].entries[c])
                    for i in active_rows
                    for c in active_cols
                ),
                default=0,
            )
            pend_tot = sum(len(rows[i].pend) for i in active_rows)
            _log.debug(
                "edf step %d: pivot %d terms, %dx%d left, "
                "largest entry %d terms, %d pending divisors",
                len(pivots), len(pivot), len(active_rows),
                len(active_cols), mx, pend_tot,
            )
            if _DUMP_AT is not None and len(pivots) == _DUMP_AT[0]:
                import pickle
                with open(_DUMP_AT[1], "wb") as fh:
                    pickle.dump(
                        {
                            "rows": [
                                (rows[i].entries, rows[i].pend)
                                for i in active_rows
                            ],
                            "active_cols": active_cols,
                            "n": n,
                        },
                        fh,
                    )

    if require_square_full_rank:
        if nr != nc:
            raise ValueError("square matrix required")
        if len(pivots) < nr:
            return None  # singular

    contents = []
    for i in pivot_rows:
        contents.extend(rows[i].content)
    for c in pivot_cols:
        contents.extend(col_content[c])
    pend_leftover = []
    for i in pivot_rows:
        pend_leftover.extend(fp.to_poly(d, varset) for d in rows[i].pend)
    piv_polys = [fp.to_poly(d, varset) for d in pivots]
    return sign, piv_polys, contents, pend_leftover, pivot_rows, pivot_cols


def _edf_core_reference(matrix: PolyMatrix, require_square_full_rank=False):
    """Rational-arithmetic twin of :func:`_edf_core`, kept as an oracle.

    Same pivot rule and bookkeeping on plain Polynomials; slower by a
    large factor, used only by tests to cross-check the packed core.
    """
    varset = matrix.varset
    nr, nc = matrix.nrows, matrix.ncols
    rows = [_Row(list(matrix.entries[i]), i) for i in range(nr)]
    col_content: dict = {c: [] for c in range(nc)}
    active_rows = list(range(nr))
    active_cols = list(range(nc))
    sign = 1
    pivots = []
    pivot_rows = []
    pivot_cols = []

    def row_cleanup(r: _Row):
        r.entries, facs = _extract_content(r.entries, varset)
        r.content.extend(facs)
        # deferred Bareiss divisions, attempted most recent last
        kept = []
        for d in r.pend:
            divided = _try_divide_all(r.entries, d)
            if divided is None:
                kept.append(d)
            else:
                r.entries = divided
        r.pend = kept

    for r in rows:
        row_cleanup(r)

    while active_rows and active_cols:
        # column contents over the active rows
        for c in active_cols:
            col_entries = [rows[i].entries[c] for i in active_rows]
            new_entries, facs = _extract_content(col_entries, varset)
            if facs:
                col_content[c].extend(facs)
                for i, e in zip(active_rows, new_entries):
                    rows[i].entries[c] = e

        # pivot: globally minimal term count, ties by (row, col) position
        best = None
        for ri, i in enumerate(active_rows):
            ent = rows[i].entries
            for ci, c in enumerate(active_cols):
                e = ent[c]
                if e.is_zero():
                    continue
                key = (len(e), ri, ci)
                if best is None or key < best[0]:
                    best = (key, ri, ci)
        if best is None:
            break  # rank reached
        (_key, ri, ci) = best
        prow = rows[active_rows[ri]]
        pcol = active_cols[ci]
        pivot = prow.entries[pcol]
        sign *= -1 if (ri + ci) % 2 else 1
        pivots.append(pivot)
        pivot_rows.append(prow.index)
        pivot_cols.append(pcol)
        del active_rows[ri]
        del active_cols[ci]

        zero = Polynomial.zero(varset)
        for i in active_rows:
            r = rows[i]
            coef = r.entries[pcol]
            if coef.is_zero():
                continue  # row needs no update, so no extra multiplier
            new_entries = list(r.entries)
            for c in active_cols:
                new_entries[c] = pivot * r.entries[c] - coef * prow.entries[c]
            new_entries[pcol] = zero
            r.entries = new_entries
            r.pend.append(pivot)
            row_cleanup(r)

    if require_square_full_rank:
        if nr != nc:
            raise ValueError("square matrix required")
        if len(pivots) < nr:
            return None  # singular

    contents = []
    for k, i in enumerate(pivot_rows):
        contents.extend(rows[i].content)
    for c in pivot_cols:
        contents.extend(col_content[c])
    pend_leftover = []
    for i in pivot_rows:
        pend_leftover.extend(rows[i].pend)
    return sign, pivots, contents, pend_leftover, pivot_rows, pivot_cols


def _fast_mul(a: Polynomial, b: Polynomial) -> Polynomial:
    n = len(a.vars.names)
    fa, da = fp.from_poly_scaled(a)
    fb, db = fp.from_poly_scaled(b)
    return fp.to_poly_scaled(fp.fmul(fa, fb, n), a.vars, Fraction(1, da * db))


def _distribute_pend(d, numer, sign, num_scale, varset):
    """Cancel a pending divisor against the factor list piecewise.

    A ladder leftover need not divide any single factor: its pieces can
    straddle two pivots.  Peel verified common divisors off one factor
    at a time until d stops shrinking.  numer is edited in place; d
    comes back unnormalized and its content settles in the caller.
    """
    n = len(varset.names)
    fd, _den = fp.from_poly_scaled(d)
    progress = True
    while progress and not fp._fis_const(fd):
        progress = False
        for idx, f in enumerate(numer):
            ff, _df = fp.from_poly_scaled(f)
            if len(ff) + len(fd) <= 1500:
                g = fp.fgcd(ff, fd, n)
            else:
                g = fp.fgcd_modular(ff, fd, n)
            if g is None or fp._fis_const(g):
                continue
            fq = fp.fdiv(ff, g, n)
            dq = fp.fdiv(fd, g, n)
            if fq is None or dq is None:
                continue
            q_poly = fp.to_poly(fq, varset)
            if q_poly.degree() > 0:
                prim, cont = q_poly.normalize()
                if cont < 0:
                    sign = -sign
                    cont = -cont
                num_scale *= cont
                numer[idx] = prim
            else:
                c = Fraction(q_poly.leading_coefficient())
                if c < 0:
                    sign = -sign
                    c = -c
                num_scale *= c
                del numer[idx]
            fd = dq
            progress = True
            break  # the factor list changed, rescan from the top
    return fp.to_poly(fd, varset), sign, num_scale


def _assemble(sign, pivots, contents, pend, varset):
    """Resolve deferred divisions; return (sign, scale, poly_factors).

    scale is a positive rational; poly_factors are primitive with
    positive leading coefficient.  sign · scale · ∏ poly_factors equals
    the determinant represented by the inputs.
    """
    num_scale = Fraction(1)
    den_scale = Fraction(1)
    numer = []
    for f in pivots + contents:
        prim, cont = f.normalize()
        if cont < 0:
            sign = -sign
            cont = -cont
        num_scale *= cont
        if prim.degree() > 0:
            numer.append(prim)
    den = []
    for d in pend:
        prim, cont = d.normalize()
        if cont < 0:
            sign = -sign
            cont = -cont
        den_scale *= cont
        if prim.degree() > 0:
            den.append(prim)

    # cancel each pending divisor against some single factor if possible
    for d in sorted(den, key=lambda p: -len(p)):
        done = False
        for idx, f in enumerate(numer):
            q = fast_exact_divide(f, d)
            if q is not None:
                if q.degree() > 0:
                    prim, cont = q.normalize()
                    if cont < 0:
                        sign = -sign
                        cont = -cont
                    num_scale *= cont
                    numer[idx] = prim
                else:
                    num_scale *= abs(Fraction(q.leading_coefficient()))
                    if q.leading_coefficient() < 0:
                        sign = -sign
                    del numer[idx]
                done = True
                break
        if not done:
            # the divisor straddles factors; peel verified common
            # divisors off one factor at a time before giving up on
            # the factored form
            d, sign, num_scale = _distribute_pend(
                d, numer, sign, num_scale, varset
            )
            if d.degree() <= 0:
                den_scale *= abs(Fraction(d.leading_coefficient()))
                if d.leading_coefficient() < 0:
                    sign = -sign
                continue
            # fall back: collapse the whole numerator, divide, re-split
            acc = Polynomial.constant(varset, 1)
            for f in numer:
                acc = _fast_mul(acc, f)
            q = fast_exact_divide(acc, d)
            if q is None:
                raise ArithmeticError(
                    "pending divisor does not divide the determinant; "
                    "bookkeeping is inconsistent"
                )
            prim, cont = q.normalize()
            if cont < 0:
                sign = -sign
                cont = -cont
            num_scale *= cont
            numer = [prim] if prim.degree() > 0 else []
    scale = num_scale / den_scale
    if scale < 0:
        raise AssertionError("scale sign lost")
    return sign, scale, numer


def _determinant(matrix: PolyMatrix) -> Polynomial:
    """Exact determinant of a square polynomial matrix."""
    if matrix.nrows != matrix.ncols:
        raise ValueError("determinant needs a square matrix")
    if matrix.nrows == 0:
        return Polynomial.constant(matrix.varset, 1)
    core = _edf_core(matrix, require_square_full_rank=True)
    if core is None:
        return Polynomial.zero(matrix.varset)
    sign, pivots, contents, pend, _pr, _pc = core
    sign, scale, numer = _assemble(sign, pivots, contents, pend, matrix.varset)
    acc = Polynomial.constant(matrix.varset, sign * scale)
    for f in numer:
        acc = _fast_mul(acc, f)
    return acc


def edf_determinant(
    matrix: PolyMatrix,
    seeded_denominators: Sequence[Polynomial] = (),
    verify_points: int = 3,
    rng_seed: int = 20240915,
) -> FactorList:
    """Determinant of (a maximal-rank minor of) a polynomial matrix,
    returned as a list of detected factors.

    Contents of rows and columns are pulled out at every elimination
    step, so large determinants emerge factored rather than expanded.
    Seeded denominators are trial-divided out of detected factors; the
    power extracted from one factor is reported as a single
    `seeded-denominator` entry directly before its quotient.  The signed
    product of the report is verified against the minor determinant at
    `verify_points` random rational points before returning.
    """
    if matrix.is_zero():
        raise ValueError("zero matrix: resultant vanishes identically")
    varset = matrix.varset
    seeds = []
    fseeds = []
    for s in seeded_denominators:
        prim = s.primitive()
        if prim.degree() > 0:
            seeds.append(prim)
            fd, _den = fp.from_poly_scaled(prim)
            fseeds.append((fd, prim))
    rows_sel, cols_sel = _select_minor(matrix, random.Random(rng_seed ^ 0x5EED))
    work = matrix
    if len(rows_sel) < matrix.nrows or len(cols_sel) < matrix.ncols:
        work = PolyMatrix(
            varset,
            [[matrix.entries[r][c] for c in cols_sel] for r in rows_sel],
        )
    core = _edf_core(work, seeds=fseeds)
    sign, pivots, contents, pend, pivot_rows, pivot_cols = core
    if work is not matrix:
        pivot_rows = [rows_sel[i] for i in pivot_rows]
        pivot_cols = [cols_sel[i] for i in pivot_cols]
    sign, scale, numer = _assemble(sign, pivots, contents, pend, varset)

    factors = []
    if scale != 1 or not numer:
        factors.append((Polynomial.constant(varset, scale), 1, "content"))
    counted: dict = {}
    order = []
    for f in numer:
        extracted = None
        if seeds:
            f, extracted = _pull_seeds(f, seeds)
            if extracted is not None and extracted[1] < 0:
                sign = -sign
                extracted = (extracted[0], -extracted[1])
        if extracted is not None:
            factors.append(
                (extracted[0] * extracted[1], 1, "seeded-denominator")
            )
        if f.degree() <= 0:
            continue  # seed extraction consumed the whole factor
        key = f
        if key in counted:
            counted[key] += 1
        else:
            counted[key] = 1
            order.append(key)
    for f, mult in _refine_factors([(f, counted[f]) for f in order]):
        factors.append((f, mult, "numerator"))

    result = FactorList(
        sign=sign,
        factors=tuple(factors),
        rows=tuple(pivot_rows),
        cols=tuple(pivot_cols),
    )
    _verify_factorization(matrix, result, verify_points, rng_seed)
    return result


def _refine_factors(items):
    """Split detected factors against each other until none divides
    another.

    The elimination can hand back one factor that is the product of two
    others it also found separately; pairwise trial division restores
    the finest factorization the run supports.  items is a list of
    (primitive polynomial, multiplicity); order of first detection is
    kept for the survivors.
    """
    items = [[f, m] for f, m in items]
    changed = True
    while changed:
        changed = False
        for i, (small, _mi) in enumerate(items):
            if small.degree() <= 0:
                continue
            for j, (f, mj) in enumerate(items):
                if i == j or f.degree() <= small.degree():
                    continue
                q = fast_exact_divide(f, small)
                if q is None:
                    continue
                k = 1
                while True:
                    q2 = fast_exact_divide(q, small)
                    if q2 is None:
                        break
                    q = q2
                    k += 1
                items[i][1] += k * mj
                items[j][0] = q.primitive()
                changed = True
        # fold duplicates created by a split
        seen: dict = {}
        folded = []
        for f, m in items:
            if f.degree() <= 0:
                continue
            if f in seen:
                folded[seen[f]][1] += m
            else:
                seen[f] = len(folded)
                folded.append([f, m])
        items = folded
    return [(f, m) for f, m in items]


def _pull_seeds(f: Polynomial, seeds):
    """Divide maximal seed powers out of f; return (quotient, seed-product)."""
    prod = None
    cont_sign = 1
    for s in seeds:
        while True:
            q = fast_exact_divide(f, s)
            if q is None:
                break
            prim, cont = q.normalize()
            if cont < 0:
                cont_sign = -cont_sign
            f = prim
            prod = s if prod is None else prod * s
    if prod is None:
        return f, None
    return f, (prod, cont_sign)


_RANK_PRIME = (1 << 61) - 1


def _eval_grid_mod(matrix, point, p):
    # entry values at an integer point, reduced mod p
    names = matrix.varset.names
    degs = [0] * len(names)
    for row in matrix.entries:
        for e in row:
            for i, d in enumerate(names):
                degs[i] = max(degs[i], e.degree(d))
    pows = []
    for x, dmax in zip(point, degs):
        col = [1] * (dmax + 1)
        for k in range(1, dmax + 1):
            col[k] = col[k - 1] * x % p
        pows.append(col)
    grid = []
    for row in matrix.entries:
        out = []
        for e in row:
            acc = 0
            for mono, c in e.terms.items():
                t = c.numerator % p
                if c.denominator != 1:
                    t = t * pow(c.denominator, -1, p) % p
                for i, exp in enumerate(mono):
                    if exp:
                        t = t * pows[i][exp] % p
                acc = (acc + t) % p
            out.append(acc)
        grid.append(out)
    return grid


def _greedy_basis(vectors, order, p):
    # indices whose vectors extend an F_p span, tried in the given order
    basis = []  # (pivot position, reduced vector)
    picked = []
    for idx in order:
        v = list(vectors[idx])
        for piv, b in basis:
            f = v[piv]
            if f:
                v = [(a - f * bb) % p for a, bb in zip(v, b)]
        piv = next((i for i, a in enumerate(v) if a), None)
        if piv is None:
            continue
        inv = pow(v[piv], -1, p)
        v = [a * inv % p for a in v]
        basis.append((piv, v))
        picked.append(idx)
    return picked


def _select_minor(matrix, rng):
    """Row/column sets of one maximal-rank minor, sparsest first.

    Rank is read off at a random point mod a large prime, so the result
    is only correct with overwhelming probability; the closing
    verification against the minor determinant makes it certain.
    Greedy by term count so the elimination starts from the lightest
    square submatrix that still has full rank.
    """
    p = _RANK_PRIME
    names = matrix.varset.names
    for _ in range(8):
        point = [rng.randrange(1, p) for _ in names]
        grid = _eval_grid_mod(matrix, point, p)
        colw = [
            (sum(len(row[c]) for row in matrix.entries), c)
            for c in range(matrix.ncols)
        ]
        colv = list(zip(*grid))
        cols = _greedy_basis(colv, [c for _w, c in sorted(colw)], p)
        roww = [
            (sum(len(e) for e in matrix.entries[r]), r)
            for r in range(matrix.nrows)
        ]
        rowv = [[grid[r][c] for c in cols] for r in range(matrix.nrows)]
        rows = _greedy_basis(rowv, [r for _w, r in sorted(roww)], p)
        if len(rows) == len(cols):
            return sorted(rows), sorted(cols)
    raise AssertionError("rank probe kept landing on degenerate points")


def _verify_factorization(matrix, fl: FactorList, npoints, rng_seed):
    rng = random.Random(rng_seed)
    names = matrix.varset.names
    for _ in range(max(npoints, 1)):
        assign = {
            n: Fraction(rng.randint(-40, 40), rng.randint(1, 17)) for n in names
        }
        want = _numeric_minor_det(matrix, sorted(fl.rows), sorted(fl.cols), assign)
        got = fl.evaluate(assign)
        if want != got:
            raise AssertionError(
                "factor product disagrees with minor determinant at a "
                "random point; elimination bookkeeping is wrong"
            )


def _numeric_minor_det(matrix, rows, cols, assign) -> Fraction:
    n = len(rows)
    grid = [
        [Fraction(matrix.entries[i][c].evaluate(assign)) for c in cols]
        for i in rows
    ]
    det = Fraction(1)
    sign = 1
    for k in range(n):
        piv = None
        for i in range(k, n):
            if grid[i][k]:
                piv = i
                break
        if piv is None:
            return Fraction(0)
        if piv != k:
            grid[k], grid[piv] = grid[piv], grid[k]
            sign = -sign
        det *= grid[k][k]
        inv = 1 / grid[k][k]
        for i in range(k + 1, n):
            if grid[i][k]:
                f = grid[i][k] * inv
                grid[i] = [a - f * b for a, b in zip(grid[i], grid[k])]
    return det * sign
