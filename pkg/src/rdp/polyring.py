"""Exact sparse multivariate polynomial arithmetic over rationals.

Polynomials are stored as maps from exponent vectors to nonzero rational
coefficients, over a fixed ordered variable set.  All arithmetic is exact;
no floating point enters this module.  The canonical term order is graded
lexicographic in the declared variable order, which fixes printing and the
sign conventions of :func:`normalize`.

Coefficients are plain ``int`` when integral and ``fractions.Fraction``
otherwise; the two mix freely and compare equal, so callers never need to
care which is stored.
"""

from __future__ import annotations

import math
import re
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Sequence, Union

__all__ = [
    "VarSet",
    "Polynomial",
    "ParseError",
    "parse",
    "change_varset",
    "combine",
    "exact_divide",
    "differentiate",
    "evaluate",
    "substitute_rational",
    "normalize",
    "multivariate_gcd",
]

Coeff = Union[int, Fraction]
Expvec = tuple  # tuple[int, ...], one entry per variable

_NAME_RE = re.compile(r"[A-Za-z][A-Za-z0-9]*\Z")


class VarSet:
    """An ordered, immutable collection of variable names.

    The declaration order is canonical: it fixes the lexicographic
    comparison used by the graded-lex term order, and the order in which
    variables print inside a term.
    """

    __slots__ = ("names", "_index")

    def __init__(self, names: Iterable[str]):
        names = tuple(names)
        if not names:
            raise ValueError("VarSet needs at least one variable")
        for n in names:
            if not _NAME_RE.match(n):
                raise ValueError(f"invalid variable name {n!r}")
        if len(set(names)) != len(names):
            raise ValueError("duplicate variable names")
        object.__setattr__(self, "names", names)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    def __setattr__(self, *a):
        raise AttributeError("VarSet is immutable")

    def __reduce__(self):
        # slots plus the setattr guard defeat the default pickle path
        return (VarSet, (self.names,))

    def index(self, name: str) -> int:
        try:
            return self._index[name]
        except KeyError:
            raise KeyError(f"unknown variable {name!r}") from None

    def __contains__(self, name: str) -> bool:
        return name in self._index

    def __len__(self) -> int:
        return len(self.names)

    def __iter__(self) -> Iterator[str]:
        return iter(self.names)

    def __eq__(self, other) -> bool:
        return isinstance(other, VarSet) and self.names == other.names

    def __hash__(self) -> int:
        return hash(self.names)

    def __repr__(self) -> str:
        return f"VarSet({', '.join(self.names)})"


def _grlex_key(m: Expvec):
    # graded-lex: total degree first, then lex in declared order
    return (sum(m), m)


class Polynomial:
    """A sparse multivariate polynomial with exact rational coefficients.

    Instances are immutable by convention: no public method mutates
    ``terms``, and hash is cached on first use.  Construct via the
    classmethods or module-level :func:`parse`; the constructor filters
    zero coefficients but does not copy defensively.
    """

    __slots__ = ("vars", "terms", "_hash")

    def __init__(self, varset: VarSet, terms: Mapping[Expvec, Coeff]):
        object.__setattr__(self, "vars", varset)
        object.__setattr__(
            self, "terms", {m: c for m, c in terms.items() if c}
        )
        object.__setattr__(self, "_hash", None)

    def __setattr__(self, *a):
        raise AttributeError("Polynomial is immutable")

    def __reduce__(self):
        return (Polynomial, (self.vars, self.terms))

    # -- constructors -------------------------------------------------

    @classmethod
    def zero(cls, varset: VarSet) -> "Polynomial":
        return cls(varset, {})

    @classmethod
    def constant(cls, varset: VarSet, value: Coeff) -> "Polynomial":
        value = _normcoeff(value)
        return cls(varset, {(0,) * len(varset): value} if value else {})

    @classmethod
    def variable(cls, varset: VarSet, name: str, power: int = 1) -> "Polynomial":
        i = varset.index(name)
        m = tuple(power if j == i else 0 for j in range(len(varset)))
        return cls(varset, {m: 1})

    # -- basic queries ------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def __len__(self) -> int:
        """Term count."""
        return len(self.terms)

    def __bool__(self) -> bool:
        return bool(self.terms)

    def degree(self, var: str | None = None) -> int:
        """Total degree, or degree in one variable.  Zero polynomial: -1."""
        if not self.terms:
            return -1
        if var is None:
            return max(sum(m) for m in self.terms)
        i = self.vars.index(var)
        return max(m[i] for m in self.terms)

    def variables(self) -> set:
        """Names of variables that actually occur."""
        out = set()
        for m in self.terms:
            for i, e in enumerate(m):
                if e:
                    out.add(self.vars.names[i])
        return out

    def leading_monomial(self) -> Expvec:
        if not self.terms:
            raise ValueError("zero polynomial has no leading monomial")
        return max(self.terms, key=_grlex_key)

    def leading_coefficient(self) -> Coeff:
        return self.terms[self.leading_monomial()]

    def coefficient(self, var: str, power: int) -> "Polynomial":
        """The polynomial coefficient of var**power."""
        i = self.vars.index(var)
        out = {}
        for m, c in self.terms.items():
            if m[i] == power:
                out[m[:i] + (0,) + m[i + 1:]] = c
        return Polynomial(self.vars, out)

    def by_degree(self, var: str) -> dict:
        """Split into {k: coefficient polynomial of var**k}."""
        i = self.vars.index(var)
        slices: dict = {}
        for m, c in self.terms.items():
            k = m[i]
            slices.setdefault(k, {})[m[:i] + (0,) + m[i + 1:]] = c
        return {k: Polynomial(self.vars, d) for k, d in slices.items()}

    # -- ring operations ----------------------------------------------

    def _coerce(self, other) -> "Polynomial | None":
        if isinstance(other, Polynomial):
            if other.vars != self.vars:
                raise ValueError("VarSet mismatch")
            return other
        if isinstance(other, (int, Fraction)):
            return Polynomial.constant(self.vars, other)
        return None

    def __add__(self, other) -> "Polynomial":
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        out = dict(self.terms)
        for m, c in other.terms.items():
            v = out.get(m, 0) + c
            if v:
                out[m] = v
            elif m in out:
                del out[m]
        return Polynomial(self.vars, out)

    __radd__ = __add__

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.vars, {m: -c for m, c in self.terms.items()})

    def __sub__(self, other) -> "Polynomial":
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other) -> "Polynomial":
        return (-self) + other

    def __mul__(self, other) -> "Polynomial":
        other = self._coerce(other)
        if other is None:
            return NotImplemented
        a, b = self.terms, other.terms
        if len(a) > len(b):
            a, b = b, a
        out: dict = {}
        for ma, ca in a.items():
            for mb, cb in b.items():
                m = tuple(x + y for x, y in zip(ma, mb))
                v = out.get(m, 0) + ca * cb
                if v:
                    out[m] = v
                elif m in out:
                    del out[m]
        return Polynomial(self.vars, out)

    __rmul__ = __mul__

    def __pow__(self, n: int) -> "Polynomial":
        if not isinstance(n, int) or n < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.constant(self.vars, 1)
        base = self
        while n:
            if n & 1:
                result = result * base
            base_needed = n >> 1
            if base_needed:
                base = base * base
            n = base_needed
        return result

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            other = Polynomial.constant(self.vars, other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        return self.vars == other.vars and self.terms == other.terms

    def __hash__(self) -> int:
        h = self._hash
        if h is None:
            h = hash((self.vars, frozenset(self.terms.items())))
            object.__setattr__(self, "_hash", h)
        return h

    # -- calculus and substitution ------------------------------------

    def diff(self, var: str) -> "Polynomial":
        i = self.vars.index(var)
        out: dict = {}
        for m, c in self.terms.items():
            e = m[i]
            if e:
                dm = m[:i] + (e - 1,) + m[i + 1:]
                v = out.get(dm, 0) + e * c
                if v:
                    out[dm] = v
                elif dm in out:
                    del out[dm]
        return Polynomial(self.vars, out)

    def evaluate(self, assignment: Mapping[str, Coeff]):
        """Substitute rationals for variables.

        A partial assignment returns a :class:`Polynomial` over the same
        VarSet; assigning every variable returns a single rational.
        """
        idx = {self.vars.index(n): _normcoeff(v) for n, v in assignment.items()}
        full = len(set(assignment)) >= len(self.vars) and set(
            assignment
        ) >= set(self.vars.names)
        out: dict = {}
        for m, c in self.terms.items():
            scale = c
            rm = list(m)
            for i, v in idx.items():
                e = m[i]
                if e:
                    scale = scale * v ** e
                    rm[i] = 0
            if not scale:
                continue
            key = tuple(rm)
            v2 = out.get(key, 0) + scale
            if v2:
                out[key] = v2
            elif key in out:
                del out[key]
        if full:
            return _normcoeff(sum(out.values(), Fraction(0)))
        return Polynomial(self.vars, out)

    def substitute_rational(
        self, var: str, num: "Polynomial", den: "Polynomial"
    ) -> tuple["Polynomial", int]:
        """Replace ``var`` by ``num/den`` and clear denominators.

        Returns ``(numer, k)`` with ``numer / den**k`` equal to the
        substituted polynomial and ``k`` the degree of ``self`` in
        ``var``.  No cancellation between numerator and denominator is
        attempted; see :func:`normalize`.
        """
        if den.is_zero():
            raise ZeroDivisionError("zero denominator polynomial")
        slices = self.by_degree(var)
        d = max(slices) if slices else 0
        if d == 0:
            return self, 0
        # numer = sum of A_k * num^k * den^(d-k)
        num_pow = Polynomial.constant(self.vars, 1)
        acc = Polynomial.zero(self.vars)
        den_pows = [Polynomial.constant(self.vars, 1)]
        for _ in range(d):
            den_pows.append(den_pows[-1] * den)
        for k in range(d + 1):
            if k in slices:
                acc = acc + slices[k] * num_pow * den_pows[d - k]
            if k < d:
                num_pow = num_pow * num
        return acc, d

    # -- normal forms --------------------------------------------------

    def content(self) -> Fraction:
        """Signed rational content: coefficient gcd, sign of the leading term."""
        if not self.terms:
            return Fraction(0)
        nums = []
        dens = []
        for c in self.terms.values():
            f = Fraction(c)
            nums.append(f.numerator)
            dens.append(f.denominator)
        g = 0
        for n in nums:
            g = math.gcd(g, n)
        l = 1
        for d in dens:
            l = l * d // math.gcd(l, d)
        cont = Fraction(g, l)
        if self.leading_coefficient() < 0:
            cont = -cont
        return cont

    def normalize(self) -> tuple["Polynomial", Fraction]:
        """Split into (primitive part, content).

        The primitive part has integer coefficients with gcd 1 and a
        positive leading coefficient in graded-lex order; the content
        carries sign and scale so that ``content * primitive == self``.
        The zero polynomial maps to ``(0, 0)``.
        """
        if not self.terms:
            return self, Fraction(0)
        cont = self.content()
        inv = 1 / cont
        prim = Polynomial(
            self.vars, {m: _normcoeff(c * inv) for m, c in self.terms.items()}
        )
        return prim, cont

    def primitive(self) -> "Polynomial":
        return self.normalize()[0]

    # -- printing ------------------------------------------------------

    def __str__(self) -> str:
        if not self.terms:
            return "0"
        ordered = sorted(self.terms, key=_grlex_key, reverse=True)
        pieces = []
        for m in ordered:
            c = self.terms[m]
            factors = [
                n if e == 1 else f"{n}^{e}"
                for n, e in zip(self.vars.names, m)
                if e
            ]
            mag = abs(Fraction(c))
            if not factors:
                body = _coeff_str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = _coeff_str(mag) + "*" + "*".join(factors)
            pieces.append(("-" if c < 0 else "+", body))
        sign0, body0 = pieces[0]
        out = ("-" if sign0 == "-" else "") + body0
        for sign, body in pieces[1:]:
            out += f" {sign} {body}"
        return out

    def __repr__(self) -> str:
        s = str(self)
        if len(s) > 60:
            s = s[:57] + "..."
        return f"<Polynomial {s!r} ({len(self.terms)} terms)>"


def _normcoeff(c: Coeff) -> Coeff:
    # keep integral values as int so the hot paths stay on machine ints
    if isinstance(c, Fraction) and c.denominator == 1:
        return c.numerator
    return c


def _coeff_str(c) -> str:
    f = Fraction(c)
    if f.denominator == 1:
        return str(f.numerator)
    return f"{f.numerator}/{f.denominator}"


# ---------------------------------------------------------------------
# parsing


class ParseError(ValueError):
    """Syntax error with the byte offset where parsing failed."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at offset {offset})")
        self.offset = offset


_TOKEN_RE = re.compile(r"\s*(?:(\d+)|([A-Za-z][A-Za-z0-9]*)|([-+*/^]))")


def _tokenize(text: str):
    tokens = []
    pos = 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == m.start():
            stripped = text[pos:].lstrip()
            if not stripped:
                break
            raise ParseError(
                f"unexpected character {stripped[0]!r}",
                len(text) - len(stripped),
            )
        if m.group(1) is not None:
            tokens.append(("num", int(m.group(1)), m.start(1)))
        elif m.group(2) is not None:
            tokens.append(("name", m.group(2), m.start(2)))
        else:
            tokens.append(("op", m.group(3), m.start(3)))
        pos = m.end()
    return tokens


def parse(text: str, varset: VarSet) -> Polynomial:
    """Parse the textual polynomial grammar.

    Grammar: ``expression = term (('+'|'-') term)*``;
    ``term = [coef '*'] factor ('*' factor)*``;
    ``factor = var ['^' uint] | coef``; ``coef = ['-'] uint ['/' uint]``.
    Whitespace is insignificant.  A leading sign before the first term is
    accepted.  Raises :class:`ParseError` with a byte offset on bad
    syntax and :class:`KeyError` on unknown variables.
    """
    tokens = _tokenize(text)
    n = len(tokens)
    nvars = len(varset)
    pos = 0

    def peek(k=0):
        return tokens[pos + k] if pos + k < n else (None, None, len(text))

    def take():
        nonlocal pos
        t = peek()
        pos += 1
        return t

    def parse_uint() -> int:
        kind, val, off = take()
        if kind != "num":
            raise ParseError("expected unsigned integer", off)
        return val

    def parse_coef(allow_sign: bool) -> Fraction:
        sign = 1
        if allow_sign and peek()[:2] == ("op", "-"):
            take()
            sign = -1
        numv = parse_uint()
        if peek()[:2] == ("op", "/"):
            take()
            denv = parse_uint()
            if denv == 0:
                raise ParseError("zero denominator", peek()[2])
            return Fraction(sign * numv, denv)
        return Fraction(sign * numv)

    def parse_term(lead_sign: int) -> tuple[Fraction, list]:
        coeff = Fraction(lead_sign)
        exps = [0] * nvars
        first = True
        while True:
            kind, val, off = peek()
            if kind == "name":
                take()
                try:
                    i = varset.index(val)
                except KeyError:
                    raise KeyError(
                        f"unknown variable {val!r} at offset {off}"
                    ) from None
                e = 1
                if peek()[:2] == ("op", "^"):
                    take()
                    e = parse_uint()
                exps[i] += e
            elif kind == "num" or (
                first and kind == "op" and val == "-" and peek(1)[0] == "num"
            ):
                coeff *= parse_coef(allow_sign=first)
            else:
                raise ParseError("expected variable or number", off)
            first = False
            if peek()[:2] == ("op", "*"):
                take()
                continue
            return coeff, exps

    if not tokens:
        raise ParseError("empty input", 0)

    terms: dict = {}
    sign = 1
    if peek()[:2] in (("op", "-"), ("op", "+")):
        # leading sign belongs to the first term
        if peek(1)[0] == "op":
            raise ParseError("expected term", peek(1)[2])
        if peek()[1] == "-":
            sign = -1
        take()
    while True:
        coeff, exps = parse_term(sign)
        key = tuple(exps)
        v = terms.get(key, 0) + coeff
        if v:
            terms[key] = v
        elif key in terms:
            del terms[key]
        kind, val, off = peek()
        if kind is None:
            break
        if kind != "op" or val not in "+-":
            raise ParseError("expected '+' or '-'", off)
        take()
        sign = 1 if val == "+" else -1
        if peek()[0] is None:
            raise ParseError("dangling operator", off)
    return Polynomial(varset, {m: _normcoeff(c) for m, c in terms.items()})


# ---------------------------------------------------------------------
# division and gcd


def change_varset(p: Polynomial, varset: VarSet) -> Polynomial:
    """Re-express p over another VarSet, matching variables by name.

    Variables absent from the target must not occur in p; variables new
    to the target get exponent zero everywhere.
    """
    if varset == p.vars:
        return p
    col = []
    for i, n in enumerate(p.vars.names):
        if n in varset:
            col.append((i, varset.index(n)))
        elif p.degree(n) > 0:
            raise ValueError(f"variable {n!r} in use but absent from target")
    width = len(varset)
    out = {}
    for m, c in p.terms.items():
        nm = [0] * width
        for i, j in col:
            nm[j] = m[i]
        out[tuple(nm)] = c
    if len(out) != len(p.terms):
        raise ValueError("monomial collision while changing VarSet")
    return Polynomial(varset, out)


def combine(op: str, p: Polynomial, q) -> Polynomial:
    """Apply a named ring operation: add, sub, mul, or pow.

    For pow, ``q`` is a non-negative integer exponent rather than a
    polynomial.
    """
    if op == "add":
        return p + q
    if op == "sub":
        return p - q
    if op == "mul":
        return p * q
    if op == "pow":
        return p ** q
    raise ValueError(f"unknown operation {op!r}")


def exact_divide(p: Polynomial, d: Polynomial) -> Polynomial | None:
    """Divide exactly, or return None when the remainder is nonzero.

    Recursive long division in the first variable in which the divisor
    has positive degree; coefficient divisions recurse over the
    remaining variables.  Over the rationals a constant divisor always
    divides.
    """
    if d.is_zero():
        raise ZeroDivisionError("division by zero polynomial")
    if p.vars != d.vars:
        raise ValueError("VarSet mismatch")
    if p.is_zero():
        return p
    for name in d.vars.names:
        if d.degree(name) > 0:
            main = name
            break
    else:
        inv = 1 / Fraction(d.leading_coefficient())
        return Polynomial(
            p.vars, {m: _normcoeff(c * inv) for m, c in p.terms.items()}
        )

    dn = d.degree(main)
    lc_d = d.coefficient(main, dn)
    i = p.vars.index(main)
    xpow = {}  # reusable var^k monomial builders

    quotient = Polynomial.zero(p.vars)
    rem = p
    while not rem.is_zero():
        dp = rem.degree(main)
        if dp < dn:
            return None
        qk = exact_divide(rem.coefficient(main, dp), lc_d)
        if qk is None:
            return None
        shift = dp - dn
        if shift not in xpow:
            xpow[shift] = Polynomial.variable(p.vars, main, shift) if shift else Polynomial.constant(p.vars, 1)
        qterm = qk * xpow[shift]
        quotient = quotient + qterm
        rem = rem - qterm * d
        if not rem.is_zero() and rem.degree(main) >= dp:
            return None  # no progress: not divisible
    return quotient


def differentiate(p: Polynomial, var: str) -> Polynomial:
    """Formal partial derivative."""
    return p.diff(var)


def evaluate(p: Polynomial, assignment: Mapping[str, Coeff]):
    """Module-level alias for :meth:`Polynomial.evaluate`."""
    return p.evaluate(assignment)


def substitute_rational(
    p: Polynomial, var: str, num: Polynomial, den: Polynomial
) -> tuple[Polynomial, int]:
    """Module-level alias for :meth:`Polynomial.substitute_rational`."""
    return p.substitute_rational(var, num, den)


def normalize(p: Polynomial) -> tuple[Polynomial, Fraction]:
    """Module-level alias for :meth:`Polynomial.normalize`."""
    return p.normalize()


def _prem(a: Polynomial, b: Polynomial, var: str) -> Polynomial:
    # pseudo-remainder: lc(b)^(deg a - deg b + 1) * a reduced by b
    db = b.degree(var)
    lc_b = b.coefficient(var, db)
    rem = a
    da = rem.degree(var)
    steps = da - db + 1
    while not rem.is_zero():
        da = rem.degree(var)
        if da < db:
            break
        lc_r = rem.coefficient(var, da)
        shift = Polynomial.variable(a.vars, var, da - db) if da > db else Polynomial.constant(a.vars, 1)
        rem = lc_b * rem - lc_r * shift * b
        steps -= 1
    # keep the classical power so subresultant divisions stay exact
    for _ in range(max(steps, 0)):
        rem = lc_b * rem
    return rem


def _content_wrt(p: Polynomial, var: str) -> Polynomial:
    coeffs = list(p.by_degree(var).values())
    g = coeffs[0]
    for c in coeffs[1:]:
        g = multivariate_gcd(g, c)
        if g.degree() == 0:
            break
    return g.primitive() if not g.is_zero() else g


def multivariate_gcd(p: Polynomial, q: Polynomial) -> Polynomial:
    """Greatest common divisor, primitive with positive leading coefficient.

    Recursive content/primitive-part reduction: pick the first shared
    variable, split both inputs into content times primitive part with
    respect to it, and run a subresultant pseudo-remainder sequence on
    the primitive parts.  Contents recurse over the remaining variables.
    """
    if p.is_zero() and q.is_zero():
        raise ValueError("gcd(0, 0) undefined")
    if p.is_zero():
        return q.primitive()
    if q.is_zero():
        return p.primitive()
    shared = [
        n for n in p.vars.names if p.degree(n) > 0 and q.degree(n) > 0
    ]
    if not shared:
        # no common variable: only constants divide both
        return Polynomial.constant(p.vars, 1)
    var = shared[0]
    cont_p = _content_wrt(p, var)
    cont_q = _content_wrt(q, var)
    cont = multivariate_gcd(cont_p, cont_q)
    a = exact_divide(p.primitive(), cont_p)
    b = exact_divide(q.primitive(), cont_q)
    assert a is not None and b is not None
    if a.degree(var) < b.degree(var):
        a, b = b, a
    # subresultant PRS in var
    g = Polynomial.constant(p.vars, 1)
    h = Polynomial.constant(p.vars, 1)
    while True:
        delta = a.degree(var) - b.degree(var)
        rem = _prem(a, b, var)
        if rem.is_zero():
            break
        if rem.degree(var) == 0:
            return cont.primitive()
        divisor = g * h ** delta
        nxt = exact_divide(rem, divisor)
        assert nxt is not None, "subresultant division must be exact"
        a, b = b, nxt
        g = a.coefficient(var, a.degree(var))
        if delta == 0:
            h = h  # h unchanged when degrees tie
        elif delta == 1:
            h = g
        else:
            h_new = exact_divide(g ** delta, h ** (delta - 1))
            assert h_new is not None
            h = h_new
    result = exact_divide(b, _content_wrt(b, var))
    assert result is not None
    return (cont * result).primitive()
