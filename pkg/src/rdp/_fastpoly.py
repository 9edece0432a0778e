"""Fast integer-coefficient polynomial kernel for the elimination code.

The general :class:`~rdp.polyring.Polynomial` stores exponent tuples and
Fraction coefficients, which is convenient but slow inside a fraction-free
elimination where entries reach thousands of terms.  Here a monomial is a
single Python int with 16 bits per variable, so multiplying monomials is
integer addition and dict keys hash fast.  Coefficients are exact integers
(gmpy2.mpz when available) and carry sign; rational content is split off
before entering this representation.

Everything in this module is an implementation detail of :mod:`rdp.elim`.
"""

from __future__ import annotations

import heapq
import math
from fractions import Fraction

try:
    import gmpy2

    _mpz = gmpy2.mpz
    _gcd = gmpy2.gcd
except ImportError:  # pragma: no cover - gmpy2 is a declared dependency
    from math import gcd as _gcd

    _mpz = int

SHIFT = 16
MASK = (1 << SHIFT) - 1


def pack(mono) -> int:
    key = 0
    for i, e in enumerate(mono):
        if e > MASK:
            raise OverflowError(f"exponent {e} exceeds packed field")
        key |= e << (SHIFT * i)
    return key


def unpack(key: int, n: int) -> tuple:
    return tuple((key >> (SHIFT * i)) & MASK for i in range(n))


def from_poly_scaled(p):
    """Convert to (fdict, den) with den a positive int and den*p == fdict."""
    den = 1
    for c in p.terms.values():
        d = Fraction(c).denominator
        den = den * d // _igcd(den, d)
    out = {}
    for m, c in p.terms.items():
        f = Fraction(c)
        out[pack(m)] = _mpz(f.numerator * (den // f.denominator))
    return out, den


def to_poly(fd, varset):
    from .polyring import Polynomial

    n = len(varset.names)
    return Polynomial(varset, {unpack(k, n): int(c) for k, c in fd.items()})


def to_poly_scaled(fd, varset, scale: Fraction):
    from .polyring import Polynomial

    n = len(varset.names)
    if scale == 1:
        return to_poly(fd, varset)
    return Polynomial(
        varset, {unpack(k, n): scale * int(c) for k, c in fd.items()}
    )


def _igcd(a: int, b: int) -> int:
    while b:
        a, b = b, a % b
    return a


def fdegrees(fd, n):
    """Per-variable maximum exponents."""
    degs = [0] * n
    for k in fd:
        for i in range(n):
            e = (k >> (SHIFT * i)) & MASK
            if e > degs[i]:
                degs[i] = e
    return degs


def _check_mul(a, b, n):
    # packed keys add under multiplication; a field overflow would
    # silently corrupt the neighbour, so refuse before it can happen
    da = fdegrees(a, n)
    db = fdegrees(b, n)
    if any(x + y > MASK for x, y in zip(da, db)):
        raise OverflowError("product degree exceeds packed field width")


_KRON_PAIRS = 1 << 22  # below this many term products the dict loop wins
# limb width in bytes -> dense position cap; wider limbs carry bigger
# coefficients at the same ~256 MB buffer ceiling
_KRON_LIMBS = ((16, 1 << 24), (32, 1 << 23), (64, 1 << 22))


def _kron_plan(boxes):
    strides = []
    positions = 1
    for w in boxes:
        strides.append(positions)
        positions *= w
    return strides, positions


def _kron_encode(fd, strides, positions, n, L):
    """Pack a poly into one integer, one L-byte limb per dense position."""
    bp = bytearray(L * positions)
    bn = bytearray(L * positions)
    for k, c in fd.items():
        pos = 0
        for i in range(n):
            pos += ((k >> (SHIFT * i)) & MASK) * strides[i]
        off = L * pos
        ci = int(c)
        if ci > 0:
            bp[off:off + L] = ci.to_bytes(L, "little")
        else:
            bn[off:off + L] = (-ci).to_bytes(L, "little")
    return _mpz(int.from_bytes(bp, "little")) - _mpz(
        int.from_bytes(bn, "little")
    )


def _kron_decode(N, boxes, strides, positions, n, L):
    """Unpack balanced L-byte digits back into a poly dict.

    Adding half*B^i to every slot turns balanced digits into the plain
    base-B digits of N + C, so the buffer scans without carry logic:
    each slot is independently digit - half.  The shift is exact for any
    N whose balanced digits fit the limb, which the callers' bit checks
    guarantee before they get here.
    """
    import numpy as np

    half = 1 << (8 * L - 1)
    pat = bytes(L - 1) + b"\x80"
    buf = (N + int.from_bytes(pat * positions, "little")).to_bytes(
        L * (positions + 1), "little"
    )
    words = np.frombuffer(buf, dtype="<u8")[: positions * (L // 8)]
    words = words.reshape(positions, L // 8)
    ref = np.frombuffer(pat, dtype="<u8")
    nz = np.nonzero((words != ref).any(axis=1))[0]
    out = {}
    if not nz.size:
        return out
    mv = memoryview(buf)
    if SHIFT * n <= 64:
        key = np.zeros(nz.size, dtype=np.uint64)
        for i in range(n):
            e = (nz // strides[i]) % boxes[i]
            key |= e.astype(np.uint64) << np.uint64(SHIFT * i)
        for s, k in zip(nz.tolist(), key.tolist()):
            out[k] = _mpz(int.from_bytes(mv[L * s:L * (s + 1)], "little") - half)
    else:  # pragma: no cover - packed keys wider than a machine word
        for s in nz.tolist():
            k = 0
            for i in range(n):
                k |= ((s // strides[i]) % boxes[i]) << (SHIFT * i)
            out[k] = _mpz(int.from_bytes(mv[L * s:L * (s + 1)], "little") - half)
    return out


def _kron_digit_bits(a, b):
    # worst-case digit is a full convolution sum; bound it by the
    # largest coefficient product times the shorter operand's length
    ma = max(int(abs(c)).bit_length() for c in a.values())
    mb = max(int(abs(c)).bit_length() for c in b.values())
    return ma + mb + min(len(a), len(b)).bit_length()


def _kron_pick(bits, positions):
    # digit must stay strictly below half the limb, with a bit to spare
    for L, cap in _KRON_LIMBS:
        if bits <= 8 * L - 3 and positions <= cap:
            return L
    return None


def _kron_mul(a, b, n):
    """a*b through one integer product, or None when out of range."""
    da = fdegrees(a, n)
    db = fdegrees(b, n)
    boxes = [x + y + 1 for x, y in zip(da, db)]
    strides, positions = _kron_plan(boxes)
    L = _kron_pick(_kron_digit_bits(a, b), positions)
    if L is None:
        return None
    Na = _kron_encode(a, strides, positions, n, L)
    Nb = _kron_encode(b, strides, positions, n, L)
    return _kron_decode(Na * Nb, boxes, strides, positions, n, L)


def _kron_cross(p, e, c, f, n):
    """p*e - c*f with the cancellation done on the packed integers."""
    boxes = [
        max(x1 + y1, x2 + y2) + 1
        for x1, y1, x2, y2 in zip(
            fdegrees(p, n), fdegrees(e, n), fdegrees(c, n), fdegrees(f, n)
        )
    ]
    strides, positions = _kron_plan(boxes)
    # the difference adds one bit on top of the larger product's digits
    bits = 1 + max(_kron_digit_bits(p, e), _kron_digit_bits(c, f))
    L = _kron_pick(bits, positions)
    if L is None:
        return None
    N = _kron_encode(p, strides, positions, n, L) * _kron_encode(
        e, strides, positions, n, L
    ) - _kron_encode(c, strides, positions, n, L) * _kron_encode(
        f, strides, positions, n, L
    )
    return _kron_decode(N, boxes, strides, positions, n, L)


def fmul(a, b, n):
    if not a or not b:
        return {}
    _check_mul(a, b, n)
    if len(a) * len(b) >= _KRON_PAIRS:
        out = _kron_mul(a, b, n)
        if out is not None:
            return out
    if len(a) > len(b):
        a, b = b, a
    out = {}
    get = out.get
    for ka, ca in a.items():
        for kb, cb in b.items():
            k = ka + kb
            out[k] = get(k, 0) + ca * cb
    return {k: v for k, v in out.items() if v}


def fcross(p, e, c, f, n):
    """p*e - c*f in one accumulation pass."""
    if p and e and c and f:
        _check_mul(p, e, n)
        _check_mul(c, f, n)
        if len(p) * len(e) + len(c) * len(f) >= _KRON_PAIRS:
            out = _kron_cross(p, e, c, f, n)
            if out is not None:
                return out
    out = {}
    get = out.get
    if p and e:
        _check_mul(p, e, n)
        for ka, ca in p.items():
            for kb, cb in e.items():
                k = ka + kb
                out[k] = get(k, 0) + ca * cb
    if c and f:
        _check_mul(c, f, n)
        for ka, ca in c.items():
            for kb, cb in f.items():
                k = ka + kb
                out[k] = get(k, 0) - ca * cb
    return {k: v for k, v in out.items() if v}


def _kron_div(a, b, n):
    """Exact quotient through integer division of the packed images.

    Packing evaluates the polynomial at a power of two, which is a ring
    map, so divisibility carries over and the integer quotient is the
    packed image of the polynomial quotient.  A nonzero remainder
    therefore proves indivisibility outright.  Returns the quotient,
    None for proven indivisibility, or ... when out of range and the
    termwise division must decide.
    """
    da = fdegrees(a, n)
    db = fdegrees(b, n)
    if any(x < y for x, y in zip(da, db)):
        return None
    ma = max(int(abs(c)).bit_length() for c in a.values())
    mb = max(int(abs(c)).bit_length() for c in b.values())
    boxes = [x + 1 for x in da]
    strides, positions = _kron_plan(boxes)
    for L, cap in _KRON_LIMBS:
        # operands must each fit a balanced limb for the images to be
        # faithful; the quotient's bound is only known after the fact
        if max(ma, mb) > 8 * L - 2 or positions > cap:
            continue
        Na = _kron_encode(a, strides, positions, n, L)
        Nb = _kron_encode(b, strides, positions, n, L)
        Nq, rem = divmod(Na, Nb)
        if rem:
            return None
        q = _kron_decode(Nq, boxes, strides, positions, n, L)
        # certify: with both digit ranges in bounds the packed images are
        # injective, so N_q*N_b == N_a proves q*b == a over the integers
        if not q or _kron_digit_bits(q, b) > 8 * L - 3:
            continue
        if any(x + y > MASK for x, y in zip(fdegrees(q, n), db)):
            return ...
        return q
    return ...


def fdiv(a, b, n):
    """Exact quotient a/b over the integers, or None.

    Division follows the monomial order given by the packed keys
    themselves.  When the quotient exists each step's leading
    coefficient division is exact, so a single inexact step or an
    incompatible monomial proves indivisibility.
    """
    if not b:
        raise ZeroDivisionError("division by zero polynomial")
    if not a:
        return {}
    bl = max(b)
    bc = b[bl]
    bfields = unpack(bl, n)
    # trailing monomials divide exactly in any monomial order, so an
    # incompatible pair proves indivisibility before any arithmetic
    tfields = unpack(min(b), n)
    afields = unpack(min(a), n)
    if any(x < y for x, y in zip(afields, tfields)):
        return None
    if len(a) >= 20000 and len(b) >= 64 and len(a) * len(b) >= _KRON_PAIRS:
        got = _kron_div(a, b, n)
        if got is not ...:
            return got
    bitems = list(b.items())
    rem = dict(a)
    heap = [-k for k in rem]
    heapq.heapify(heap)
    q = {}
    while rem:
        while heap and -heap[0] not in rem:
            heapq.heappop(heap)
        if not heap:
            break
        rl = -heap[0]
        if rl < bl:
            return None
        rfields = unpack(rl, n)
        if any(r < s for r, s in zip(rfields, bfields)):
            return None
        c, r = divmod(rem[rl], bc)
        if r:
            return None
        qk = rl - bl
        q[qk] = c
        for kb, cb in bitems:
            kk = qk + kb
            v = rem.get(kk, 0) - c * cb
            if v:
                if kk not in rem:
                    heapq.heappush(heap, -kk)
                rem[kk] = v
            elif kk in rem:
                del rem[kk]
    return q


def fcontent(fd) -> int:
    """Positive gcd of the coefficients (0 for the zero dict)."""
    g = 0
    for v in fd.values():
        g = _gcd(g, v)
        if g == 1:
            return 1
    return int(abs(g))


def fmono_min(dicts, n):
    """Packed per-variable minimum exponent over every key present."""
    mins = None
    for fd in dicts:
        for k in fd:
            if mins is None:
                mins = list(unpack(k, n))
            else:
                for i in range(n):
                    e = (k >> (SHIFT * i)) & MASK
                    if e < mins[i]:
                        mins[i] = e
            if mins is not None and not any(mins):
                return 0
    if mins is None:
        return 0
    return pack(mins)


def fshift_down(fd, gkey):
    # gkey divides every monomial fieldwise, so plain key subtraction
    # cannot borrow between fields
    return {k - gkey: v for k, v in fd.items()}


def fscale(fd, c: int):
    if c == 1:
        return fd
    c = _mpz(c)
    return {k: v * c for k, v in fd.items()}


def fscale_div(fd, g: int):
    if g == 1:
        return fd
    return {k: v // g for k, v in fd.items()}


def fdeg(fd, i):
    """Degree in variable i (zero dict: -1)."""
    if not fd:
        return -1
    sh = SHIFT * i
    d = 0
    for k in fd:
        e = (k >> sh) & MASK
        if e > d:
            d = e
    return d


def fcoeff(fd, i, deg):
    """Coefficient of v_i^deg as a dict with that field cleared."""
    sh = SHIFT * i
    off = deg << sh
    return {
        k - off: v for k, v in fd.items() if ((k >> sh) & MASK) == deg
    }


def fshift_var(fd, i, k):
    """Multiply by v_i^k."""
    if k == 0:
        return fd
    off = k << (SHIFT * i)
    return {kk + off: v for kk, v in fd.items()}


def fpow(fd, k, n):
    out = {0: _mpz(1)}
    for _ in range(k):
        out = fmul(out, fd, n)
    return out


def _fis_const(fd):
    return len(fd) == 1 and 0 in fd


def fprimitive(fd):
    """Integer-primitive copy with positive coefficient on the top key."""
    if not fd:
        return fd
    g = fcontent(fd)
    out = fscale_div(fd, g) if g > 1 else dict(fd)
    if out[max(out)] < 0:
        out = {k: -v for k, v in out.items()}
    return out


def fprem(a, b, i, n):
    """Classical pseudo-remainder of a by b in variable i."""
    db = fdeg(b, i)
    lcb = fcoeff(b, i, db)
    rem = a
    steps = fdeg(a, i) - db + 1
    while rem:
        da = fdeg(rem, i)
        if da < db:
            break
        lcr = fcoeff(rem, i, da)
        rem = fcross(lcb, rem, lcr, fshift_var(b, i, da - db), n)
        steps -= 1
    for _ in range(max(steps, 0)):
        rem = fmul(lcb, rem, n)
    return rem


def fcontent_wrt(fd, i, n):
    """Content with respect to variable i: gcd of the v_i coefficients."""
    sh = SHIFT * i
    groups = {}
    for k, v in fd.items():
        e = (k >> sh) & MASK
        groups.setdefault(e, {})[k - (e << sh)] = v
    g = None
    for sub in groups.values():
        g = sub if g is None else fgcd(g, sub, n)
        if _fis_const(g):
            break
    return fprimitive(g)


def fgcd(a, b, n):
    """Primitive gcd by subresultant PRS with recursive content reduction."""
    if not a and not b:
        raise ValueError("gcd(0, 0) undefined")
    if not a:
        return fprimitive(b)
    if not b:
        return fprimitive(a)
    da = fdegrees(a, n)
    db = fdegrees(b, n)
    shared = [i for i in range(n) if da[i] and db[i]]
    if not shared:
        return {0: _mpz(1)}
    i = shared[0]
    if min(len(a), len(b)) > 24:
        # modular images bound the gcd degree per variable; a dead
        # variable makes the whole recursion pointless, so probe
        # before committing to an expensive remainder sequence
        pos = [v for v in shared if fimage_gcd_degree((a, b), n, v) > 0]
        if not pos:
            return {0: _mpz(1)}
        i = pos[0]
    ca = fcontent_wrt(a, i, n)
    cb = fcontent_wrt(b, i, n)
    cont = fgcd(ca, cb, n)
    aa = fdiv(fprimitive(a), ca, n)
    bb = fdiv(fprimitive(b), cb, n)
    if fdeg(aa, i) < fdeg(bb, i):
        aa, bb = bb, aa
    g = {0: _mpz(1)}
    h = {0: _mpz(1)}
    while True:
        delta = fdeg(aa, i) - fdeg(bb, i)
        rem = fprem(aa, bb, i, n)
        if not rem:
            break
        if fdeg(rem, i) == 0:
            return fprimitive(cont)
        nxt = fdiv(rem, fmul(g, fpow(h, delta, n), n), n)
        aa, bb = bb, nxt
        g = fcoeff(aa, i, fdeg(aa, i))
        if delta == 1:
            h = g
        elif delta > 1:
            h = fdiv(fpow(g, delta, n), fpow(h, delta - 1, n), n)
    res = fdiv(bb, fcontent_wrt(bb, i, n), n)
    return fprimitive(fmul(cont, res, n))


_PROBE_P = (1 << 61) - 1
_probe_rng = __import__("random").Random(20240915)
_PROBE_PTS = [_probe_rng.randrange(2, _PROBE_P - 1) for _ in range(16)]
_probe_pows: dict = {}


def _probe_pow(i, e):
    key = (i, e)
    v = _probe_pows.get(key)
    if v is None:
        v = pow(_PROBE_PTS[i], e, _PROBE_P)
        _probe_pows[key] = v
    return v


def fimage_gcd_degree(dicts, n, v):
    """Degree in v of the gcd of univariate modular images.

    All variables except v are fixed at random residues mod a 61-bit
    prime.  The true gcd's degree in v can exceed this only on an
    unlucky evaluation, so a zero here is a sound reason to skip an
    exact gcd attempt; a positive value is just a hint.
    """
    sh = SHIFT * v
    g = None
    for fd in dicts:
        deg = fdeg(fd, v)
        arr = [0] * (deg + 1)
        for k, val in fd.items():
            c = int(val) % _PROBE_P
            for i in range(n):
                if i == v:
                    continue
                e = (k >> (SHIFT * i)) & MASK
                if e:
                    c = c * _probe_pow(i, e) % _PROBE_P
            arr[(k >> sh) & MASK] = (arr[(k >> sh) & MASK] + c) % _PROBE_P
        while arr and arr[-1] == 0:
            arr.pop()
        if not arr:
            continue  # image vanished, no information from this entry
        g = arr if g is None else _unigcd_mod(g, arr)
        if len(g) == 1:
            return 0
    return len(g) - 1 if g else 0


def _unigcd_mod(a, b):
    # dense Euclid over GF(_PROBE_P); inputs are nonempty coeff lists
    while b:
        db = len(b) - 1
        inv = pow(b[-1], _PROBE_P - 2, _PROBE_P)
        r = list(a)
        for top in range(len(r) - 1, db - 1, -1):
            c = r[top]
            if c:
                f = c * inv % _PROBE_P
                off = top - db
                for j in range(db + 1):
                    r[off + j] = (r[off + j] - f * b[j]) % _PROBE_P
        r = r[:db]
        while r and r[-1] == 0:
            r.pop()
        a, b = b, r
    return a


def _minv(x):
    return pow(x, _PROBE_P - 2, _PROBE_P)


def _fmod(fd):
    out = {}
    for k, c in fd.items():
        c = int(c) % _PROBE_P
        if c:
            out[k] = c
    return out


def _feval1(fd, n, v, r):
    # substitute v = r mod the probe prime; coefficients must already
    # be reduced ints
    sh = SHIFT * v
    pows = {}
    out = {}
    for k, c in fd.items():
        e = (k >> sh) & MASK
        if e:
            pw = pows.get(e)
            if pw is None:
                pw = pow(r, e, _PROBE_P)
                pows[e] = pw
            c = c * pw % _PROBE_P
            k -= e << sh
        out[k] = (out.get(k, 0) + c) % _PROBE_P
    return {k: c for k, c in out.items() if c}


def _fmul_mod(a, b):
    out = {}
    get = out.get
    for ka, ca in a.items():
        for kb, cb in b.items():
            k = ka + kb
            out[k] = (get(k, 0) + ca * cb) % _PROBE_P
    return {k: c for k, c in out.items() if c}


def _fsub_mod(a, b):
    out = dict(a)
    for k, c in b.items():
        v = (out.get(k, 0) - c) % _PROBE_P
        if v:
            out[k] = v
        else:
            out.pop(k, None)
    return out


def _fscale_mod(fd, s):
    s %= _PROBE_P
    if s == 0:
        return {}
    return {k: c * s % _PROBE_P for k, c in fd.items()}


def _fdivexact_mod(a, b, n):
    # exact division mod the probe prime by leading-key elimination,
    # None when the division leaves a remainder
    if not b:
        raise ZeroDivisionError
    if not a:
        return {}
    kb = max(b)
    bf = unpack(kb, n)
    inv = _minv(b[kb])
    r = dict(a)
    q = {}
    while r:
        kr = max(r)
        rf = unpack(kr, n)
        if any(x < y for x, y in zip(rf, bf)):
            return None
        kq = kr - kb
        c = r[kr] * inv % _PROBE_P
        q[kq] = c
        for k, v in b.items():
            kk = k + kq
            nv = (r.get(kk, 0) - v * c) % _PROBE_P
            if nv:
                r[kk] = nv
            else:
                r.pop(kk, None)
    return q


def _funi(fd, v):
    sh = SHIFT * v
    arr = [0] * (fdeg(fd, v) + 1)
    for k, c in fd.items():
        arr[(k >> sh) & MASK] = c
    return arr


def _bgcd(A, B, vlist, n, rng):
    """Gcd image mod the probe prime over the given variables.

    Dense interpolation one variable at a time, leading coefficients
    reconciled through the gcd of the operands' own leading
    coefficients.  Returns a scalar multiple of the true image, or
    None when the evaluation points ran out of luck; the caller
    verifies whatever comes back, so a near miss only costs a retry.
    """
    for v in range(n):
        if v in vlist:
            continue
        if fdeg(A, v) or fdeg(B, v):
            r = rng.randrange(1, _PROBE_P)
            if fdeg(A, v):
                A = _feval1(A, n, v, r)
            if fdeg(B, v):
                B = _feval1(B, n, v, r)
    if not A or not B:
        return None
    if len(vlist) == 1:
        g = _unigcd_mod(_funi(A, vlist[0]), _funi(B, vlist[0]))
        sh = SHIFT * vlist[0]
        return {e << sh: c for e, c in enumerate(g) if c}
    x = vlist[0]
    t = vlist[-1]
    dA = fdeg(A, x)
    dB = fdeg(B, x)
    if dA == 0 or dB == 0:
        return {0: 1}
    lcA = fcoeff(A, x, dA)
    lcB = fcoeff(B, x, dB)
    # lc_x of the gcd divides both leading coefficients, so either one
    # on its own is a sound normalizer; the surplus comes back out in
    # the content strip below.  A recursive gcd here would return its
    # result content-stripped and can undershoot lc_x(gcd), which turns
    # the interpolation family rational and poisons every level above.
    if len(lcA) == 1 or len(lcB) == 1:
        gamma = {fmono_min([lcA, lcB], n): 1}
    else:
        gamma = min((lcA, lcB), key=lambda f: (fdeg(f, t), len(f)))
    bound_t = fimage_gcd_degree((A, B), n, t)
    m = fdeg(gamma, t) + bound_t + 1
    H = {}
    N = {0: 1}
    tkey = 1 << (SHIFT * t)
    got = 0
    d_star = None
    used = set()
    attempts = 0
    while got < m:
        attempts += 1
        if attempts > 4 * m + 24:
            return None
        r = rng.randrange(1, _PROBE_P)
        if r in used:
            continue
        used.add(r)
        At = _feval1(A, n, t, r)
        Bt = _feval1(B, n, t, r)
        if fdeg(At, x) < dA or fdeg(Bt, x) < dB:
            continue  # leading coefficient vanished, degree unsafe
        gam_r = _feval1(gamma, n, t, r)
        if not gam_r:
            continue
        gj = _bgcd(At, Bt, vlist[:-1], n, rng)
        if gj is None:
            return None
        dg = fdeg(gj, x)
        if dg == 0:
            return {0: 1}
        if d_star is None or dg < d_star:
            # every earlier point was unlucky, start over from this one
            d_star = dg
            H = {}
            N = {0: 1}
            got = 0
        elif dg > d_star:
            continue
        num = _fmul_mod(gam_r, gj)
        den = fcoeff(gj, x, dg)
        img = _fdivexact_mod(num, den, n)
        if img is None:
            return None
        Hr = _feval1(H, n, t, r)
        diff = _fsub_mod(img, Hr)
        if diff:
            Nr = _feval1(N, n, t, r)
            c = _fscale_mod(diff, _minv(Nr[0]))
            H = dict(H)
            for k, v in _fmul_mod(N, c).items():
                nv = (H.get(k, 0) + v) % _PROBE_P
                if nv:
                    H[k] = nv
                else:
                    H.pop(k, None)
        N = _fmul_mod(N, {tkey: 1, 0: _PROBE_P - r})
        got += 1
    # the interpolated H carries gamma/lc(g) as content in the main
    # variable; strip it so the candidate stays close to the gcd
    dH = fdeg(H, x)
    if dH == 0:
        return {0: 1}
    cont = None
    for j in range(dH + 1):
        cj = fcoeff(H, x, j)
        if not cj:
            continue
        if cont is None:
            cont = cj
        elif _fdivexact_mod(cj, cont, n) is not None:
            pass
        elif _fdivexact_mod(cont, cj, n) is not None:
            cont = cj
        else:
            vs = [v for v in vlist if fdeg(cont, v) and fdeg(cj, v)]
            cont = _bgcd(cont, cj, vs, n, rng) if vs else None
            if cont is None:
                break
        if _fis_const(cont):
            cont = None
            break
    if cont is not None and not _fis_const(cont):
        H2 = _fdivexact_mod(H, cont, n)
        if H2 is not None:
            H = H2
    # the chain above can bail or under-compute; the monomial part of
    # the content is always recoverable exactly
    mk = fmono_min([H], n)
    if mk:
        H = fshift_down(H, mk)
    return H


def _ratrec(u, p, bnd):
    """Rational reconstruction of u mod p with |num|, den <= bnd."""
    r0, r1 = p, u % p
    s0, s1 = 0, 1
    while r1 > bnd:
        qq = r0 // r1
        r0, r1 = r1, r0 - qq * r1
        s0, s1 = s1, s0 - qq * s1
    if abs(s1) > bnd or r1 == 0:
        return None
    return r1, s1


def fgcd_modular(a, b, n):
    """Verified common divisor of a and b via a single-prime image.

    Builds the gcd candidate by dense modular interpolation, lifts it
    with rational reconstruction, and accepts it only when it divides
    both inputs exactly.  Returns None when the lift or the division
    fails; the caller falls back or gives up, never miscomputes.
    """
    # the interpolation machinery strips monomial content along the
    # way, so split the shared monomial off first and restore it after
    cma = fmono_min([a], n)
    cmb = fmono_min([b], n)
    cg = 0
    for i in range(n):
        cg |= min((cma >> (SHIFT * i)) & MASK,
                  (cmb >> (SHIFT * i)) & MASK) << (SHIFT * i)
    if cma:
        a = fshift_down(a, cma)
    if cmb:
        b = fshift_down(b, cmb)
    got = _fgcd_modular_core(a, b, n)
    if got is None:
        if not cg:
            return None
        return {cg: _mpz(_igcd(fcontent(a), fcontent(b)))}
    if cg:
        got = {k + cg: c for k, c in got.items()}
    return got


def _fgcd_modular_core(a, b, n):
    # single-prime dense interpolation with rational lift; inputs
    # arrive monomial-free
    vpos = []
    for v in range(n):
        if fdeg(a, v) and fdeg(b, v):
            d = fimage_gcd_degree((a, b), n, v)
            if d > 0:
                vpos.append((d, v))
    if not vpos:
        return None
    # deepest variable first: it becomes the base-case gcd variable,
    # the shallow ones get interpolated with few points each
    vpos = [v for d, v in sorted(vpos, key=lambda dv: (-dv[0], dv[1]))]
    Am = _fmod(a)
    Bm = _fmod(b)
    if not Am or not Bm:
        return None
    rng = __import__("random").Random(0x9E3779B9)
    bnd = int(math.isqrt(_PROBE_P // 2))
    for _attempt in range(3):
        H = _bgcd(Am, Bm, vpos, n, rng)
        if H is None or _fis_const(H):
            continue
        lead = H[max(H)]
        H = _fscale_mod(H, _minv(lead))
        den_lcm = 1
        pairs = {}
        ok = True
        for k, c in H.items():
            rec = _ratrec(c, _PROBE_P, bnd)
            if rec is None:
                ok = False
                break
            num, den = rec
            if den < 0:
                num, den = -num, -den
            pairs[k] = (num, den)
            den_lcm = den_lcm * den // math.gcd(den_lcm, den)
        if not ok:
            continue
        cand = {k: _mpz(num * (den_lcm // den)) for k, (num, den) in pairs.items()}
        cand = fprimitive(cand)
        if _fis_const(cand):
            continue
        if fdiv(a, cand, n) is None or fdiv(b, cand, n) is None:
            # the lift can come back with x-free content still attached;
            # the candidate is small now, so peel it exactly and retry
            x = vpos[0]
            cont = None
            for j in range(fdeg(cand, x) + 1):
                cj = fcoeff(cand, x, j)
                if not cj:
                    continue
                cont = cj if cont is None else fgcd(cont, cj, n)
                if _fis_const(cont):
                    break
            if cont is None or _fis_const(cont):
                continue
            cand = fdiv(cand, cont, n)
            if cand is None or _fis_const(cand):
                continue
            cand = fprimitive(cand)
            if fdiv(a, cand, n) is None or fdiv(b, cand, n) is None:
                continue
        return cand
    return None


def fsplit_junk(fd, n):
    """Split into (core, junk) with fd == junk * core.

    junk is a one-term dict holding the scalar content and the common
    monomial, or None when fd is already primitive and monomial-free.
    """
    g = fcontent(fd)
    mono = fmono_min([fd], n)
    if g <= 1 and not mono:
        return fd, None
    core = fd
    if mono:
        core = fshift_down(core, mono)
    if g > 1:
        core = fscale_div(core, g)
    return core, {mono: _mpz(g if g else 1)}


def _to_primitive(p):
    """Split p into (primitive integer fdict, positive Fraction content)."""
    fd, den = from_poly_scaled(p)
    g = fcontent(fd)
    if g > 1:
        fd = fscale_div(fd, g)
    return fd, Fraction(g if g else 1, den)


def fast_exact_divide(p, d):
    """Drop-in for :func:`rdp.polyring.exact_divide` on large operands.

    Reduces rational exactness to integer exactness of the primitive
    parts, then divides in the packed representation.
    """
    if d.is_zero():
        raise ZeroDivisionError("division by zero polynomial")
    if p.vars != d.vars:
        raise ValueError("VarSet mismatch")
    if p.is_zero():
        return p
    n = len(p.vars.names)
    fp, cp = _to_primitive(p)
    fd_, cd = _to_primitive(d)
    q = fdiv(fp, fd_, n)
    if q is None:
        return None
    return to_poly_scaled(q, p.vars, cp / cd)
