"""Taylor coefficients of ODE flows and their Jacobians, over interval boxes.

For x' = f(x) the normalized coefficients are f^[0](x) = x and
f^[i+1] = (f-coefficient i of the truncated series) / (i+1), which is the
standard jet recurrence x_{i+1} = f(x)_i / (i+1).  Each right-hand side is
compiled once into a flat operation tape; a call then sweeps the tape once
per degree, so degree p costs O(p^2) interval convolution terms.

Jacobians J_{f^[i]} are first-order forward sensitivities: the same tape is
swept with n extra directional-derivative channels seeded with the identity.
Everything is evaluated in outward-rounded interval arithmetic, so results
over a box enclose the true coefficients at every point of the box.
"""

from __future__ import annotations

import weakref
from dataclasses import dataclass
from fractions import Fraction

from .errors import DomainError
from .expr import Add, Constant, Div, Expr, Mul, Neg, OdeSystem, Param, PowInt, Sub, Var
from .intervals import Box, Interval, iv_div, iv_mul, norm2_up
from .rounding import div_down, div_up

_NEG, _ADD, _SUB, _MUL, _MULC, _DIV, _DIVC = range(7)

_ZERO = Interval(0.0, 0.0)


@dataclass
class _Tape:
    n: int
    n_slots: int
    ops: list[tuple[int, int, int, int]]  # (kind, dst, a, b_or_const_slot)
    const_slots: list[tuple[int, Fraction]]
    outs: list[int]  # slot holding f_v for each state variable v


def _compile(system: OdeSystem) -> _Tape:
    n = system.dim
    ops: list[tuple[int, int, int, int]] = []
    const_slots: list[tuple[int, Fraction]] = []
    const_index: dict[Fraction, int] = {}
    is_const: dict[int, Fraction] = {}
    next_slot = n

    def fresh() -> int:
        nonlocal next_slot
        s = next_slot
        next_slot += 1
        return s

    def const_slot(v: Fraction) -> int:
        if v in const_index:
            return const_index[v]
        s = fresh()
        const_index[v] = s
        const_slots.append((s, v))
        is_const[s] = v
        return s

    def emit(e: Expr) -> int:
        if isinstance(e, Constant):
            return const_slot(e.value)
        if isinstance(e, Param):
            return const_slot(system.params[e.name])
        if isinstance(e, Var):
            return e.index
        if isinstance(e, Neg):
            a = emit(e.a)
            d = fresh()
            ops.append((_NEG, d, a, -1))
            return d
        if isinstance(e, (Add, Sub)):
            a, b = emit(e.a), emit(e.b)
            d = fresh()
            ops.append((_ADD if isinstance(e, Add) else _SUB, d, a, b))
            return d
        if isinstance(e, Mul):
            a, b = emit(e.a), emit(e.b)
            d = fresh()
            if a in is_const:
                ops.append((_MULC, d, b, a))
            elif b in is_const:
                ops.append((_MULC, d, a, b))
            else:
                ops.append((_MUL, d, a, b))
            return d
        if isinstance(e, Div):
            a, b = emit(e.a), emit(e.b)
            d = fresh()
            if b in is_const:
                if is_const[b] == 0:
                    raise DomainError("division by constant zero")
                ops.append((_DIVC, d, a, b))
            else:
                ops.append((_DIV, d, a, b))
            return d
        if isinstance(e, PowInt):
            if e.exponent == 0:
                return const_slot(Fraction(1))
            base = emit(e.base)
            # square-and-multiply chain of MUL ops
            result = -1
            acc = base
            m = e.exponent
            while m:
                if m & 1:
                    if result < 0:
                        result = acc
                    else:
                        d = fresh()
                        ops.append((_MUL, d, result, acc))
                        result = d
                m >>= 1
                if m:
                    d = fresh()
                    ops.append((_MUL, d, acc, acc))
                    acc = d
            return result
        raise TypeError(f"not an expression node: {e!r}")

    outs = [emit(e) for e in system.rhs]
    return _Tape(n, next_slot, ops, const_slots, outs)


_tape_cache: "weakref.WeakKeyDictionary[OdeSystem, _Tape]" = weakref.WeakKeyDictionary()


def _tape(system: OdeSystem) -> _Tape:
    t = _tape_cache.get(system)
    if t is None:
        t = _compile(system)
        _tape_cache[system] = t
    return t


def _div_pos_int(iv: Interval, c: int) -> Interval:
    return Interval(div_down(iv.lo, c), div_up(iv.hi, c))


def _is_zero(iv: Interval) -> bool:
    return iv.lo == 0.0 and iv.hi == 0.0


def _conv(a: list[Interval], b: list[Interval], i: int) -> Interval:
    acc = None
    for j in range(i + 1):
        x, y = a[j], b[i - j]
        if _is_zero(x) or _is_zero(y):
            continue
        t = iv_mul(x, y)
        acc = t if acc is None else acc + t
    return _ZERO if acc is None else acc


def _run(
    tape: _Tape,
    q: Box,
    p: int,
    with_grads: bool,
) -> tuple[list[list[Interval]], list[list[list[Interval]]] | None]:
    """Sweep the tape to state degree p.

    Returns (coeffs, grads): coeffs[slot][deg]; grads[dir][slot][deg] with
    n seed directions (identity at degree 0 of the state slots), or None.
    """
    n, n_slots = tape.n, tape.n_slots
    ncoef = p + 1
    coeffs: list[list[Interval]] = [[_ZERO] * ncoef for _ in range(n_slots)]
    for slot, fr in tape.const_slots:
        coeffs[slot][0] = Interval.from_fraction(fr)
    for v in range(n):
        coeffs[v][0] = q[v]

    grads: list[list[list[Interval]]] | None = None
    if with_grads:
        grads = [[[_ZERO] * ncoef for _ in range(n_slots)] for _ in range(n)]
        one = Interval(1.0, 1.0)
        for c in range(n):
            grads[c][c][0] = one

    dirs = range(n) if with_grads else range(0)

    for i in range(p):
        for kind, dst, a, b in tape.ops:
            ca, cd = coeffs[a], coeffs[dst]
            if kind == _MUL:
                cb = coeffs[b]
                cd[i] = _conv(ca, cb, i)
                if with_grads:
                    for c in dirs:
                        ga, gb = grads[c][a], grads[c][b]
                        grads[c][dst][i] = _conv(ga, cb, i) + _conv(ca, gb, i)
            elif kind == _MULC:
                cv = coeffs[b][0]
                cd[i] = iv_mul(cv, ca[i])
                if with_grads:
                    for c in dirs:
                        grads[c][dst][i] = iv_mul(cv, grads[c][a][i])
            elif kind == _ADD:
                cb = coeffs[b]
                cd[i] = ca[i] + cb[i]
                if with_grads:
                    for c in dirs:
                        grads[c][dst][i] = grads[c][a][i] + grads[c][b][i]
            elif kind == _SUB:
                cb = coeffs[b]
                cd[i] = ca[i] - cb[i]
                if with_grads:
                    for c in dirs:
                        grads[c][dst][i] = grads[c][a][i] - grads[c][b][i]
            elif kind == _NEG:
                cd[i] = -ca[i]
                if with_grads:
                    for c in dirs:
                        grads[c][dst][i] = -grads[c][a][i]
            elif kind == _DIVC:
                cv = coeffs[b][0]
                cd[i] = iv_div(ca[i], cv)
                if with_grads:
                    for c in dirs:
                        grads[c][dst][i] = iv_div(grads[c][a][i], cv)
            else:  # _DIV: q = a/b via  q_i = (a_i - sum_{j>=1} b_j q_{i-j}) / b_0
                cb = coeffs[b]
                if i == 0 and cb[0].lo <= 0.0 <= cb[0].hi:
                    raise DomainError(
                        "series division by an interval containing zero"
                    )
                num = ca[i]
                for j in range(1, i + 1):
                    if not (_is_zero(cb[j]) or _is_zero(cd[i - j])):
                        num = num - iv_mul(cb[j], cd[i - j])
                cd[i] = iv_div(num, cb[0])
                if with_grads:
                    for c in dirs:
                        ga, gb, gd = grads[c][a], grads[c][b], grads[c][dst]
                        gnum = ga[i]
                        for j in range(i + 1):
                            if not (_is_zero(gb[j]) or _is_zero(cd[i - j])):
                                gnum = gnum - iv_mul(gb[j], cd[i - j])
                        for j in range(1, i + 1):
                            if not (_is_zero(cb[j]) or _is_zero(gd[i - j])):
                                gnum = gnum - iv_mul(cb[j], gd[i - j])
                        gd[i] = iv_div(gnum, cb[0])

        # state advance: x_{i+1} = (f(x))_i / (i+1)
        for v in range(n):
            coeffs[v][i + 1] = _div_pos_int(coeffs[tape.outs[v]][i], i + 1)
            if with_grads:
                for c in dirs:
                    grads[c][v][i + 1] = _div_pos_int(
                        grads[c][tape.outs[v]][i], i + 1
                    )

    return coeffs, grads


def taylor_coeffs(system: OdeSystem, q: Box, p: int) -> list[Box]:
    """Enclosures of f^[i](x) for all x in q, i = 0..p.  Entry 0 is q."""
    if p < 0:
        raise ValueError("degree must be nonnegative")
    tape = _tape(system)
    coeffs, _ = _run(tape, q, p, with_grads=False)
    return [Box(coeffs[v][i] for v in range(tape.n)) for i in range(p + 1)]


def taylor_coeffs_and_jacobians(
    system: OdeSystem, E: Box, k: int
) -> tuple[list[Box], list[list[list[Interval]]]]:
    """Coefficient enclosures and their Jacobians over E for i = 0..k-1.

    Matrix i entry (r, c) encloses d f^[i]_r / d x_c at every point of E;
    matrix 0 is the identity.
    """
    if k < 1:
        raise ValueError("order must be at least 1")
    tape = _tape(system)
    coeffs, grads = _run(tape, E, k - 1, with_grads=True)
    assert grads is not None
    vecs = [Box(coeffs[v][i] for v in range(tape.n)) for i in range(k)]
    mats = [
        [[grads[c][r][i] for c in range(tape.n)] for r in range(tape.n)]
        for i in range(k)
    ]
    return vecs, mats


def taylor_jacobians(
    system: OdeSystem, E: Box, k: int
) -> list[list[list[Interval]]]:
    """Interval matrices enclosing J_{f^[i]}(E) for i = 0..k-1."""
    return taylor_coeffs_and_jacobians(system, E, k)[1]


def jacobian(system: OdeSystem, E: Box) -> list[list[Interval]]:
    """Interval matrix enclosing J_f over E."""
    return taylor_jacobians(system, E, 2)[1]


def norm_bound_coeff(system: OdeSystem, F: Box, p: int) -> float:
    """Upper bound on sup over F of the 2-norm of f^[p+1]."""
    tail = taylor_coeffs(system, F, p + 1)[p + 1]
    return norm2_up([iv.mag() for iv in tail])


def eval_series(coeff_vectors: list[Box], t: Interval) -> Box:
    """Sum of coeff_vectors[i] * t^i in outward interval arithmetic.

    Powers of t are accumulated iteratively, which for t = [0, h] keeps each
    power exactly [0, h^i] instead of compounding a dependency blow-up.
    """
    n = len(coeff_vectors[0])
    acc = list(coeff_vectors[0].ivs)
    t_pow = Interval(1.0, 1.0)
    for i in range(1, len(coeff_vectors)):
        t_pow = iv_mul(t_pow, t)
        for v in range(n):
            cv = coeff_vectors[i][v]
            if not _is_zero(cv):
                acc[v] = acc[v] + iv_mul(t_pow, cv)
    return Box(acc)


def eval_series_point(coeff_vectors: list[Box], h: float) -> Box:
    return eval_series(coeff_vectors, Interval(h, h))
