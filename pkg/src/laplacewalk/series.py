"""Truncated power series in ``z`` with exact-rational or float coefficients.

Generating functions here are built from ``w = sqrt(1 - z)``.  Odd powers of
``w`` are expanded with the binomial series; even powers are polynomials in
``z``.  Functions of ``w`` that are entire and even (``cosh(v w)``,
``w sinh(v w)``) are expanded directly as series in ``1 - z``, which keeps
every coefficient a sum of same-sign terms.
"""

from __future__ import annotations

import math
from fractions import Fraction
from numbers import Number
from typing import Callable, Iterable, Sequence

EXACT_MAX_ORDER = 200


def _is_exact(x) -> bool:
    return isinstance(x, (int, Fraction))


def _sum(terms: Iterable):
    terms = list(terms)
    if not terms:
        return 0
    if all(_is_exact(t) for t in terms):
        return sum(terms, Fraction(0))
    return math.fsum(float(t) for t in terms)


class TruncatedSeries:
    """Coefficients ``c_0 .. c_N`` of a power series, exact through order ``N``.

    Coefficients are either all exact (``int``/``Fraction``) or floats; mixing
    promotes to float.  Arithmetic between series of different orders
    truncates to the smaller order.
    """

    __slots__ = ("coeffs",)

    def __init__(self, coeffs: Sequence, order: int | None = None):
        coeffs = list(coeffs)
        if order is not None:
            coeffs = (coeffs + [0] * (order + 1))[: order + 1]
        if not coeffs:
            raise ValueError("a series needs at least one coefficient")
        if all(_is_exact(c) for c in coeffs):
            self.coeffs = tuple(Fraction(c) for c in coeffs)
        else:
            self.coeffs = tuple(float(c) for c in coeffs)

    # construction -------------------------------------------------------
    @classmethod
    def constant(cls, c, order: int) -> "TruncatedSeries":
        return cls([c], order)

    @classmethod
    def z(cls, order: int) -> "TruncatedSeries":
        return cls([0, 1], order)

    @classmethod
    def geometric(cls, order: int) -> "TruncatedSeries":
        """``1/(1 - z)``."""
        return cls([1] * (order + 1))

    @classmethod
    def w_power(cls, p: int, order: int) -> "TruncatedSeries":
        """``(1 - z)^(p/2)`` by the (generalised) binomial series; exact."""
        half = Fraction(p, 2)
        c = [Fraction(1)]
        for k in range(1, order + 1):
            c.append(-c[-1] * (half - k + 1) / k)
        return cls(c)

    @classmethod
    def sqrt_one_minus_z(cls, order: int) -> "TruncatedSeries":
        return cls.w_power(1, order)

    @classmethod
    def from_w_polynomial(cls, terms: dict, order: int) -> "TruncatedSeries":
        """Expand ``sum_p terms[p] * w^p`` with ``w = sqrt(1 - z)``."""
        out = cls.constant(0, order)
        for p, c in terms.items():
            if c:
                out = out + cls.w_power(p, order) * c
        return out

    @classmethod
    def even_entire_in_w(
        cls, log_abs_coeff: Callable[[int], float], order: int, tol: float = 1e-18
    ) -> "TruncatedSeries":
        """Expand ``F(w) = sum_n a_n w^(2n)`` for entire ``F`` with ``a_n >= 0``.

        ``log_abs_coeff(n)`` returns ``log a_n`` (``-inf`` for zero).  The
        coefficient of ``z^k`` is ``(-1)^k sum_{n>=k} C(n, k) a_n``; the inner
        sum runs until its terms fall below ``tol`` relative to the partial sum.
        """
        coeffs = []
        for k in range(order + 1):
            terms = []
            n = k
            peak = -math.inf
            while True:
                la = log_abs_coeff(n)
                lt = la + _log_binom(n, k) if la > -math.inf else -math.inf
                peak = max(peak, lt)
                terms.append(lt)
                if n > k + 8 and lt < peak + math.log(tol) and _decreasing(terms):
                    break
                n += 1
                if n > k + 20000:
                    raise RuntimeError("entire-series expansion did not converge")
            total = math.fsum(math.exp(t) for t in terms if t > -math.inf)
            coeffs.append((-1) ** k * total)
        return cls(coeffs)

    # access -------------------------------------------------------------
    @property
    def order(self) -> int:
        return len(self.coeffs) - 1

    @property
    def exact(self) -> bool:
        return isinstance(self.coeffs[0], Fraction)

    def __getitem__(self, k):
        return self.coeffs[k]

    def __len__(self):
        return len(self.coeffs)

    def __iter__(self):
        return iter(self.coeffs)

    def __repr__(self):
        head = ", ".join(str(c) for c in self.coeffs[:6])
        more = ", ..." if self.order > 5 else ""
        return f"TruncatedSeries([{head}{more}], order={self.order})"

    def to_float(self) -> "TruncatedSeries":
        return TruncatedSeries([float(c) for c in self.coeffs])

    def __call__(self, z):
        """Evaluate the truncated polynomial (Horner)."""
        acc = 0
        for c in reversed(self.coeffs):
            acc = acc * z + c
        return acc

    # arithmetic ---------------------------------------------------------
    def _coerce(self, other):
        if isinstance(other, TruncatedSeries):
            return other
        if isinstance(other, Number):
            return TruncatedSeries.constant(other, self.order)
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        n = min(self.order, other.order)
        return TruncatedSeries([self[k] + other[k] for k in range(n + 1)])

    __radd__ = __add__

    def __neg__(self):
        return TruncatedSeries([-c for c in self.coeffs])

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return other
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if isinstance(other, Number):
            return TruncatedSeries([c * other for c in self.coeffs])
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        n = min(self.order, other.order)
        a, b = self.coeffs, other.coeffs
        return TruncatedSeries(
            [_sum(a[i] * b[k - i] for i in range(k + 1)) for k in range(n + 1)]
        )

    __rmul__ = __mul__

    def shift(self, k: int = 1) -> "TruncatedSeries":
        """Multiply by ``z^k`` (order is kept)."""
        zero = [0] * k
        return TruncatedSeries(zero + list(self.coeffs[: len(self.coeffs) - k]))

    def reciprocal(self) -> "TruncatedSeries":
        a = self.coeffs
        if a[0] == 0:
            raise ZeroDivisionError("series with zero constant term has no reciprocal")
        b = [1 / a[0]]
        for k in range(1, len(a)):
            b.append(-_sum(a[i] * b[k - i] for i in range(1, k + 1)) / a[0])
        return TruncatedSeries(b)

    def __truediv__(self, other):
        if isinstance(other, Number):
            return TruncatedSeries([c / other for c in self.coeffs])
        if not isinstance(other, TruncatedSeries):
            return NotImplemented
        n = min(self.order, other.order)
        a, b = self.coeffs, other.coeffs
        if b[0] == 0:
            raise ZeroDivisionError("divisor has zero constant term")
        q = []
        for k in range(n + 1):
            q.append((a[k] - _sum(b[i] * q[k - i] for i in range(1, k + 1))) / b[0])
        return TruncatedSeries(q)

    def __rtruediv__(self, other):
        return self.reciprocal() * other

    def __pow__(self, alpha):
        """Real power of a series with nonzero constant term."""
        if isinstance(alpha, int):
            if alpha < 0:
                return self.reciprocal() ** (-alpha)
            out = TruncatedSeries.constant(1, self.order)
            base = self
            while alpha:
                if alpha & 1:
                    out = out * base
                base = base * base
                alpha >>= 1
            return out
        a = self.coeffs
        if a[0] == 0:
            raise ZeroDivisionError("non-integer power needs a nonzero constant term")
        alpha = Fraction(alpha) if self.exact and isinstance(alpha, Fraction) else float(alpha)
        a0 = a[0] ** alpha
        if isinstance(a0, Fraction) or (self.exact and float(a0).is_integer()):
            g = [Fraction(a0)]
        else:
            a = [float(c) for c in a]
            g = [float(a0)]
        # J.C.P. Miller recurrence: n a_0 g_n = sum_k ((alpha+1)k - n) a_k g_{n-k}
        for n in range(1, len(a)):
            s = _sum(((alpha + 1) * k - n) * a[k] * g[n - k] for k in range(1, n + 1))
            g.append(s / (n * a[0]))
        return TruncatedSeries(g)

    def derivative(self) -> "TruncatedSeries":
        c = self.coeffs
        if len(c) == 1:
            return TruncatedSeries([0])
        return TruncatedSeries([k * c[k] for k in range(1, len(c))])


def _log_binom(n: int, k: int) -> float:
    return math.lgamma(n + 1) - math.lgamma(k + 1) - math.lgamma(n - k + 1)


def _decreasing(terms) -> bool:
    return len(terms) < 2 or terms[-1] <= terms[-2]


def cosh_vw(v: float, order: int) -> TruncatedSeries:
    """``cosh(v sqrt(1 - z))`` as a series in ``z``."""
    if v == 0:
        return TruncatedSeries.constant(1.0, order)
    lv = math.log(abs(v))
    return TruncatedSeries.even_entire_in_w(
        lambda n: 2 * n * lv - math.lgamma(2 * n + 1), order
    )


def w_sinh_vw(v: float, order: int) -> TruncatedSeries:
    """``sqrt(1 - z) sinh(v sqrt(1 - z))`` as a series in ``z`` (``v >= 0``)."""
    if v == 0:
        return TruncatedSeries.constant(0.0, order)
    lv = math.log(v)
    return TruncatedSeries.even_entire_in_w(
        lambda n: -math.inf if n == 0 else (2 * n - 1) * lv - math.lgamma(2 * n),
        order,
    )
