# ######################################################################################################################
#  SquareLab Copyright (c) 2026 by the SquareLab authors                                                               #
#  is licensed under Creative Commons Attribution-NonCommercial-ShareAlike 4.0 International.                          #
#  To view a copy of this license, visit https://creativecommons.org/licenses/by-nc-sa/4.0/                            #
#                                                                                                                      #
#  Unless required by applicable law or agreed to in writing, software                                                 #
#  distributed under the License is distributed on an "AS IS" BASIS,                                                   #
#  WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.                                            #
#  See the License for the specific language governing permissions and                                                 #
#  limitations under the License.                                                                                      #
# ######################################################################################################################
"""
Exact scalars for every computation in SquareLab.

Rational numbers are ``fractions.Fraction`` (arbitrary precision, always in lowest terms with a positive
denominator). ``ExactScalar`` is an element ``a + b*sqrt(2)`` of Q(sqrt 2) with rational components, and ``PolyP``
is a polynomial of degree at most 3 in the Bernoulli parameter ``p`` with ExactScalar coefficients.
"""

from __future__ import annotations

import math
from fractions import Fraction
from functools import total_ordering
from typing import Iterable, Sequence, Union

from squarelab.config import MAX_POLY_DEGREE

Rational = Fraction
Number = Union[int, Fraction, "ExactScalar"]

SQRT2_FLOAT = math.sqrt(2.0)


# ----------------------------------------------------------------------------------
# Rational helpers
# ----------------------------------------------------------------------------------
def format_rational(value: Fraction | int) -> str:
    """Serialize a rational as ``"n/d"`` (``"0/1"`` for zero)."""
    value = Fraction(value)
    return f"{value.numerator}/{value.denominator}"


def parse_rational(text: str) -> Fraction:
    """
    Parse ``"n/d"`` or a bare integer into a Fraction.

    :raises ValueError: on a zero denominator or malformed text.
    """
    text = text.strip()
    if "/" in text:
        num, den = text.split("/", 1)
        if int(den) == 0:
            raise ValueError("zero denominator")
        return Fraction(int(num), int(den))
    return Fraction(int(text))


def _as_fraction(value) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    raise TypeError(f"Expected int or Fraction, got {type(value).__name__}")


# ----------------------------------------------------------------------------------
# ExactScalar - a + b*sqrt(2)
# ----------------------------------------------------------------------------------
@total_ordering
class ExactScalar:
    """
    Immutable element ``a + b*sqrt(2)`` of Q(sqrt 2).

    The representation is unique, so equality and hashing compare components. Ordering is exact: the sign of
    ``a + b*sqrt(2)`` is decided by comparing ``a^2`` against ``2 b^2`` when the components disagree in sign.
    """

    __slots__ = ("_a", "_b")

    def __init__(self, a: int | Fraction = 0, b: int | Fraction = 0):
        object.__setattr__(self, "_a", _as_fraction(a))
        object.__setattr__(self, "_b", _as_fraction(b))

    def __setattr__(self, name, value):
        raise AttributeError("ExactScalar is immutable")

    @property
    def a(self) -> Fraction:
        return self._a

    @property
    def b(self) -> Fraction:
        return self._b

    # ------------------------------------------------------------------------------
    # Construction / coercion
    # ------------------------------------------------------------------------------
    @classmethod
    def coerce(cls, value: Number) -> ExactScalar:
        if isinstance(value, ExactScalar):
            return value
        return cls(_as_fraction(value), 0)

    @classmethod
    def zero(cls) -> ExactScalar:
        return cls(0, 0)

    @classmethod
    def one(cls) -> ExactScalar:
        return cls(1, 0)

    @classmethod
    def sqrt2(cls) -> ExactScalar:
        return cls(0, 1)

    # ------------------------------------------------------------------------------
    # Field operations
    # ------------------------------------------------------------------------------
    def __add__(self, other: Number) -> ExactScalar:
        if not isinstance(other, (ExactScalar, int, Fraction)):
            return NotImplemented
        other = ExactScalar.coerce(other)
        return ExactScalar(self._a + other._a, self._b + other._b)

    __radd__ = __add__

    def __neg__(self) -> ExactScalar:
        return ExactScalar(-self._a, -self._b)

    def __sub__(self, other: Number) -> ExactScalar:
        if not isinstance(other, (ExactScalar, int, Fraction)):
            return NotImplemented
        return self + (-ExactScalar.coerce(other))

    def __rsub__(self, other: Number) -> ExactScalar:
        return ExactScalar.coerce(other) - self

    def __mul__(self, other: Number) -> ExactScalar:
        if not isinstance(other, (ExactScalar, int, Fraction)):
            return NotImplemented
        other = ExactScalar.coerce(other)
        # sqrt2 * sqrt2 -> 2
        return ExactScalar(
            self._a * other._a + 2 * self._b * other._b,
            self._a * other._b + self._b * other._a,
        )

    __rmul__ = __mul__

    def conjugate(self) -> ExactScalar:
        return ExactScalar(self._a, -self._b)

    def norm(self) -> Fraction:
        """Field norm ``a^2 - 2 b^2``; zero only for the zero scalar."""
        return self._a * self._a - 2 * self._b * self._b

    def inverse(self) -> ExactScalar:
        n = self.norm()
        if n == 0:
            raise ZeroDivisionError("division by a zero-norm scalar")
        conjugate = self.conjugate()
        return ExactScalar(conjugate.a / n, conjugate.b / n)

    def __truediv__(self, other: Number) -> ExactScalar:
        if not isinstance(other, (ExactScalar, int, Fraction)):
            return NotImplemented
        return self * ExactScalar.coerce(other).inverse()

    def __rtruediv__(self, other: Number) -> ExactScalar:
        return ExactScalar.coerce(other) * self.inverse()

    def __pow__(self, exponent: int) -> ExactScalar:
        if not isinstance(exponent, int):
            return NotImplemented
        if exponent < 0:
            return self.inverse() ** (-exponent)
        result = ExactScalar.one()
        base = self
        while exponent:
            if exponent & 1:
                result = result * base
            base = base * base
            exponent >>= 1
        return result

    # ------------------------------------------------------------------------------
    # Comparison
    # ------------------------------------------------------------------------------
    def sign(self) -> int:
        a, b = self._a, self._b
        if b == 0:
            return (a > 0) - (a < 0)
        if a == 0:
            return (b > 0) - (b < 0)
        if (a > 0) == (b > 0):
            return 1 if a > 0 else -1
        # opposite signs: the larger magnitude wins
        if a * a > 2 * b * b:
            return 1 if a > 0 else -1
        return 1 if b > 0 else -1

    def is_zero(self) -> bool:
        return self._a == 0 and self._b == 0

    def is_rational(self) -> bool:
        return self._b == 0

    def to_fraction(self) -> Fraction:
        if self._b != 0:
            raise ValueError(f"{self} is not rational")
        return self._a

    def __abs__(self) -> ExactScalar:
        return -self if self.sign() < 0 else self

    def __eq__(self, other) -> bool:
        if isinstance(other, (int, Fraction)):
            return self._b == 0 and self._a == other
        if isinstance(other, ExactScalar):
            return self._a == other._a and self._b == other._b
        return NotImplemented

    def __lt__(self, other: Number) -> bool:
        if not isinstance(other, (ExactScalar, int, Fraction)):
            return NotImplemented
        return (self - other).sign() < 0

    def __hash__(self) -> int:
        if self._b == 0:
            return hash(self._a)
        return hash((self._a, self._b))

    def __bool__(self) -> bool:
        return not self.is_zero()

    def __float__(self) -> float:
        return float(self._a) + float(self._b) * SQRT2_FLOAT

    # ------------------------------------------------------------------------------
    # Serialization
    # ------------------------------------------------------------------------------
    def to_str(self) -> str:
        """Canonical ``"n1/d1+n2/d2*r2"`` form used in every JSON output."""
        return f"{format_rational(self._a)}+{format_rational(self._b)}*r2"

    @classmethod
    def from_str(cls, text: str) -> ExactScalar:
        text = text.strip()
        if not text.endswith("*r2"):
            return cls(parse_rational(text), 0)
        # "n/d" never contains '+', so the first one joins the components
        a_text, b_text = text[: -len("*r2")].split("+", 1)
        return cls(parse_rational(a_text), parse_rational(b_text))

    def __repr__(self) -> str:
        return f"ExactScalar({self._a}, {self._b})"

    def __str__(self) -> str:
        if self._b == 0:
            return str(self._a)
        if self._a == 0:
            return f"{self._b}*sqrt2"
        return f"{self._a}{'+' if self._b > 0 else '-'}{abs(self._b)}*sqrt2"

    def __reduce__(self):
        return (ExactScalar, (self._a, self._b))


def scalar_normalize(raw: tuple[int, int, int, int]) -> ExactScalar:
    """
    Build the canonical scalar ``n1/d1 + (n2/d2)*sqrt(2)``.

    :raises ValueError: "zero denominator" if d1 or d2 is zero.
    """
    n1, d1, n2, d2 = raw
    if d1 == 0 or d2 == 0:
        raise ValueError("zero denominator")
    return ExactScalar(Fraction(n1, d1), Fraction(n2, d2))


def pow_sqrt2(exponent: int) -> ExactScalar:
    """``2^(exponent/2)`` exactly; odd exponents carry one sqrt(2)."""
    if exponent < 0:
        return pow_sqrt2(-exponent).inverse()
    if exponent % 2 == 0:
        return ExactScalar(2 ** (exponent // 2), 0)
    return ExactScalar(0, 2 ** (exponent // 2))


def scalar_sum(values: Iterable[Number]) -> ExactScalar:
    a = Fraction(0)
    b = Fraction(0)
    for value in values:
        if isinstance(value, ExactScalar):
            a += value.a
            b += value.b
        else:
            a += value
    return ExactScalar(a, b)


# ----------------------------------------------------------------------------------
# PolyP - polynomial in p of degree <= 3
# ----------------------------------------------------------------------------------
class PolyP:
    """Immutable polynomial ``c0 + c1 p + c2 p^2 + c3 p^3`` with ExactScalar coefficients."""

    __slots__ = ("_coeffs",)

    def __init__(self, coeffs: Sequence[Number] = ()):
        coeffs = [ExactScalar.coerce(c) for c in coeffs]
        if len(coeffs) > MAX_POLY_DEGREE + 1:
            if any(not c.is_zero() for c in coeffs[MAX_POLY_DEGREE + 1:]):
                raise ValueError(f"polynomial degree exceeds {MAX_POLY_DEGREE}")
            coeffs = coeffs[: MAX_POLY_DEGREE + 1]
        coeffs += [ExactScalar.zero()] * (MAX_POLY_DEGREE + 1 - len(coeffs))
        object.__setattr__(self, "_coeffs", tuple(coeffs))

    def __setattr__(self, name, value):
        raise AttributeError("PolyP is immutable")

    @property
    def coeffs(self) -> tuple[ExactScalar, ...]:
        return self._coeffs

    def __getitem__(self, degree: int) -> ExactScalar:
        return self._coeffs[degree]

    @classmethod
    def zero(cls) -> PolyP:
        return cls()

    def __add__(self, other: PolyP) -> PolyP:
        return PolyP([x + y for x, y in zip(self._coeffs, other._coeffs)])

    def __sub__(self, other: PolyP) -> PolyP:
        return PolyP([x - y for x, y in zip(self._coeffs, other._coeffs)])

    def __neg__(self) -> PolyP:
        return PolyP([-x for x in self._coeffs])

    def scale(self, factor: Number) -> PolyP:
        return PolyP([x * factor for x in self._coeffs])

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self._coeffs)

    def degree(self) -> int:
        for k in range(MAX_POLY_DEGREE, -1, -1):
            if not self._coeffs[k].is_zero():
                return k
        return -1

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolyP):
            return NotImplemented
        return poly_equal(self, other)

    def __hash__(self) -> int:
        return hash(self._coeffs)

    def to_strings(self) -> list[str]:
        """Coefficients serialized for JSON; rational coefficients use the plain ``"n/d"`` form."""
        return [format_rational(c.a) if c.is_rational() else c.to_str() for c in self._coeffs]

    def __repr__(self) -> str:
        terms = [f"({c})p^{k}" for k, c in enumerate(self._coeffs) if not c.is_zero()]
        return "PolyP(" + (" + ".join(terms) or "0") + ")"


def poly_eval(P: PolyP, p: Fraction | int) -> ExactScalar:
    """Evaluate ``P`` at a rational ``p`` by Horner's rule, exactly."""
    result = ExactScalar.zero()
    for coefficient in reversed(P.coeffs):
        result = result * p + coefficient
    return result


def poly_equal(P: PolyP, Q: PolyP) -> bool:
    """True iff all four coefficients agree exactly."""
    return all(x == y for x, y in zip(P.coeffs, Q.coeffs))


def poly_from_long(coefficients: Sequence[Number]) -> PolyP:
    """
    Reduce a polynomial of arbitrary length into a PolyP.

    :raises ValueError: if any coefficient of degree above 3 is nonzero.
    """
    return PolyP(list(coefficients))


def exact_str(value: Number) -> str:
    """Rationals as ``"n/d"``, irrational scalars in the ``"n1/d1+n2/d2*r2"`` form."""
    if isinstance(value, ExactScalar):
        return format_rational(value.a) if value.is_rational() else value.to_str()
    return format_rational(value)


def exact_entry(value: Number) -> dict:
    """The ``{"exact": ..., "float": ...}`` pair written for every reported result."""
    return {"exact": exact_str(value), "float": float(value)}
