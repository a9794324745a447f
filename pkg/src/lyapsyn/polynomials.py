"""Exact multivariate polynomial and rational-function arithmetic.

Coefficients are arbitrary-precision rationals (``fractions.Fraction``),
monomials are dense exponent tuples.  Everything here is an immutable value:
operations return new objects and never mutate their operands, so instances
are safe to share between threads.

Monomial ordering throughout (printing, leading terms) is graded
lexicographic: compare total degree first, then exponent tuples
lexicographically.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

Scalar = Union[int, Fraction]
Monomial = tuple  # exponent tuple, one non-negative entry per variable


class ArityMismatchError(ValueError):
    """Operands disagree on the number of ambient variables."""


def grlex_key(mono: Monomial) -> tuple:
    return (sum(mono), mono)


def _as_fraction(value: Scalar) -> Fraction:
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value)
    raise TypeError(f"not an exact rational: {value!r}")


class Polynomial:
    """A polynomial with Fraction coefficients over a fixed variable count."""

    __slots__ = ("arity", "terms")

    def __init__(self, arity: int, terms: Mapping[Monomial, Scalar] | None = None):
        if arity < 0:
            raise ValueError("arity must be non-negative")
        clean: dict[Monomial, Fraction] = {}
        if terms:
            for mono, coeff in terms.items():
                mono = tuple(mono)
                if len(mono) != arity:
                    raise ArityMismatchError(
                        f"monomial {mono} has length {len(mono)}, expected {arity}"
                    )
                if any(e < 0 or not isinstance(e, int) for e in mono):
                    raise ValueError(f"bad exponent vector {mono}")
                c = _as_fraction(coeff)
                if c != 0:
                    acc = clean.get(mono)
                    clean[mono] = c if acc is None else acc + c
                    if clean[mono] == 0:
                        del clean[mono]
        object.__setattr__(self, "arity", arity)
        object.__setattr__(self, "terms", clean)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("Polynomial is immutable")

    # -- constructors ------------------------------------------------------

    @classmethod
    def zero(cls, arity: int) -> "Polynomial":
        return cls(arity)

    @classmethod
    def constant(cls, value: Scalar, arity: int) -> "Polynomial":
        return cls(arity, {(0,) * arity: value})

    @classmethod
    def variable(cls, index: int, arity: int) -> "Polynomial":
        if not 0 <= index < arity:
            raise IndexError(f"variable index {index} out of range for arity {arity}")
        mono = tuple(1 if i == index else 0 for i in range(arity))
        return cls(arity, {mono: 1})

    # -- predicates --------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(m) == 0 for m in self.terms)

    def constant_value(self) -> Fraction:
        if not self.is_constant():
            raise ValueError("polynomial is not constant")
        return self.terms.get((0,) * self.arity, Fraction(0))

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        if not self.terms:
            return -1
        return max(sum(m) for m in self.terms)

    def leading_coefficient(self) -> Fraction:
        """Coefficient of the graded-lex largest monomial (0 if zero poly)."""
        if not self.terms:
            return Fraction(0)
        return self.terms[max(self.terms, key=grlex_key)]

    def content(self) -> Fraction:
        """gcd of the coefficients (positive; 0 for the zero polynomial)."""
        from math import gcd, lcm

        if not self.terms:
            return Fraction(0)
        num = 0
        den = 1
        for c in self.terms.values():
            num = gcd(num, abs(c.numerator))
            den = lcm(den, c.denominator)
        return Fraction(num, den)

    # -- arithmetic --------------------------------------------------------

    def _check_arity(self, other: "Polynomial") -> None:
        if self.arity != other.arity:
            raise ArityMismatchError(f"arity {self.arity} vs {other.arity}")

    def __add__(self, other: "Polynomial") -> "Polynomial":
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_arity(other)
        res = dict(self.terms)
        for mono, coeff in other.terms.items():
            acc = res.get(mono, Fraction(0)) + coeff
            if acc == 0:
                res.pop(mono, None)
            else:
                res[mono] = acc
        return Polynomial(self.arity, res)

    def __sub__(self, other: "Polynomial") -> "Polynomial":
        return self + (-other)

    def __neg__(self) -> "Polynomial":
        return Polynomial(self.arity, {m: -c for m, c in self.terms.items()})

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        if not isinstance(other, Polynomial):
            return NotImplemented
        self._check_arity(other)
        res: dict[Monomial, Fraction] = {}
        for m1, c1 in self.terms.items():
            for m2, c2 in other.terms.items():
                mono = tuple(a + b for a, b in zip(m1, m2))
                acc = res.get(mono, Fraction(0)) + c1 * c2
                if acc == 0:
                    res.pop(mono, None)
                else:
                    res[mono] = acc
        return Polynomial(self.arity, res)

    def __rmul__(self, other):
        if isinstance(other, (int, Fraction)):
            return self.scale(other)
        return NotImplemented

    def scale(self, factor: Scalar) -> "Polynomial":
        f = _as_fraction(factor)
        if f == 0:
            return Polynomial.zero(self.arity)
        return Polynomial(self.arity, {m: c * f for m, c in self.terms.items()})

    def __pow__(self, exponent: int) -> "Polynomial":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponent must be a non-negative integer")
        result = Polynomial.constant(1, self.arity)
        base = self
        e = exponent
        while e:
            if e & 1:
                result = result * base
            base = base * base
            e >>= 1
        return result

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Polynomial)
            and self.arity == other.arity
            and self.terms == other.terms
        )

    def __hash__(self) -> int:
        return hash((self.arity, frozenset(self.terms.items())))

    # -- calculus and evaluation -------------------------------------------

    def partial(self, var: int) -> "Polynomial":
        """Exact partial derivative with respect to variable ``var``."""
        if not 0 <= var < self.arity:
            raise IndexError(f"variable index {var} out of range for arity {self.arity}")
        res: dict[Monomial, Fraction] = {}
        for mono, coeff in self.terms.items():
            e = mono[var]
            if e == 0:
                continue
            new = list(mono)
            new[var] = e - 1
            res[tuple(new)] = coeff * e
        return Polynomial(self.arity, res)

    def evaluate(self, point: Sequence[Scalar]) -> Fraction:
        """Exact value at a rational point."""
        if len(point) != self.arity:
            raise ArityMismatchError(f"point length {len(point)} != arity {self.arity}")
        pt = [_as_fraction(v) for v in point]
        total = Fraction(0)
        for mono, coeff in self.terms.items():
            val = coeff
            for v, e in zip(pt, mono):
                if e:
                    val *= v**e
            total += val
        return total

    def evaluate_float(self, point: Sequence[float]) -> float:
        if len(point) != self.arity:
            raise ArityMismatchError(f"point length {len(point)} != arity {self.arity}")
        total = 0.0
        for mono, coeff in self.terms.items():
            val = float(coeff)
            for v, e in zip(point, mono):
                if e:
                    val *= v**e
            total += val
        return total

    def substitute(self, assignment: Mapping[int, Scalar]) -> "Polynomial":
        """Partially evaluate some variables; arity is preserved."""
        res: dict[Monomial, Fraction] = {}
        for mono, coeff in self.terms.items():
            val = coeff
            new = list(mono)
            for var, value in assignment.items():
                e = mono[var]
                if e:
                    val *= _as_fraction(value) ** e
                new[var] = 0
            if val != 0:
                key = tuple(new)
                acc = res.get(key, Fraction(0)) + val
                if acc == 0:
                    res.pop(key, None)
                else:
                    res[key] = acc
        return Polynomial(self.arity, res)

    def extend_arity(self, extra: int) -> "Polynomial":
        """Embed into a ring with ``extra`` additional trailing variables."""
        if extra < 0:
            raise ValueError("extra must be non-negative")
        if extra == 0:
            return self
        pad = (0,) * extra
        return Polynomial(self.arity + extra, {m + pad: c for m, c in self.terms.items()})

    def used_variables(self) -> set[int]:
        used: set[int] = set()
        for mono in self.terms:
            for i, e in enumerate(mono):
                if e:
                    used.add(i)
        return used

    # -- rendering ---------------------------------------------------------

    def sorted_terms(self) -> list[tuple[Monomial, Fraction]]:
        """Terms in descending graded-lex order (deterministic)."""
        return sorted(self.terms.items(), key=lambda kv: grlex_key(kv[0]), reverse=True)

    def render(self, names: Sequence[str] | None = None) -> str:
        """Canonical text: ``c*x1^e1*...`` terms joined by ``+``/``-``."""
        if names is None:
            names = [f"x{i + 1}" for i in range(self.arity)]
        if len(names) != self.arity:
            raise ArityMismatchError("name list length mismatch")
        if not self.terms:
            return "0"
        parts: list[str] = []
        for mono, coeff in self.sorted_terms():
            factors = [
                name if e == 1 else f"{name}^{e}"
                for name, e in zip(names, mono)
                if e > 0
            ]
            mag = abs(coeff)
            if not factors:
                body = str(mag)
            elif mag == 1:
                body = "*".join(factors)
            else:
                body = "*".join([str(mag)] + factors)
            if not parts:
                parts.append(body if coeff > 0 else f"-{body}")
            else:
                parts.append(f"+ {body}" if coeff > 0 else f"- {body}")
        return " ".join(parts)

    def __repr__(self) -> str:
        return f"Polynomial({self.render()!r})"


class RationalFunction:
    """Quotient of two polynomials, canonicalised just enough to be useful.

    Canonical form: the denominator is 1 whenever the quotient is actually a
    polynomial (constant denominators are folded into the numerator), and the
    denominator's graded-lex leading coefficient is positive.  No polynomial
    gcd cancellation is attempted.
    """

    __slots__ = ("num", "den")

    def __init__(self, num: Polynomial, den: Polynomial | None = None):
        if den is None:
            den = Polynomial.constant(1, num.arity)
        if num.arity != den.arity:
            raise ArityMismatchError(f"arity {num.arity} vs {den.arity}")
        if den.is_zero():
            raise ZeroDivisionError("denominator is identically zero")
        if den.is_constant():
            num = num.scale(Fraction(1) / den.constant_value())
            den = Polynomial.constant(1, num.arity)
        else:
            # make the denominator primitive with positive leading coefficient
            content = den.content()
            if den.leading_coefficient() < 0:
                content = -content
            if content != 1:
                inv = Fraction(1) / content
                num = num.scale(inv)
                den = den.scale(inv)
        object.__setattr__(self, "num", num)
        object.__setattr__(self, "den", den)

    def __setattr__(self, name, value):  # pragma: no cover - guard rail
        raise AttributeError("RationalFunction is immutable")

    @classmethod
    def from_polynomial(cls, p: Polynomial) -> "RationalFunction":
        return cls(p)

    @classmethod
    def constant(cls, value: Scalar, arity: int) -> "RationalFunction":
        return cls(Polynomial.constant(value, arity))

    @property
    def arity(self) -> int:
        return self.num.arity

    def is_polynomial(self) -> bool:
        return self.den.is_constant()

    def as_polynomial(self) -> Polynomial:
        if not self.is_polynomial():
            raise ValueError("rational function has a non-trivial denominator")
        return self.num

    def __add__(self, other: "RationalFunction") -> "RationalFunction":
        if not isinstance(other, RationalFunction):
            return NotImplemented
        if self.den == other.den:
            return RationalFunction(self.num + other.num, self.den)
        return RationalFunction(
            self.num * other.den + other.num * self.den, self.den * other.den
        )

    def __sub__(self, other: "RationalFunction") -> "RationalFunction":
        return self + (-other)

    def __neg__(self) -> "RationalFunction":
        return RationalFunction(-self.num, self.den)

    def __mul__(self, other):
        if isinstance(other, (int, Fraction)):
            return RationalFunction(self.num.scale(other), self.den)
        if isinstance(other, Polynomial):
            return RationalFunction(self.num * other, self.den)
        if not isinstance(other, RationalFunction):
            return NotImplemented
        return RationalFunction(self.num * other.num, self.den * other.den)

    __rmul__ = __mul__

    def __truediv__(self, other):
        if isinstance(other, (int, Fraction)):
            f = _as_fraction(other)
            if f == 0:
                raise ZeroDivisionError("division by zero")
            return RationalFunction(self.num.scale(Fraction(1) / f), self.den)
        if isinstance(other, Polynomial):
            other = RationalFunction(other)
        if not isinstance(other, RationalFunction):
            return NotImplemented
        if other.num.is_zero():
            raise ZeroDivisionError("division by the zero rational function")
        return RationalFunction(self.num * other.den, self.den * other.num)

    def __pow__(self, exponent: int) -> "RationalFunction":
        if not isinstance(exponent, int) or exponent < 0:
            raise ValueError("exponent must be a non-negative integer")
        return RationalFunction(self.num**exponent, self.den**exponent)

    def __eq__(self, other) -> bool:
        if not isinstance(other, RationalFunction):
            return NotImplemented
        # cross-multiplied equality, valid because denominators are non-zero
        return self.num * other.den == other.num * self.den

    def __hash__(self) -> int:
        return hash((self.num, self.den))

    def partial(self, var: int) -> "RationalFunction":
        """Quotient-rule partial derivative."""
        if self.is_polynomial():
            return RationalFunction(self.num.partial(var))
        n, d = self.num, self.den
        return RationalFunction(n.partial(var) * d - n * d.partial(var), d * d)

    def evaluate(self, point: Sequence[Scalar]) -> Fraction:
        dv = self.den.evaluate(point)
        if dv == 0:
            raise ZeroDivisionError(f"denominator vanishes at {tuple(point)}")
        return self.num.evaluate(point) / dv

    def extend_arity(self, extra: int) -> "RationalFunction":
        return RationalFunction(self.num.extend_arity(extra), self.den.extend_arity(extra))

    def render(self, names: Sequence[str] | None = None) -> str:
        if self.is_polynomial():
            return self.num.render(names)
        return f"({self.num.render(names)}) / ({self.den.render(names)})"

    def __repr__(self) -> str:
        return f"RationalFunction({self.render()!r})"


def gradient(p: Polynomial) -> list[Polynomial]:
    return [p.partial(i) for i in range(p.arity)]


def dot_gradient(p: Polynomial, field: Iterable[RationalFunction]) -> RationalFunction:
    """The derivative of ``p`` along a vector field, as an exact quotient."""
    total = RationalFunction.constant(0, p.arity)
    for i, component in enumerate(field):
        total = total + RationalFunction(p.partial(i)) * component
    return total
