"""Dynamical systems ``dx/dt = f(x, mu)`` with rational right-hand sides.

State variables come first, parameters after them, so every right-hand side
is a :class:`RationalFunction` of arity ``n + len(params)``.  The origin must
be an equilibrium; systems violating that are rejected at construction.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from .polynomials import Polynomial, RationalFunction


class ModelError(ValueError):
    """Base class for malformed-system errors."""


class EquilibriumError(ModelError):
    """The origin is not an equilibrium of the right-hand side."""


class UnsupportedError(ModelError):
    """The operation is not defined for this kind of system."""


class ContractError(RuntimeError):
    """A required prior step (denominator verification) has not happened."""


@dataclass(frozen=True)
class ParameterDecl:
    """A bounded parameter ``mu in [lo, hi]`` with open/closed endpoints.

    ``lower is None`` means unbounded below (the bound is then necessarily
    exclusive).  The upper bound is always finite.
    """

    name: str
    lower: Fraction | None
    lower_inclusive: bool
    upper: Fraction
    upper_inclusive: bool

    def __post_init__(self):
        if self.lower is None and self.lower_inclusive:
            raise ModelError(f"parameter {self.name}: -inf bound must be exclusive")
        if self.lower is not None and not self.lower < self.upper:
            raise ModelError(f"parameter {self.name}: empty range")

    def contains(self, value: Fraction) -> bool:
        if self.lower is not None:
            if self.lower_inclusive:
                if value < self.lower:
                    return False
            elif value <= self.lower:
                return False
        if self.upper_inclusive:
            return value <= self.upper
        return value < self.upper

    def midpoint(self) -> Fraction:
        """A rational point strictly inside the range."""
        if self.lower is None:
            return self.upper - 1
        return (self.lower + self.upper) / 2

    def render(self) -> str:
        lo = "-inf" if self.lower is None else str(self.lower)
        lb = "[" if self.lower_inclusive else "("
        ub = "]" if self.upper_inclusive else ")"
        return f"param {self.name} in {lb}{lo}, {self.upper}{ub};"


@dataclass(frozen=True)
class DynamicalSystem:
    """An ODE system with the origin as its (declared) equilibrium."""

    state_names: tuple[str, ...]
    rhs: tuple[RationalFunction, ...]
    params: tuple[ParameterDecl, ...] = ()
    denominators_verified: bool = field(default=False, compare=False)

    def __post_init__(self):
        n, k = self.n, len(self.params)
        if len(self.rhs) != n:
            raise ModelError(f"{len(self.rhs)} right-hand sides for {n} states")
        names = list(self.state_names) + [p.name for p in self.params]
        if len(set(names)) != len(names):
            raise ModelError("duplicate variable or parameter names")
        origin = {i: 0 for i in range(n)}
        for name, component in zip(self.state_names, self.rhs):
            if component.arity != n + k:
                raise ModelError(
                    f"d{name}/dt has arity {component.arity}, expected {n + k}"
                )
            if component.den.substitute(origin).is_zero():
                raise ModelError(f"d{name}/dt: denominator vanishes at the origin")
            if not component.num.substitute(origin).is_zero():
                raise EquilibriumError(
                    f"d{name}/dt does not vanish at the origin; "
                    "the origin must be an equilibrium"
                )

    # -- basic queries -------------------------------------------------------

    @property
    def n(self) -> int:
        return len(self.state_names)

    @property
    def arity(self) -> int:
        return self.n + len(self.params)

    def variable_names(self) -> tuple[str, ...]:
        return self.state_names + tuple(p.name for p in self.params)

    def is_polynomial(self) -> bool:
        return all(c.is_polynomial() for c in self.rhs)

    def is_linear(self) -> bool:
        return self.is_polynomial() and all(c.num.degree() <= 1 for c in self.rhs)

    def is_parametric(self) -> bool:
        return bool(self.params)

    def max_degree(self) -> int:
        """Largest total degree among numerators (template-order heuristic)."""
        return max(max(c.num.degree(), c.den.degree()) for c in self.rhs)

    def distinct_denominators(self) -> tuple[Polynomial, ...]:
        """Non-constant denominators, deduplicated, in first-seen order."""
        seen: list[Polynomial] = []
        for component in self.rhs:
            den = component.den
            if den.is_constant():
                continue
            if den not in seen:
                seen.append(den)
        return tuple(seen)

    def with_verified_denominators(self) -> "DynamicalSystem":
        return replace(self, denominators_verified=True)

    def render(self) -> str:
        names = self.variable_names()
        lines = [p.render() for p in self.params]
        lines += [
            f"d{name}/dt = {component.render(names)};"
            for name, component in zip(self.state_names, self.rhs)
        ]
        return "\n".join(lines)

    def denominator_cofactors(self) -> tuple[tuple[Polynomial, ...], Polynomial]:
        """Per-component cofactors ``L / den_k`` and the common multiple ``L``.

        ``L`` is the product of the distinct non-constant denominators, so for
        each component the cofactor is the product of the *other* distinct
        denominators (times 1 when the component is polynomial denominators
        included).  No polynomial division is ever needed.
        """
        distinct = self.distinct_denominators()
        lcm = Polynomial.constant(1, self.arity)
        for den in distinct:
            lcm = lcm * den
        cofactors = []
        for component in self.rhs:
            cof = Polynomial.constant(1, self.arity)
            for den in distinct:
                if den != component.den:
                    cof = cof * den
            cofactors.append(cof)
        return tuple(cofactors), lcm


@dataclass(frozen=True)
class LinearisedSystem:
    """The Jacobian of a system at the origin, kept with its source."""

    matrix: tuple[tuple[Fraction, ...], ...]
    source: DynamicalSystem


def jacobian_at_origin(sys: DynamicalSystem) -> LinearisedSystem:
    """Exact Jacobian of the right-hand side at the equilibrium.

    Rational components use the quotient rule; since the numerator vanishes
    at the origin this reduces to ``p'(0) / q(0)`` per entry.
    """
    if sys.is_parametric():
        raise UnsupportedError("linearisation of parametric systems is not supported")
    n = sys.n
    origin = [Fraction(0)] * n
    rows = []
    for component in sys.rhs:
        q0 = component.den.evaluate(origin)
        row = tuple(
            component.num.partial(j).evaluate(origin) / q0 for j in range(n)
        )
        rows.append(row)
    return LinearisedSystem(matrix=tuple(rows), source=sys)


def linear_system(matrix: Sequence[Sequence[Fraction | int]],
                  state_names: Sequence[str] | None = None) -> DynamicalSystem:
    """Build ``dx/dt = A x`` from a square matrix."""
    n = len(matrix)
    if any(len(row) != n for row in matrix):
        raise ModelError("matrix is not square")
    if state_names is None:
        state_names = tuple(f"x{i + 1}" for i in range(n))
    rhs = []
    for row in matrix:
        p = Polynomial.zero(n)
        for j, a in enumerate(row):
            p = p + Polynomial.variable(j, n).scale(Fraction(a))
        rhs.append(RationalFunction(p))
    return DynamicalSystem(tuple(state_names), tuple(rhs))


def clear_denominators(sys: DynamicalSystem, grad: Sequence[Polynomial]) -> Polynomial:
    """Denominator-free derivative along the field from a gradient.

    Takes the state-gradient of a candidate function (arity ``n + k`` each)
    and returns ``sum_k grad[k] * num_k * cofactor_k``, i.e. the derivative
    along the field multiplied by the common multiple of the denominators.
    Since every denominator has been verified positive, the result has the
    same sign as the true derivative everywhere.
    """
    if len(grad) != sys.n:
        raise ModelError(f"gradient has {len(grad)} components, expected {sys.n}")
    if sys.distinct_denominators() and not sys.denominators_verified:
        raise ContractError(
            "denominators have not been verified positive; "
            "run the positivity check before clearing"
        )
    cofactors, _ = sys.denominator_cofactors()
    total = Polynomial.zero(sys.arity)
    for g, component, cof in zip(grad, sys.rhs, cofactors):
        total = total + g * component.num * cof
    return total


def derivative_along_field(v: Polynomial, sys: DynamicalSystem) -> RationalFunction:
    """The exact (uncleared) derivative of ``v`` along the system's field."""
    if v.arity != sys.arity:
        raise ModelError(f"candidate arity {v.arity} != system arity {sys.arity}")
    total = RationalFunction.constant(0, sys.arity)
    for k, component in enumerate(sys.rhs):
        total = total + RationalFunction(v.partial(k)) * component
    return total
