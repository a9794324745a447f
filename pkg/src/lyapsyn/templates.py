"""Layered quadratic-form templates for candidate Lyapunov functions.

A template of half-degree ``c`` over ``n`` states is

    V(x) = sum_{l=1..c} (x^l)^T P_l (x^l),

where ``x^l`` is the element-wise l-th power and each ``P_l`` is symmetric.
Expanding with the symmetry convention gives one unknown per ``(l, i <= j)``
with weight 2 off the diagonal, so both V and its derivative along a field
are *linear* in the unknowns; that linearity is what lets the learner solve
plain linear constraint systems.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence, Union

from .odes import DynamicalSystem, clear_denominators
from .polynomials import Polynomial, RationalFunction

CoefficientValue = Union[Fraction, RationalFunction]


@dataclass(frozen=True, order=True)
class UnknownCoefficient:
    """Entry ``(i, j)`` of the layer-``layer`` matrix, canonically i <= j."""

    layer: int
    i: int
    j: int

    def __post_init__(self):
        if self.layer < 1 or self.i < 0 or self.j < self.i:
            raise ValueError(f"bad unknown index {(self.layer, self.i, self.j)}")

    @property
    def label(self) -> str:
        return f"p{self.layer}_{self.i + 1}_{self.j + 1}"


@dataclass(frozen=True)
class TemplateSpec:
    n: int
    c: int
    diagonal_only: bool = False

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("need at least one state variable")
        if self.c < 1:
            raise ValueError("template half-degree must be >= 1")

    def unknowns(self) -> tuple[UnknownCoefficient, ...]:
        out = []
        for layer in range(1, self.c + 1):
            for i in range(self.n):
                js = (i,) if self.diagonal_only else range(i, self.n)
                for j in js:
                    out.append(UnknownCoefficient(layer, i, j))
        return tuple(out)


def basis_polynomial(unknown: UnknownCoefficient, n: int) -> Polynomial:
    """The monomial multiplying one unknown: ``(2 - [i=j]) * x_i^l * x_j^l``."""
    exps = [0] * n
    exps[unknown.i] += unknown.layer
    exps[unknown.j] += unknown.layer
    weight = 1 if unknown.i == unknown.j else 2
    return Polynomial(n, {tuple(exps): weight})


@dataclass(frozen=True)
class SymbolicLyapunov:
    """Template with V (and optionally its cleared derivative) per unknown.

    ``vbasis[u]`` has arity ``n``; once :func:`lie_derivative` has run,
    ``vdot_basis[u]`` has arity ``n + n_params`` and is denominator-free.
    Any candidate is the linear combination of these bases.
    """

    spec: TemplateSpec
    unknowns: tuple[UnknownCoefficient, ...]
    vbasis: Mapping[UnknownCoefficient, Polynomial]
    vdot_basis: Mapping[UnknownCoefficient, Polynomial] | None = None
    n_params: int = 0

    @property
    def arity(self) -> int:
        return self.spec.n + self.n_params

    def v_row(self, point: Sequence[Fraction]) -> tuple[Fraction, ...]:
        """Values of each unknown's V-basis at a full (state+param) point."""
        return tuple(
            self.vbasis[u].extend_arity(self.arity - self.spec.n).evaluate(point)
            for u in self.unknowns
        )

    def vdot_row(self, point: Sequence[Fraction]) -> tuple[Fraction, ...]:
        if self.vdot_basis is None:
            raise ValueError("derivative basis not built yet")
        return tuple(self.vdot_basis[u].evaluate(point) for u in self.unknowns)


def build_template(spec: TemplateSpec) -> SymbolicLyapunov:
    unknowns = spec.unknowns()
    vbasis = {u: basis_polynomial(u, spec.n) for u in unknowns}
    return SymbolicLyapunov(spec=spec, unknowns=unknowns, vbasis=vbasis)


def lie_derivative(sym: SymbolicLyapunov, sys: DynamicalSystem) -> SymbolicLyapunov:
    """Attach the cleared derivative-along-the-field basis for ``sys``.

    Per unknown: ``sum_k (dB_u/dx_k) * num_k * cofactor_k`` with denominators
    cleared through the verified-positive common multiple, so the result is a
    polynomial and the candidate's derivative stays linear in the unknowns.
    """
    if sym.spec.n != sys.n:
        raise ValueError(f"template over {sym.spec.n} states, system has {sys.n}")
    k = len(sys.params)
    vdot = {}
    for u in sym.unknowns:
        basis = sym.vbasis[u].extend_arity(k)
        grad = [basis.partial(i) for i in range(sys.n)]
        vdot[u] = clear_denominators(sys, grad)
    return SymbolicLyapunov(
        spec=sym.spec,
        unknowns=sym.unknowns,
        vbasis=sym.vbasis,
        vdot_basis=vdot,
        n_params=k,
    )


@dataclass(frozen=True)
class CandidateFunction:
    """A fully assigned template; values are exact rationals, or rational
    functions of the parameters on the parametric path."""

    spec: TemplateSpec
    coeffs: Mapping[UnknownCoefficient, CoefficientValue]

    def __post_init__(self):
        missing = [u for u in self.spec.unknowns() if u not in self.coeffs]
        if missing:
            raise KeyError(f"unassigned unknowns: {missing}")

    def is_parametric(self) -> bool:
        return any(isinstance(v, RationalFunction) for v in self.coeffs.values())

    def render(self, names: Sequence[str]) -> str:
        n = self.spec.n
        parts: list[str] = []
        for u in self.spec.unknowns():
            value = self.coeffs[u]
            negative = False
            if isinstance(value, RationalFunction):
                if value.num.is_zero():
                    continue
                if value.num.is_constant():
                    coeff_str = f"{value.num.constant_value()}/({value.den.render(names)})"
                else:
                    coeff_str = f"(({value.num.render(names)})/({value.den.render(names)}))"
            else:
                if value == 0:
                    continue
                negative = value < 0
                mag = -value if negative else value
                coeff_str = None if mag == 1 else str(mag)
            mono = basis_polynomial(u, n)
            ((exps, weight),) = mono.terms.items()
            factors = []
            if weight != 1:
                factors.append(str(weight))
            for name, e in zip(names, exps):
                if e:
                    factors.append(name if e == 1 else f"{name}^{e}")
            if coeff_str is not None:
                factors.insert(0, coeff_str)
            body = "*".join(factors)
            if not parts:
                parts.append(f"-{body}" if negative else body)
            else:
                parts.append(f"- {body}" if negative else f"+ {body}")
        return " ".join(parts) if parts else "0"


def instantiate(
    sym: SymbolicLyapunov, assignment: Mapping[UnknownCoefficient, Fraction]
) -> tuple[Polynomial, Polynomial]:
    """Concrete (V, Vdot) from a rational assignment; both of full arity."""
    if sym.vdot_basis is None:
        raise ValueError("derivative basis not built yet")
    arity = sym.arity
    v = Polynomial.zero(arity)
    vdot = Polynomial.zero(arity)
    for u in sym.unknowns:
        if u not in assignment:
            raise KeyError(f"missing value for unknown {u.label}")
        value = Fraction(assignment[u])
        if value == 0:
            continue
        v = v + sym.vbasis[u].extend_arity(arity - sym.spec.n).scale(value)
        vdot = vdot + sym.vdot_basis[u].scale(value)
    return v, vdot


@dataclass(frozen=True)
class ParametricInstance:
    """A parametric candidate cleared to polynomial form.

    ``v_num / den`` is V and ``vdot_num / den`` is its derivative, where
    ``den`` is a polynomial in the parameters only.  ``den_positive`` records
    the denominator's (verified) sign over the parameter box, so callers can
    sign-normalise before encoding queries.
    """

    v_num: Polynomial
    vdot_num: Polynomial
    den: Polynomial
    den_positive: bool

    def signed_numerators(self) -> tuple[Polynomial, Polynomial]:
        """Numerators normalised as if the denominator were positive."""
        if self.den_positive:
            return self.v_num, self.vdot_num
        return -self.v_num, -self.vdot_num


def instantiate_parametric(
    sym: SymbolicLyapunov,
    coeffs: Mapping[UnknownCoefficient, CoefficientValue],
    den_positive_hint: bool,
) -> ParametricInstance:
    """Clear a mixed rational/rational-function assignment to polynomials.

    The common denominator is the product of the distinct coefficient
    denominators (no polynomial division needed).
    """
    if sym.vdot_basis is None:
        raise ValueError("derivative basis not built yet")
    arity = sym.arity
    distinct: list[Polynomial] = []
    for value in coeffs.values():
        if isinstance(value, RationalFunction) and not value.is_polynomial():
            if value.den not in distinct:
                distinct.append(value.den)
    den = Polynomial.constant(1, arity)
    for d in distinct:
        den = den * d

    v_num = Polynomial.zero(arity)
    vdot_num = Polynomial.zero(arity)
    for u in sym.unknowns:
        value = coeffs[u]
        if isinstance(value, RationalFunction):
            cof = Polynomial.constant(1, arity)
            for d in distinct:
                if d != value.den:
                    cof = cof * d
            scale = value.num * cof
        else:
            if value == 0:
                continue
            scale = den.scale(Fraction(value))
        v_num = v_num + scale * sym.vbasis[u].extend_arity(arity - sym.spec.n)
        vdot_num = vdot_num + scale * sym.vdot_basis[u]
    return ParametricInstance(
        v_num=v_num, vdot_num=vdot_num, den=den, den_positive=den_positive_hint
    )
