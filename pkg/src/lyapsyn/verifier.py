"""Sound certification of candidate Lyapunov functions via an SMT solver.

The candidate conditions ``V > 0  and  Vdot <= 0`` over a domain D (origin
always excluded) are checked by asserting their negation together with the
domain and parameter constraints, then asking for a model.  ``unsat`` means
the candidate is valid on D; a model is turned into an exact rational
counterexample and re-validated with exact arithmetic before being trusted.
Algebraic model values are approximated at increasing decimal precision
until the rational approximation still violates the conditions; if that
fails the verdict degrades to Unknown, never to a bogus counterexample.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator, Sequence

from .odes import ParameterDecl
from .polynomials import Polynomial
from .smt import (
    SolverCrashError,
    SolverSession,
    SolverTimeoutError,
    parse_value_bindings,
    sexpr_to_fraction,
    smt_polynomial,
    smt_rational,
)

_GRACE_MS = 10_000  # transport slack on top of the solver's own :timeout


# -- domains -------------------------------------------------------------------


@dataclass(frozen=True)
class FullSpace:
    """All of R^n with the origin removed."""

    def smt_assertions(self, names: Sequence[str]) -> list[str]:
        return [f"(assert (> {_sum_of_squares(names)} 0))"]

    def contains(self, x: Sequence[Fraction]) -> bool:
        return any(v != 0 for v in x)

    def describe(self) -> str:
        return "R^n \\ {0}"

    def to_json(self) -> dict:
        return {"kind": "full-space"}


@dataclass(frozen=True)
class Ball:
    """Closed ball of given radius around the origin, origin excluded."""

    radius: Fraction

    def __post_init__(self):
        if self.radius <= 0:
            raise ValueError("ball radius must be positive")

    def smt_assertions(self, names: Sequence[str]) -> list[str]:
        r2 = smt_rational(self.radius * self.radius)
        s = _sum_of_squares(names)
        return [f"(assert (> {s} 0))", f"(assert (<= {s} {r2}))"]

    def contains(self, x: Sequence[Fraction]) -> bool:
        s = sum(v * v for v in x)
        return 0 < s <= self.radius * self.radius

    def describe(self) -> str:
        return f"ball of radius {self.radius} (origin excluded)"

    def to_json(self) -> dict:
        return {"kind": "ball", "radius": str(self.radius)}


@dataclass(frozen=True)
class Box:
    """Axis-aligned box, origin excluded."""

    bounds: tuple[tuple[Fraction, Fraction], ...]

    def __post_init__(self):
        for lo, hi in self.bounds:
            if not lo < hi:
                raise ValueError("box bounds must satisfy lo < hi")

    @classmethod
    def symmetric(cls, halfwidth: Fraction, n: int) -> "Box":
        h = Fraction(halfwidth)
        return cls(tuple((-h, h) for _ in range(n)))

    def smt_assertions(self, names: Sequence[str]) -> list[str]:
        out = [f"(assert (> {_sum_of_squares(names)} 0))"]
        for name, (lo, hi) in zip(names, self.bounds):
            out.append(f"(assert (<= {smt_rational(lo)} {name}))")
            out.append(f"(assert (<= {name} {smt_rational(hi)}))")
        return out

    def contains(self, x: Sequence[Fraction]) -> bool:
        if all(v == 0 for v in x):
            return False
        return all(lo <= v <= hi for v, (lo, hi) in zip(x, self.bounds))

    def describe(self) -> str:
        inner = ", ".join(f"[{lo}, {hi}]" for lo, hi in self.bounds)
        return f"box {inner} (origin excluded)"

    def to_json(self) -> dict:
        return {
            "kind": "box",
            "bounds": [[str(lo), str(hi)] for lo, hi in self.bounds],
        }


Domain = FullSpace | Ball | Box


def domain_from_json(data: dict) -> Domain:
    kind = data.get("kind")
    if kind == "full-space":
        return FullSpace()
    if kind == "ball":
        return Ball(Fraction(data["radius"]))
    if kind == "box":
        return Box(tuple((Fraction(lo), Fraction(hi)) for lo, hi in data["bounds"]))
    raise ValueError(f"unknown domain kind {kind!r}")


def _sum_of_squares(names: Sequence[str]) -> str:
    squares = [f"(* {n} {n})" for n in names]
    return squares[0] if len(squares) == 1 else f"(+ {' '.join(squares)})"


# -- verdicts ------------------------------------------------------------------


@dataclass(frozen=True)
class Counterexample:
    """A rational state (and parameter) point violating the conditions."""

    x: tuple[Fraction, ...]
    mu: tuple[Fraction, ...]
    violated: str  # "positivity" | "derivative"

    def full_point(self) -> tuple[Fraction, ...]:
        return self.x + self.mu


@dataclass(frozen=True)
class Verdict:
    kind: str  # "valid" | "refuted" | "unknown"
    counterexample: Counterexample | None = None
    reason: str = ""

    @classmethod
    def valid(cls) -> "Verdict":
        return cls("valid")

    @classmethod
    def refuted(cls, cex: Counterexample) -> "Verdict":
        return cls("refuted", counterexample=cex)

    @classmethod
    def unknown(cls, reason: str) -> "Verdict":
        return cls("unknown", reason=reason)

    def is_valid(self) -> bool:
        return self.kind == "valid"

    def is_refuted(self) -> bool:
        return self.kind == "refuted"

    def is_unknown(self) -> bool:
        return self.kind == "unknown"


# -- encoding ------------------------------------------------------------------


def param_assertions(params: Sequence[ParameterDecl]) -> list[str]:
    out = []
    for p in params:
        if p.lower is not None:
            op = ">=" if p.lower_inclusive else ">"
            out.append(f"(assert ({op} {p.name} {smt_rational(p.lower)}))")
        op = "<=" if p.upper_inclusive else "<"
        out.append(f"(assert ({op} {p.name} {smt_rational(p.upper)}))")
    return out


def encode_query(
    v: Polynomial,
    vdot: Polynomial,
    domain: Domain,
    params: Sequence[ParameterDecl],
    names: Sequence[str],
    logic: str = "QF_NRA",
) -> str:
    """The negated-conditions satisfiability script; a pure function of its
    inputs, byte-identical across runs."""
    n_states = len(names) - len(params)
    state_names = list(names[:n_states])
    lines = [f"(set-logic {logic})"]
    lines += [f"(declare-const {name} Real)" for name in names]
    lines += domain.smt_assertions(state_names)
    lines += param_assertions(params)
    v_term = smt_polynomial(v, names)
    vdot_term = smt_polynomial(vdot, names)
    lines.append(f"(assert (or (<= {v_term} 0) (> {vdot_term} 0)))")
    lines.append("(check-sat)")
    return "\n".join(lines) + "\n"


# -- checking ------------------------------------------------------------------


def _violation(
    v: Polynomial,
    vdot: Polynomial,
    domain: Domain,
    params: Sequence[ParameterDecl],
    point: tuple[Fraction, ...],
    n_states: int,
) -> str | None:
    """Which conjunct the point violates, after exact membership checks."""
    x = point[:n_states]
    mu = point[n_states:]
    if not domain.contains(x):
        return None
    if any(not p.contains(m) for p, m in zip(params, mu)):
        return None
    if v.evaluate(point) <= 0:
        return "positivity"
    if vdot.evaluate(point) > 0:
        return "derivative"
    return None


def check(
    session: SolverSession,
    v: Polynomial,
    vdot: Polynomial,
    domain: Domain,
    params: Sequence[ParameterDecl],
    names: Sequence[str],
    *,
    timeout_ms: int = 30_000,
    precision: int = 20,
    max_retries: int = 5,
    logic: str = "QF_NRA",
) -> Verdict:
    """Certify the candidate on ``domain`` or produce a counterexample.

    Valid is returned only on solver unsat; Unknown on timeout or when a
    model cannot be rationalised soundly.  Transport failures raise
    :class:`SolverCrashError` and are not verdicts.
    """
    script = encode_query(v, vdot, domain, params, names, logic=logic)
    try:
        out = session.command(
            f"(reset)\n(set-option :timeout {timeout_ms})\n{script}",
            timeout_ms=timeout_ms + _GRACE_MS,
        )
    except SolverTimeoutError:
        return Verdict.unknown("timeout: solver killed by deadline")
    answer = [line.strip() for line in out.splitlines() if line.strip()]
    if not answer:
        raise SolverCrashError("no answer to check-sat")
    status = answer[-1]
    if any(line.startswith("(error") for line in answer):
        raise SolverCrashError(f"solver error: {out.strip()}")
    if status == "unsat":
        return Verdict.valid()
    if status == "unknown":
        return Verdict.unknown("solver returned unknown")
    if status != "sat":
        raise SolverCrashError(f"unexpected check-sat answer {status!r}")

    n_states = len(names) - len(params)

    def finish(point: tuple[Fraction, ...]) -> Verdict | None:
        violated = _violation(v, vdot, domain, params, point, n_states)
        if violated is None:
            return None
        return Verdict.refuted(
            Counterexample(x=point[:n_states], mu=point[n_states:], violated=violated)
        )

    value_query = f"(get-value ({' '.join(names)}))"
    raw = session.command(value_query, timeout_ms=60_000)
    bindings = parse_value_bindings(raw)
    exact = {name: sexpr_to_fraction(bindings.get(name)) for name in names}
    if all(val is not None for val in exact.values()):
        verdict = finish(tuple(exact[name] for name in names))
        if verdict is not None:
            return verdict
        return Verdict.unknown("exact model failed the violation recheck")

    # Algebraic coordinates: approximate at growing decimal precision until
    # the rationalised point still violates the (strict-boundary) conditions.
    prec = precision
    try:
        for _ in range(max_retries):
            session.command(
                "(set-option :pp.decimal true)\n"
                f"(set-option :pp.decimal_precision {prec})",
                timeout_ms=30_000,
            )
            raw = session.command(value_query, timeout_ms=60_000)
            approx = parse_value_bindings(raw)
            point = []
            for name in names:
                val = exact[name]
                if val is None:
                    val = sexpr_to_fraction(approx.get(name), allow_truncated=True)
                if val is None:
                    break
                point.append(val)
            if len(point) == len(names):
                verdict = finish(tuple(point))
                if verdict is not None:
                    return verdict
            prec *= 2
    finally:
        if session.alive():
            session.command("(set-option :pp.decimal false)", timeout_ms=30_000)
    return Verdict.unknown(
        f"could not rationalise an algebraic counterexample within {max_retries} retries"
    )


def shrink_domain_schedule(
    initial: Domain, n: int, floor: Fraction = Fraction(1, 16)
) -> Iterator[Domain]:
    """The staged verification domains: the initial domain, then symmetric
    boxes halving from [-1,1]^n down to the configured floor."""
    yield initial
    if isinstance(initial, FullSpace):
        h = Fraction(1)
    elif isinstance(initial, Ball):
        h = initial.radius / 2
    else:
        h = max(max(abs(lo), abs(hi)) for lo, hi in initial.bounds) / 2
    while h >= floor:
        yield Box.symmetric(h, n)
        h = h / 2


def verify_denominator_positive(
    session: SolverSession,
    q: Polynomial,
    params: Sequence[ParameterDecl],
    names: Sequence[str],
    *,
    timeout_ms: int = 30_000,
) -> bool:
    """Soundly decide ``q > 0`` everywhere (including the origin).

    True only on solver unsat of ``q <= 0``; timeouts and unknowns count as
    failure, so callers reject the system rather than assume positivity.
    """
    lines = ["(set-logic QF_NRA)"]
    lines += [f"(declare-const {name} Real)" for name in names]
    lines += param_assertions(params)
    lines.append(f"(assert (<= {smt_polynomial(q, names)} 0))")
    lines.append("(check-sat)")
    script = "\n".join(lines)
    try:
        out = session.command(
            f"(reset)\n(set-option :timeout {timeout_ms})\n{script}",
            timeout_ms=timeout_ms + _GRACE_MS,
        )
    except SolverTimeoutError:
        return False
    answer = [line.strip() for line in out.splitlines() if line.strip()]
    return bool(answer) and answer[-1] == "unsat"
