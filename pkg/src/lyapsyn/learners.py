"""Candidate proposal from finitely many counterexamples.

Each counterexample contributes exactly two linear constraints over the
template unknowns: positivity ``V(x) >= 1`` (the constant is arbitrary by
the scaling freedom; a positive lower bound rules out the zero candidate)
and non-increase ``Vdot(x) <= 0``.  Two backends solve the accumulated
system: an exact one over linear rational arithmetic through the SMT
session, and a floating-point LP whose solutions are rounded back to
rationals and re-checked exactly before being trusted.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Mapping, Sequence

from .odes import ParameterDecl
from .polynomials import Polynomial, RationalFunction
from .smt import SolverCrashError, SolverSession, smt_polynomial, smt_rational
from .templates import (
    CandidateFunction,
    ParametricInstance,
    SymbolicLyapunov,
    TemplateSpec,
    UnknownCoefficient,
    instantiate_parametric,
)
from .verifier import Counterexample, param_assertions

EPS_POS = Fraction(1)


class LearnerKind(str, Enum):
    EXACT_SMT = "exact"
    NUMERIC_LP = "numeric"


class NumericalLearnerError(RuntimeError):
    """The LP backend produced no exactly-checkable solution."""


@dataclass(frozen=True)
class ConstraintRow:
    coeffs: tuple[Fraction, ...]
    kind: str  # "pos" | "der"

    def holds(self, values: Sequence[Fraction], eps: Fraction = EPS_POS) -> bool:
        dot = sum(c * v for c, v in zip(self.coeffs, values))
        return dot >= eps if self.kind == "pos" else dot <= 0


@dataclass(frozen=True)
class ConstraintSet:
    unknowns: tuple[UnknownCoefficient, ...]
    rows: tuple[ConstraintRow, ...]
    counterexamples: tuple[Counterexample, ...]

    def points(self) -> set[tuple[Fraction, ...]]:
        return {cex.full_point() for cex in self.counterexamples}

    def __len__(self) -> int:
        return len(self.counterexamples)


def empty_constraints(sym: SymbolicLyapunov) -> ConstraintSet:
    return ConstraintSet(unknowns=sym.unknowns, rows=(), counterexamples=())


def add_counterexample(
    cs: ConstraintSet, sym: SymbolicLyapunov, cex: Counterexample
) -> ConstraintSet:
    """Append the two rows for ``cex``; a duplicate point changes nothing."""
    point = cex.full_point()
    if point in cs.points():
        return cs
    pos = ConstraintRow(sym.v_row(point), "pos")
    der = ConstraintRow(sym.vdot_row(point), "der")
    return ConstraintSet(
        unknowns=cs.unknowns,
        rows=cs.rows + (pos, der),
        counterexamples=cs.counterexamples + (cex,),
    )


def assignment_vector(
    cs: ConstraintSet, assignment: Mapping[UnknownCoefficient, Fraction]
) -> tuple[Fraction, ...]:
    return tuple(Fraction(assignment[u]) for u in cs.unknowns)


def satisfies_all(
    cs: ConstraintSet,
    assignment: Mapping[UnknownCoefficient, Fraction],
    eps: Fraction = EPS_POS,
) -> bool:
    values = assignment_vector(cs, assignment)
    return all(row.holds(values, eps) for row in cs.rows)


def initial_candidate(spec: TemplateSpec) -> dict[UnknownCoefficient, Fraction]:
    """The deliberately bad starting point: every layer matrix set to -I."""
    return {
        u: Fraction(-1) if u.i == u.j else Fraction(0) for u in spec.unknowns()
    }


def simplest_in_closed(lo: Fraction | None, hi: Fraction | None) -> Fraction:
    """The rational with the smallest denominator (then magnitude) in
    ``[lo, hi]``; ``None`` means unbounded on that side."""
    if lo is not None and hi is not None and lo > hi:
        raise ValueError("empty interval")
    if (lo is None or lo <= 0) and (hi is None or hi >= 0):
        return Fraction(0)
    if hi is not None and hi < 0:
        return -simplest_in_closed(-hi, None if lo is None else -lo)
    assert lo is not None and lo > 0
    if hi is None:
        return Fraction(_ceil(lo))
    # 0 < lo <= hi: walk the continued-fraction expansion
    if _ceil(lo) <= hi:
        return Fraction(_ceil(lo))
    whole = lo.numerator // lo.denominator
    inner = simplest_in_closed(1 / (hi - whole), 1 / (lo - whole))
    return whole + 1 / inner


def _ceil(value: Fraction) -> int:
    return -((-value.numerator) // value.denominator)


def simplify_assignment(
    cs: ConstraintSet, assignment: Mapping[UnknownCoefficient, Fraction]
) -> dict[UnknownCoefficient, Fraction]:
    """Move a feasible assignment to a simpler rational point of the same
    polytope.

    Coordinate by coordinate, the accumulated rows (linear in the unknowns)
    induce a closed feasibility interval once the other coordinates are
    fixed; the coordinate is replaced by the simplest rational inside it.
    Feasibility is preserved by construction and re-checked at the end.
    Small-denominator candidates both keep the verifier queries cheap and
    land exactly on the coefficient identities (cancelling cross terms)
    that the target certificates of these systems tend to require.
    """
    values = [Fraction(assignment[u]) for u in cs.unknowns]
    for _ in range(2):
        for i in range(len(values)):
            lo: Fraction | None = None
            hi: Fraction | None = None
            ok = True
            for row in cs.rows:
                ci = row.coeffs[i]
                rest = sum(
                    c * v for j, (c, v) in enumerate(zip(row.coeffs, values)) if j != i
                )
                # pos rows: ci*x >= EPS_POS - rest; der rows: ci*x <= -rest
                if row.kind == "pos":
                    bound = EPS_POS - rest
                    if ci == 0:
                        ok = ok and bound <= 0
                    elif ci > 0:
                        b = bound / ci
                        lo = b if lo is None else max(lo, b)
                    else:
                        b = bound / ci
                        hi = b if hi is None else min(hi, b)
                else:
                    bound = -rest
                    if ci == 0:
                        ok = ok and bound >= 0
                    elif ci > 0:
                        b = bound / ci
                        hi = b if hi is None else min(hi, b)
                    else:
                        b = bound / ci
                        lo = b if lo is None else max(lo, b)
            if not ok or (lo is not None and hi is not None and lo > hi):
                continue
            values[i] = simplest_in_closed(lo, hi)
    simplified = dict(zip(cs.unknowns, values))
    if satisfies_all(cs, simplified):
        return simplified
    return dict(assignment)


def _row_smt(row: ConstraintRow, labels: Sequence[str]) -> str:
    terms = []
    for coeff, label in zip(row.coeffs, labels):
        if coeff == 0:
            continue
        terms.append(f"(* {smt_rational(coeff)} {label})")
    body = "0" if not terms else (terms[0] if len(terms) == 1 else f"(+ {' '.join(terms)})")
    if row.kind == "pos":
        return f"(assert (>= {body} {smt_rational(EPS_POS)}))"
    return f"(assert (<= {body} 0))"


class ExactSmtLearner:
    """Incremental exact learner over linear rational arithmetic.

    The session keeps all previously asserted rows; each call pushes only
    the new ones, mirroring how the constraint set grows monotonically.
    """

    def __init__(self, sym: SymbolicLyapunov, session: SolverSession, *,
                 timeout_ms: int = 60_000):
        self.sym = sym
        self.session = session
        self.timeout_ms = timeout_ms
        self.labels = [u.label for u in sym.unknowns]
        self._asserted = 0
        decls = "\n".join(f"(declare-const {lb} Real)" for lb in self.labels)
        session.command(f"(reset)\n(set-logic QF_LRA)\n{decls}", timeout_ms=timeout_ms)

    def learn(self, cs: ConstraintSet) -> dict[UnknownCoefficient, Fraction] | None:
        if not cs.rows:
            return initial_candidate(self.sym.spec)
        new_rows = cs.rows[self._asserted :]
        lines = ["(push)"] if new_rows else []
        lines += [_row_smt(row, self.labels) for row in new_rows]
        lines.append("(check-sat)")
        out = self.session.command("\n".join(lines), timeout_ms=self.timeout_ms)
        self._asserted = len(cs.rows)
        status = out.strip().splitlines()[-1].strip() if out.strip() else ""
        if status == "unsat":
            return None
        if status != "sat":
            raise SolverCrashError(f"learner check-sat answered {status!r}")
        raw = self.session.command(
            f"(get-value ({' '.join(self.labels)}))", timeout_ms=self.timeout_ms
        )
        from .smt import parse_value_bindings, sexpr_to_fraction

        bindings = parse_value_bindings(raw)
        assignment: dict[UnknownCoefficient, Fraction] = {}
        for u, label in zip(self.sym.unknowns, self.labels):
            val = sexpr_to_fraction(bindings.get(label))
            if val is None:
                raise SolverCrashError(f"non-rational learner value for {label}")
            assignment[u] = val
        if not satisfies_all(cs, assignment):
            raise SolverCrashError("exact learner returned an infeasible model")
        return simplify_assignment(cs, assignment)


class NumericLpLearner:
    """LP learner: minimise the coefficient magnitudes, round, re-check.

    The float solution is rounded by continued fractions with a denominator
    cap that doubles from 2^16 up to 2^53; a candidate is returned only if
    it satisfies every accumulated row exactly, otherwise the run fails
    with :class:`NumericalLearnerError` rather than emit an unsound guess.
    """

    def __init__(self, *, box: float = 1e6, cap_bits: int = 16,
                 cap_bits_max: int = 53):
        self.box = box
        self.cap_bits = cap_bits
        self.cap_bits_max = cap_bits_max

    def learn(self, cs: ConstraintSet) -> dict[UnknownCoefficient, Fraction] | None:
        if not cs.rows:
            return {
                u: Fraction(-1) if u.i == u.j else Fraction(0) for u in cs.unknowns
            }
        from scipy.optimize import linprog

        m = len(cs.unknowns)
        # variables: p (m) then t (m); minimise sum(t) with |p_i| <= t_i
        c_obj = [0.0] * m + [1.0] * m
        a_ub: list[list[float]] = []
        b_ub: list[float] = []
        for row in cs.rows:
            coeffs = [float(c) for c in row.coeffs]
            if row.kind == "pos":
                a_ub.append([-c for c in coeffs] + [0.0] * m)
                b_ub.append(-float(EPS_POS))
            else:
                a_ub.append(coeffs + [0.0] * m)
                b_ub.append(0.0)
        for i in range(m):
            e = [0.0] * m
            e[i] = 1.0
            a_ub.append(e + [-v for v in e])
            b_ub.append(0.0)
            a_ub.append([-v for v in e] + [-v for v in e])
            b_ub.append(0.0)
        bounds = [(-self.box, self.box)] * m + [(0.0, self.box)] * m
        res = linprog(c_obj, A_ub=a_ub, b_ub=b_ub, bounds=bounds, method="highs")
        if res.status == 2:
            return None
        if res.status != 0 or res.x is None:
            raise NumericalLearnerError(f"LP solver failed: {res.message}")
        floats = list(res.x[:m])
        bits = self.cap_bits
        while bits <= self.cap_bits_max:
            cap = 1 << bits
            assignment = {
                u: Fraction(v).limit_denominator(cap)
                for u, v in zip(cs.unknowns, floats)
            }
            if satisfies_all(cs, assignment):
                return simplify_assignment(cs, assignment)
            bits += 1
        raise NumericalLearnerError(
            "LP solution violates the exact constraints at every rounding "
            f"precision up to denominator 2^{self.cap_bits_max}"
        )


def make_learner(kind: LearnerKind, sym: SymbolicLyapunov,
                 session: SolverSession | None, *, timeout_ms: int = 60_000):
    if kind == LearnerKind.EXACT_SMT:
        if session is None:
            raise ValueError("the exact learner needs a solver session")
        return ExactSmtLearner(sym, session, timeout_ms=timeout_ms)
    return NumericLpLearner()


# -- parametric path ------------------------------------------------------------


def _split_by_state_monomials(poly: Polynomial, n_states: int) -> dict[tuple, Polynomial]:
    """Group a (state+param) polynomial by its state-monomial part."""
    arity = poly.arity
    groups: dict[tuple, dict] = {}
    for mono, coeff in poly.terms.items():
        mx = mono[:n_states]
        mmu = (0,) * n_states + mono[n_states:]
        groups.setdefault(mx, {})[mmu] = coeff
    return {mx: Polynomial(arity, terms) for mx, terms in groups.items()}


def _sign_on_box(
    session: SolverSession,
    poly: Polynomial,
    params: Sequence[ParameterDecl],
    names: Sequence[str],
    timeout_ms: int,
) -> int | None:
    """+1/-1 if ``poly`` is provably positive/negative over the parameter
    box, None when indefinite or undecided."""
    decls = "\n".join(f"(declare-const {name} Real)" for name in names)
    bounds = "\n".join(param_assertions(params))
    term = smt_polynomial(poly, names)
    for op, sign in (("<=", 1), (">=", -1)):
        script = (
            f"(reset)\n(set-option :timeout {timeout_ms})\n(set-logic QF_NRA)\n"
            f"{decls}\n{bounds}\n(assert ({op} {term} 0))\n(check-sat)"
        )
        try:
            out = session.command(script, timeout_ms=timeout_ms + 10_000)
        except Exception:
            return None
        lines = [ln.strip() for ln in out.splitlines() if ln.strip()]
        if lines and lines[-1] == "unsat":
            return sign
    return None


def _progress_guard(
    session: SolverSession,
    inst: ParametricInstance,
    cs: ConstraintSet,
    params: Sequence[ParameterDecl],
    names: Sequence[str],
    n_states: int,
    timeout_ms: int,
) -> bool:
    """True iff the parametric candidate satisfies V > 0 and Vdot <= 0 at
    every accumulated counterexample point, for all parameters in the box."""
    v_num, vdot_num = inst.signed_numerators()
    disjuncts = []
    for cex in cs.counterexamples:
        sub = {i: val for i, val in enumerate(cex.x)}
        vx = v_num.substitute(sub)
        vdx = vdot_num.substitute(sub)
        disjuncts.append(
            f"(or (<= {smt_polynomial(vx, names)} 0)"
            f" (> {smt_polynomial(vdx, names)} 0))"
        )
    if not disjuncts:
        return True
    body = disjuncts[0] if len(disjuncts) == 1 else f"(or {' '.join(disjuncts)})"
    decls = "\n".join(f"(declare-const {name} Real)" for name in names)
    bounds = "\n".join(param_assertions(params))
    script = (
        f"(reset)\n(set-option :timeout {timeout_ms})\n(set-logic QF_NRA)\n"
        f"{decls}\n{bounds}\n(assert {body})\n(check-sat)"
    )
    try:
        out = session.command(script, timeout_ms=timeout_ms + 10_000)
    except Exception:
        return False
    lines = [ln.strip() for ln in out.splitlines() if ln.strip()]
    return bool(lines) and lines[-1] == "unsat"


def _solve_positivity(
    session: SolverSession,
    cs: ConstraintSet,
    timeout_ms: int,
) -> dict[UnknownCoefficient, Fraction] | None:
    """Step one of the two-step resynthesis: concrete values from the
    positivity rows alone (the parameters never appear there)."""
    labels = [u.label for u in cs.unknowns]
    lines = ["(reset)", "(set-logic QF_LRA)"]
    lines += [f"(declare-const {lb} Real)" for lb in labels]
    lines += [_row_smt(row, labels) for row in cs.rows if row.kind == "pos"]
    lines.append("(check-sat)")
    out = session.command("\n".join(lines), timeout_ms=timeout_ms)
    status = out.strip().splitlines()[-1].strip() if out.strip() else ""
    if status == "unsat":
        return None
    if status != "sat":
        raise SolverCrashError(f"positivity solve answered {status!r}")
    raw = session.command(f"(get-value ({' '.join(labels)}))", timeout_ms=timeout_ms)
    from .smt import parse_value_bindings, sexpr_to_fraction

    bindings = parse_value_bindings(raw)
    out_map: dict[UnknownCoefficient, Fraction] = {}
    for u, label in zip(cs.unknowns, labels):
        val = sexpr_to_fraction(bindings.get(label))
        if val is None:
            raise SolverCrashError(f"non-rational positivity value for {label}")
        out_map[u] = val
    return out_map


def parametric_resynthesize(
    sym: SymbolicLyapunov,
    cs: ConstraintSet,
    cex: Counterexample,
    params: Sequence[ParameterDecl],
    names: Sequence[str],
    *,
    step1_session: SolverSession,
    guard_session: SolverSession,
    timeout_ms: int = 30_000,
) -> tuple[CandidateFunction, ParametricInstance | None] | None:
    """Two-step parametric candidate synthesis.

    Step one solves the accumulated positivity constraints for concrete
    values.  Step two walks the unknowns in template order, skipping pivots
    whose basis monomial vanishes at the counterexample, and re-derives one
    of them as a rational function of the parameters: the derivative's
    dependence on the pivot is grouped by state monomial, and the first
    group whose pivot coefficient is provably sign-definite over the
    parameter box is cancelled exactly (the pivot takes the value that
    makes that group's coefficient zero).  A guard query then requires the
    resulting candidate to satisfy both conditions at every stored
    counterexample for all parameter values; failing every pivot, the
    concrete step-one candidate is returned so the verifier can supply a
    fresh counterexample.

    Returns None when even the positivity system is infeasible.
    """
    if sym.vdot_basis is None:
        raise ValueError("derivative basis not built yet")
    n = sym.spec.n
    p_bar = _solve_positivity(step1_session, cs, timeout_ms)
    if p_bar is None:
        return None
    point = cex.full_point()
    midpoint = tuple(Fraction(0) for _ in range(n)) + tuple(
        p.midpoint() for p in params
    )

    for pivot in sym.unknowns:
        basis_at_cex = sym.vbasis[pivot].extend_arity(len(params)).evaluate(point)
        if basis_at_cex == 0:
            continue  # pivot coordinate vanishes at the counterexample
        a_groups = _split_by_state_monomials(sym.vdot_basis[pivot], n)
        rest = Polynomial.zero(sym.arity)
        for u in sym.unknowns:
            if u != pivot and p_bar[u] != 0:
                rest = rest + sym.vdot_basis[u].scale(p_bar[u])
        b_groups = _split_by_state_monomials(rest, n)
        targets = sorted(
            (mx for mx in a_groups if mx in b_groups),
            key=lambda mx: (sum(mx), mx),
        )
        for mx in targets:
            a = a_groups[mx]
            b = b_groups[mx]
            if a.is_zero() or b.is_zero():
                continue
            sign = _sign_on_box(guard_session, a, params, names, timeout_ms)
            if sign is None:
                continue
            pivot_value = RationalFunction(-b, a)
            den_at_mid = pivot_value.den.evaluate(midpoint)
            if den_at_mid == 0:
                continue
            coeffs: dict[UnknownCoefficient, object] = {
                u: p_bar[u] for u in sym.unknowns if u != pivot
            }
            coeffs[pivot] = pivot_value
            inst = instantiate_parametric(sym, coeffs, den_at_mid > 0)
            if _progress_guard(
                guard_session, inst, cs, params, names, n, timeout_ms
            ):
                return CandidateFunction(sym.spec, coeffs), inst
    return CandidateFunction(sym.spec, dict(p_bar)), None
