"""Subprocess transport for SMT-LIB 2 solvers, plus s-expression helpers.

A :class:`SolverSession` owns one solver process speaking SMT-LIB 2 over
stdin/stdout (``z3 -in`` compatible).  Commands are batched and delimited
with an ``(echo ...)`` marker so responses can be read reliably; a deadline
re-enforced on the Python side kills the process if the solver's own
``:timeout`` fails to fire.  One query is in flight at a time per session.
"""

from __future__ import annotations

import os
import select
import shlex
import shutil
import subprocess
import time
from fractions import Fraction
from pathlib import Path
from typing import Sequence


class SolverError(RuntimeError):
    """Base class for solver transport problems."""


class SolverNotFoundError(SolverError):
    pass


class SolverCrashError(SolverError):
    """The solver process died or answered outside the protocol."""


class SolverTimeoutError(SolverError):
    """The Python-side deadline expired; the session has been killed."""


def default_solver_command() -> list[str]:
    """Resolve the solver command line.

    Order: ``LYAPSYN_SOLVER_CMD`` environment variable, a ``z3`` binary on
    PATH (run as ``z3 -in``), then the bundled WebAssembly shim under
    ``tools/z3wasm`` when running from a source checkout.
    """
    env = os.environ.get("LYAPSYN_SOLVER_CMD")
    if env:
        return shlex.split(env)
    z3 = shutil.which("z3")
    if z3:
        return [z3, "-in"]
    shim = Path(__file__).resolve().parents[2] / "tools" / "z3wasm" / "shim.js"
    node = shutil.which("node")
    if node and shim.exists() and (shim.parent / "node_modules").exists():
        return [node, str(shim)]
    raise SolverNotFoundError(
        "no SMT solver found: install z3 on PATH, or run `npm install` in "
        "tools/z3wasm, or set LYAPSYN_SOLVER_CMD"
    )


class SolverSession:
    """One interactive solver process; not thread-safe by design."""

    def __init__(
        self,
        cmd: Sequence[str] | None = None,
        *,
        dump_dir: str | os.PathLike | None = None,
        name: str = "session",
    ):
        self.cmd = list(cmd) if cmd else default_solver_command()
        self.name = name
        self._counter = 0
        self._buf = b""
        self._dump = None
        if dump_dir is not None:
            path = Path(dump_dir)
            path.mkdir(parents=True, exist_ok=True)
            self._dump = open(path / f"{name}-{os.getpid()}-{id(self):x}.smt2", "a")
        try:
            self.proc = subprocess.Popen(
                self.cmd,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.DEVNULL,
                bufsize=0,
            )
        except OSError as exc:
            raise SolverNotFoundError(f"cannot start solver {self.cmd}: {exc}") from exc
        # absorb slow starts (the wasm build takes a second to come up)
        self.command("(echo \"ready\")", timeout_ms=120_000)

    # -- lifecycle -----------------------------------------------------------

    def alive(self) -> bool:
        return self.proc.poll() is None

    def kill(self) -> None:
        if self.proc.poll() is None:
            self.proc.kill()
            try:
                self.proc.wait(timeout=5)
            except subprocess.TimeoutExpired:  # pragma: no cover
                pass

    def close(self) -> None:
        if self.proc.poll() is None:
            try:
                self.proc.stdin.write(b"(exit)\n")
                self.proc.stdin.flush()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=2)
            except subprocess.TimeoutExpired:
                self.kill()
        if self._dump:
            self._dump.close()
            self._dump = None

    def __enter__(self) -> "SolverSession":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def __del__(self):  # pragma: no cover - best effort
        try:
            self.kill()
        except Exception:
            pass

    # -- protocol ------------------------------------------------------------

    def command(self, script: str, timeout_ms: int | None = None) -> str:
        """Send a command batch, return everything printed before the marker."""
        if not self.alive():
            raise SolverCrashError(f"solver process is dead ({self.name})")
        self._counter += 1
        marker = f"::done-{self._counter}::"
        payload = f"{script}\n(echo \"{marker}\")\n"
        if self._dump:
            self._dump.write(payload)
            self._dump.flush()
        try:
            self.proc.stdin.write(payload.encode("utf-8"))
            self.proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise SolverCrashError(f"write to solver failed: {exc}") from exc
        deadline = time.monotonic() + (timeout_ms / 1000.0 if timeout_ms else 3600.0)
        out: list[bytes] = []
        needle = marker.encode("utf-8")
        while True:
            nl = self._buf.find(b"\n")
            if nl >= 0:
                line = self._buf[:nl]
                self._buf = self._buf[nl + 1 :]
                if line.strip() == needle:
                    return b"\n".join(out).decode("utf-8", errors="replace")
                out.append(line)
                continue
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                self.kill()
                raise SolverTimeoutError(
                    f"solver exceeded {timeout_ms} ms deadline ({self.name})"
                )
            ready, _, _ = select.select([self.proc.stdout], [], [], min(remaining, 0.5))
            if not ready:
                if self.proc.poll() is not None:
                    raise SolverCrashError(
                        f"solver exited with {self.proc.returncode} ({self.name})"
                    )
                continue
            chunk = self.proc.stdout.read(65536)
            if not chunk:
                raise SolverCrashError(
                    "solver closed stdout before answering "
                    f"(exit={self.proc.poll()}, partial={b' '.join(out)[:200]!r})"
                )
            self._buf += chunk

    def reset(self, timeout_ms: int = 60_000) -> None:
        self.command("(reset)", timeout_ms=timeout_ms)


# -- s-expressions ------------------------------------------------------------


def parse_sexprs(text: str):
    """All top-level s-expressions in ``text`` (atoms as strings)."""
    tokens = _tokenize_sexpr(text)
    items = []
    pos = 0
    while pos < len(tokens):
        node, pos = _parse_one(tokens, pos)
        items.append(node)
    return items


def _tokenize_sexpr(text: str) -> list[str]:
    tokens: list[str] = []
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
        elif ch in "()":
            tokens.append(ch)
            i += 1
        elif ch == ";":
            while i < n and text[i] != "\n":
                i += 1
        elif ch == '"':
            j = i + 1
            while j < n:
                if text[j] == '"':
                    if j + 1 < n and text[j + 1] == '"':
                        j += 2
                        continue
                    break
                j += 1
            tokens.append(text[i : j + 1])
            i = j + 1
        else:
            j = i
            while j < n and not text[j].isspace() and text[j] not in "()":
                j += 1
            tokens.append(text[i:j])
            i = j
    return tokens


def _parse_one(tokens: list[str], pos: int):
    if pos >= len(tokens):
        raise SolverCrashError("unexpected end of solver output")
    tok = tokens[pos]
    if tok == "(":
        items = []
        pos += 1
        while pos < len(tokens) and tokens[pos] != ")":
            node, pos = _parse_one(tokens, pos)
            items.append(node)
        if pos >= len(tokens):
            raise SolverCrashError("unbalanced solver output")
        return items, pos + 1
    if tok == ")":
        raise SolverCrashError("unbalanced solver output")
    return tok, pos + 1


def sexpr_to_fraction(node, *, allow_truncated: bool = False) -> Fraction | None:
    """Exact rational value of a model term, or None for algebraic forms.

    Handles integer and decimal atoms (``2``, ``2.0``, ``0.125``), optionally
    z3's truncated-decimal form ``1.4142?``, and the compound forms
    ``(- v)``, ``(/ a b)``.  ``root-obj`` terms yield None.
    """
    if isinstance(node, str):
        text = node
        if text.endswith("?"):
            if not allow_truncated:
                return None
            text = text[:-1]
        try:
            return Fraction(text)
        except (ValueError, ZeroDivisionError):
            return None
    if not node:
        return None
    head = node[0]
    if head == "-" and len(node) == 2:
        val = sexpr_to_fraction(node[1], allow_truncated=allow_truncated)
        return None if val is None else -val
    if head == "/" and len(node) == 3:
        num = sexpr_to_fraction(node[1], allow_truncated=allow_truncated)
        den = sexpr_to_fraction(node[2], allow_truncated=allow_truncated)
        if num is None or den is None or den == 0:
            return None
        return num / den
    return None  # root-obj and anything else


def parse_value_bindings(text: str) -> dict[str, object]:
    """Parse a ``(get-value ...)`` response into name -> raw term."""
    if text.lstrip().startswith("(error"):
        raise SolverCrashError(f"solver error: {text.strip()}")
    exprs = parse_sexprs(text)
    if not exprs or not isinstance(exprs[0], list):
        raise SolverCrashError(f"unexpected get-value response: {text.strip()!r}")
    out = {}
    for pair in exprs[0]:
        if not isinstance(pair, list) or len(pair) != 2 or not isinstance(pair[0], str):
            raise SolverCrashError(f"unexpected get-value entry: {pair!r}")
        out[pair[0]] = pair[1]
    return out


# -- polynomial rendering ------------------------------------------------------


def smt_rational(value: Fraction) -> str:
    if value.denominator == 1:
        n = value.numerator
        return str(n) if n >= 0 else f"(- {-n})"
    if value >= 0:
        return f"(/ {value.numerator} {value.denominator})"
    return f"(- (/ {-value.numerator} {value.denominator}))"


def smt_polynomial(poly, names: Sequence[str]) -> str:
    """Deterministic SMT-LIB term for a polynomial (graded-lex term order)."""
    if len(names) != poly.arity:
        raise ValueError("name list length mismatch")
    monomials = []
    for mono, coeff in poly.sorted_terms():
        factors = []
        for name, e in zip(names, mono):
            factors.extend([name] * e)
        if not factors:
            monomials.append(smt_rational(coeff))
        elif coeff == 1 and len(factors) == 1:
            monomials.append(factors[0])
        else:
            body = " ".join(factors)
            if coeff == 1:
                monomials.append(f"(* {body})" if len(factors) > 1 else body)
            else:
                monomials.append(f"(* {smt_rational(coeff)} {body})")
    if not monomials:
        return "0"
    if len(monomials) == 1:
        return monomials[0]
    return f"(+ {' '.join(monomials)})"
