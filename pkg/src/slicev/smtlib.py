"""SMT-LIB2 front end for the bundled exact LRA engine.

`slicev-smt` reads commands from stdin and answers `check-sat` and
`get-model` like any external solver would, so the verification driver can
treat it exactly like z3/cvc5 run with `-in`.  Only the QF_LRA fragment the
pipeline emits is supported; anything else is reported as an error line.
"""

from __future__ import annotations

import sys
from fractions import Fraction
from typing import Iterator, Optional, Union

from .lra import Delta, Infeasible, Simplex

Sexpr = Union[str, list]


def tokenize_sexprs(text: str) -> Iterator[str]:
    i = 0
    while i < len(text):
        ch = text[i]
        if ch in "() ":
            if ch != " ":
                yield ch
            i += 1
        elif ch in "\t\r\n":
            i += 1
        elif ch == ";":
            while i < len(text) and text[i] != "\n":
                i += 1
        elif ch == '"':
            j = i + 1
            while j < len(text) and text[j] != '"':
                j += 1
            yield text[i:j + 1]
            i = j + 1
        else:
            j = i
            while j < len(text) and text[j] not in "() \t\r\n;":
                j += 1
            yield text[i:j]
            i = j


def parse_sexprs(text: str) -> list[Sexpr]:
    stack: list[list] = [[]]
    for tok in tokenize_sexprs(text):
        if tok == "(":
            stack.append([])
        elif tok == ")":
            done = stack.pop()
            if not stack:
                raise ValueError("unbalanced ')'")
            stack[-1].append(done)
        else:
            stack[-1].append(tok)
    if len(stack) != 1:
        raise ValueError("unbalanced '('")
    return stack[0]


def read_balanced(stream) -> Optional[str]:
    """Read one balanced s-expression (or bare token line) from a stream."""
    depth = 0
    out = []
    seen = False
    while True:
        ch = stream.read(1)
        if ch == "":
            return "".join(out) if seen else None
        out.append(ch)
        if ch == "(":
            depth += 1
            seen = True
        elif ch == ")":
            depth -= 1
            if depth == 0:
                return "".join(out)
        elif not ch.isspace():
            seen = True
        elif ch == "\n" and seen and depth == 0:
            return "".join(out)


def parse_rational(s: Sexpr) -> Optional[Fraction]:
    if isinstance(s, str):
        try:
            return Fraction(s)
        except ValueError:
            return None
    if len(s) == 3 and s[0] == "/":
        a, b = parse_rational(s[1]), parse_rational(s[2])
        if a is not None and b is not None:
            return a / b
    if len(s) == 2 and s[0] == "-":
        a = parse_rational(s[1])
        if a is not None:
            return -a
    return None


def format_rational(x: Fraction) -> str:
    if x < 0:
        return f"(- {format_rational(-x)})"
    if x.denominator == 1:
        return str(x.numerator)
    return f"(/ {x.numerator} {x.denominator})"


# Formula representation after parsing: ("atom", op, {var: coeff}, const)
# with op in {"<=", "<", ">=", ">", "="} meaning  sum coeffs*vars  op  const,
# or ("and"/"or", [children]), ("not", child), "true"/"false".


class SolverState:
    def __init__(self):
        self.frames: list[list] = [[]]        # stacked assertion lists
        self.declared: list[set] = [set()]    # stacked declaration sets
        self.last_model: Optional[dict] = None

    # -- declarations --------------------------------------------------------

    def declare(self, name: str) -> None:
        self.declared[-1].add(name)

    def is_declared(self, name: str) -> bool:
        return any(name in frame for frame in self.declared)

    def all_assertions(self) -> list:
        out = []
        for frame in self.frames:
            out.extend(frame)
        return out

    def push(self, n: int) -> None:
        for _ in range(n):
            self.frames.append([])
            self.declared.append(set())

    def pop(self, n: int) -> None:
        for _ in range(n):
            if len(self.frames) == 1:
                raise ValueError("pop on empty stack")
            self.frames.pop()
            self.declared.pop()

    # -- term/formula parsing -------------------------------------------------

    def linear(self, s: Sexpr) -> tuple[dict, Fraction]:
        """Parse a term into (coefficients, constant)."""
        r = parse_rational(s)
        if r is not None:
            return {}, r
        if isinstance(s, str):
            if not self.is_declared(s):
                raise ValueError(f"unknown constant {s!r}")
            return {s: Fraction(1)}, Fraction(0)
        head = s[0]
        if head == "+":
            coeffs: dict = {}
            const = Fraction(0)
            for part in s[1:]:
                c, k = self.linear(part)
                const += k
                for v, x in c.items():
                    coeffs[v] = coeffs.get(v, Fraction(0)) + x
            return coeffs, const
        if head == "-":
            if len(s) == 2:
                c, k = self.linear(s[1])
                return {v: -x for v, x in c.items()}, -k
            coeffs, const = self.linear(s[1])
            coeffs = dict(coeffs)
            for part in s[2:]:
                c, k = self.linear(part)
                const -= k
                for v, x in c.items():
                    coeffs[v] = coeffs.get(v, Fraction(0)) - x
            return coeffs, const
        if head == "*":
            parts = [self.linear(p) for p in s[1:]]
            consts = [p for p in parts if not p[0]]
            lins = [p for p in parts if p[0]]
            if len(lins) > 1:
                raise ValueError("non-linear multiplication")
            scale = Fraction(1)
            for _c, k in consts:
                scale *= k
            if not lins:
                return {}, scale
            c, k = lins[0]
            return {v: x * scale for v, x in c.items()}, k * scale
        if head == "/":
            c, k = self.linear(s[1])
            divisors = [parse_rational(p) for p in s[2:]]
            if any(d is None or d == 0 for d in divisors):
                raise ValueError("division by a non-constant")
            for d in divisors:
                k /= d
                c = {v: x / d for v, x in c.items()}
            return c, k
        raise ValueError(f"unsupported term {s!r}")

    def formula(self, s: Sexpr):
        if s == "true":
            return "true"
        if s == "false":
            return "false"
        if isinstance(s, str):
            raise ValueError(f"boolean constant {s!r} unsupported")
        head = s[0]
        if head in ("and", "or"):
            return (head, [self.formula(p) for p in s[1:]])
        if head == "not":
            return ("not", self.formula(s[1]))
        if head == "=>":
            f = self.formula(s[1])
            for part in s[2:]:
                f = ("or", [("not", f), self.formula(part)])
            return f
        if head in ("<=", "<", ">=", ">", "="):
            cl, kl = self.linear(s[1])
            cr, kr = self.linear(s[2])
            coeffs = dict(cl)
            for v, x in cr.items():
                coeffs[v] = coeffs.get(v, Fraction(0)) - x
            coeffs = {v: x for v, x in coeffs.items() if x != 0}
            const = kr - kl
            # coeffs . vars  head  const
            if len(s) > 3:
                raise ValueError("chained comparisons unsupported")
            return ("atom", head, coeffs, const)
        raise ValueError(f"unsupported formula {s!r}")


def _negate(f):
    flip = {"<=": ">", "<": ">=", ">=": "<", ">": "<="}
    if f == "true":
        return "false"
    if f == "false":
        return "true"
    kind = f[0]
    if kind == "atom":
        _k, op, coeffs, const = f
        if op == "=":
            return ("or", [("atom", "<", coeffs, const),
                           ("atom", ">", coeffs, const)])
        return ("atom", flip[op], coeffs, const)
    if kind == "not":
        return f[1]
    if kind == "and":
        return ("or", [_negate(p) for p in f[1]])
    if kind == "or":
        return ("and", [_negate(p) for p in f[1]])
    raise ValueError(f"cannot negate {f!r}")


def _nnf(f):
    if f in ("true", "false"):
        return f
    kind = f[0]
    if kind == "atom":
        return f
    if kind == "not":
        return _negate(_nnf(f[1]))
    if kind in ("and", "or"):
        return (kind, [_nnf(p) for p in f[1]])
    raise ValueError(f"bad formula {f!r}")


class _Search:
    """DFS over disjunction branches with incremental bound assertion."""

    def __init__(self, names: list[str]):
        self.simplex = Simplex()
        self.vars = {name: self.simplex.new_var() for name in names}
        self.names = {idx: name for name, idx in self.vars.items()}
        self.model: Optional[dict] = None

    def _assert_atom(self, atom) -> None:
        _k, op, coeffs, const = atom
        if not coeffs:
            value = Fraction(0)
            ok = {"<=": value <= const, "<": value < const,
                  ">=": value >= const, ">": value > const,
                  "=": value == const}[op]
            if not ok:
                raise Infeasible()
            return
        if len(coeffs) == 1:
            (name, c), = coeffs.items()
            x = self.vars[name]
            scaled = const / c
            if c > 0:
                self._bound(x, op, scaled)
            else:
                flip = {"<=": ">=", "<": ">", ">=": "<=", ">": "<", "=": "="}
                self._bound(x, flip[op], scaled)
            return
        form = {self.vars[name]: c for name, c in coeffs.items()}
        s = self.simplex.slack_for(form)
        self._bound(s, op, const)

    def _bound(self, x: int, op: str, c: Fraction) -> None:
        if op == "<=":
            self.simplex.assert_upper(x, Delta(c, 0))
        elif op == "<":
            self.simplex.assert_upper(x, Delta(c, -1))
        elif op == ">=":
            self.simplex.assert_lower(x, Delta(c, 0))
        elif op == ">":
            self.simplex.assert_lower(x, Delta(c, 1))
        else:
            self.simplex.assert_lower(x, Delta(c, 0))
            self.simplex.assert_upper(x, Delta(c, 0))

    def solve(self, goals: list) -> bool:
        self.simplex.push()
        try:
            ors = []
            stack = list(goals)
            while stack:
                f = stack.pop()
                if f == "true":
                    continue
                if f == "false":
                    raise Infeasible()
                if f[0] == "atom":
                    self._assert_atom(f)
                elif f[0] == "and":
                    stack.extend(f[1])
                else:
                    ors.append(f[1])
            if not self.simplex.check():
                raise Infeasible()
            if not ors:
                self.model = self.simplex.concrete_model(self.names)
                self.simplex.pop()
                return True
            first, rest = ors[0], ors[1:]
            for branch in first:
                if self.solve([branch] + [("or", o) for o in rest]):
                    self.simplex.pop()
                    return True
            self.simplex.pop()
            return False
        except Infeasible:
            self.simplex.pop()
            return False


def check_assertions(names: list[str], assertions: list
                     ) -> tuple[str, Optional[dict]]:
    goals = [_nnf(a) for a in assertions]
    search = _Search(names)
    if search.solve(goals):
        return "sat", search.model
    return "unsat", None


def run_command(state: SolverState, cmd: Sexpr, out) -> bool:
    """Execute one command; returns False when the solver should exit."""
    if isinstance(cmd, str):
        raise ValueError(f"bare token {cmd!r}")
    head = cmd[0] if cmd else ""
    if head in ("set-logic", "set-option", "set-info"):
        return True
    if head == "echo":
        print(cmd[1].strip('"'), file=out, flush=True)
        return True
    if head == "declare-const":
        if cmd[2] != "Real":
            raise ValueError("only Real constants supported")
        state.declare(cmd[1])
        return True
    if head == "declare-fun":
        if cmd[2] != [] or cmd[3] != "Real":
            raise ValueError("only nullary Real functions supported")
        state.declare(cmd[1])
        return True
    if head == "assert":
        state.frames[-1].append(state.formula(cmd[1]))
        return True
    if head == "push":
        state.push(int(cmd[1]) if len(cmd) > 1 else 1)
        return True
    if head == "pop":
        state.pop(int(cmd[1]) if len(cmd) > 1 else 1)
        return True
    if head == "reset":
        state.frames = [[]]
        state.declared = [set()]
        state.last_model = None
        return True
    if head == "check-sat":
        names = sorted(set().union(*state.declared))
        verdict, model = check_assertions(names, state.all_assertions())
        state.last_model = model
        print(verdict, file=out, flush=True)
        return True
    if head == "get-model":
        if state.last_model is None:
            print("(error \"no model available\")", file=out, flush=True)
            return True
        parts = [f"(define-fun {name} () Real {format_rational(val)})"
                 for name, val in sorted(state.last_model.items())]
        print("(" + " ".join(parts) + ")", file=out, flush=True)
        return True
    if head == "exit":
        return False
    raise ValueError(f"unsupported command {head!r}")


def main(argv: Optional[list[str]] = None) -> int:
    state = SolverState()
    stream = sys.stdin
    out = sys.stdout
    while True:
        text = read_balanced(stream)
        if text is None:
            return 0
        text = text.strip()
        if not text:
            continue
        try:
            for cmd in parse_sexprs(text):
                if not run_command(state, cmd, out):
                    return 0
        except Exception as exc:  # report, keep serving
            print(f"(error \"{exc}\")", file=out, flush=True)


if __name__ == "__main__":
    sys.exit(main())
