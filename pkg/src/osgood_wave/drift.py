"""Drift-function DSL: parsing, evaluation, structural validation.

Grammar (normative for CLI flags and config files)::

    expr   := term (('+' | '-') term)*
    term   := factor (('*' | '/') factor)*
    factor := atom ('^' factor)?          # '^' is right-associative
    atom   := number | 'x' | func '(' expr ')' | '(' expr ')'
    func   := logp | log | exp | abs | max0

with ``logp(z) = log(max(z, e))`` and ``max0(z) = max(z, 0)``.  ``+ - * /``
are left-associative with the usual precedence, ``^`` binds tightest.
There is no unary minus; write ``0 - x``.

``logp`` matches the clamped logarithm used by the benchmark drift family
``x * logp(x)^d``: its argument is clamped at e, so ``logp(z) >= 1``
everywhere and ``x * logp(x)^d >= x`` for x >= 0.  Plain ``log`` is also
provided, but drifts using it below z = 1 go negative and will fail the
nonnegativity check -- an intended guardrail.

Local Lipschitz continuity on [0, inf) is not sampled: every primitive of
the grammar is locally Lipschitz there, so it holds by construction.
Solvers may momentarily query a drift at x < 0 (noise pushes solutions
negative); expressions are evaluated as written, with no clamping.

Parsing reports 1-based byte offsets in errors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "DriftSyntaxError",
    "UnknownIdentifier",
    "Num",
    "Var",
    "Bin",
    "Call",
    "DriftFunction",
    "parse_drift",
    "parse_expr",
    "to_source",
    "validate_drift",
    "ValidationReport",
    "FlagCheck",
    "lipschitz_bound",
    "DRIFT_FUNCTIONS",
    "INITIAL_DATA_FUNCTIONS",
    "INITIAL_DATA_CONSTANTS",
]


class DriftSyntaxError(ValueError):
    """Malformed DSL input; ``offset`` is the 1-based byte position."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (offset {offset})")
        self.offset = offset


class UnknownIdentifier(DriftSyntaxError):
    """Identifier that is neither 'x' nor an allowed function/constant."""

    def __init__(self, name: str, offset: int):
        DriftSyntaxError.__init__(self, f"unknown identifier {name!r}", offset)
        self.name = name


# ---------------------------------------------------------------------------
# AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Bin:
    op: str  # one of + - * / ^
    lhs: "Node"
    rhs: "Node"


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Node"


Node = Num | Var | Bin | Call

DRIFT_FUNCTIONS = frozenset({"logp", "log", "exp", "abs", "max0"})

# initial-data dialect: same grammar, two extra functions and the constant pi
INITIAL_DATA_FUNCTIONS = DRIFT_FUNCTIONS | {"sin", "cos"}
INITIAL_DATA_CONSTANTS = {"pi": math.pi}


# ---------------------------------------------------------------------------
# Tokenizer / recursive-descent parser

_OPS = set("+-*/^()")


def _tokenize(source: str):
    """Yield (kind, text, offset) with 1-based offsets; kind in
    {'num', 'ident', 'op', 'end'}."""
    i, n = 0, len(source)
    while i < n:
        c = source[i]
        if c.isspace():
            i += 1
            continue
        start = i
        if c.isdigit() or c == ".":
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                float(text)
            except ValueError:
                raise DriftSyntaxError(f"bad number {text!r}", start + 1)
            yield ("num", text, start + 1)
            i = j
        elif c.isalpha() or c == "_":
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            yield ("ident", source[i:j], start + 1)
            i = j
        elif c in _OPS:
            yield ("op", c, start + 1)
            i += 1
        else:
            raise DriftSyntaxError(f"unexpected character {c!r}", start + 1)
    yield ("end", "", n + 1)


class _Parser:
    def __init__(self, source: str, functions: frozenset, constants: dict):
        self.source = source
        self.functions = functions
        self.constants = constants
        self.tokens = list(_tokenize(source))
        self.pos = 0

    def peek(self):
        return self.tokens[self.pos]

    def advance(self):
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect_op(self, op: str):
        kind, text, off = self.peek()
        if kind != "op" or text != op:
            raise DriftSyntaxError(f"expected {op!r}", off)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr()
        kind, text, off = self.peek()
        if kind != "end":
            raise DriftSyntaxError(f"unexpected trailing input {text!r}", off)
        return node

    def expr(self) -> Node:
        node = self.term()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "+-":
                self.advance()
                node = Bin(text, node, self.term())
            else:
                return node

    def term(self) -> Node:
        node = self.factor()
        while True:
            kind, text, _ = self.peek()
            if kind == "op" and text in "*/":
                self.advance()
                node = Bin(text, node, self.factor())
            else:
                return node

    def factor(self) -> Node:
        node = self.atom()
        kind, text, _ = self.peek()
        if kind == "op" and text == "^":
            self.advance()
            node = Bin("^", node, self.factor())
        return node

    def atom(self) -> Node:
        kind, text, off = self.advance()
        if kind == "num":
            return Num(float(text))
        if kind == "ident":
            if text == "x":
                return Var()
            if text in self.functions:
                self.expect_op("(")
                arg = self.expr()
                self.expect_op(")")
                return Call(text, arg)
            if text in self.constants:
                return Num(float(self.constants[text]))
            raise UnknownIdentifier(text, off)
        if kind == "op" and text == "(":
            node = self.expr()
            self.expect_op(")")
            return node
        raise DriftSyntaxError(
            "expected number, 'x', function call or '('", off
        )


def parse_expr(source: str, functions: frozenset = DRIFT_FUNCTIONS,
               constants: dict | None = None) -> Node:
    """Parse a DSL expression into its AST."""
    if not source or not source.strip():
        raise DriftSyntaxError("empty expression", 1)
    return _Parser(source, functions, constants or {}).parse()


# ---------------------------------------------------------------------------
# Printing: to_source . parse = identity on ASTs

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "^": 3}


def _emit(node: Node, parent_prec: int) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Call):
        return f"{node.fn}({_emit(node.arg, 0)})"
    p = _PREC[node.op]
    if node.op == "^":
        # right-associative: parenthesise a '^' in the left slot
        lhs = _emit(node.lhs, p + 1)
        rhs = _emit(node.rhs, p)
    else:
        lhs = _emit(node.lhs, p)
        rhs = _emit(node.rhs, p + 1)
    text = f"{lhs} {node.op} {rhs}" if p == 1 else f"{lhs}{node.op}{rhs}"
    return f"({text})" if p < parent_prec else text


def to_source(node: Node) -> str:
    """Render an AST back to DSL text; ``parse_expr(to_source(a)) == a``."""
    return _emit(node, 0)


# ---------------------------------------------------------------------------
# Evaluation: one compiled callable per AST and calling convention.
# The scalar path uses math.* (fast in tight ODE loops), the array path
# numpy ufuncs; each path is deterministic bit-for-bit on reruns.

def _scalar_pow(a: float, b: float) -> float:
    # keep negative-base fractional powers real-valued (nan, as numpy does)
    try:
        return math.pow(a, b)
    except (ValueError, OverflowError):
        return float("inf") if a > 1.0 else float("nan")


def _scalar_log(z: float) -> float:
    if z > 0.0:
        return math.log(z)
    return float("-inf") if z == 0.0 else float("nan")


def _scalar_exp(z: float) -> float:
    try:
        return math.exp(z)
    except OverflowError:
        return float("inf")


_SCALAR_ENV = {
    "_logp": lambda z: math.log(z) if z > math.e else 1.0,
    "_log": _scalar_log,
    "_exp": _scalar_exp,
    "_abs": abs,
    "_max0": lambda z: z if z > 0.0 else 0.0,
    "_sin": math.sin,
    "_cos": math.cos,
    "_pow": _scalar_pow,
}

_ARRAY_ENV = {
    "_logp": lambda z: np.log(np.maximum(z, math.e)),
    "_log": np.log,
    "_exp": np.exp,
    "_abs": np.abs,
    "_max0": lambda z: np.maximum(z, 0.0),
    "_sin": np.sin,
    "_cos": np.cos,
    "_pow": np.power,
}


def _codegen(node: Node) -> str:
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Call):
        return f"_{node.fn}({_codegen(node.arg)})"
    if node.op == "^":
        return f"_pow({_codegen(node.lhs)}, {_codegen(node.rhs)})"
    return f"({_codegen(node.lhs)}{node.op}{_codegen(node.rhs)})"


def _compile(node: Node, env: dict):
    code = compile(f"lambda x: {_codegen(node)}", "<drift-dsl>", "eval")
    return eval(code, dict(env))  # namespace holds only our helpers


@dataclass
class DriftFunction:
    """An evaluable drift with declared structural claims.

    ``nonnegative`` / ``nondecreasing`` / ``convex`` are claims about the
    behaviour on [0, inf); they are checked by :func:`validate_drift`, not
    by construction.  Instances are immutable in practice (the AST is
    frozen) and freely shareable across threads and processes.
    """

    ast: Node
    source: str
    nonnegative: bool = True
    nondecreasing: bool = True
    convex: bool = False
    _scalar: object = field(default=None, repr=False, compare=False)
    _array: object = field(default=None, repr=False, compare=False)

    def __call__(self, x):
        if isinstance(x, np.ndarray):
            if self._array is None:
                self._array = _compile(self.ast, _ARRAY_ENV)
            return self._array(x)
        if self._scalar is None:
            self._scalar = _compile(self.ast, _SCALAR_ENV)
        return self._scalar(float(x))

    def with_flags(self, **flags) -> "DriftFunction":
        return replace(self, _scalar=None, _array=None, **flags)

    def __getstate__(self):
        state = self.__dict__.copy()
        state["_scalar"] = None  # compiled closures do not pickle
        state["_array"] = None
        return state


def parse_drift(source: str, *, nonnegative: bool = True,
                nondecreasing: bool = True, convex: bool = False) -> DriftFunction:
    """Parse DSL text into a :class:`DriftFunction`.

    Flag defaults reflect the standing regime of the experiments
    (nonnegative, nondecreasing drifts); they are claims to be checked
    with :func:`validate_drift`, not verified facts.
    """
    ast = parse_expr(source, DRIFT_FUNCTIONS)
    return DriftFunction(ast, source, nonnegative=nonnegative,
                         nondecreasing=nondecreasing, convex=convex)


def parse_initial_data(source: str) -> DriftFunction:
    """Parse initial-data DSL (drift grammar plus sin, cos and pi)."""
    ast = parse_expr(source, INITIAL_DATA_FUNCTIONS, INITIAL_DATA_CONSTANTS)
    return DriftFunction(ast, source, nonnegative=False, nondecreasing=False)


def constant(value: float) -> DriftFunction:
    """A constant function as a DriftFunction."""
    v = float(value)
    return DriftFunction(Num(v), repr(v), nonnegative=v >= 0.0,
                         nondecreasing=True, convex=True)


# ---------------------------------------------------------------------------
# Structural validation by sampling

@dataclass(frozen=True)
class FlagCheck:
    claimed: bool
    passed: bool
    counterexample: tuple | None = None


@dataclass(frozen=True)
class ValidationReport:
    nonnegative: FlagCheck
    nondecreasing: FlagCheck
    convex: FlagCheck

    @property
    def all_ok(self) -> bool:
        return all(c.passed for c in (self.nonnegative, self.nondecreasing, self.convex))


def _sample_grid(x_max: float, samples: int) -> np.ndarray:
    # geometric grid plus the origin: dense near 0 where claims usually break
    lo = max(x_max * 1e-9, 1e-12)
    grid = np.geomspace(lo, x_max, samples - 1)
    return np.concatenate([[0.0], grid])


def validate_drift(b: DriftFunction, x_max: float, samples: int = 256,
                   seed: int = 0) -> ValidationReport:
    """Check the claimed structural flags on [0, x_max] by sampling.

    Nonnegativity and monotonicity are checked on a geometric grid,
    midpoint convexity on random pairs.  Tolerances absorb roundoff:
    1e-12 absolute for sign/monotonicity, 1e-9 relative for convexity.
    """
    if x_max <= 0:
        raise ValueError("x_max must be positive")
    if samples < 100:
        raise ValueError("need at least 100 samples")
    xs = _sample_grid(x_max, samples)
    vals = np.array([b(float(x)) for x in xs])

    def check_nonneg() -> FlagCheck:
        bad = np.nonzero(vals < -1e-12)[0]
        if bad.size:
            i = int(bad[0])
            return FlagCheck(True, False, (float(xs[i]), float(vals[i])))
        return FlagCheck(True, True)

    def check_mono() -> FlagCheck:
        diffs = vals[1:] - vals[:-1]
        bad = np.nonzero(diffs < -1e-12)[0]
        if bad.size:
            i = int(bad[0])
            return FlagCheck(True, False, (float(xs[i]), float(xs[i + 1])))
        return FlagCheck(True, True)

    def check_convex() -> FlagCheck:
        rng = np.random.Generator(np.random.Philox(key=np.uint64(seed)))
        idx = rng.integers(0, len(xs), size=(2 * samples, 2))
        for i, j in idx:
            xi, xj = float(xs[i]), float(xs[j])
            mid = b(0.5 * (xi + xj))
            chord = 0.5 * (vals[i] + vals[j])
            if mid > chord + 1e-9 * (1.0 + abs(vals[j])):
                return FlagCheck(True, False, (xi, xj))
        return FlagCheck(True, True)

    skip = FlagCheck(False, True)
    return ValidationReport(
        nonnegative=check_nonneg() if b.nonnegative else skip,
        nondecreasing=check_mono() if b.nondecreasing else skip,
        convex=check_convex() if b.convex else skip,
    )


# ---------------------------------------------------------------------------
# Global Lipschitz analysis (for the noise coefficient's restricted dialect)

def lipschitz_bound(node: Node) -> float | None:
    """A global Lipschitz constant for the expression, or None.

    Returns None when no constant is derivable from the structure
    (products of non-constants, powers, exp, unclamped log).  Used to
    vet noise coefficients, which must be globally Lipschitz.
    """
    if isinstance(node, Num):
        return 0.0
    if isinstance(node, Var):
        return 1.0
    if isinstance(node, Call):
        inner = lipschitz_bound(node.arg)
        if inner is None:
            return None
        if node.fn in ("abs", "max0"):
            return inner
        if node.fn == "logp":
            return inner / math.e  # slope of log(max(z, e)) is at most 1/e
        if node.fn in ("sin", "cos"):
            return inner
        return None  # exp, log
    if node.op in ("+", "-"):
        a, b = lipschitz_bound(node.lhs), lipschitz_bound(node.rhs)
        return None if a is None or b is None else a + b
    if node.op == "*":
        if isinstance(node.lhs, Num):
            b = lipschitz_bound(node.rhs)
            return None if b is None else abs(node.lhs.value) * b
        if isinstance(node.rhs, Num):
            a = lipschitz_bound(node.lhs)
            return None if a is None else a * abs(node.rhs.value)
        return None
    if node.op == "/":
        if isinstance(node.rhs, Num) and node.rhs.value != 0.0:
            a = lipschitz_bound(node.lhs)
            return None if a is None else a / abs(node.rhs.value)
        return None
    if node.op == "^":
        if isinstance(node.rhs, Num) and node.rhs.value in (0.0, 1.0):
            return 0.0 if node.rhs.value == 0.0 else lipschitz_bound(node.lhs)
        if isinstance(node.lhs, Num) and isinstance(node.rhs, Num):
            return 0.0
        return None
    return None
