"""Row-transformation mini language and the transform pipeline.

Expressions are single-variable (`x`), compiled to a flat postfix
program executed by the kernel layer; evaluation is total: missing
propagates and every domain error (log of a non-positive, division by
zero, overflow) yields missing instead of raising.

A TransformProgram is an ordered list of steps: `app` (apply an
expression to a column), `bin` (threshold a numeric column into named
levels) and `ady` (dummy-expand a column against a level list).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from ._kernels import _ops as ops
from .source import DatasetError

NAN = float("nan")


class ExprError(ValueError):
    """Syntax or validity error in an expression, with byte position."""

    def __init__(self, message: str, pos: int):
        super().__init__(f"{message} (at position {pos})")
        self.pos = pos


# ---------------------------------------------------------------- AST

@dataclass(frozen=True)
class Num:
    value: float


@dataclass(frozen=True)
class Var:
    pass


@dataclass(frozen=True)
class Call:
    name: str
    args: tuple


@dataclass(frozen=True)
class Neg:
    operand: object


@dataclass(frozen=True)
class Bin:
    op: str
    left: object
    right: object


FUNCTIONS = {"log": 1, "log1p": 1, "exp": 1, "abs": 1, "sign": 1, "floor": 1,
             "ceil": 1, "sqrt": 1, "min": 2, "max": 2, "if": 3}

_CMP_OPS = ("<=", ">=", "==", "!=", "<", ">")


# ---------------------------------------------------------------- lexer

def _tokenize(text: str):
    tokens = []  # (kind, value, pos)
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and text[i + 1].isdigit()):
            j = i
            while j < n and (text[j].isdigit() or text[j] == "."):
                j += 1
            if j < n and text[j] in "eE":
                k = j + 1
                if k < n and text[k] in "+-":
                    k += 1
                if k < n and text[k].isdigit():
                    j = k
                    while j < n and text[j].isdigit():
                        j += 1
            try:
                value = float(text[i:j])
            except ValueError:
                raise ExprError(f"bad number {text[i:j]!r}", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] == "_"):
                j += 1
            tokens.append(("name", text[i:j], i))
            i = j
            continue
        two = text[i:i + 2]
        if two in _CMP_OPS:
            tokens.append(("op", two, i))
            i += 2
            continue
        if ch in "+-*/^()<>,":
            tokens.append(("op", ch, i))
            i += 1
            continue
        if ch in "=!":
            raise ExprError(f"incomplete operator {ch!r}", i)
        raise ExprError(f"unexpected character {ch!r}", i)
    tokens.append(("eof", "", n))
    return tokens


# ---------------------------------------------------------------- parser

class _Parser:
    def __init__(self, text: str):
        self.text = text
        self.tokens = _tokenize(text)
        self.i = 0

    def peek(self):
        return self.tokens[self.i]

    def take(self):
        tok = self.tokens[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        kind, v, pos = self.take()
        if v != value:
            raise ExprError(f"expected {value!r}, found {v or 'end of input'!r}", pos)

    def parse(self):
        node = self.expr()
        kind, v, pos = self.peek()
        if kind != "eof":
            raise ExprError(f"unexpected trailing input {v!r}", pos)
        return node

    def expr(self):
        return self.cmp()

    def cmp(self):
        node = self.add()
        kind, v, pos = self.peek()
        if kind == "op" and v in _CMP_OPS:
            self.take()
            node = Bin(v, node, self.add())
        return node

    def add(self):
        node = self.mul()
        while True:
            kind, v, _ = self.peek()
            if kind == "op" and v in ("+", "-"):
                self.take()
                node = Bin(v, node, self.mul())
            else:
                return node

    def mul(self):
        node = self.unary()
        while True:
            kind, v, _ = self.peek()
            if kind == "op" and v in ("*", "/"):
                self.take()
                node = Bin(v, node, self.unary())
            else:
                return node

    def unary(self):
        kind, v, _ = self.peek()
        if kind == "op" and v == "-":
            self.take()
            return Neg(self.unary())
        return self.pow()

    def pow(self):
        node = self.atom()
        kind, v, _ = self.peek()
        if kind == "op" and v == "^":
            self.take()
            node = Bin("^", node, self.unary())
        return node

    def atom(self):
        kind, v, pos = self.take()
        if kind == "num":
            return Num(v)
        if kind == "op" and v == "(":
            node = self.expr()
            self.expect(")")
            return node
        if kind == "name":
            if v == "x":
                return Var()
            nkind, nv, _ = self.peek()
            if not (nkind == "op" and nv == "("):
                raise ExprError(f"unknown variable {v!r} (only 'x' is bound)", pos)
            if v not in FUNCTIONS:
                raise ExprError(f"unknown function {v!r}", pos)
            self.take()
            args = [self.expr()]
            while True:
                akind, av, _ = self.peek()
                if akind == "op" and av == ",":
                    self.take()
                    args.append(self.expr())
                else:
                    break
            self.expect(")")
            if len(args) != FUNCTIONS[v]:
                raise ExprError(f"{v} takes {FUNCTIONS[v]} argument(s), got {len(args)}", pos)
            return Call(v, tuple(args))
        raise ExprError(f"expected a value, found {v or 'end of input'!r}", pos)


def parse_expr(text: str):
    """Parse expression text into an AST (grammar in the module docstring)."""
    if not text or not text.strip():
        raise ExprError("empty expression", 0)
    return _Parser(text).parse()


# ---------------------------------------------------------------- printing

_PREC = {"cmp": 1, "add": 2, "mul": 3, "unary": 4, "pow": 5, "atom": 6}


def _prec_of(node) -> int:
    if isinstance(node, (Num, Var, Call)):
        return _PREC["atom"]
    if isinstance(node, Neg):
        return _PREC["unary"]
    if node.op in _CMP_OPS:
        return _PREC["cmp"]
    if node.op in ("+", "-"):
        return _PREC["add"]
    if node.op in ("*", "/"):
        return _PREC["mul"]
    return _PREC["pow"]


def _fmt_num(v: float) -> str:
    if v == int(v) and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def print_expr(node) -> str:
    """Canonical text for an AST; parse(print_expr(t)) == t."""
    if isinstance(node, Num):
        return _fmt_num(node.value)
    if isinstance(node, Var):
        return "x"
    if isinstance(node, Call):
        return f"{node.name}({', '.join(print_expr(a) for a in node.args)})"
    if isinstance(node, Neg):
        inner = print_expr(node.operand)
        if _prec_of(node.operand) < _PREC["unary"]:
            inner = f"({inner})"
        return f"-{inner}"
    lp, rp = _prec_of(node.left), _prec_of(node.right)
    mine = _prec_of(node)
    left = print_expr(node.left)
    right = print_expr(node.right)
    if node.op == "^":
        # right-associative; exponent lives at unary level
        if lp < _PREC["atom"]:
            left = f"({left})"
        if rp < _PREC["unary"]:
            right = f"({right})"
    elif node.op in _CMP_OPS:
        # non-associative: a nested comparison needs parens on either side
        if lp <= mine:
            left = f"({left})"
        if rp <= mine:
            right = f"({right})"
    else:
        if lp < mine:
            left = f"({left})"
        # left-associative: wrap equal-precedence right operands
        if rp <= mine:
            right = f"({right})"
    return f"{left} {node.op} {right}" if node.op in _CMP_OPS else f"{left}{node.op}{right}"


# ---------------------------------------------------------------- compile + eval

_FUNC_OPCODE = {"log": ops.OP_LOG, "log1p": ops.OP_LOG1P, "exp": ops.OP_EXP,
                "abs": ops.OP_ABS, "sign": ops.OP_SIGN, "floor": ops.OP_FLOOR,
                "ceil": ops.OP_CEIL, "sqrt": ops.OP_SQRT, "min": ops.OP_MIN,
                "max": ops.OP_MAX, "if": ops.OP_IF}

_BIN_OPCODE = {"+": ops.OP_ADD, "-": ops.OP_SUB, "*": ops.OP_MUL, "/": ops.OP_DIV,
               "^": ops.OP_POW, "<": ops.OP_LT, "<=": ops.OP_LE, ">": ops.OP_GT,
               ">=": ops.OP_GE, "==": ops.OP_EQ, "!=": ops.OP_NE}


class CompiledExpr:
    """AST lowered to a postfix program for the kernel VM."""

    def __init__(self, node):
        self.ast = node
        code: list = []
        consts: list = []
        self.max_stack = 0
        self._depth = 0
        self._emit(node, code, consts)
        self.code = np.array(code, dtype=np.int32).reshape(-1, 2)
        self.consts = np.array(consts, dtype=np.float64)

    def _push(self, code, op, arg=0):
        code.append((op, arg))

    def _track(self, delta):
        self._depth += delta
        self.max_stack = max(self.max_stack, self._depth)

    def _emit(self, node, code, consts):
        if isinstance(node, Num):
            consts.append(float(node.value))
            self._push(code, ops.OP_CONST, len(consts) - 1)
            self._track(+1)
        elif isinstance(node, Var):
            self._push(code, ops.OP_X)
            self._track(+1)
        elif isinstance(node, Neg):
            self._emit(node.operand, code, consts)
            self._push(code, ops.OP_NEG)
        elif isinstance(node, Call):
            for a in node.args:
                self._emit(a, code, consts)
            self._push(code, _FUNC_OPCODE[node.name])
            self._track(-(len(node.args) - 1))
        else:
            self._emit(node.left, code, consts)
            self._emit(node.right, code, consts)
            self._push(code, _BIN_OPCODE[node.op])
            self._track(-1)

    def run(self, values: np.ndarray) -> np.ndarray:
        return _kernels.eval_program(self.code, self.consts,
                                     np.asarray(values, dtype=np.float64), self.max_stack)


def compile_expr(node) -> CompiledExpr:
    return CompiledExpr(node)


def eval_expr(expr, value) -> float:
    """Evaluate at one value; missing in (None or NaN) or domain error -> NaN out."""
    if isinstance(expr, str):
        expr = parse_expr(expr)
    x = NAN if value is None else float(value)
    return float(compile_expr(expr).run(np.array([x]))[0])


# ---------------------------------------------------------------- program steps

@dataclass(frozen=True)
class AppStep:
    column: str
    text: str

    def __post_init__(self):
        parse_expr(self.text)  # validate eagerly

    def line(self) -> str:
        return f"app {self.column} {self.text}"


@dataclass(frozen=True)
class BinStep:
    column: str
    thresholds: tuple
    names: tuple

    def __post_init__(self):
        ts = tuple(float(t) for t in self.thresholds)
        object.__setattr__(self, "thresholds", ts)
        object.__setattr__(self, "names", tuple(str(n) for n in self.names))
        if not ts:
            raise ValueError("bin needs at least one threshold")
        if any(a >= b for a, b in zip(ts, ts[1:])):
            raise ValueError("bin thresholds must be strictly ascending")
        if len(self.names) != len(ts) + 1:
            raise ValueError(f"bin with {len(ts)} thresholds needs {len(ts) + 1} names")

    def line(self) -> str:
        ts = ",".join(_fmt_num(t) for t in self.thresholds)
        return f"bin {self.column} {ts} {','.join(self.names)}"


@dataclass(frozen=True)
class AdyStep:
    column: str
    levels: tuple

    def __post_init__(self):
        lv = tuple(str(l) for l in self.levels)
        object.__setattr__(self, "levels", lv)
        if not lv:
            raise ValueError("ady needs a non-empty level list")
        if len(set(lv)) != len(lv):
            raise ValueError("ady levels must be distinct")

    def dummy_names(self):
        return [f"{self.column}_{lvl}" for lvl in self.levels]

    def line(self) -> str:
        return f"ady {self.column} {','.join(self.levels)}"


@dataclass(frozen=True)
class TransformProgram:
    steps: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))

    def __bool__(self):
        return bool(self.steps)

    def extended(self, step) -> "TransformProgram":
        return TransformProgram(self.steps + (step,))

    def referenced_columns(self):
        return [s.column for s in self.steps]

    def lines(self):
        return [s.line() for s in self.steps]


def parse_program_line(line: str):
    parts = line.strip().split(None, 2)
    if not parts:
        raise ValueError("empty program line")
    verb = parts[0]
    if verb == "app":
        if len(parts) < 3:
            raise ValueError("usage: app <column> <expression>")
        return AppStep(parts[1], parts[2])
    if verb == "bin":
        if len(parts) < 3 or len(parts[2].split(None, 1)) < 2:
            raise ValueError("usage: bin <column> <t1,..,tm> <name0,..,namem>")
        ts_text, names_text = parts[2].split(None, 1)
        return BinStep(parts[1], tuple(float(t) for t in ts_text.split(",")),
                       tuple(n.strip() for n in names_text.split(",")))
    if verb == "ady":
        if len(parts) < 3:
            raise ValueError("usage: ady <column> <level1,..,levelk>")
        return AdyStep(parts[1], tuple(l.strip() for l in parts[2].split(",")))
    raise ValueError(f"unknown program step {verb!r}")


def parse_program(text: str) -> TransformProgram:
    steps = []
    for line in text.splitlines():
        if line.strip() and not line.lstrip().startswith("#"):
            steps.append(parse_program_line(line))
    return TransformProgram(tuple(steps))


# ---------------------------------------------------------------- application

def _numeric_input(frame, column: str) -> np.ndarray:
    if column not in frame.order:
        raise DatasetError(f"column not in frame: {column!r}")
    return frame.numeric(column)


def apply_step(frame, step) -> None:
    """Apply one step to a frame in place (row count never changes)."""
    if isinstance(step, AppStep):
        values = _numeric_input(frame, step.column)
        out = compile_expr(parse_expr(step.text)).run(values)
        frame.replace_column(step.column, out, quantitative=True)
    elif isinstance(step, BinStep):
        values = _numeric_input(frame, step.column)
        idx = np.searchsorted(step.thresholds, values, side="right")
        out = [None if v != v else step.names[i] for v, i in zip(values, idx)]
        frame.replace_column(step.column, out, quantitative=False)
    elif isinstance(step, AdyStep):
        _expand_dummies_inplace(frame, step)
    else:
        raise TypeError(f"unknown step type: {type(step).__name__}")


def apply_program(frame, program: TransformProgram | None):
    """Apply all steps in order; returns a transformed copy of the frame."""
    if not program:
        return frame
    out = frame.copy()
    for step in program.steps:
        apply_step(out, step)
    return out


def _expand_dummies_inplace(frame, step: AdyStep) -> None:
    """Replace a column with one 0/1 column per listed level.

    Values outside the level list become all-zero rows (the base group);
    missing values are missing in every dummy.
    """
    col = step.column
    if col not in frame.order:
        raise DatasetError(f"column not in frame: {col!r}")
    for name in step.dummy_names():
        if name in frame.order:
            raise DatasetError(f"dummy column name collides with existing column: {name!r}")
    n = frame.n_rows
    dummies = [np.zeros(n, dtype=np.float64) for _ in step.levels]
    if frame.is_quant(col):
        values = frame.quant[col]
        level_nums = []
        for lvl in step.levels:
            try:
                level_nums.append(float(lvl))
            except ValueError:
                level_nums.append(NAN)  # never matches a number
        miss = np.isnan(values)
        for d, lv in zip(dummies, level_nums):
            d[:] = values == lv
            d[miss] = NAN
    else:
        cells = frame.qual[col]
        for i, cell in enumerate(cells):
            if cell is None:
                for d in dummies:
                    d[i] = NAN
            else:
                for d, lvl in zip(dummies, step.levels):
                    if cell == lvl:
                        d[i] = 1.0
    pos = frame.order.index(col)
    frame.drop_column(col)
    for offset, (name, d) in enumerate(zip(step.dummy_names(), dummies)):
        frame.quant[name] = d
        frame.order.insert(pos + offset, name)


def expand_dummies(frame, column: str, levels):
    """Dummy-expand `column` against `levels`; returns a new frame."""
    out = frame.copy()
    _expand_dummies_inplace(out, AdyStep(column, tuple(levels)))
    return out


def simulate_roles(program: TransformProgram | None, roles: dict) -> dict:
    """Column roles after running `program`, without any data. Raises on
    references to columns that do not exist at that point."""
    out = dict(roles)
    if not program:
        return out
    from .source import QUALITATIVE, QUANTITATIVE

    for step in program.steps:
        if step.column not in out:
            raise DatasetError(f"transform references unknown column: {step.column!r}")
        if isinstance(step, AppStep):
            out[step.column] = QUANTITATIVE
        elif isinstance(step, BinStep):
            out[step.column] = QUALITATIVE
        else:
            del out[step.column]
            for name in step.dummy_names():
                if name in out:
                    raise DatasetError(f"dummy column name collides: {name!r}")
                out[name] = QUANTITATIVE
    return out
