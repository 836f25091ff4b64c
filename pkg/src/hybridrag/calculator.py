"""Restricted arithmetic expression evaluation for generator output.

The generator is prompted for a Python expression; instead of eval() the
source is parsed into an AST and checked against a strict whitelist
(numbers, arithmetic, comparisons, five builtin functions, bracketed
number lists as call arguments). Anything else is rejected before any
evaluation happens. See docs/calc-grammar.md for the grammar.
"""

from __future__ import annotations

import ast
import math
from dataclasses import dataclass
from typing import Sequence

from .ingest import MarkdownTable
from .providers import GenerationProvider, GenerationRequest
from .retrieval import ScoredChunk

MAX_DEPTH = 32
MAX_NODES = 512
MAX_POW_EXPONENT = 1e6
CALC_TABLE_BUDGET = 6000
CALC_SAMPLES = 5

WHITELISTED_FUNCTIONS = ("abs", "max", "min", "round", "sum")


class CalcError(Exception):
    """Base class for calculator failures."""


class CalcSyntaxError(CalcError):
    pass


class ForbiddenConstructError(CalcError):
    pass


class DepthExceededError(CalcError):
    pass


class ArithmeticEvalError(CalcError):
    pass


@dataclass(frozen=True)
class CalcExpr:
    source: str
    tree: ast.expr


@dataclass(frozen=True)
class CalcResult:
    source: str
    value: str


_ALLOWED_BINOPS = (
    ast.Add, ast.Sub, ast.Mult, ast.Div, ast.FloorDiv, ast.Mod, ast.Pow,
)
_ALLOWED_CMPOPS = (ast.Lt, ast.LtE, ast.Gt, ast.GtE, ast.Eq, ast.NotEq)


def _validate(node: ast.expr, depth: int, in_call_args: bool) -> int:
    """Check one node against the whitelist; returns the subtree node count."""
    if depth > MAX_DEPTH:
        raise DepthExceededError(f"nesting depth exceeds {MAX_DEPTH}")

    if isinstance(node, ast.Constant):
        value = node.value
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ForbiddenConstructError(
                f"literal of type {type(value).__name__} is not a number"
            )
        if isinstance(value, float) and not math.isfinite(value):
            raise ForbiddenConstructError("non-finite number literal")
        return 1

    if isinstance(node, ast.UnaryOp):
        if not isinstance(node.op, ast.USub):
            raise ForbiddenConstructError(
                f"unary operator {type(node.op).__name__} is not allowed"
            )
        return 1 + _validate(node.operand, depth + 1, False)

    if isinstance(node, ast.BinOp):
        if not isinstance(node.op, _ALLOWED_BINOPS):
            raise ForbiddenConstructError(
                f"operator {type(node.op).__name__} is not allowed"
            )
        count = 1 + _validate(node.left, depth + 1, False)
        return count + _validate(node.right, depth + 1, False)

    if isinstance(node, ast.Compare):
        for op in node.ops:
            if not isinstance(op, _ALLOWED_CMPOPS):
                raise ForbiddenConstructError(
                    f"comparison {type(op).__name__} is not allowed"
                )
        count = 1 + _validate(node.left, depth + 1, False)
        for comparator in node.comparators:
            count += _validate(comparator, depth + 1, False)
        return count

    if isinstance(node, ast.Call):
        if not isinstance(node.func, ast.Name) or node.func.id not in WHITELISTED_FUNCTIONS:
            raise ForbiddenConstructError("only min/max/sum/abs/round may be called")
        if node.keywords:
            raise ForbiddenConstructError("keyword arguments are not allowed")
        if not node.args:
            raise ForbiddenConstructError(f"{node.func.id}() needs at least one argument")
        count = 2  # the Call and its Name
        for arg in node.args:
            count += _validate(arg, depth + 1, True)
        return count

    if isinstance(node, ast.List):
        if not in_call_args:
            raise ForbiddenConstructError(
                "list literals are only allowed as function arguments"
            )
        if not node.elts:
            raise ForbiddenConstructError("empty list literal")
        count = 1
        for elt in node.elts:
            count += _validate(elt, depth + 1, False)
        return count

    raise ForbiddenConstructError(f"construct {type(node).__name__} is not allowed")


def parse_expr(source: str) -> CalcExpr | None:
    """Parse source into a whitelisted expression tree.

    Returns None for empty/whitespace-only input (the prompt explicitly
    allows answering with an empty string). Raises CalcSyntaxError,
    ForbiddenConstructError, or DepthExceededError otherwise.
    """
    stripped = source.strip()
    if not stripped:
        return None
    try:
        tree = ast.parse(stripped, mode="eval")
    except (SyntaxError, ValueError, MemoryError, RecursionError) as exc:
        raise CalcSyntaxError(f"not a valid expression: {exc}") from exc
    nodes = _validate(tree.body, 1, False)
    if nodes > MAX_NODES:
        raise DepthExceededError(f"expression has {nodes} nodes, limit {MAX_NODES}")
    return CalcExpr(stripped, tree.body)


def _check_finite(value: float) -> float:
    if not math.isfinite(value):
        raise ArithmeticEvalError("overflow")
    return value


def _eval_scalar(node: ast.expr) -> float:
    value = _eval_node(node)
    if isinstance(value, list):
        raise ArithmeticEvalError("expected a number, got a list")
    if isinstance(value, bool):
        raise ArithmeticEvalError("expected a number, got a boolean")
    return value


def _eval_call(name: str, args: list) -> float:
    values = [_eval_node(a) for a in args]
    try:
        if name == "abs":
            if len(values) != 1 or isinstance(values[0], (list, bool)):
                raise ArithmeticEvalError("abs() takes exactly one number")
            return abs(values[0])
        if name in ("min", "max"):
            fn = min if name == "min" else max
            if len(values) == 1:
                if not isinstance(values[0], list):
                    raise ArithmeticEvalError(f"{name}() with one argument needs a list")
                return fn(values[0])
            if any(isinstance(v, (list, bool)) for v in values):
                raise ArithmeticEvalError(f"{name}() arguments must all be numbers")
            return fn(values)
        if name == "sum":
            if len(values) not in (1, 2) or not isinstance(values[0], list):
                raise ArithmeticEvalError("sum() takes a list and an optional start")
            start = 0.0
            if len(values) == 2:
                if isinstance(values[1], (list, bool)):
                    raise ArithmeticEvalError("sum() start must be a number")
                start = values[1]
            return math.fsum(values[0]) + start
        if name == "round":
            if len(values) not in (1, 2) or isinstance(values[0], (list, bool)):
                raise ArithmeticEvalError("round() takes a number and optional digits")
            if len(values) == 1:
                return float(round(values[0]))
            digits = values[1]
            if isinstance(digits, (list, bool)) or digits != int(digits):
                raise ArithmeticEvalError("round() digits must be an integer")
            return round(values[0], int(digits))
    except CalcError:
        raise
    except (ValueError, TypeError, OverflowError) as exc:
        raise ArithmeticEvalError(f"{name}(): {exc}") from exc
    raise ArithmeticEvalError(f"unknown function {name}")  # unreachable after validation


def _eval_node(node: ast.expr):
    if isinstance(node, ast.Constant):
        return float(node.value)

    if isinstance(node, ast.UnaryOp):
        return -_eval_scalar(node.operand)

    if isinstance(node, ast.BinOp):
        left = _eval_scalar(node.left)
        right = _eval_scalar(node.right)
        try:
            if isinstance(node.op, ast.Add):
                return _check_finite(left + right)
            if isinstance(node.op, ast.Sub):
                return _check_finite(left - right)
            if isinstance(node.op, ast.Mult):
                return _check_finite(left * right)
            if isinstance(node.op, ast.Div):
                return _check_finite(left / right)
            if isinstance(node.op, ast.FloorDiv):
                return _check_finite(left // right)
            if isinstance(node.op, ast.Mod):
                return _check_finite(left % right)
            if isinstance(node.op, ast.Pow):
                if abs(right) > MAX_POW_EXPONENT:
                    raise ArithmeticEvalError(
                        f"exponent magnitude exceeds {MAX_POW_EXPONENT:g}"
                    )
                result = left**right
                if isinstance(result, complex):
                    raise ArithmeticEvalError("complex result")
                return _check_finite(result)
        except ZeroDivisionError as exc:
            raise ArithmeticEvalError("division by zero") from exc
        except (OverflowError, ValueError) as exc:
            raise ArithmeticEvalError(f"out of range: {exc}") from exc

    if isinstance(node, ast.Compare):
        left = _eval_scalar(node.left)
        outcome = True
        for op, comparator in zip(node.ops, node.comparators):
            right = _eval_scalar(comparator)
            if isinstance(op, ast.Lt):
                outcome = outcome and left < right
            elif isinstance(op, ast.LtE):
                outcome = outcome and left <= right
            elif isinstance(op, ast.Gt):
                outcome = outcome and left > right
            elif isinstance(op, ast.GtE):
                outcome = outcome and left >= right
            elif isinstance(op, ast.Eq):
                outcome = outcome and left == right
            else:
                outcome = outcome and left != right
            left = right
        return outcome

    if isinstance(node, ast.Call):
        assert isinstance(node.func, ast.Name)
        return _eval_call(node.func.id, node.args)

    if isinstance(node, ast.List):
        elements = []
        for elt in node.elts:
            elements.append(_eval_scalar(elt))
        return elements

    raise ArithmeticEvalError(f"unexpected node {type(node).__name__}")


def format_value(value) -> str:
    """Render booleans as True/False, numbers with <= 12 significant digits."""
    if isinstance(value, bool):
        return "True" if value else "False"
    if value == 0.0:
        value = 0.0  # normalize -0.0
    return f"{value:.12g}"


def eval_expr(expr: CalcExpr) -> CalcResult:
    """Evaluate a validated expression in double precision.

    Floor division and modulo follow sign-of-divisor semantics; division
    by zero, overflow, and complex results raise ArithmeticEvalError.
    """
    value = _eval_node(expr.tree)
    if isinstance(value, list):
        raise ArithmeticEvalError("expression evaluates to a list, not a value")
    if not isinstance(value, bool):
        _check_finite(value)
    return CalcResult(expr.source, format_value(value))


_CALC_SYSTEM_PROMPT = """You are provided with a question and various references. Your task is to generate a possible useful expression that is needed to answer the question. Here are the rules:
1. The expression **MUST** be a valid Python expression.
2. The expression **MUST** be useful to answer the question.
3. If you think no expression is needed, you **MUST** answer with empty string.
4. The output should be succinct, you **MUST** do reasoning in your heart without outputing the reasoning.
5. You **MUST NOT** output any other words except the valid Python expression.
6. You **MUST NOT** output the expression that need the user to input anything.
"""

_CALC_RULES = """
1. The expression **MUST** be a valid Python expression.
2. The expression **MUST** be useful to answer the question.
3. If you think no expression is needed, you **MUST** answer with empty string.
4. The output should be succinct, you **MUST** do reasoning in your heart without outputing the reasoning.
5. You **MUST NOT** output any other words except the valid Python expression.
6. You **MUST NOT** output the expression that need the user to input anything.
"""


def build_calc_prompt(
    query: str,
    chunks: Sequence[ScoredChunk],
    tables: Sequence[MarkdownTable],
    table_budget: int = CALC_TABLE_BUDGET,
    n_samples: int = CALC_SAMPLES,
) -> GenerationRequest:
    """Render the expression-elicitation prompt.

    Reference sections appear only when non-empty; the rendered table
    section is sliced at `table_budget` characters.
    """
    user_message = ""
    if chunks:
        references = "# References \n"
        for scored in chunks:
            references += f"- {scored.chunk.text.strip()}\n"
        user_message += f"{references}\n------\n\n"
    if tables:
        table_references = ""
        user_message += "## Table references \n"
        for idx, table in enumerate(tables):
            table_references += f"### Table {idx + 1}: \n"
            table_references += f"{table.markdown}\n"
        table_references = table_references[:table_budget]
        user_message += f"{table_references}\n------\n\n"
    user_message += "**Remember your rules**:"
    user_message += _CALC_RULES
    user_message += f"Question: {query}\n"
    user_message += (
        "Using the references listed above and based on the question, "
        "generate a valid Python expression for me: \n"
    )
    return GenerationRequest(
        system_prompt=_CALC_SYSTEM_PROMPT,
        user_prompt=user_message,
        n_samples=n_samples,
        temperature=0.8,
        max_tokens=128,
    )


def run_calculator(
    query: str,
    chunks: Sequence[ScoredChunk],
    tables: Sequence[MarkdownTable],
    provider: GenerationProvider,
    table_budget: int = CALC_TABLE_BUDGET,
    n_samples: int = CALC_SAMPLES,
) -> list[CalcResult]:
    """Sample expressions, evaluate the valid ones, deduplicate.

    Every failure mode (unparsable, forbidden, arithmetic error) just
    drops that sample; the result list may be empty but this never
    raises on bad model output.
    """
    req = build_calc_prompt(query, chunks, tables, table_budget, n_samples)
    generation = provider.generate(req)
    results: list[CalcResult] = []
    seen: set[tuple[str, str]] = set()
    for completion in generation.completions:
        try:
            expr = parse_expr(completion)
            if expr is None:
                continue
            result = eval_expr(expr)
        except CalcError:
            continue
        key = (result.source, result.value)
        if key not in seen:
            seen.add(key)
            results.append(result)
    return results
