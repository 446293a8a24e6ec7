"""Static analysis of action code: function extraction and complexity.

Used by the in-process mock kernel and by lazy complexity analysis in the
metrics layer. The subprocess kernel worker ships its own copy of the same
logic because it talks to this package only over the wire protocol.
"""

from __future__ import annotations

import ast
import re

from .errors import AnalysisError

_DEF_LINE_RE = re.compile(r"^\s*(?:async\s+)?def\s+(\w+)\s*\(([^)]*)\)", re.MULTILINE)


def _decision_points(node: ast.AST) -> int:
    """Count decision points in the subtree rooted at ``node``.

    A decision point is a conditional statement or conditional expression,
    a loop, an exception handler clause, a boolean short-circuit operator
    occurrence inside an expression, or a conditional filter inside a
    comprehension.
    """
    count = 0
    for child in ast.walk(node):
        if isinstance(child, (ast.If, ast.IfExp)):
            count += 1
        elif isinstance(child, (ast.For, ast.AsyncFor, ast.While)):
            count += 1
        elif isinstance(child, ast.ExceptHandler):
            count += 1
        elif isinstance(child, ast.BoolOp):
            # "a and b and c" is one node with three values but two operators.
            count += len(child.values) - 1
        elif isinstance(child, ast.comprehension):
            count += len(child.ifs)
    return count


def cyclomatic_complexity(source: str) -> int:
    """Cyclomatic complexity of a single function definition: 1 + decision points."""
    try:
        tree = ast.parse(source)
    except SyntaxError as exc:
        raise AnalysisError(f"unparseable source: {exc}") from exc
    defs = [n for n in tree.body if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))]
    if len(defs) != 1:
        raise AnalysisError(f"expected exactly one function definition, found {len(defs)}")
    return 1 + _decision_points(defs[0])


def extract_functions(code: str) -> list[dict]:
    """Return every top-level function defined by ``code``.

    Each entry has ``name``, ``docstring`` (empty string when absent),
    ``source`` (the exact definition segment), and ``complexity``. Nested
    helper definitions inside a function body are not extracted.
    """
    try:
        tree = ast.parse(code)
    except SyntaxError as exc:
        raise AnalysisError(f"unparseable source: {exc}") from exc
    functions = []
    for node in tree.body:
        if not isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            continue
        segment = ast.get_source_segment(code, node)
        functions.append(
            {
                "name": node.name,
                "docstring": ast.get_docstring(node, clean=False) or "",
                "source": segment if segment is not None else ast.unparse(node),
                "complexity": 1 + _decision_points(node),
            }
        )
    return functions


def called_names(code: str) -> list[str]:
    """Names used as call targets, in source order; dotted for attribute calls."""
    tree = ast.parse(code)
    targets = []
    for node in ast.walk(tree):
        if isinstance(node, ast.Call):
            targets.append(_call_target(node.func))
    return targets


def _call_target(func: ast.expr) -> str:
    if isinstance(func, ast.Name):
        return func.id
    if isinstance(func, ast.Attribute):
        return f"{_call_target(func.value)}.{func.attr}"
    return "<expression>"


def has_function_def(code: str) -> bool:
    """True when the code contains any function-definition construct."""
    tree = ast.parse(code)
    return any(
        isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef, ast.Lambda))
        for n in ast.walk(tree)
    )


def signature_line(source: str) -> str:
    """Render ``name(params)`` from a function definition's first def line."""
    match = _DEF_LINE_RE.search(source)
    if match is None:
        raise AnalysisError("source contains no function definition line")
    params = " ".join(match.group(2).split())
    return f"{match.group(1)}({params})"
