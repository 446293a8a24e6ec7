"""Static analysis of executed snippets: function extraction and complexity.

The supervisor ships an equivalent analyzer for its in-process mock; the two
are kept behaviorally identical but deliberately unshared, since this
package talks to the supervisor only over the wire protocol.
"""

from __future__ import annotations

import ast
import re

_DEF_LINE_RE = re.compile(r"^\s*(?:async\s+)?def\s+(\w+)\s*\(([^)]*)\)", re.MULTILINE)


def decision_points(node: ast.AST) -> int:
    """Count decision points: conditionals, loops, exception handlers,
    boolean short-circuit operator occurrences, comprehension filters."""
    count = 0
    for child in ast.walk(node):
        if isinstance(child, (ast.If, ast.IfExp)):
            count += 1
        elif isinstance(child, (ast.For, ast.AsyncFor, ast.While)):
            count += 1
        elif isinstance(child, ast.ExceptHandler):
            count += 1
        elif isinstance(child, ast.BoolOp):
            count += len(child.values) - 1
        elif isinstance(child, ast.comprehension):
            count += len(child.ifs)
    return count


def cyclomatic_complexity(source: str) -> int:
    """Complexity of a single function definition: 1 + decision points."""
    tree = ast.parse(source)
    defs = [n for n in tree.body if isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef))]
    if len(defs) != 1:
        raise ValueError(f"expected exactly one function definition, found {len(defs)}")
    return 1 + decision_points(defs[0])


def extract_functions(code: str) -> list[dict]:
    """Top-level function definitions with docstring, source, and complexity."""
    tree = ast.parse(code)
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
                "complexity": 1 + decision_points(node),
            }
        )
    return functions


def called_names(code: str) -> list[str]:
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
    tree = ast.parse(code)
    return any(
        isinstance(n, (ast.FunctionDef, ast.AsyncFunctionDef, ast.Lambda))
        for n in ast.walk(tree)
    )


def definitions_only(tree: ast.Module) -> bool:
    allowed = (
        ast.FunctionDef,
        ast.AsyncFunctionDef,
        ast.ClassDef,
        ast.Import,
        ast.ImportFrom,
        ast.Assign,
        ast.AnnAssign,
    )
    for node in tree.body:
        if isinstance(node, ast.Expr) and isinstance(node.value, ast.Constant):
            continue  # module docstring
        if not isinstance(node, allowed):
            return False
    return True


def signature_line(source: str) -> str:
    match = _DEF_LINE_RE.search(source)
    if match is None:
        raise ValueError("source contains no function definition line")
    params = " ".join(match.group(2).split())
    return f"{match.group(1)}({params})"
