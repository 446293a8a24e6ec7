"""Built-in human actions: framework primitives, shipped plugins, and the
declared-but-not-shipped tool catalog.

The two framework primitives (terminal answer + action retrieval) are
installed natively by the execution kernel; their sources here exist so the
prompt and the library browser have something to show. Plugin tools are
ordinary action JSON files dropped into ``<library>/plugins/``; this module
ships two minimal ones and declares the rest of the conventional web/visual
tool set by name and description only.
"""

from __future__ import annotations

import json
from pathlib import Path

from .analysis import cyclomatic_complexity
from .core import ActionRecord, Origin, utc_now_iso

# Names the kernel installs itself; never sent as load requests.
FRAMEWORK_PRIMITIVES = ("submit_final_answer", "get_relevant_actions")

_SUBMIT_SOURCE = '''\
def submit_final_answer(answer):
    """Submits the final answer to the given problem."""
    raise RuntimeError("provided by the execution kernel")
'''

_RETRIEVE_SOURCE = '''\
def get_relevant_actions(query, k=None):
    """Retrieve the k most relevant generated actions given a query."""
    raise RuntimeError("provided by the execution kernel")
'''

_DOWNLOAD_FILE_SOURCE = '''\
def download_file(url, path=None):
    """Download a file at a given URL."""
    import os
    import urllib.request
    if path is None:
        path = os.path.basename(url.split("?")[0]) or "download.bin"
    urllib.request.urlretrieve(url, path)
    return os.path.abspath(path)
'''

_INSPECT_FILE_SOURCE = '''\
def inspect_file_as_text(file_path):
    """Read a file and return its content as Markdown text."""
    import csv
    import os
    ext = os.path.splitext(file_path)[1].lower()
    if ext == ".csv":
        with open(file_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if not rows:
            return ""
        lines = ["| " + " | ".join(row) + " |" for row in rows]
        separator = "| " + " | ".join("---" for _ in rows[0]) + " |"
        return "\\n".join([lines[0], separator] + lines[1:])
    with open(file_path, encoding="utf-8", errors="replace") as fh:
        return fh.read()
'''

# Conventional web/visual tool set: name -> (description, shipped source or None).
# Unshipped entries are declared so deployments can plug in their own
# implementations under the same names.
TOOL_CATALOG: dict[str, tuple[str, str | None]] = {
    "submit_final_answer": ("Submits the final answer to the given problem.", _SUBMIT_SOURCE),
    "get_relevant_actions": (
        "Retrieve the k most relevant generated actions given a query.",
        _RETRIEVE_SOURCE,
    ),
    "informational_web_search": (
        "Perform an informational web search query then return the search results.",
        None,
    ),
    "navigational_web_search": (
        "Perform a navigational web search query then immediately navigate to the top result.",
        None,
    ),
    "visit_page": ("Visit a webpage at a given URL and return its text.", None),
    "download_file": ("Download a file at a given URL.", _DOWNLOAD_FILE_SOURCE),
    "page_up": (
        "Scroll the viewport up in the current webpage and return the new viewport content.",
        None,
    ),
    "page_down": (
        "Scroll the viewport down in the current webpage and return the new viewport content.",
        None,
    ),
    "find_on_page_ctrl_f": (
        "Scroll the viewport to the first occurrence of the search string.",
        None,
    ),
    "find_next": ("Scroll the viewport to next occurrence of the search string.", None),
    "find_archived_url": (
        "Given a url, searches the Wayback Machine and returns the archived version "
        "of the url that's closest in time to the desired date.",
        None,
    ),
    "visualizer": ("Answer question about a given image.", None),
    "inspect_file_as_text": (
        "Read a file and return its content as Markdown text.",
        _INSPECT_FILE_SOURCE,
    ),
}

SHIPPED_PLUGINS = ("download_file", "inspect_file_as_text")


def primitive_records() -> list[ActionRecord]:
    """The two framework primitives, always present in the human set."""
    return [
        _human_record("submit_final_answer", _SUBMIT_SOURCE),
        _human_record("get_relevant_actions", _RETRIEVE_SOURCE),
    ]


def _human_record(name: str, source: str) -> ActionRecord:
    description, _ = TOOL_CATALOG[name]
    return ActionRecord(
        name=name,
        docstring=description,
        source=source,
        origin=Origin.HUMAN,
        complexity=_safe_complexity(source),
    )


def _safe_complexity(source: str) -> int | None:
    try:
        return cyclomatic_complexity(source)
    except Exception:
        return None


def install_builtin_plugins(storage_dir: str | Path) -> list[str]:
    """Write the shipped plugin action files into ``storage_dir/plugins/``.

    Returns the installed names. Existing files are overwritten.
    """
    plugins_dir = Path(storage_dir) / "plugins"
    plugins_dir.mkdir(parents=True, exist_ok=True)
    installed = []
    for name in SHIPPED_PLUGINS:
        description, source = TOOL_CATALOG[name]
        record = {
            "name": name,
            "docstring": description,
            "source": source,
            "origin": Origin.HUMAN.value,
            "created_by_task": None,
            "created_at": utc_now_iso(),
            "complexity": _safe_complexity(source),
        }
        path = plugins_dir / f"{name}.json"
        path.write_text(
            json.dumps(record, ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        installed.append(name)
    return installed
