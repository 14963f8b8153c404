"""Regenerate AST snapshots: ``python3 tests/snapshot_tool.py``.

Only run this after a deliberate grammar change; the snapshot test exists
to catch accidental ones.
"""

import json
from pathlib import Path

from fastset.setl.ast import dump
from fastset.setl.parser import parse, parse_statements

ROOT = Path(__file__).resolve().parent.parent
CORPUS = sorted((ROOT / "testdata").glob("*/*.s*"))
SNAPSHOTS = Path(__file__).resolve().parent / "snapshots"


def snapshot_name(path: Path) -> str:
    return f"{path.parent.name}__{path.stem}.json"


def tree_of(path: Path):
    text = path.read_text()
    if path.suffix == ".stmts":
        return [dump(s) for s in parse_statements(text)]
    return dump(parse(text))


def render(tree) -> str:
    return json.dumps(tree, indent=1, sort_keys=True) + "\n"


if __name__ == "__main__":
    SNAPSHOTS.mkdir(exist_ok=True)
    for path in CORPUS:
        (SNAPSHOTS / snapshot_name(path)).write_text(render(tree_of(path)))
        print("wrote", snapshot_name(path))
