"""Generate one API reference page per public pdpsd module."""

import ast
from pathlib import Path

import mkdocs_gen_files

PACKAGE = "pdpsd"
SRC_ROOT = Path(PACKAGE)
URL_ROOT = Path("api") / PACKAGE
DOCS_ROOT = Path("docs")
SKIPPED = {"version.py", "logger.py"}


def summary(path: Path) -> str:
    """First line of the module docstring, or an empty string."""
    docstring = ast.get_docstring(ast.parse(path.read_text(encoding="utf-8")))
    return docstring.strip().splitlines()[0] if docstring else ""


def write_page(doc_path: Path, title: str, identifier: str, lead: str, source: Path) -> None:
    manual = DOCS_ROOT / doc_path
    if manual.exists():
        mkdocs_gen_files.set_edit_path(doc_path, manual)
        return
    mkdocs_gen_files.set_edit_path(doc_path, source)
    with mkdocs_gen_files.open(doc_path, "w") as f:
        f.write(f"# {title}\n\n")
        if lead:
            f.write(f"{lead}\n\n")
        f.write(f"::: {identifier}\n")


write_page(URL_ROOT / "index.md", PACKAGE, PACKAGE, "", SRC_ROOT / "__init__.py")

for path in sorted(SRC_ROOT.glob("*.py")):
    if path.name.startswith("_") or path.name in SKIPPED:
        continue
    write_page(
        (URL_ROOT / path.stem).with_suffix(".md"),
        path.stem,
        f"{PACKAGE}.{path.stem}",
        summary(path),
        path,
    )
