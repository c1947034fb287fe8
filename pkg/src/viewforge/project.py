"""Project manifests and document sets.

A manifest is a flat key/value text file listing document files,
universe bounds, the enumeration budget and scenario references::

    # final car rental project
    document CarRentalTypes.vtype
    document FinalObjectModel.vobj
    bound Branch 2
    bound Rental 2
    budget 2000000
    scenario return scenarios/return.scn

Paths are relative to the manifest.  A project holds at most one object
model and at most one lifecycle per class.
"""

from __future__ import annotations

import os
from pathlib import Path

from .documents import (
    ClassDescriptionDoc, LifecycleDoc, ObjectModelDoc, TypeDocument, doc_kind,
)
from .errors import ProjectError
from .parser import parse_document
from .universe import Universe, build_universe

DEFAULT_BUDGET = 20_000_000
DEFAULT_EXHAUSTIVE_CAP = 10_000


class DocumentSet:
    """Parsed documents of one project plus its universe parameters."""

    def __init__(self, docs=(), bounds=None, budget: int = DEFAULT_BUDGET,
                 scenarios=None, base_dir: Path | None = None,
                 exhaustive_cap: int = DEFAULT_EXHAUSTIVE_CAP):
        self.docs: dict = {}
        self.bounds: dict = dict(bounds or {})
        self.budget = budget
        self.exhaustive_cap = exhaustive_cap
        self.scenarios: dict = dict(scenarios or {})
        self.base_dir = base_dir
        self._universe: Universe | None = None
        self._env = None
        for doc in docs:
            self.add(doc)

    # -- construction -------------------------------------------------------

    def add(self, doc) -> None:
        if doc.name in self.docs:
            raise ProjectError(f"duplicate document name {doc.name!r}")
        if isinstance(doc, ObjectModelDoc) and self.object_model() is not None:
            raise ProjectError("a project holds at most one object model")
        if isinstance(doc, LifecycleDoc):
            existing = self.lifecycle_for(doc.cls)
            if existing is not None:
                raise ProjectError(
                    f"two lifecycle documents for class {doc.cls!r}: "
                    f"{existing.name!r} and {doc.name!r}")
        self.docs[doc.name] = doc
        self._universe = None
        self._env = None

    def copy(self) -> "DocumentSet":
        ds = DocumentSet(bounds=self.bounds, budget=self.budget,
                         scenarios=self.scenarios, base_dir=self.base_dir,
                         exhaustive_cap=self.exhaustive_cap)
        ds.docs = dict(self.docs)
        return ds

    def replace_doc(self, name: str, doc) -> "DocumentSet":
        if name not in self.docs:
            raise ProjectError(f"no document named {name!r}")
        ds = self.copy()
        del ds.docs[name]
        if doc.name in ds.docs:
            raise ProjectError(f"duplicate document name {doc.name!r}")
        ds.docs[doc.name] = doc
        return ds

    # -- lookup -------------------------------------------------------------

    def __len__(self) -> int:
        return len(self.docs)

    def __contains__(self, name: str) -> bool:
        return name in self.docs

    def get(self, name: str):
        return self.docs.get(name)

    def of_kind(self, kind) -> list:
        return [d for _, d in sorted(self.docs.items())
                if isinstance(d, kind)]

    def type_documents(self) -> list:
        return self.of_kind(TypeDocument)

    def object_model(self) -> ObjectModelDoc | None:
        oms = self.of_kind(ObjectModelDoc)
        return oms[0] if oms else None

    def class_documents(self) -> list:
        return self.of_kind(ClassDescriptionDoc)

    def lifecycles(self) -> list:
        return self.of_kind(LifecycleDoc)

    def lifecycle_for(self, cls: str) -> LifecycleDoc | None:
        for lc in self.lifecycles():
            if lc.cls == cls:
                return lc
        return None

    # -- semantics helpers ---------------------------------------------------

    def universe(self) -> Universe:
        if self._universe is None:
            self._universe = build_universe(self.type_documents(), self.bounds)
        return self._universe

    def signature_env(self):
        from .system_model import ensure_input_carriers, induce_signatures
        if self._env is None:
            env = induce_signatures(self.object_model(),
                                    self.class_documents())
            ensure_input_carriers(env, self.universe())
            self._env = env
        return self._env


def load_project(manifest: str | Path) -> DocumentSet:
    """Parse a manifest and every document it lists."""
    path = Path(manifest)
    if not path.is_file():
        raise ProjectError(f"manifest not found: {path}")
    base = path.parent
    ds = DocumentSet(base_dir=base)
    budget_env = os.environ.get("VIEWFORGE_BUDGET")

    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        fields = line.split()
        key, args = fields[0], fields[1:]
        try:
            if key == "document" and len(args) == 1:
                doc_path = base / args[0]
                if not doc_path.is_file():
                    raise ProjectError(f"document file not found: {doc_path}")
                ds.add(parse_document(doc_path.read_text()))
            elif key == "bound" and len(args) == 2:
                ds.bounds[args[0]] = int(args[1])
            elif key == "budget" and len(args) == 1:
                ds.budget = int(args[0])
            elif key == "exhaustive_cap" and len(args) == 1:
                ds.exhaustive_cap = int(args[0])
            elif key == "scenario" and len(args) == 2:
                ds.scenarios[args[0]] = base / args[1]
            else:
                raise ProjectError(f"bad manifest directive {line!r}")
        except ProjectError as e:
            raise ProjectError(f"{path}:{lineno}: {e}") from None
    if budget_env:
        ds.budget = int(budget_env)
    return ds
