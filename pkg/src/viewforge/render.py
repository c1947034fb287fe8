"""Canonical document rendering.

Members with set semantics (sorts, classes, relationships, attributes,
methods, states, transitions) are emitted in sorted order so that two
structurally equal documents render to identical bytes; sequences with
semantic order (enumeration literals, output patterns) keep their
declared order.  ``parse(render(d))`` structurally equals ``d``.
"""

from __future__ import annotations

from .documents import (
    ClassDescriptionDoc, LifecycleDoc, ObjectModelDoc, Relationship, Role,
    SortDef, TransitionDef, TypeDocument, MANY,
)
from .formulas import render_formula, render_sort_key, render_term


def render_document(doc) -> str:
    if isinstance(doc, TypeDocument):
        return _render_type_document(doc)
    if isinstance(doc, ObjectModelDoc):
        return _render_object_model(doc)
    if isinstance(doc, ClassDescriptionDoc):
        return _render_class_document(doc)
    if isinstance(doc, LifecycleDoc):
        return _render_lifecycle(doc)
    raise TypeError(f"not a document: {doc!r}")


def _render_sort_def(sd: SortDef) -> str:
    if sd.literals is not None:
        rhs = "{ " + " , ".join(sd.literals) + " }"
    elif sd.int_range is not None:
        rhs = f"{sd.int_range[0]} .. {sd.int_range[1]}"
    else:
        rhs = render_sort_key(sd.set_of)
        rhs = "Set " + rhs if not rhs.startswith("Set ") else rhs
    return f"  sort {sd.name} = {rhs} ;"


def _render_type_document(doc: TypeDocument) -> str:
    lines = [f"typedocument {doc.name} :"]
    for sd in sorted(doc.sorts, key=lambda s: s.name):
        lines.append(_render_sort_def(sd))
    lines.append("endtypedocument")
    return "\n".join(lines) + "\n"


def _render_role(role: Role) -> str:
    parts = [role.cls]
    if role.rolename:
        parts.append(role.rolename)
    parts.append("[*]" if role.card == MANY else "[1]")
    return " ".join(parts)


def _render_relationship(rel: Relationship) -> str:
    return f"  relationship {_render_role(rel.first)} -- {_render_role(rel.second)} ;"


def _render_object_model(doc: ObjectModelDoc) -> str:
    lines = [f"objectmodeldocument {doc.name} :", "  classes"]
    for cls in sorted(doc.classes):
        lines.append(f"    {cls} ;")
    for rel in sorted(doc.relationships,
                      key=lambda r: (r.first.key(), r.second.key())):
        lines.append(_render_relationship(rel))
    lines.append("endobjectmodeldocument")
    return "\n".join(lines) + "\n"


def _render_class_document(doc: ClassDescriptionDoc) -> str:
    lines = [f"classdocument {doc.name} :", f"  class {doc.cls} ;"]
    if doc.attributes:
        lines.append("  attributes")
        for name, sort in sorted(doc.attributes):
            lines.append(f"    {name} : {render_sort_key(sort)} ;")
    if doc.methods:
        lines.append("  methods")
        for m in sorted(doc.methods, key=lambda m: (m.name, m.arity)):
            params = " , ".join(
                f"{p} : {render_sort_key(s)}" for p, s in m.params)
            lines.append(f"    {m.name}({params}) ;")
    lines.append("endclassdocument")
    return "\n".join(lines) + "\n"


def render_transition(t: TransitionDef, indent: str = "  ") -> str:
    lines = [f"{indent}transition {t.tname} : {t.source} -> {t.target}"]
    pad = indent + "  "
    if t.input_pattern is not None:
        ip = t.input_pattern
        args = " , ".join(ip.vars)
        lines.append(f"{pad}input {ip.sender_var} ? {ip.method}({args}) ;")
    lines.append(f"{pad}pre {render_formula(t.pre)} ;")
    if t.output_patterns:
        rendered = " , ".join(render_term(m) for m in t.output_patterns)
        lines.append(f"{pad}output {rendered} ;")
    lines.append(f"{pad}post {render_formula(t.post)} ;")
    if t.havoc:
        lines.append(f"{pad}havoc {' , '.join(sorted(t.havoc))} ;")
    lines.append(f"{indent}endtransition")
    return "\n".join(lines)


def _render_lifecycle(doc: LifecycleDoc) -> str:
    lines = [f"lifecycledocument {doc.name} :", f"  class {doc.cls} ;"]
    for sname, formula in sorted(doc.states):
        lines.append(f"  state {sname} : {render_formula(formula)} ;")
    lines.append(f"  initial {' , '.join(sorted(doc.initial_states))} ;")
    for t in sorted(doc.transitions, key=lambda t: t.tname):
        lines.append(render_transition(t))
    lines.append("endlifecycledocument")
    return "\n".join(lines) + "\n"
