"""CPLEX LP-format export/import for binary programs.

The writer emits the subset of the format every mainstream solver reads
(objective, ``Subject To``, ``Binary``). Program metadata that the format has
no slot for (sense, objective constant) travels in leading comment lines so
that :func:`parse_lp` restores the exact program.
"""

from __future__ import annotations

import re
from pathlib import Path

from .blp import BinaryLinearProgram, Relation, Sense

_WRAP = 6


def _terms(index, coef, names) -> list[str]:
    out = []
    for i, c in zip(index, coef):
        sign = "-" if c < 0 else "+"
        out.append(f"{sign} {abs(c)!r} {names[i]}")
    return out


def _wrapped(head: str, parts: list[str]) -> str:
    lines = [head]
    for i in range(0, len(parts), _WRAP):
        lines.append("   " + " ".join(parts[i : i + _WRAP]))
    return "\n".join(lines)


def dumps_lp(p: BinaryLinearProgram) -> str:
    names = p.names
    obj = p.objective
    out = [f"\\ name: {p.name}", f"\\ sense: {p.sense.value}", f"\\ offset: {p.offset!r}", "Minimize"]
    nz = [(i, float(c)) for i, c in enumerate(obj) if c != 0.0]
    out.append(_wrapped(" obj:", _terms([i for i, _ in nz], [c for _, c in nz], names)))
    out.append("Subject To")
    for r, con in enumerate(p.constraints):
        label = con.name or f"r{r}"
        parts = _terms(con.index, con.coef, names)
        if not parts:
            if not names:
                continue
            parts = [f"+ 0.0 {names[0]}"]
        rel = con.relation.value
        out.append(_wrapped(f" {label}:", parts) + f"\n   {rel} {con.rhs!r}")
    out.append("Binary")
    for i in range(0, len(names), 10):
        out.append(" " + " ".join(names[i : i + 10]))
    out.append("End")
    return "\n".join(out) + "\n"


def export_lp(p: BinaryLinearProgram, path) -> None:
    Path(path).write_text(dumps_lp(p))


_SECTION = re.compile(r"^(minimize|minimum|min|subject\s+to|such\s+that|st|s\.t\.|binary|binaries|bin|bounds|end)$", re.I)


def _parse_linear(tokens: list[str]) -> list[tuple[str, float]]:
    terms = []
    sign, coef = 1.0, None
    for tok in tokens:
        if tok == "+":
            continue
        if tok == "-":
            sign = -sign
            continue
        try:
            coef = float(tok) if coef is None else coef * float(tok)
            continue
        except ValueError:
            pass
        terms.append((tok, sign * (1.0 if coef is None else coef)))
        sign, coef = 1.0, None
    return terms


def parse_lp(text: str) -> BinaryLinearProgram:
    meta = {}
    sections: dict[str, list[str]] = {"min": [], "st": [], "bin": [], "bounds": []}
    current = None
    for raw in text.splitlines():
        line = raw.strip()
        if line.startswith("\\"):
            m = re.match(r"\\\s*(\w+):\s*(.*)$", line)
            if m:
                meta[m.group(1)] = m.group(2).strip()
            continue
        if not line:
            continue
        if _SECTION.match(line):
            key = line.lower()
            if key.startswith("min"):
                current = "min"
            elif key.startswith("bin"):
                current = "bin"
            elif key == "bounds":
                current = "bounds"
            elif key == "end":
                current = None
            else:
                current = "st"
            continue
        if current is not None:
            sections[current].append(line)

    p = BinaryLinearProgram(Sense(meta.get("sense", "minimize")), name=meta.get("name", "blp"))
    p.offset = float(meta.get("offset", "0.0"))
    for name in " ".join(sections["bin"]).split():
        p.add_var(name)

    obj_tokens = " ".join(sections["min"]).split()
    if obj_tokens and obj_tokens[0].endswith(":"):
        obj_tokens = obj_tokens[1:]
    for name, c in _parse_linear(obj_tokens):
        i = p.var(name)
        p.set_obj(i, p.objective[i] + c)

    tokens = " ".join(sections["st"]).replace("<=", " <= ").replace(">=", " >= ").split()
    # re-join the split relations ("< =" never appears because we pad both forms)
    i = 0
    while i < len(tokens):
        label = ""
        if tokens[i].endswith(":"):
            label = tokens[i][:-1]
            i += 1
        j = i
        while tokens[j] not in ("<=", ">=", "=", "=<", "=>"):
            j += 1
        rel = {"=<": "<=", "=>": ">="}.get(tokens[j], tokens[j])
        rhs = float(tokens[j + 1])
        terms = [(p.var(n), c) for n, c in _parse_linear(tokens[i:j])]
        p.add_constraint(terms, Relation(rel), rhs, label)
        i = j + 2
    return p


def read_lp(path) -> BinaryLinearProgram:
    return parse_lp(Path(path).read_text())
