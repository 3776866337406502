"""Graphviz dot renderings of the pipeline's automata and transducers."""

from __future__ import annotations

from .automata import Dfa, Nfa, letter_str
from .transducer import Fst, ProductFst


def _quote(name: str) -> str:
    return '"' + name.replace('"', r"\"") + '"'


def _header(lines: list[str]) -> None:
    lines.append("  rankdir=LR;")
    lines.append("  node [shape=circle];")
    lines.append("  __init [shape=point];")


def dfa_to_dot(dfa: Dfa) -> str:
    lines = ["digraph dfa {"]
    _header(lines)
    for q in sorted(dfa.accepting):
        lines.append(f"  {_quote(dfa.state_names[q])} [shape=doublecircle];")
    lines.append(f"  __init -> {_quote(dfa.state_names[dfa.initial])};")
    for (q, letter), t in sorted(
        dfa.transitions.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))
    ):
        lines.append(
            f"  {_quote(dfa.state_names[q])} -> {_quote(dfa.state_names[t])}"
            f" [label={_quote(letter_str(letter))}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def nfa_to_dot(nfa: Nfa) -> str:
    lines = ["digraph nfa {"]
    _header(lines)
    for q in sorted(nfa.accepting):
        lines.append(f"  {_quote(nfa.state_names[q])} [shape=doublecircle];")
    for q in sorted(nfa.initials):
        lines.append(f"  __init -> {_quote(nfa.state_names[q])};")
    for (q, letter), targets in sorted(
        nfa.transitions.items(), key=lambda kv: (kv[0][0], str(kv[0][1]))
    ):
        for t in sorted(targets):
            lines.append(
                f"  {_quote(nfa.state_names[q])} -> {_quote(nfa.state_names[t])}"
                f" [label={_quote(letter_str(letter))}];"
            )
    lines.append("}")
    return "\n".join(lines) + "\n"


def fst_to_dot(fst: Fst) -> str:
    """Transducer rendering; edge labels read input/output."""
    model = fst.model
    lines = ["digraph fst {"]
    _header(lines)
    lines.append(f"  __init -> {_quote(model.states[model.top])};")
    for (src, (s, a, t)), (dst, out) in sorted(fst.transitions.items()):
        label = f"({model.states[s]},{model.actions[a]},{model.states[t]})/{out}"
        lines.append(
            f"  {_quote(model.states[src])} -> {_quote(model.states[dst])}"
            f" [label={_quote(label)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"


def product_fst_to_dot(pf: ProductFst) -> str:
    model = pf.model
    lines = ["digraph product_fst {"]
    _header(lines)
    for idx in sorted(pf.accept_sat):
        lines.append(f"  {_quote(pf.state_name(idx))} [shape=doublecircle];")
    for idx in sorted(pf.accept_vio):
        lines.append(
            f"  {_quote(pf.state_name(idx))} [shape=doublecircle, style=dashed];"
        )
    lines.append(f"  __init -> {_quote(pf.state_name(pf.initial))};")
    for (src, (s, a, t)), (dst, out) in sorted(pf.transitions.items()):
        label = f"({model.states[s]},{model.actions[a]},{model.states[t]})/{out}"
        lines.append(
            f"  {_quote(pf.state_name(src))} -> {_quote(pf.state_name(dst))}"
            f" [label={_quote(label)}];"
        )
    lines.append("}")
    return "\n".join(lines) + "\n"
