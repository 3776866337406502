"""Constrained planning on the product of the model, the task DFA and the
opaque-observations DFA.

The product state tracks the model state, the task DFA state (fed the
label of each state as it is entered) and the opaque-observations DFA
state (fed the emitted observation symbols, markers included).  One reward
marks entering the task's accepting set, the other marks terminating while
the observation produced so far, closed with the end marker, is opaque.
The occupancy-measure LP maximizes the expected opacity (or transparency)
reward subject to flow conservation and a task-probability threshold.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.optimize import linprog

from .automata import Dfa, IncompleteDfaError
from .model import END, Model, START

#: cap on each occupancy variable; tames zero-reward recirculating rays
DEFAULT_OCCUPANCY_BOUND = 1e6

FEASIBILITY_TOL = 1e-9


class PlannerError(ValueError):
    pass


@dataclass(frozen=True)
class ProductMdp:
    """Reachable product of model x task DFA x opaque-observations DFA."""

    model: Model
    task: Dfa
    opaque: Dfa
    states: tuple[tuple[int, int, int], ...]  # (s, q, q_hat)
    index: Mapping[tuple[int, int, int], int]
    # (state, action) -> ((successor, probability), ...)
    transitions: Mapping[tuple[int, int], tuple[tuple[int, float], ...]]
    initial: int
    absorbing: frozenset[int]
    # expected immediate task reward of (state, action): crossing into F
    task_coef: Mapping[tuple[int, int], float]
    # opaque DFA states from which reading the end marker accepts
    opaque_on_end: frozenset[int]

    @property
    def n_states(self) -> int:
        return len(self.states)

    def enabled(self, v: int) -> tuple[int, ...]:
        if v in self.absorbing:
            return ()
        s = self.states[v][0]
        return self.model.enabled(s)

    def reward_opaque(self, v: int, a: int) -> float:
        if a != self.model.a_bot:
            return 0.0
        return 1.0 if self.states[v][2] in self.opaque_on_end else 0.0

    def state_name(self, v: int) -> str:
        s, q, qh = self.states[v]
        return f"{self.model.states[s]}|{q}|{qh}"

    def task_accepting(self, v: int) -> bool:
        return self.states[v][1] in self.task.accepting

    def opaque_accepting(self, v: int) -> bool:
        """Whether the q_hat component is accepting (meaningful after the
        end marker, i.e. at absorbing states)."""
        return self.states[v][2] in self.opaque.accepting


def product_mdp(model: Model, task: Dfa, opaque: Dfa) -> ProductMdp:
    """Build the reachable product with both reward structures wired in."""
    _check_complete(task, model.label_alphabet(), "task")
    _check_complete(opaque, model.observation_alphabet(), "opaque-observations")

    a_top, a_bot, bot = model.a_top, model.a_bot, model.bot
    v0 = (model.top, task.initial, opaque.initial)
    index: dict[tuple[int, int, int], int] = {v0: 0}
    states: list[tuple[int, int, int]] = [v0]
    transitions: dict[tuple[int, int], tuple[tuple[int, float], ...]] = {}
    task_coef: dict[tuple[int, int], float] = {}
    frontier = [0]
    while frontier:
        v = frontier.pop(0)
        s, q, qh = states[v]
        if s == bot:
            continue
        for a in model.enabled(s):
            row: dict[int, float] = {}
            coef = 0.0
            for t, p in model.successors(s, a):
                if a == a_bot:
                    q2 = q
                    qh2 = opaque.step(qh, END)
                else:
                    q2 = task.step(q, model.label_of(t))
                    qh2 = opaque.step(qh, START if a == a_top else model.obs(s, a, t))
                if q2 is None or qh2 is None:
                    raise PlannerError("automaton fell off a transition; DFA incomplete")
                nxt = (t, q2, qh2)
                w = index.get(nxt)
                if w is None:
                    w = len(states)
                    index[nxt] = w
                    states.append(nxt)
                    frontier.append(w)
                row[w] = row.get(w, 0.0) + p
                if q not in task.accepting and q2 in task.accepting:
                    coef += p
            transitions[(v, a)] = tuple(sorted(row.items()))
            if coef:
                task_coef[(v, a)] = coef

    absorbing = frozenset(i for i, (s, _q, _qh) in enumerate(states) if s == bot)
    opaque_on_end = frozenset(
        qh
        for qh in range(opaque.n_states)
        if opaque.step(qh, END) in opaque.accepting
    )
    return ProductMdp(
        model=model,
        task=task,
        opaque=opaque,
        states=tuple(states),
        index=index,
        transitions=transitions,
        initial=0,
        absorbing=absorbing,
        task_coef=task_coef,
        opaque_on_end=opaque_on_end,
    )


def _check_complete(dfa: Dfa, letters, what: str) -> None:
    for q in range(dfa.n_states):
        for letter in letters:
            if dfa.step(q, letter) is None:
                raise IncompleteDfaError(
                    f"{what} DFA has no move from {dfa.state_names[q]} on {letter!r}"
                )
    if what == "opaque-observations":
        for q in range(dfa.n_states):
            for marker in (START, END):
                if dfa.step(q, marker) is None:
                    raise IncompleteDfaError(f"{what} DFA lacks marker moves")


@dataclass(frozen=True)
class LpProblem:
    """Occupancy-measure LP over the non-absorbing product states.

    One conservation row per state: occupancy out equals occupancy in plus
    the unit injection at the initial state.  The task row lower-bounds the
    expected number of entries into the task's accepting set.
    """

    pm: ProductMdp
    epsilon: float
    mode: str  # "opacity" | "transparency" | "min-opacity"
    variables: tuple[tuple[int, int], ...]  # (state, action)
    var_index: Mapping[tuple[int, int], int]
    rows: tuple[int, ...]  # non-absorbing states, row order
    objective: np.ndarray
    maximize: bool
    a_eq: sp.csr_matrix
    b_eq: np.ndarray
    task_row: np.ndarray
    occupancy_bound: float

    def variable_name(self, j: int) -> str:
        v, a = self.variables[j]
        return f"m_v{v}_a{a}"


def build_lp(
    pm: ProductMdp,
    epsilon: float,
    mode: str = "opacity",
    occupancy_bound: float = DEFAULT_OCCUPANCY_BOUND,
) -> LpProblem:
    """Assemble the LP for one of three objectives.

    ``opacity`` maximizes the probability of terminating with an opaque
    observation; ``transparency`` maximizes terminating with a transparent
    one (every terminated run is one or the other); ``min-opacity`` is the
    literal minimization of the opacity objective, kept for comparison.
    """
    if mode not in ("opacity", "transparency", "min-opacity"):
        raise PlannerError(f"unknown mode {mode!r}")
    rows = tuple(v for v in range(pm.n_states) if v not in pm.absorbing)
    row_of = {v: i for i, v in enumerate(rows)}
    variables = tuple(
        (v, a) for v in rows for a in pm.enabled(v)
    )
    var_index = {va: j for j, va in enumerate(variables)}

    data, ri, ci = [], [], []
    for j, (v, a) in enumerate(variables):
        data.append(1.0)
        ri.append(row_of[v])
        ci.append(j)
        for t, p in pm.transitions[(v, a)]:
            if t in pm.absorbing:
                continue
            data.append(-p)
            ri.append(row_of[t])
            ci.append(j)
    a_eq = sp.csr_matrix(
        (data, (ri, ci)), shape=(len(rows), len(variables))
    )
    b_eq = np.zeros(len(rows))
    b_eq[row_of[pm.initial]] = 1.0

    task_row = np.zeros(len(variables))
    for (v, a), coef in pm.task_coef.items():
        task_row[var_index[(v, a)]] = coef

    objective = np.zeros(len(variables))
    a_bot = pm.model.a_bot
    for j, (v, a) in enumerate(variables):
        if a != a_bot:
            continue
        opaque_here = pm.states[v][2] in pm.opaque_on_end
        if mode == "transparency":
            objective[j] = 0.0 if opaque_here else 1.0
        else:
            objective[j] = 1.0 if opaque_here else 0.0

    return LpProblem(
        pm=pm,
        epsilon=float(epsilon),
        mode=mode,
        variables=variables,
        var_index=var_index,
        rows=rows,
        objective=objective,
        maximize=(mode != "min-opacity"),
        a_eq=a_eq,
        b_eq=b_eq,
        task_row=task_row,
        occupancy_bound=float(occupancy_bound),
    )


@dataclass
class PolicySolution:
    status: str  # "optimal" | "infeasible" | "numerical-failure"
    objective: float | None
    occupancy: np.ndarray | None
    lp: LpProblem
    iterations: int = 0
    message: str = ""
    max_feasible_epsilon: float | None = None
    flow_residual: float | None = None

    def occupancy_of(self, v: int, a: int) -> float:
        j = self.lp.var_index.get((v, a))
        return 0.0 if j is None or self.occupancy is None else float(self.occupancy[j])


_HIGHS_OPTIONS = {
    "primal_feasibility_tolerance": FEASIBILITY_TOL,
    "dual_feasibility_tolerance": FEASIBILITY_TOL,
}


def solve_lp(lp: LpProblem) -> PolicySolution:
    """Solve with the HiGHS backend; on infeasibility, report the largest
    attainable task threshold from a presolve that maximizes the task row."""
    n = len(lp.variables)
    sign = -1.0 if lp.maximize else 1.0
    res = linprog(
        c=sign * lp.objective,
        A_ub=sp.csr_matrix(-lp.task_row.reshape(1, n)),
        b_ub=np.array([-lp.epsilon]),
        A_eq=lp.a_eq,
        b_eq=lp.b_eq,
        bounds=(0.0, lp.occupancy_bound),
        method="highs",
        options=_HIGHS_OPTIONS,
    )
    iterations = int(getattr(res, "nit", 0) or 0)
    if res.status == 2:
        pre = linprog(
            c=-lp.task_row,
            A_eq=lp.a_eq,
            b_eq=lp.b_eq,
            bounds=(0.0, lp.occupancy_bound),
            method="highs",
            options=_HIGHS_OPTIONS,
        )
        best = float(-pre.fun) if pre.status == 0 else None
        return PolicySolution(
            status="infeasible",
            objective=None,
            occupancy=None,
            lp=lp,
            iterations=iterations,
            message=res.message,
            max_feasible_epsilon=best,
        )
    if res.status != 0:
        return PolicySolution(
            status="numerical-failure",
            objective=None,
            occupancy=None,
            lp=lp,
            iterations=iterations,
            message=res.message,
        )
    occupancy = np.asarray(res.x)
    residual = float(np.max(np.abs(lp.a_eq @ occupancy - lp.b_eq))) if n else 0.0
    return PolicySolution(
        status="optimal",
        objective=float(lp.objective @ occupancy),
        occupancy=occupancy,
        lp=lp,
        iterations=iterations,
        message=res.message,
        flow_residual=residual,
    )


ZERO_OCCUPANCY_THRESHOLD = 1e-12


def extract_policy(sol: PolicySolution, pm: ProductMdp) -> dict[int, dict[int, float]]:
    """Normalize occupancies into a stationary randomized policy.

    States the solution never visits fall back to immediate termination
    when available (conservative: it leaks nothing further), else to a
    uniform choice.
    """
    if sol.status != "optimal":
        raise PlannerError(f"cannot extract a policy from a {sol.status} solution")
    policy: dict[int, dict[int, float]] = {}
    a_bot = pm.model.a_bot
    for v in range(pm.n_states):
        if v in pm.absorbing:
            continue
        actions = pm.enabled(v)
        weights = np.array([max(sol.occupancy_of(v, a), 0.0) for a in actions])
        total = float(weights.sum())
        if total > ZERO_OCCUPANCY_THRESHOLD:
            probs = weights / total
        elif a_bot in actions:
            probs = np.array([1.0 if a == a_bot else 0.0 for a in actions])
        else:
            probs = np.full(len(actions), 1.0 / len(actions))
        probs = probs / probs.sum()
        policy[v] = {a: float(p) for a, p in zip(actions, probs)}
    return policy


# ---------------------------------------------------------------------------
# CPLEX LP text export


def _num(x: float) -> str:
    return format(x, ".17g")


def export_lp(lp: LpProblem) -> str:
    """Render in CPLEX LP text form, deterministically ordered.

    Re-exporting the same problem yields byte-identical text, so the file
    can serve as a cross-solver fixture.
    """
    lines: list[str] = []
    lines.append("\\ occupancy-measure planning problem")
    lines.append(f"\\ mode={lp.mode} epsilon={_num(lp.epsilon)}")
    lines.append("Maximize" if lp.maximize else "Minimize")
    terms = [
        ("+ " if c >= 0 else "- ") + f"{_num(abs(c))} {lp.variable_name(j)}"
        for j, c in enumerate(lp.objective)
        if c != 0.0
    ]
    if not terms:
        terms = [f"+ 0 {lp.variable_name(0)}"] if lp.variables else ["+ 0 m_zero"]
    lines.extend(_wrap_terms("obj:", terms))
    lines.append("Subject To")
    a_coo = lp.a_eq.tocoo()
    by_row: dict[int, list[tuple[int, float]]] = {}
    for r, c, v in zip(a_coo.row, a_coo.col, a_coo.data):
        by_row.setdefault(int(r), []).append((int(c), float(v)))
    for i, v_state in enumerate(lp.rows):
        entries = sorted(by_row.get(i, []))
        terms = [
            ("+ " if v >= 0 else "- ") + f"{_num(abs(v))} {lp.variable_name(c)}"
            for c, v in entries
        ]
        rhs = _num(lp.b_eq[i])
        lines.extend(_wrap_terms(f"flow_v{v_state}:", terms, f"= {rhs}"))
    task_terms = [
        f"+ {_num(c)} {lp.variable_name(j)}"
        for j, c in enumerate(lp.task_row)
        if c != 0.0
    ]
    if task_terms:
        lines.extend(_wrap_terms("task:", task_terms, f">= {_num(lp.epsilon)}"))
    lines.append("Bounds")
    for j in range(len(lp.variables)):
        lines.append(f" 0 <= {lp.variable_name(j)} <= {_num(lp.occupancy_bound)}")
    lines.append("End")
    return "\n".join(lines) + "\n"


def _wrap_terms(head: str, terms: list[str], tail: str | None = None, width: int = 200):
    lines = [" " + head]
    for term in terms:
        if len(lines[-1]) + 1 + len(term) > width:
            lines.append("  " + term)
        else:
            lines[-1] += " " + term
    if tail is not None:
        lines[-1] += " " + tail
    return lines


# ---------------------------------------------------------------------------
# policy files


def policy_to_dict(
    policy: Mapping[int, Mapping[int, float]],
    pm: ProductMdp,
    metadata: Mapping | None = None,
) -> dict:
    body = {
        pm.state_name(v): {
            pm.model.actions[a]: p for a, p in sorted(dist.items())
        }
        for v, dist in sorted(policy.items())
    }
    return {"metadata": dict(metadata or {}), "policy": body}


def policy_from_dict(doc: Mapping, pm: ProductMdp) -> dict[int, dict[int, float]]:
    names = {pm.state_name(v): v for v in range(pm.n_states)}
    out: dict[int, dict[int, float]] = {}
    for key, dist in doc["policy"].items():
        v = names.get(key)
        if v is None:
            raise PlannerError(f"policy references unknown product state {key!r}")
        out[v] = {pm.model.action_index[a]: float(p) for a, p in dist.items()}
    missing = [
        pm.state_name(v)
        for v in range(pm.n_states)
        if v not in pm.absorbing and v not in out
    ]
    if missing:
        raise PlannerError(
            f"policy does not cover {len(missing)} reachable states, e.g. {missing[0]!r}"
        )
    return out


def save_policy(
    policy: Mapping[int, Mapping[int, float]],
    pm: ProductMdp,
    path: str | Path,
    metadata: Mapping | None = None,
) -> None:
    Path(path).write_text(
        json.dumps(policy_to_dict(policy, pm, metadata), indent=2, sort_keys=True) + "\n"
    )


def load_policy(path: str | Path, pm: ProductMdp) -> tuple[dict[int, dict[int, float]], dict]:
    doc = json.loads(Path(path).read_text())
    return policy_from_dict(doc, pm), doc.get("metadata", {})
