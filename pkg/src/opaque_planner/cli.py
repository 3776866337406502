"""Command-line front end.

Subcommands: build, plan, simulate, verify, scenario, export-lp,
export-dot.  Every output artifact embeds the run manifest that produced
it.  Exit codes: 0 success, 1 input error, 2 infeasible threshold,
3 numerical failure, 4 oracle discrepancy.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import os
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path

from . import __version__
from .automata import AutomatonError, Dfa, dfa_from_dict, dfa_to_dict
from .dot import dfa_to_dot, fst_to_dot, nfa_to_dot, product_fst_to_dot
from .ltlf import LtlfError, dfa_over_model_labels
from .model import Model, ModelError, dumps_model, load_model, validate
from .planner import (
    PlannerError,
    build_lp,
    export_lp,
    extract_policy,
    load_policy,
    policy_to_dict,
    product_mdp,
    solve_lp,
)
from .scenarios import GridworldConfig, gridworld, load_config, running_example, save_config
from .simulate import (
    SimulationError,
    brute_force_opaque_obs,
    observation_buckets,
    rollout,
)
from .transducer import build_obs_fst, opaque_pipeline, output_nfa, product_fst

log = logging.getLogger("opaque_planner")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_INFEASIBLE = 2
EXIT_NUMERICAL = 3
EXIT_DISCREPANCY = 4


class CliError(Exception):
    pass


@dataclass
class RunManifest:
    """Everything needed to reproduce one invocation, embedded verbatim in
    each output artifact."""

    tool: str
    version: str
    command: str
    model_file: str | None = None
    model_sha256: str | None = None
    task: str | None = None
    secret: str | None = None
    opaque_file: str | None = None
    epsilon: float | None = None
    mode: str | None = None
    seed: int | None = None
    runs: int | None = None
    horizon: int | None = None
    max_actions: int | None = None
    threads: int | None = None
    out: str | None = None

    def to_dict(self) -> dict:
        return {k: v for k, v in asdict(self).items() if v is not None}


def _sha256(path: str) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _load_validated_model(path: str) -> Model:
    model = load_model(path)
    problems = validate(model)
    if problems:
        raise CliError(
            "model fails validation:\n  " + "\n  ".join(problems[:20])
        )
    return model


def _secret_dfa(model: Model, spec: str) -> Dfa:
    """A secret/task argument is either an LTLf formula or a DFA file."""
    if os.path.exists(spec):
        doc = json.loads(Path(spec).read_text())
        return dfa_from_dict(doc)
    return dfa_over_model_labels(spec, model)


def _opaque_dfa_for(model: Model, args) -> Dfa:
    if getattr(args, "opaque", None):
        doc = json.loads(Path(args.opaque).read_text())
        return dfa_from_dict(doc)
    return opaque_pipeline(model, _secret_dfa(model, args.secret)).dfa


def _write(path: str | None, text: str) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        Path(path).write_text(text)


# ---------------------------------------------------------------------------
# subcommands


def cmd_build(args) -> int:
    model = _load_validated_model(args.model)
    secret = _secret_dfa(model, args.secret)
    build = opaque_pipeline(model, secret, via_dfa_product=args.via_dfa_product)
    if not build.dfa.has_reachable_accepting():
        print("warning: the opaque-observations language is empty", file=sys.stderr)
    manifest = RunManifest(
        tool="opaque-planner",
        version=__version__,
        command="build",
        model_file=args.model,
        model_sha256=_sha256(args.model),
        secret=args.secret,
        out=args.out,
    )
    doc = dfa_to_dict(build.dfa, "observations")
    doc["stats"] = {
        "nfa_states": build.nfa_states,
        "dfa_states": build.dfa_states,
        "minimized_states": build.minimized_states,
        "seconds": build.seconds,
    }
    doc["manifest"] = manifest.to_dict()
    _write(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    print(
        f"opaque-observations DFA: nfa_states={build.nfa_states} "
        f"dfa_states={build.dfa_states} minimized_states={build.minimized_states} "
        f"seconds={build.seconds:.4f}"
    )
    return EXIT_OK


def cmd_plan(args) -> int:
    model = _load_validated_model(args.model)
    task = _secret_dfa(model, args.task)
    opaque = _opaque_dfa_for(model, args)
    pm = product_mdp(model, task, opaque)
    mode = "min-opacity" if args.literal_min else args.mode
    lp = build_lp(pm, args.epsilon, mode, occupancy_bound=args.occupancy_bound)
    sol = solve_lp(lp)
    if sol.status == "infeasible":
        hint = (
            f"; largest feasible threshold is about {sol.max_feasible_epsilon:.6f}"
            if sol.max_feasible_epsilon is not None
            else ""
        )
        print(f"infeasible at epsilon={args.epsilon:.4f}{hint}", file=sys.stderr)
        return EXIT_INFEASIBLE
    if sol.status != "optimal":
        print(f"solver failure: {sol.message}", file=sys.stderr)
        return EXIT_NUMERICAL
    policy = extract_policy(sol, pm)
    manifest = RunManifest(
        tool="opaque-planner",
        version=__version__,
        command="plan",
        model_file=args.model,
        model_sha256=_sha256(args.model),
        task=args.task,
        secret=args.secret,
        opaque_file=args.opaque,
        epsilon=args.epsilon,
        mode=mode,
        out=args.out,
    )
    metadata = {
        "manifest": manifest.to_dict(),
        "epsilon": args.epsilon,
        "mode": mode,
        "objective": sol.objective,
        "solver": {
            "status": sol.status,
            "iterations": sol.iterations,
            "flow_residual": sol.flow_residual,
        },
        "product_states": pm.n_states,
        "variables": len(lp.variables),
    }
    if args.out:
        Path(args.out).write_text(
            json.dumps(policy_to_dict(policy, pm, metadata), indent=2, sort_keys=True)
            + "\n"
        )
    print(f"{args.epsilon:.4f} {sol.objective:.4f}")
    return EXIT_OK


def cmd_simulate(args) -> int:
    if args.runs < 1:
        raise CliError("--runs must be a positive integer")
    model = _load_validated_model(args.model)
    doc = json.loads(Path(args.policy).read_text())
    meta = doc.get("metadata", {})
    manifest = meta.get("manifest", {})
    if manifest.get("model_sha256") and manifest["model_sha256"] != _sha256(args.model):
        raise CliError("policy was planned against a different model file")
    task_spec = args.task or manifest.get("task")
    secret_spec = args.secret or manifest.get("secret")
    opaque_file = args.opaque or manifest.get("opaque_file")
    if task_spec is None or (secret_spec is None and opaque_file is None):
        raise CliError("policy metadata lacks task/secret; pass --task/--secret")
    task = _secret_dfa(model, task_spec)
    if opaque_file:
        opaque = dfa_from_dict(json.loads(Path(opaque_file).read_text()))
    else:
        opaque = opaque_pipeline(model, _secret_dfa(model, secret_spec)).dfa
    pm = product_mdp(model, task, opaque)
    from .planner import policy_from_dict

    policy = policy_from_dict(doc, pm)
    stats = rollout(
        pm, policy, runs=args.runs, seed=args.seed,
        horizon=args.horizon, threads=args.threads,
    )
    mode = meta.get("mode", "opacity")
    shown = stats.pt if mode == "transparency" else stats.ph
    objective = meta.get("objective")
    obj_text = f"{objective:.4f}" if objective is not None else "   -  "
    eps = meta.get("epsilon")
    eps_text = f"{eps:.4f}" if eps is not None else "   -  "
    print("threshold  max_value  exp_value  exp_task")
    print(f"{eps_text}     {obj_text}     {shown:.4f}     {stats.p_task:.4f}")
    out_doc = {
        "manifest": RunManifest(
            tool="opaque-planner",
            version=__version__,
            command="simulate",
            model_file=args.model,
            model_sha256=_sha256(args.model),
            seed=args.seed,
            runs=args.runs,
            horizon=args.horizon,
            threads=args.threads,
            out=args.out,
        ).to_dict(),
        "policy_metadata": meta,
        "stats": stats.to_dict(),
    }
    if args.out:
        Path(args.out).write_text(json.dumps(out_doc, indent=2, sort_keys=True) + "\n")
    return EXIT_OK


def cmd_verify(args) -> int:
    model = _load_validated_model(args.model)
    secret = _secret_dfa(model, args.secret)
    opaque = _opaque_dfa_for(model, args)
    buckets = observation_buckets(model, secret, args.max_actions)
    oracle = frozenset(w for w, (sat, vio) in buckets.items() if sat and vio)
    ordered = sorted(buckets, key=lambda w: tuple(sym.sort_key for sym in w))
    mismatches = [w for w in ordered if opaque.accepts(w) != (w in oracle)]
    print(
        f"realizable observations: {len(buckets)}; opaque (oracle): {len(oracle)}; "
        f"discrepancies: {len(mismatches)}"
    )
    if mismatches:
        sample = " ".join(str(sym) for sym in mismatches[0])
        print(f"counterexample: {sample}", file=sys.stderr)
        return EXIT_DISCREPANCY
    return EXIT_OK


def cmd_scenario(args) -> int:
    if args.name == "running-example":
        model = running_example()
    elif args.name == "gridworld":
        if args.emit_default_config:
            cfg = GridworldConfig()
            if args.out:
                save_config(cfg, args.out)
            else:
                from .scenarios import config_to_dict

                print(json.dumps(config_to_dict(cfg), indent=2, sort_keys=True))
            return EXIT_OK
        cfg = load_config(args.config) if args.config else GridworldConfig()
        model = gridworld(cfg)
    else:  # pragma: no cover - argparse restricts choices
        raise CliError(f"unknown scenario {args.name!r}")
    _write(args.out, dumps_model(model))
    return EXIT_OK


def cmd_export_lp(args) -> int:
    model = _load_validated_model(args.model)
    task = _secret_dfa(model, args.task)
    opaque = _opaque_dfa_for(model, args)
    pm = product_mdp(model, task, opaque)
    mode = "min-opacity" if args.literal_min else args.mode
    lp = build_lp(pm, args.epsilon, mode, occupancy_bound=args.occupancy_bound)
    _write(args.out, export_lp(lp))
    return EXIT_OK


def cmd_export_dot(args) -> int:
    if args.dfa:
        doc = json.loads(Path(args.dfa).read_text())
        _write(args.out, dfa_to_dot(dfa_from_dict(doc)))
        return EXIT_OK
    model = _load_validated_model(args.model)
    what = args.what
    if what == "fst":
        text = fst_to_dot(build_obs_fst(model))
    else:
        if not args.secret:
            raise CliError(f"--secret is required for --what {what}")
        secret = _secret_dfa(model, args.secret)
        if what == "product-fst":
            text = product_fst_to_dot(product_fst(build_obs_fst(model), secret))
        elif what in ("nfa-satisfying", "nfa-violating"):
            pf = product_fst(build_obs_fst(model), secret)
            which = "satisfying" if what == "nfa-satisfying" else "violating"
            text = nfa_to_dot(output_nfa(pf, which))
        elif what == "opaque-dfa":
            text = dfa_to_dot(opaque_pipeline(model, secret).dfa)
        else:  # pragma: no cover
            raise CliError(f"unknown --what {what!r}")
    _write(args.out, text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# argument parsing


def _add_common_planning(p: argparse.ArgumentParser) -> None:
    p.add_argument("--model", required=True, help="model JSON file")
    p.add_argument("--task", required=True, help="task formula or DFA file")
    p.add_argument("--secret", help="secret formula or DFA file")
    p.add_argument("--opaque", help="prebuilt opaque-observations DFA file")
    p.add_argument("--epsilon", type=float, default=0.0, help="task threshold")
    p.add_argument(
        "--mode", choices=("opacity", "transparency"), default="opacity"
    )
    p.add_argument(
        "--literal-min",
        action="store_true",
        help="literal minimization of the opacity objective (comparison mode)",
    )
    p.add_argument(
        "--occupancy-bound", type=float, default=1e6,
        help="upper bound on each occupancy variable",
    )


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="opaque-planner",
        description=(
            "Synthesize randomized policies that maximize probabilistic "
            "opacity or transparency subject to a task threshold."
        ),
    )
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="subcommand", required=True)

    p = sub.add_parser("build", help="construct the opaque-observations DFA")
    p.add_argument("--model", required=True)
    p.add_argument("--secret", required=True, help="secret formula or DFA file")
    p.add_argument("--via-dfa-product", action="store_true",
                   help="determinize before intersecting (cross-check route)")
    p.add_argument("--out", help="output DFA JSON path")
    p.set_defaults(func=cmd_build)

    p = sub.add_parser("plan", help="solve the constrained planning LP")
    _add_common_planning(p)
    p.add_argument("--out", help="policy JSON path")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("simulate", help="Monte-Carlo rollout of a policy")
    p.add_argument("--model", required=True)
    p.add_argument("--policy", required=True, help="policy JSON from plan")
    p.add_argument("--task", help="override task recorded in the policy")
    p.add_argument("--secret", help="override secret recorded in the policy")
    p.add_argument("--opaque", help="prebuilt opaque DFA file")
    p.add_argument("--runs", type=int, default=5000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--horizon", type=int, default=None)
    p.add_argument("--threads", type=int, default=os.cpu_count())
    p.add_argument("--out", help="stats JSON path")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("verify", help="cross-check the DFA against brute force")
    p.add_argument("--model", required=True)
    p.add_argument("--secret", required=True)
    p.add_argument("--opaque", help="check a prebuilt opaque DFA instead")
    p.add_argument("--max-actions", type=int, default=4)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("scenario", help="emit a built-in model as JSON")
    p.add_argument("name", choices=("running-example", "gridworld"))
    p.add_argument("--config", help="gridworld config JSON")
    p.add_argument("--emit-default-config", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_scenario)

    p = sub.add_parser("export-lp", help="write the LP in CPLEX text form")
    _add_common_planning(p)
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("export-dot", help="Graphviz rendering of automata")
    p.add_argument("--model")
    p.add_argument("--secret")
    p.add_argument("--dfa", help="render a DFA JSON file directly")
    p.add_argument(
        "--what",
        choices=("fst", "product-fst", "nfa-satisfying", "nfa-violating", "opaque-dfa"),
        default="opaque-dfa",
    )
    p.add_argument("--out")
    p.set_defaults(func=cmd_export_dot)
    return parser


def main(argv=None) -> int:
    logging.basicConfig(
        level=os.environ.get("OPAQUE_PLANNER_LOG", "WARNING").upper(),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = make_parser()
    args = parser.parse_args(argv)
    started = time.monotonic()
    try:
        code = args.func(args)
    except (CliError, ModelError, AutomatonError, LtlfError, PlannerError,
            SimulationError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    log.info("%s finished in %.3fs", args.subcommand, time.monotonic() - started)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
