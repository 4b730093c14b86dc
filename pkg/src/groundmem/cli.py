"""Command-line entry point: build banks, answer questions, run evaluations,
and produce analysis artifacts.

Exit codes: 0 success, 1 runtime failure, 2 usage/config error.
"""

from __future__ import annotations

import argparse
import configparser
import glob
import json
import logging
import os
import sys
from dataclasses import dataclass, replace

from . import evaluation, reasoner
from .core import GroundMemError, SpeakerId
from .gateway import BackendConfig, ModelGateway
from .memory import MemoryBank
from .pipeline import PhaseOneBuilder

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


@dataclass(frozen=True)
class Settings:
    """Engine defaults, overridable via config file then flags."""

    mode: str = "mock"
    seed: int = 0
    condition: str = "image"
    jobs: int = 1
    lam: float = 0.7
    candidates: int = 3
    tolerance: float = 16.0
    plan_cap: int = 12
    abstain: str = "not specified"
    restate_patch: bool = True


def load_settings(config_path: str | None, args: argparse.Namespace) -> Settings:
    settings = Settings()
    if config_path:
        parser = configparser.ConfigParser()
        if not parser.read(config_path):
            raise FileNotFoundError(config_path)
        section = parser["groundmem"] if parser.has_section("groundmem") else {}
        updates = {}
        for key, cast in (
            ("mode", str),
            ("seed", int),
            ("condition", str),
            ("jobs", int),
            ("lam", float),
            ("candidates", int),
            ("tolerance", float),
            ("plan_cap", int),
            ("abstain", str),
        ):
            if key in section:
                updates[key] = cast(section[key])
        if "restate_patch" in section:
            updates["restate_patch"] = str(section["restate_patch"]).lower() in (
                "1",
                "true",
                "yes",
            )
        settings = replace(settings, **updates)
    overrides = {}
    for key in ("mode", "seed", "condition", "jobs"):
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return replace(settings, **overrides)


def make_gateway(settings: Settings) -> ModelGateway:
    config = BackendConfig.from_env(mode=settings.mode, seed=settings.seed)
    return ModelGateway(config)


def cmd_build(args: argparse.Namespace, settings: Settings) -> int:
    if not os.path.isfile(args.transcripts):
        print(f"transcripts file not found: {args.transcripts}", file=sys.stderr)
        return EXIT_USAGE
    condition = evaluation.normalize_condition(settings.condition)
    if condition == "full-dialog":
        print("build requires a memory condition, not full-dialog", file=sys.stderr)
        return EXIT_USAGE
    gateway = make_gateway(settings)
    dialogues = evaluation.load_transcripts(args.transcripts)
    builder = PhaseOneBuilder(
        gateway,
        condition,
        j_candidates=settings.candidates,
        tolerance=settings.tolerance,
    )
    os.makedirs(args.out, exist_ok=True)
    failures = 0
    for dialogue in dialogues:
        try:
            result = builder.build(dialogue)
            result.bank.save(os.path.join(args.out, dialogue.dialogue_id), result.graph)
        except GroundMemError as exc:
            failures += 1
            print(f"{dialogue.dialogue_id}: FAILED ({exc})", file=sys.stderr)
            continue
        print(
            f"{dialogue.dialogue_id}: {len(result.bank.frames())} frames, "
            f"{sum(len(v) for v in result.bank.versions.values())} versions, "
            f"{len(result.graph)} triplets"
        )
    return EXIT_RUNTIME if failures else EXIT_OK


def cmd_query(args: argparse.Namespace, settings: Settings) -> int:
    if not os.path.isdir(args.bank):
        print(f"bank directory not found: {args.bank}", file=sys.stderr)
        return EXIT_USAGE
    condition = evaluation.normalize_condition(settings.condition)
    if condition == "full-dialog":
        print("query requires a memory condition, not full-dialog", file=sys.stderr)
        return EXIT_USAGE
    gateway = make_gateway(settings)
    bank, graph = MemoryBank.load(args.bank)
    config = reasoner.ReasonerConfig(
        lam=settings.lam,
        condition=condition,
        abstain=settings.abstain,
        plan_cap=settings.plan_cap,
        restate_patch=settings.restate_patch,
    )
    try:
        answer, trace = reasoner.answer_question(
            args.question, SpeakerId.parse(args.asker), bank, graph, gateway, config
        )
    except GroundMemError as exc:
        print(f"query failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    print(answer)
    if args.trace:
        with open(args.trace, "w") as fh:
            json.dump(trace.to_dict(), fh, indent=2, sort_keys=True)
    return EXIT_OK


def cmd_eval(args: argparse.Namespace, settings: Settings) -> int:
    for path in (args.transcripts, args.qa):
        if not os.path.isfile(path):
            print(f"input file not found: {path}", file=sys.stderr)
            return EXIT_USAGE
    gateway = make_gateway(settings)
    dialogues = evaluation.load_transcripts(args.transcripts)
    qa = evaluation.load_qa(args.qa)
    config = reasoner.ReasonerConfig(
        lam=settings.lam,
        condition="visual",
        abstain=settings.abstain,
        plan_cap=settings.plan_cap,
        restate_patch=settings.restate_patch,
    )
    report, results, _ = evaluation.run_benchmark(
        dialogues,
        qa,
        settings.condition,
        gateway,
        config=config,
        j_candidates=settings.candidates,
        out_dir=args.out,
    )
    print(report.render_text())
    errors = sum(1 for r in results if r.get("error"))
    if errors:
        print(f"{errors} item(s) failed; see logs", file=sys.stderr)
    return EXIT_OK


def cmd_analyze(args: argparse.Namespace, settings: Settings) -> int:
    traces_dir = os.path.join(args.traces) if args.traces else None
    if not traces_dir or not os.path.isdir(traces_dir):
        print(f"traces directory not found: {args.traces}", file=sys.stderr)
        return EXIT_USAGE
    pairs = []
    scope_counts: dict[str, list[int]] = {}
    for path in sorted(glob.glob(os.path.join(traces_dir, "**", "*.json"), recursive=True)):
        with open(path) as fh:
            record = json.load(fh)
        correct = record.get("verdict") == "SAME"
        if record.get("mean_phi") is not None:
            pairs.append((float(record["mean_phi"]), correct))
        annotation = record.get("annotation")
        if annotation:
            scope = annotation["complexity"]
            hit, total = scope_counts.get(scope, (0, 0))
            scope_counts[scope] = (hit + (1 if correct else 0), total + 1)
    fit = evaluation.fit_faithfulness_logit(pairs)
    os.makedirs(args.out, exist_ok=True)
    with open(os.path.join(args.out, "logit.json"), "w") as fh:
        json.dump(
            {
                "intercept": fit.intercept,
                "slope": fit.slope,
                "converged": fit.converged,
                "iterations": fit.iterations,
                "message": fit.message,
                "samples": len(pairs),
            },
            fh,
            indent=2,
            sort_keys=True,
        )
    lines = ["Accuracy by reasoning scope", ""]
    for scope in sorted(scope_counts):
        hit, total = scope_counts[scope]
        lines.append(f"{scope.ljust(12)} | {hit / total:.2f} ({hit}/{total})")
    with open(os.path.join(args.out, "scopes.txt"), "w") as fh:
        fh.write("\n".join(lines) + "\n")
    print("\n".join(lines))
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="groundmem",
        description="Versioned multimodal dialogue memory: build, query, evaluate.",
    )
    parser.add_argument("--config", help="INI config file with a [groundmem] section")
    parser.add_argument("--mode", choices=["live", "mock"])
    parser.add_argument("--seed", type=int)
    parser.add_argument(
        "--condition", choices=["image", "text", "both", "full-dialog"]
    )
    parser.add_argument("--jobs", type=int)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_build = sub.add_parser("build", help="run Phase 1 over transcripts")
    p_build.add_argument("--transcripts", required=True)
    p_build.add_argument("--out", required=True)
    p_build.set_defaults(func=cmd_build)

    p_query = sub.add_parser("query", help="answer a question over a saved bank")
    p_query.add_argument("--bank", required=True)
    p_query.add_argument("--question", required=True)
    p_query.add_argument("--asker", required=True, choices=["A", "B"])
    p_query.add_argument("--trace")
    p_query.set_defaults(func=cmd_query)

    p_eval = sub.add_parser("eval", help="run the benchmark end to end")
    p_eval.add_argument("--transcripts", required=True)
    p_eval.add_argument("--qa", required=True)
    p_eval.add_argument("--out", required=True)
    p_eval.set_defaults(func=cmd_eval)

    p_analyze = sub.add_parser("analyze", help="fit the faithfulness logit over traces")
    p_analyze.add_argument("--traces", required=True)
    p_analyze.add_argument("--out", required=True)
    p_analyze.set_defaults(func=cmd_analyze)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        settings = load_settings(args.config, args)
    except (FileNotFoundError, ValueError) as exc:
        print(f"bad configuration: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, settings)
    except (ValueError, evaluation.FormatError, evaluation.UnknownRelationType) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except GroundMemError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
