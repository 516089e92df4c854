"""Command-line entry point.

Exit codes: 0 success, 1 domain error (validation failure, inconsistent
evidence), 2 usage or I/O error.  Structured output goes to stdout as JSON
(CSV for sweep metrics); diagnostics go to stderr.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import engine, focusing, simulator
from .engine import diagnose_once, dumps
from .model import ModelError, parse_model, parse_observations, validate
from .propagation import PropagationError, forward_predict

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_USAGE = 2


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read {path}: {exc.strerror}")


class UsageError(Exception):
    pass


def _load_model(path: str):
    try:
        return parse_model(_read(path))
    except ModelError as exc:
        raise UsageError(f"model {path}: {exc}")


def _load_observations(path: str):
    try:
        return parse_observations(_read(path))
    except ModelError as exc:
        raise UsageError(f"observations {path}: {exc}")


def cmd_validate(args) -> int:
    model = _load_model(args.model)
    report = validate(model)
    print(dumps({
        "ok": report.ok,
        "violations": list(report.violations),
        "loops": [list(l) for l in report.loops],
    }))
    return EXIT_OK if report.ok else EXIT_DOMAIN


def cmd_predict(args) -> int:
    model = _load_model(args.model)
    observations = _load_observations(args.observations)
    try:
        state = forward_predict(model, observations)
    except PropagationError as exc:
        print(dumps({"error": "prediction", "message": str(exc)}), file=sys.stderr)
        return EXIT_DOMAIN
    print(dumps(engine.prediction_dump(state)))
    return EXIT_OK


def cmd_diagnose(args) -> int:
    model = _load_model(args.model)
    observations = _load_observations(args.observations)
    try:
        state = forward_predict(model, observations)
        evidence = focusing.classify(state, observations)
        focuses = focusing.apply_rule(args.rule, evidence, args.mode)
    except focusing.InconsistentEvidenceError as exc:
        print(dumps({"error": "inconsistent_evidence", "message": str(exc)}),
              file=sys.stderr)
        return EXIT_DOMAIN
    except (PropagationError, focusing.FocusingError) as exc:
        print(dumps({"error": "diagnosis", "message": str(exc)}), file=sys.stderr)
        return EXIT_DOMAIN
    print(dumps(engine.focuses_json(focuses, args.rule, args.mode)))
    return EXIT_OK


def cmd_probe_advise(args) -> int:
    model = _load_model(args.model)
    observations = _load_observations(args.observations)
    try:
        view = diagnose_once(model, observations, args.rule, args.mode, args.strategy)
    except (PropagationError, focusing.FocusingError) as exc:
        print(dumps({"error": "diagnosis", "message": str(exc)}), file=sys.stderr)
        return EXIT_DOMAIN
    if view.advice is None:
        print(dumps({"advice": None, "status": view.status,
                     "diagnosed": list(view.diagnosed)}))
        return EXIT_OK
    print(dumps(view.advice.to_json()))
    return EXIT_OK


def _parse_faults(text: str) -> list[simulator.FaultSpec]:
    doc = json.loads(text)
    faults = []
    for raw in doc:
        kind = raw.get("kind", "stuck_at")
        if kind == "stuck_at":
            faults.append(simulator.FaultSpec.stuck_at(raw["component"], raw["value"]))
        elif kind == "intermittent_stuck_at":
            faults.append(simulator.FaultSpec.intermittent(
                raw["component"], raw["value"], raw.get("active_times", ())))
        elif kind == "function_override":
            from .model import parse_model as _pm  # reuse branch parsing

            doc_fn = {
                "components": [{
                    "id": "f", "type": "function",
                    "inputs": raw.get("inputs", []),
                    "function": raw["function"],
                }],
                "connections": [], "observables": ["f"],
            }
            fn = _pm(json.dumps(doc_fn)).by_id["f"].function
            faults.append(simulator.FaultSpec.override(raw["component"], fn))
        else:
            raise UsageError(f"unknown fault kind {kind!r}")
    return faults


def cmd_simulate(args) -> int:
    if args.sweep:
        rows = simulator.sweep(
            family=args.sweep, n=args.n, k=args.k, runs=args.runs,
            faults_per_run=args.faults_per_run, rule=args.rule,
            strategy=args.strategy, seed=args.seed,
        )
        print(simulator.CSV_HEADER)
        for row in rows:
            print(row.csv())
        return EXIT_OK
    if not args.model or not args.faults:
        raise UsageError("simulate needs --model and --faults (or --sweep)")
    model = _load_model(args.model)
    faults = _parse_faults(_read(args.faults))
    try:
        faulty = simulator.inject(model, faults,
                                  allow_source_faults=args.allow_source_faults)
        observations = (
            _load_observations(args.observations) if args.observations else []
        )
        if not observations:
            raise UsageError("simulate needs --observations with source values")
        truth = simulator.ground_truth(faulty, [
            o for o in observations if model.by_id[o.component].is_source
        ])
        initial = list(observations)
        covered = {(o.component, o.time) for o in initial}
        for cid in simulator.sink_components(model):
            if (cid, 0) not in covered:
                from .propagation import TimedComponent

                initial.append(
                    type(observations[0])(cid, 0, truth[TimedComponent(cid, 0)])
                )
        transcript = simulator.run_session(
            model, faulty, rule=args.rule, mode=args.mode,
            strategy=args.strategy, initial_observations=initial,
        )
    except simulator.SimulationError as exc:
        print(dumps({"error": "simulation", "message": str(exc)}), file=sys.stderr)
        return EXIT_DOMAIN
    out = dumps(transcript.to_json())
    if args.out:
        Path(args.out).write_text(out + "\n", encoding="utf-8")
    else:
        print(out)
    return EXIT_OK


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    app = create_app(journal_dir=args.journal_dir)
    if args.model:
        from .service import preload_model

        preload_model(app, _read(args.model))
    if args.ui:
        from starlette.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=args.ui, html=True), name="ui")
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def _canonical_mode(value: str) -> str:
    return {"nonint": "nonintermittent", "int": "intermittent"}.get(value, value)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="mbdiag",
        description="Model-based diagnosis by forward causal propagation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a model document")
    p.add_argument("--model", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("predict", help="dump predictions with dependency sets")
    p.add_argument("--model", required=True)
    p.add_argument("--observations", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("diagnose", help="classify evidence and compute focuses")
    p.add_argument("--model", required=True)
    p.add_argument("--observations", required=True)
    p.add_argument("--rule", default="r1", choices=["r1", "r2", "r3", "r4"])
    p.add_argument("--mode", default="nonintermittent",
                   type=_canonical_mode,
                   choices=["nonintermittent", "intermittent"])
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("probe-advise", help="recommend the next probe point")
    p.add_argument("--model", required=True)
    p.add_argument("--observations", required=True)
    p.add_argument("--rule", default="r1", choices=["r1", "r2", "r3", "r4"])
    p.add_argument("--mode", default="nonintermittent",
                   type=_canonical_mode,
                   choices=["nonintermittent", "intermittent"])
    p.add_argument("--strategy", default="entropy",
                   choices=["entropy", "bounds", "halving"])
    p.set_defaults(func=cmd_probe_advise)

    p = sub.add_parser("simulate", help="closed-loop faulty-system session")
    p.add_argument("--model")
    p.add_argument("--faults")
    p.add_argument("--observations")
    p.add_argument("--rule", default="r1", choices=["r1", "r2", "r3", "r4"])
    p.add_argument("--mode", default="nonintermittent",
                   type=_canonical_mode,
                   choices=["nonintermittent", "intermittent"])
    p.add_argument("--strategy", default="halving",
                   choices=["entropy", "bounds", "halving"])
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--allow-source-faults", action="store_true")
    p.add_argument("--sweep", choices=["chain", "tree", "dag"],
                   help="run a seeded sweep instead of a single session")
    p.add_argument("--n", type=int, default=20)
    p.add_argument("--k", type=int, default=2)
    p.add_argument("--runs", type=int, default=100)
    p.add_argument("--faults-per-run", type=int, default=1)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("serve", help="start the diagnosis session service")
    p.add_argument("--port", type=int, default=8000)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--model", help="preload a model document")
    p.add_argument("--journal-dir", help="append-only session journals")
    p.add_argument("--ui", help="serve the built frontend from this directory")
    p.set_defaults(func=cmd_serve)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code not in (0, None) else 0
    try:
        return args.func(args)
    except UsageError as exc:
        print(dumps({"error": "usage", "message": str(exc)}), file=sys.stderr)
        return EXIT_USAGE
    except (json.JSONDecodeError, KeyError) as exc:
        print(dumps({"error": "usage", "message": f"malformed input: {exc}"}),
              file=sys.stderr)
        return EXIT_USAGE


def entrypoint() -> None:
    raise SystemExit(main())


if __name__ == "__main__":
    entrypoint()
