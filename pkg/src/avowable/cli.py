"""Command-line entry point.

Exit codes: 0 success/Accept, 1 protocol abort/Reject, 2 usage error,
3 dispute verdict Guilty.
"""

from __future__ import annotations

import argparse
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import yaml

from avowable.adversary import EveStrategy
from avowable.harness import (
    QsdcConfig,
    TeleportConfig,
    adjudicate,
    execute_qsdc,
    execute_teleport,
    load_config,
    parse_message,
    replay,
)
from avowable.seeding import derive_seed
from avowable.transcript import Claim, TranscriptParseError, Verdict

EXIT_OK, EXIT_ABORT, EXIT_USAGE, EXIT_GUILTY = 0, 1, 2, 3


class UsageError(Exception):
    pass


def _load_states(path: str) -> list:
    data = yaml.safe_load(Path(path).read_text())  # JSON is valid YAML
    if isinstance(data, dict):
        data = data["states"]
    return data


def _base_config(args, protocol: str) -> dict:
    try:
        cfg = load_config(args.config) if getattr(args, "config", None) else {}
    except (OSError, ValueError, yaml.YAMLError) as exc:
        raise UsageError(f"cannot read config: {exc}") from exc
    if cfg.get("protocol", protocol) != protocol:
        raise UsageError(f"config file is for protocol {cfg['protocol']!r}, not {protocol!r}")
    cfg["protocol"] = protocol
    if args.seed is not None:
        cfg["seed"] = args.seed
    return cfg


def cmd_teleport(args) -> int:
    cfg = _base_config(args, "teleport")
    if args.n is not None:
        cfg["n"] = args.n
    if args.states:
        try:
            cfg["states"] = _load_states(args.states)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise UsageError(f"cannot read states file: {exc}") from exc
    if cfg.get("n") is None and cfg.get("states") is None:
        raise UsageError("teleport needs --n or a states list")
    try:
        config = TeleportConfig.from_dict(cfg)
        config.validate()
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from exc
    run = execute_teleport(config)
    if args.trace:
        run.transcript.save(args.trace)
    if not run.ok:
        print(f"aborted: {run.error}")
        return EXIT_ABORT
    print(f"teleported {config.n} state(s), phase Done")
    for k, f in enumerate(run.fidelities):
        print(f"  [{k}] fidelity {f:.12f}")
    return EXIT_OK


def _qsdc_config(args) -> QsdcConfig:
    cfg = _base_config(args, "qsdc")
    if args.message is not None:
        cfg["message"] = args.message
    if args.message_file:
        cfg["message"] = Path(args.message_file).read_text().strip()
    if "message" not in cfg:
        raise UsageError("qsdc needs --message or --message-file")
    if args.check_threshold is not None:
        cfg["check_threshold"] = args.check_threshold
    try:
        if args.eve is not None:
            seed = int(cfg.get("seed", 0))
            cfg["eve"] = EveStrategy.parse(args.eve, seed=derive_seed(seed, "eve")).to_dict()
        if isinstance(cfg["message"], str):
            cfg["message"] = _message_dict(cfg["message"])
        config = QsdcConfig.from_dict(cfg)
        config.validate()
    except (ValueError, TypeError, KeyError, IndexError) as exc:
        raise UsageError(str(exc)) from exc
    return config


def _message_dict(text: str) -> dict:
    m = parse_message(text)
    return {"n": len(m), "hex": m.to_hex()}


def _trial(config: QsdcConfig) -> tuple[str, int, int]:
    run = execute_qsdc(config)
    status = "abort" if run.aborted else ("accept" if run.accepted else "reject")
    rep = run.report
    return status, (rep.mismatches if rep else 0), (rep.checked if rep else 0)


def cmd_qsdc(args) -> int:
    config = _qsdc_config(args)
    if args.trials and args.trials > 1:
        configs = []
        for t in range(args.trials):
            eve = config.eve
            if eve is not None:
                eve = EveStrategy(eve.kind, eve.coverage, eve.fixed_basis, derive_seed(config.seed + t, "eve"))
            configs.append(QsdcConfig(config.message, config.seed + t, eve, config.check_threshold))
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_trial, configs, chunksize=64))
        else:
            results = [_trial(c) for c in configs]
        counts = {s: sum(r[0] == s for r in results) for s in ("accept", "reject", "abort")}
        mism = sum(r[1] for r in results)
        checked = sum(r[2] for r in results)
        print(f"trials {len(results)}: accept {counts['accept']}, reject {counts['reject']}, abort {counts['abort']}")
        print(f"check positions {checked}, mismatches {mism}, rate {mism / max(checked, 1):.4f}")
        print(f"undetected fraction {1 - counts['abort'] / len(results):.4f}")
        return EXIT_OK

    run = execute_qsdc(config)
    if args.trace:
        run.transcript.save(args.trace)
    if run.aborted:
        print(f"aborted: {run.error}")
        return EXIT_ABORT
    print(f"M' = {run.decoded}  ({run.result.value})")
    return EXIT_OK if run.accepted else EXIT_ABORT


def cmd_dispute(args) -> int:
    try:
        ruling = adjudicate(args.transcript, Claim(args.claim))
    except TranscriptParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        raise UsageError(str(exc)) from exc
    print(ruling)
    return EXIT_GUILTY if ruling.verdict is Verdict.GUILTY else EXIT_OK


def cmd_replay(args) -> int:
    try:
        ok, detail = replay(args.transcript)
    except TranscriptParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        raise UsageError(str(exc)) from exc
    print(("replay ok: " if ok else "replay mismatch: ") + detail)
    return EXIT_OK if ok else EXIT_ABORT


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="avowable", description="Avowable quantum communication simulator")
    sub = p.add_subparsers(dest="command", required=True)

    t = sub.add_parser("teleport", help="arbitrated teleportation run")
    t.add_argument("--n", type=int)
    t.add_argument("--seed", type=int)
    t.add_argument("--states", help="JSON/YAML list of [alpha, beta] pairs")
    t.add_argument("--config")
    t.add_argument("--trace", help="write the JSON-lines transcript here")
    t.set_defaults(func=cmd_teleport)

    q = sub.add_parser("qsdc", help="hash-signed direct communication run")
    q.add_argument("--message", help="hex digits, or 0b-prefixed bits")
    q.add_argument("--message-file")
    q.add_argument("--seed", type=int)
    q.add_argument("--eve", help="none | intercept-resend[:coverage] | intercept-resend-fixed:<Z|X>[:coverage]")
    q.add_argument("--check-threshold", type=int)
    q.add_argument("--trials", type=int, default=1)
    q.add_argument("--jobs", type=int, default=1)
    q.add_argument("--config")
    q.add_argument("--trace")
    q.set_defaults(func=cmd_qsdc)

    d = sub.add_parser("dispute", help="adjudicate a saved transcript")
    d.add_argument("--transcript", required=True)
    d.add_argument("--claim", required=True, choices=[c.value for c in Claim])
    d.set_defaults(func=cmd_dispute)

    r = sub.add_parser("replay", help="re-run a transcript and compare bytes")
    r.add_argument("--transcript", required=True)
    r.set_defaults(func=cmd_replay)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_USAGE if exc.code else EXIT_OK
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
