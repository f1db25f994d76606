"""``canarykit`` command line."""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from . import runner
from .corpus import load_corpus
from .linguistic import LmParams, default_model
from .scanner import DEFAULT_DELIMITERS, ScanPolicy, scan
from .stack import get_config, stack_encode, validate_composition
from .tokens import SCHEMES, InvalidArgument, TokenRegistry, derive_token, eddsa_public_key, load_key, token_digest
from .transport import TransformUnavailable, apply_chain

EXIT_MATCH = 3
ADMIN_TOKEN_ENV = "CANARYKIT_ADMIN_TOKEN"


def _read(path: str) -> str:
    if path == "-":
        return sys.stdin.read()
    return Path(path).read_text(encoding="utf-8")


def _write(path: str | None, text: str) -> None:
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def _policy(args) -> ScanPolicy:
    policy = ScanPolicy.load(args.policy) if getattr(args, "policy", None) else ScanPolicy()
    kw = policy.to_dict()
    kw["lm_params"] = policy.lm_params
    if getattr(args, "scheme", None):
        kw["scheme"] = args.scheme
    if getattr(args, "delimiters", None):
        kw["region_delimiters"] = tuple(args.delimiters)
    if getattr(args, "depth", None):
        kw["max_strip_depth"] = args.depth
    return ScanPolicy(**kw)


# --- verbs ------------------------------------------------------------------


def cmd_encode(args) -> int:
    config = get_config(args.config)
    for w in validate_composition(config):
        print(f"warning: {w}", file=sys.stderr)
    key = load_key(args.key_file)
    token = derive_token(key, args.file_id, args.scheme)
    cover = None
    if not config.generates_cover:
        if not args.input:
            print(f"error: {config.id} needs --input cover text", file=sys.stderr)
            return 2
        cover = _read(args.input)
    text = stack_encode(config, token, cover, default_model(), LmParams())
    if text is None:
        print(f"error: cover has insufficient capacity for {config.id}", file=sys.stderr)
        return 2
    _write(args.output, text)
    if args.manifest:
        with open(args.manifest, "a", encoding="utf-8") as fh:
            fh.write(f"{args.file_id}\t{args.scheme}\t{config.id}\t{token_digest(token)}\n")
    if args.registry:
        reg = TokenRegistry.load(args.registry) if Path(args.registry).exists() else TokenRegistry()
        if args.scheme == "hmac":
            reg.add_token(token)
        else:
            reg.add_public_key(args.org_id, eddsa_public_key(key))
        reg.save(args.registry)
    return 0


def cmd_scan(args) -> int:
    text = _read(args.input)
    registry = TokenRegistry.load(args.registry)
    verdict = scan(text, registry, _policy(args))
    print(json.dumps(verdict.to_dict(), indent=2))
    return EXIT_MATCH if verdict.matched else 0


def cmd_transform(args) -> int:
    try:
        out = apply_chain(args.chain, _read(args.input), args.paraphrase_cmd)
    except TransformUnavailable as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    _write(args.output, out)
    return 0


def _grid_spec(args, default_configs, default_chains) -> runner.ExperimentSpec:
    return runner.ExperimentSpec(
        configs=tuple(args.configs.split(",")) if args.configs else default_configs,
        chains=tuple(args.chains.split(";")) if args.chains else default_chains,
        corpus_dir=args.corpus_dir,
        scheme=args.scheme,
        trials=args.trials,
        output_path=args.output,
        paraphrase_cmd=args.paraphrase_cmd or os.environ.get("CANARYKIT_PARAPHRASE_CMD"),
    )


def _print_grid(result: runner.GridResult) -> None:
    for row in result.rows:
        print(f"{row['config']:<6} {row['chain']:<12} {row['layer']:<4} "
              f"{row['recovered']:>4}/{row['files']:<4} {row['rate']:6.1f}")
    for chain in result.skipped:
        print(f"skipped {chain}: no paraphrase command configured", file=sys.stderr)


def cmd_heatmap(args) -> int:
    _print_grid(runner.run_heatmap(_grid_spec(args, ("M1", "M2", "M3", "M4"), runner.HEATMAP_CHAINS)))
    return 0


def cmd_stacking(args) -> int:
    _print_grid(runner.run_stacking(_grid_spec(args, tuple(runner.CONFIGS), runner.STACKING_CHAINS)))
    return 0


def cmd_compat(args) -> int:
    print(json.dumps(runner.run_compat(args.n, args.config, args.scheme), indent=2))
    return 0


def cmd_fp(args) -> int:
    registry = runner.build_fp_registry(size=args.registry_size, bulk=args.bulk)
    report = runner.run_fp(args.docs, registry, random_inputs=args.random, output_path=args.output)
    print(json.dumps(report, indent=2))
    return 0


def cmd_timing(args) -> int:
    spec = runner.ExperimentSpec(
        configs=tuple(args.configs.split(",")) if args.configs else tuple(runner.CONFIGS),
        corpus_dir=args.corpus_dir, scheme=args.scheme, trials=args.trials, output_path=args.output,
    )
    for row in runner.run_timing(spec):
        print(f"{row['config']:<6} n={row['files']:<4} encode {row['encode_mean_ms']:.3f}"
              f"+-{row['encode_std_ms']:.3f} ms  decode {row['decode_mean_ms']:.3f}"
              f"+-{row['decode_std_ms']:.3f} ms  scan {row['scan_mean_ms']:.3f} ms")
    return 0


def cmd_proxy(args) -> int:
    from .proxy import ProxyConfig, serve

    data = json.loads(Path(args.config).read_text(encoding="utf-8")) if args.config else {}
    overrides = {
        "upstream_url": args.upstream, "listen_host": args.host, "listen_port": args.port,
        "registry_path": args.registry, "response_mode": args.mode, "audit_log": args.audit_log,
    }
    data.update({k: v for k, v in overrides.items() if v is not None})
    if args.policy:
        data["scan_policy"] = json.loads(Path(args.policy).read_text(encoding="utf-8"))
    data.setdefault("admin_token", os.environ.get(ADMIN_TOKEN_ENV))
    if "upstream_url" not in data:
        print("error: --upstream is required", file=sys.stderr)
        return 2
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    serve(ProxyConfig.from_dict(data))
    return 0


def cmd_e2e(args) -> int:
    from .e2e import run_scenario

    cover = _read(args.cover) if args.cover else load_corpus()[0][1]
    steps = run_scenario(cover, b"e2e scenario organisation key")
    for s in steps:
        print(f"{'PASS' if s.ok else 'FAIL'}  {s.label:<15} expected {s.expected_status} got {s.status}")
    return 0 if all(s.ok for s in steps) else 1


# --- parser -----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="canarykit", description="Steganographic canary files and scanning.")
    sub = p.add_subparsers(dest="verb", required=True)

    e = sub.add_parser("encode", help="embed a per-file token into a cover (or generate one)")
    e.add_argument("--config", default="M5")
    e.add_argument("--scheme", choices=SCHEMES, default="hmac")
    e.add_argument("--file-id", required=True)
    e.add_argument("--key-file", help="organisation key file (default $CANARYKIT_KEY_FILE)")
    e.add_argument("--input", help="cover text for symbolic-only configs ('-' for stdin)")
    e.add_argument("--output", help="canary output path (default stdout)")
    e.add_argument("--manifest", help="append file_id/scheme/config/digest here")
    e.add_argument("--registry", help="add the token (or public key) to this registry file")
    e.add_argument("--org-id", default="org")
    e.set_defaults(func=cmd_encode)

    s = sub.add_parser("scan", help="scan text; exit 3 on a verified canary")
    s.add_argument("--input", required=True)
    s.add_argument("--registry", required=True)
    s.add_argument("--scheme", choices=SCHEMES)
    s.add_argument("--policy", help="JSON scan policy")
    s.add_argument("--delimiters", nargs=2, metavar=("OPEN", "CLOSE"))
    s.add_argument("--depth", type=int)
    s.set_defaults(func=cmd_scan)

    t = sub.add_parser("transform", help="apply a transform id, chain name, or comma list")
    t.add_argument("--chain", required=True)
    t.add_argument("--input", required=True)
    t.add_argument("--output")
    t.add_argument("--paraphrase-cmd")
    t.set_defaults(func=cmd_transform)

    for name, func in (("heatmap", cmd_heatmap), ("stacking", cmd_stacking)):
        g = sub.add_parser(name, help=f"run the {name} grid")
        g.add_argument("--configs", help="comma list, e.g. M1,M5 or LM,ZW")
        g.add_argument("--chains", help="semicolon list of transform ids / chain names")
        g.add_argument("--corpus-dir")
        g.add_argument("--scheme", choices=SCHEMES, default="hmac")
        g.add_argument("--trials", type=int)
        g.add_argument("--output", help="aggregate CSV path (raw log written alongside)")
        g.add_argument("--paraphrase-cmd")
        g.set_defaults(func=func)

    c = sub.add_parser("compat", help="Tier-0 full-stack encode/decode check")
    c.add_argument("--n", type=int, default=100)
    c.add_argument("--config", default="M7")
    c.add_argument("--scheme", choices=SCHEMES, default="hmac")
    c.set_defaults(func=cmd_compat)

    f = sub.add_parser("fp", help="false-positive run over unmarked documents")
    f.add_argument("--docs", type=int, default=100)
    f.add_argument("--random", type=int, default=10_000, help="random-byte inputs to scan")
    f.add_argument("--registry-size", type=int, default=1000)
    f.add_argument("--bulk", type=int, default=0, help="extra random tokens in the array index")
    f.add_argument("--output")
    f.set_defaults(func=cmd_fp)

    tm = sub.add_parser("timing", help="encode/decode/scan latency per config")
    tm.add_argument("--configs")
    tm.add_argument("--corpus-dir")
    tm.add_argument("--scheme", choices=SCHEMES, default="hmac")
    tm.add_argument("--trials", type=int)
    tm.add_argument("--output")
    tm.set_defaults(func=cmd_timing)

    px = sub.add_parser("proxy", help="run the scanning reverse proxy")
    px.add_argument("--config", help="JSON proxy config")
    px.add_argument("--upstream")
    px.add_argument("--host")
    px.add_argument("--port", type=int)
    px.add_argument("--registry")
    px.add_argument("--policy")
    px.add_argument("--mode", choices=("block", "flag"))
    px.add_argument("--audit-log")
    px.set_defaults(func=cmd_proxy)

    ee = sub.add_parser("e2e", help="scripted proxy scenario against a stub upstream")
    ee.add_argument("--cover", help="cover text for the canary (default: first corpus file)")
    ee.set_defaults(func=cmd_e2e)
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InvalidArgument, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
