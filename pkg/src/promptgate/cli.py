"""Command line entry points: serve, register-service, add-user, eval."""

from __future__ import annotations

import argparse
import json
import logging
import sys

import httpx

from .backends import BackendConfig
from .calculator import register_calculator
from .config import load_config
from .errors import ConfigError
from .evalharness import DEFAULT_ARITIES, EvalSettings, format_table, run_eval, to_csv
from .gateway import Gateway
from .services import LocalServiceTransport


def _cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .api import create_app

    config = load_config(args.config)
    if args.port is not None:
        config = type(config)(**{**_fields(config), "port": args.port})
    if args.host is not None:
        config = type(config)(**{**_fields(config), "host": args.host})

    if args.demo:
        transport = LocalServiceTransport()
        gateway = Gateway(config, transport=transport)
        register_calculator(gateway.services, transport)
        auth_key = gateway.add_user("demo", ["calculator"], ["13B", "70B"])
        # flush so a parent process reading through a pipe sees it immediately
        print(f"demo user auth key: {auth_key}", flush=True)
    else:
        gateway = Gateway(config)

    app = create_app(gateway)
    uvicorn.run(app, host=config.host, port=config.port, log_level="info")
    return 0


def _fields(instance) -> dict:
    return {name: getattr(instance, name) for name in instance.__dataclass_fields__}


def _comma_ints(text: str) -> tuple[int, ...]:
    try:
        return tuple(int(part) for part in text.split(",") if part.strip())
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def _cmd_register_service(args: argparse.Namespace) -> int:
    with open(args.file, "r", encoding="utf-8") as fh:
        descriptor = json.load(fh)
    response = httpx.post(f"{args.url.rstrip('/')}/v1/services", json=descriptor, timeout=10.0)
    if response.status_code == 201:
        print(f"registered: {response.json()['registered']}")
        return 0
    print(f"registration failed ({response.status_code}): {response.text}", file=sys.stderr)
    return 1


def _cmd_add_user(args: argparse.Namespace) -> int:
    body = {
        "user_id": args.user_id,
        "allowed_services": args.allow_service or [],
        "allowed_worker_classes": args.allow_class or [],
    }
    response = httpx.post(f"{args.url.rstrip('/')}/v1/users", json=body, timeout=10.0)
    if response.status_code == 201:
        print(json.dumps(response.json(), indent=2))
        return 0
    print(f"user creation failed ({response.status_code}): {response.text}", file=sys.stderr)
    return 1


def _cmd_eval(args: argparse.Namespace) -> int:
    backend = None
    if args.live_url:
        backend = BackendConfig(
            kind="http",
            base_url=args.live_url,
            model_name=args.model,
            timeout_s=args.timeout,
        )
    arities = tuple(args.arities or ()) + tuple(args.arity or ())
    settings = EvalSettings(
        arities=arities or DEFAULT_ARITIES,
        trials=args.trials,
        seed=args.seed,
        backend=backend,
        concurrency=args.concurrency,
    )
    report = run_eval(settings)
    print(format_table(report))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8") as fh:
            fh.write(to_csv(report) + "\n")
        print(f"wrote {args.csv}")
    worst = min(r.pipeline_correct / r.trials for r in report.results)
    return 0 if worst == 1.0 or args.live_url else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="promptgate",
        description="LLM middleware gateway: route prompts to registered services.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging")
    sub = parser.add_subparsers(dest="command", required=True)

    serve = sub.add_parser("serve", help="run the gateway HTTP server")
    serve.add_argument("--config", default=None, help="path to config JSON")
    serve.add_argument("--host", default=None)
    serve.add_argument("--port", type=int, default=None)
    serve.add_argument(
        "--demo",
        action="store_true",
        help="register the built-in calculator and a demo user, printing its key",
    )
    serve.set_defaults(func=_cmd_serve)

    register = sub.add_parser("register-service", help="register a service descriptor")
    register.add_argument("--url", default="http://127.0.0.1:8080", help="gateway base URL")
    register.add_argument("--file", required=True, help="descriptor JSON file")
    register.set_defaults(func=_cmd_register_service)

    user = sub.add_parser("add-user", help="create a user and print its auth key")
    user.add_argument("--url", default="http://127.0.0.1:8080", help="gateway base URL")
    user.add_argument("--user-id", required=True)
    user.add_argument("--allow-service", action="append", metavar="NAME")
    user.add_argument("--allow-class", action="append", metavar="CLASS")
    user.set_defaults(func=_cmd_add_user)

    ev = sub.add_parser("eval", help="run the arithmetic accuracy harness")
    ev.add_argument(
        "--arities",
        type=_comma_ints,
        metavar="N,N,...",
        help="comma-separated operand counts, e.g. 2,3,5",
    )
    ev.add_argument("--arity", type=int, action="append", metavar="N", help=argparse.SUPPRESS)
    ev.add_argument("--n", "--trials", dest="trials", type=int, default=100, metavar="N")
    ev.add_argument("--seed", type=int, default=20240601)
    ev.add_argument("--concurrency", type=int, default=1)
    ev.add_argument("--live-url", default=None, help="OLLAMA-compatible backend URL")
    ev.add_argument("--model", default="llama2:13b", help="model name for --live-url")
    ev.add_argument("--timeout", type=float, default=120.0)
    ev.add_argument("--csv", default=None, help="also write results as CSV")
    ev.set_defaults(func=_cmd_eval)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
