"""Operator command line: seed, serve, sync, pipeline run, report build.

Exit codes: 0 success (including pipeline cache hits), 2 usage error,
3 contract violation, 4 dependency unavailable. All commands honor the
same configuration keys as the environment (ADMIN_KEY,
PROVIDER_WEBHOOK_SECRET, BASE_URL, DATA_DIR), optionally loaded from a
JSON config file, and print line-oriented output unless --json is given.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import date, datetime, timezone
from pathlib import Path

from .analytics.pipeline import FilterError, FilterSpec, load_bundle, run_pipeline, snapshot_from_store
from .api import AppConfig, Platform, create_app
from .datastore import NotFound, SyncPhase
from .ingestion import ProviderUnavailable
from .provider.fees import default_fee_model
from .provider.generator import GeneratorParams
from .provider.service import ProviderMock
from .report import write_report

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_CONTRACT = 3
EXIT_DEPENDENCY = 4

SEED_SPAN = ("2019-01-01T00:00:00Z", "2024-06-30T00:00:00Z")


def _probability(text: str) -> float:
    try:
        p = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}")
    if not 0.0 <= p <= 1.0:
        raise argparse.ArgumentTypeError(f"probability must be in [0, 1], got {text}")
    return p


def _iso_date(text: str) -> date:
    try:
        return date.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO date: {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fareaudit")
    parser.add_argument("--data-dir", help="state directory (default: $DATA_DIR or ./data)")
    parser.add_argument("--config", help="JSON config file with the same keys as the env vars")
    parser.add_argument("--json", action="store_true", help="machine-parseable output")
    sub = parser.add_subparsers(dest="command", required=True)

    seed = sub.add_parser("seed", help="populate the synthetic provider deterministically")
    seed.add_argument("--drivers", type=int, default=5)
    seed.add_argument("--rides", type=int, default=200, help="rides per driver")
    seed.add_argument("--seed", type=int, default=7)
    seed.add_argument("--surge-prob", type=_probability, default=0.13)
    seed.add_argument("--airport-prob", type=_probability, default=0.12)
    seed.add_argument("--era-cutover", type=_iso_date, default=date(2022, 1, 1))

    serve = sub.add_parser("serve", help="run the API with the co-hosted provider")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--host", default="127.0.0.1")

    sync = sub.add_parser("sync", help="backfill linked drivers / refresh synced ones")
    sync.add_argument("--driver", help="restrict to one driver id")

    pipeline = sub.add_parser("pipeline", help="analysis pipeline")
    pipeline_sub = pipeline.add_subparsers(dest="pipeline_command", required=True)
    run = pipeline_sub.add_parser("run", help="run cleaning and analytics, write a bundle")
    run.add_argument("--from", dest="date_from", type=_iso_date)
    run.add_argument("--to", dest="date_to", type=_iso_date)
    run.add_argument("--affiliation", help="affiliation name filter")

    report = sub.add_parser("report", help="report generation")
    report_sub = report.add_subparsers(dest="report_command", required=True)
    build = report_sub.add_parser("build", help="render a report from a bundle directory")
    build.add_argument("--bundle", required=True, help="path to a pipeline bundle directory")
    build.add_argument("--out", help="output directory (default: DATA_DIR/reports/<id>)")
    return parser


def _config(args: argparse.Namespace) -> AppConfig:
    file_values: dict[str, str] = {}
    if args.config:
        file_values = json.loads(Path(args.config).read_text(encoding="utf-8"))

    def pick(key: str, default: str | None) -> str | None:
        return os.environ.get(key) or file_values.get(key) or default

    data_dir = args.data_dir or pick("DATA_DIR", "./data")
    return AppConfig(
        admin_key=pick("ADMIN_KEY", "dev-admin-key"),
        webhook_secret=pick("PROVIDER_WEBHOOK_SECRET", "dev-webhook-secret"),
        base_url=pick("BASE_URL", "http://localhost:8000"),
        data_dir=data_dir,
        sms_transcript=pick("SMS_TRANSCRIPT", None),
    )


def _emit(args: argparse.Namespace, payload: dict, lines: list[str]) -> None:
    if args.json:
        print(json.dumps(payload, sort_keys=True))
    else:
        for line in lines:
            print(line)


def cmd_seed(args: argparse.Namespace, config: AppConfig) -> int:
    provider = ProviderMock(config.webhook_secret, sleeper=lambda s: None)
    params = GeneratorParams(
        n_rides=args.rides,
        date_span=(
            datetime.fromisoformat(SEED_SPAN[0].replace("Z", "+00:00")),
            datetime.fromisoformat(SEED_SPAN[1].replace("Z", "+00:00")),
        ),
        surge_probability=args.surge_prob,
        airport_probability=args.airport_prob,
        fee_model=default_fee_model(args.era_cutover),
    )
    accounts = []
    for i in range(args.drivers):
        account = provider.create_account(
            f"seed-driver-{i + 1:03d}",
            params,
            seed=args.seed + i,
            connected_at=datetime(2019, 1, 1, tzinfo=timezone.utc),
        )
        accounts.append(account)
    digest = provider.state_digest()
    data_dir = Path(config.data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    provider.save_state(str(data_dir / "provider_state.json"))
    _emit(
        args,
        {
            "accounts": [
                {"account_id": a.account_id, "driver_ref": a.driver_ref, "rides": args.rides}
                for a in accounts
            ],
            "state_digest": digest,
        },
        [f"account {a.account_id} driver_ref={a.driver_ref} rides={args.rides}" for a in accounts]
        + [f"state_digest {digest}"],
    )
    return EXIT_OK


def cmd_serve(args: argparse.Namespace, config: AppConfig) -> int:
    import uvicorn

    app = create_app(config=config)
    print(f"ready: listening on http://{args.host}:{args.port}", flush=True)
    uvicorn.run(app, host=args.host, port=args.port, log_level="warning")
    return EXIT_OK


def cmd_sync(args: argparse.Namespace, config: AppConfig) -> int:
    platform = Platform.build(config)
    states = platform.store.sync_states()
    if args.driver:
        states = [s for s in states if s.driver_id == args.driver]
        if not states:
            print(f"no sync state for driver {args.driver}", file=sys.stderr)
            return EXIT_CONTRACT
    deltas: dict[str, dict] = {}
    any_ok = False
    any_unavailable = False
    for state in states:
        driver_id = state.driver_id
        try:
            if state.phase in (SyncPhase.LINKED, SyncPhase.BACKFILLING):
                count = platform.ingestion.run_backfill(driver_id)
                deltas[driver_id] = {"ingested": count, "mode": "backfill"}
                any_ok = True
            elif state.phase in (SyncPhase.SYNCED, SyncPhase.REFRESHING):
                result = platform.ingestion.daily_refresh([driver_id])
                delta = result.get(driver_id, {})
                delta["mode"] = "refresh"
                deltas[driver_id] = delta
                if "error" not in delta:
                    any_ok = True
            else:
                deltas[driver_id] = {"skipped": state.phase.value}
        except ProviderUnavailable as exc:
            deltas[driver_id] = {"error": str(exc), "retryable": True}
            any_unavailable = True
    _emit(
        args,
        {"drivers": deltas},
        [f"{d}: {json.dumps(v, sort_keys=True)}" for d, v in sorted(deltas.items())],
    )
    if any_unavailable and not any_ok:
        return EXIT_DEPENDENCY
    return EXIT_OK


def cmd_pipeline_run(args: argparse.Namespace, config: AppConfig) -> int:
    platform = Platform.build(config)
    affiliation_ids = None
    if args.affiliation:
        matches = [
            a
            for a in platform.store.list_affiliations()
            if a.name.lower() == args.affiliation.lower()
        ]
        if not matches:
            print(f"unknown affiliation: {args.affiliation}", file=sys.stderr)
            return EXIT_CONTRACT
        affiliation_ids = tuple(a.affiliation_id for a in matches)
    try:
        spec = FilterSpec(
            affiliation_ids=affiliation_ids,
            date_from=None
            if args.date_from is None
            else datetime(*args.date_from.timetuple()[:3], tzinfo=timezone.utc),
            date_to=None
            if args.date_to is None
            else datetime(*args.date_to.timetuple()[:3], 23, 59, 59, tzinfo=timezone.utc),
        )
    except FilterError as exc:
        print(f"bad filter: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    snapshot = snapshot_from_store(platform.store)
    bundle = run_pipeline(
        snapshot,
        spec,
        out_dir=platform.bundles_dir(),
        airport_zips=platform.config.airport_zips,
    )
    _emit(
        args,
        {"digest": bundle.digest, "cache_hit": bundle.cache_hit, "path": str(bundle.path)},
        [
            f"digest {bundle.digest}",
            f"cache_hit {str(bundle.cache_hit).lower()}",
            f"bundle {bundle.path}",
        ],
    )
    return EXIT_OK


def cmd_report_build(args: argparse.Namespace, config: AppConfig) -> int:
    bundle_dir = Path(args.bundle)
    try:
        data = load_bundle(bundle_dir)
    except NotFound:
        print(f"no bundle at {bundle_dir}", file=sys.stderr)
        return EXIT_CONTRACT
    if args.out:
        out_dir = Path(args.out)
    else:
        report_root = Path(config.data_dir) / "reports"
        from .report import build_report

        out_dir = report_root / build_report(data)["report_id"]
    path = write_report(data, out_dir)
    _emit(args, {"path": str(path)}, [f"report {path}"])
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    config = _config(args)
    try:
        if args.command == "seed":
            return cmd_seed(args, config)
        if args.command == "serve":
            return cmd_serve(args, config)
        if args.command == "sync":
            return cmd_sync(args, config)
        if args.command == "pipeline":
            return cmd_pipeline_run(args, config)
        if args.command == "report":
            return cmd_report_build(args, config)
    except ProviderUnavailable as exc:
        print(f"provider unavailable: {exc}", file=sys.stderr)
        return EXIT_DEPENDENCY
    except (FilterError, NotFound, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONTRACT
    parser.error(f"unknown command {args.command!r}")
    return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
