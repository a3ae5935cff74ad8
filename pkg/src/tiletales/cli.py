"""Command-line front door: batch experiments, counting, play, serving.

Machine-readable output (JSON lines) goes to stdout so it pipes into
analysis tooling; human summaries and errors go to stderr. Every
command taking --seed is bit-reproducible on stdout.

`play` is a thin client: it drives the same session operations the
HTTP service exposes, either in-process (default, ephemeral storage)
or against a running server via --url.
"""

from __future__ import annotations

import argparse
import json
import socket
import sys
from pathlib import Path

import httpx

from .board import BoardError
from .difficulty import count_solutions_bruteforce, count_solutions_fast
from .evolution import convergence_experiment
from .narrative import NarratorConfig
from .rules import RuleError, loads_rule
from .schemas import event_views, session_view
from .service import create_app
from .session import ServiceConfig, SessionError, SessionService
from .tiles import TileSet, TileSetError, animal_dinner_set, canonical_generic_set, load_tileset


class ActionRejected(RuntimeError):
    """The service refused a play action (occupied slot and friends)."""


def _load_tiles(path: str | None, default: TileSet) -> TileSet:
    if path is None:
        return default
    return load_tileset(Path(path).read_text(encoding="utf-8"))


def _ga_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--pop", type=int, default=100, help="population size")
    parser.add_argument("--mutation", type=float, default=0.5, help="per-offspring mutation rate")
    parser.add_argument("--max-gen", type=int, default=50, help="generation budget")
    parser.add_argument("--elite", type=int, default=10, help="elites copied unchanged")
    parser.add_argument("--seed", type=int, default=0, help="master seed")
    parser.add_argument("--workers", type=int, default=1, help="parallel fitness processes")
    parser.add_argument("--tiles", help="tile set JSON file (default: built-in)")


# ---------------------------------------------------------------------------
# evolve
# ---------------------------------------------------------------------------


def cmd_evolve(args: argparse.Namespace) -> int:
    if args.evaluator == "count" and not float(args.target).is_integer():
        print("error: a count target must be a whole number", file=sys.stderr)
        return 2
    target = int(args.target) if args.evaluator == "count" else args.target
    try:
        tileset = _load_tiles(args.tiles, canonical_generic_set())
        report = convergence_experiment(
            args.runs,
            args.seed,
            tileset=tileset,
            target=target,
            evaluator=args.evaluator,
            population_size=args.pop,
            mutation_rate=args.mutation,
            max_generations=args.max_gen,
            elite_count=args.elite,
            workers=args.workers,
        )
    except (TileSetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(report.to_jsonl())
    summary = report.summary
    print(
        f"{args.runs} run(s) toward target {target}: "
        f"mean accuracy {summary['mean_accuracy']:.4f} "
        f"(stddev {summary['stddev_accuracy']:.4f}), "
        f"mean generations {summary['mean_generations']:.1f}",
        file=sys.stderr,
    )
    return 0


# ---------------------------------------------------------------------------
# count
# ---------------------------------------------------------------------------


def cmd_count(args: argparse.Namespace) -> int:
    try:
        tileset = _load_tiles(args.tiles, canonical_generic_set())
        rule = loads_rule(Path(args.rules).read_text(encoding="utf-8"))
        counter = count_solutions_bruteforce if args.oracle else count_solutions_fast
        report = counter(rule, tileset)
    except (RuleError, TileSetError, OSError, json.JSONDecodeError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(report.solution_count)
    return 0


# ---------------------------------------------------------------------------
# play
# ---------------------------------------------------------------------------


class LocalClient:
    """In-process session service with throwaway storage."""

    def __init__(self, config: ServiceConfig):
        self._service = SessionService(config)

    def create_session(self, theme: str, target: int, seed: int) -> dict:
        return session_view(self._service.create(theme, target, seed)).model_dump()

    def act(self, session_id: str, action: str, tile_id: int | None, slot: int) -> dict:
        try:
            session, events, _ = self._service.act(session_id, action, tile_id, slot)
        except BoardError as exc:
            raise ActionRejected(str(exc)) from None
        return {
            "events": [e.model_dump() for e in event_views(tuple(events))],
            "session": session_view(session).model_dump(),
        }

    def close(self) -> None:
        pass


class HttpClient:
    """The same moves over a running server."""

    def __init__(self, base_url: str):
        self._client = httpx.Client(base_url=base_url, timeout=300.0)

    def create_session(self, theme: str, target: int, seed: int) -> dict:
        response = self._client.post(
            "/sessions", json={"theme": theme, "difficulty_target": target, "seed": seed}
        )
        if response.status_code != 201:
            raise SessionError(f"create failed ({response.status_code}): {response.text}")
        return response.json()

    def act(self, session_id: str, action: str, tile_id: int | None, slot: int) -> dict:
        body = {"action": action, "slot": slot}
        if tile_id is not None:
            body["tile_id"] = tile_id
        response = self._client.post(f"/sessions/{session_id}/actions", json=body)
        if response.status_code == 409:
            raise ActionRejected(response.json()["detail"])
        response.raise_for_status()
        return response.json()

    def close(self) -> None:
        self._client.close()


_HELP_LINE = "commands: place <tile> <slot> | remove <slot> | board | story | quit"


def _print_story(view: dict) -> None:
    print("--- story ---")
    print(view["transcript"][-1])


def _print_board(view: dict) -> None:
    names = {tile["id"]: tile["name"] for tile in view["tiles"]}
    on_board = [tile["id"] for tile in view["slots"] if tile is not None]
    print("board:")
    for i, tile in enumerate(view["slots"]):
        print(f"  slot {i}: {'.' if tile is None else tile['name']}")
    tray = " ".join(f"{tid}={names[tid]}" for tid in sorted(names) if tid not in on_board)
    print(f"tray: {tray}")


def _print_events(events: list[dict], view: dict) -> None:
    names = {tile["id"]: tile["name"] for tile in view["tiles"]}
    for event in events:
        name = names[event["tile"]]
        if event["kind"] == "placed":
            print(f"{name} sits down at slot {event['slot']}")
        elif event["kind"] == "thrown_off":
            print(f"{name} is thrown off slot {event['slot']}!")
        elif event["kind"] == "shaken":
            print(f"the table shakes under {name}")
        elif event["kind"] == "removed":
            print(f"{name} leaves slot {event['slot']}")
        elif event["kind"] == "completed":
            print("the table is complete!")


def cmd_play(args: argparse.Namespace) -> int:
    if args.url:
        client = HttpClient(args.url)
    else:
        try:
            tileset = _load_tiles(args.tiles, animal_dinner_set())
        except (TileSetError, OSError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        client = LocalClient(
            ServiceConfig(
                data_dir=None,
                tileset=tileset,
                population_size=args.pop,
                mutation_rate=args.mutation,
                max_generations=args.max_gen,
                elite_count=args.elite,
                workers=args.workers,
            )
        )
    try:
        try:
            view = client.create_session(args.theme, args.target, args.seed)
        except (SessionError, httpx.HTTPError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        _print_story(view)
        _print_board(view)
        while True:
            try:
                line = input("> ")
            except EOFError:
                print()
                return 0
            words = line.split()
            if not words:
                continue
            command, rest = words[0], words[1:]
            if command == "quit":
                return 0
            if command == "story":
                _print_story(view)
                continue
            if command == "board":
                _print_board(view)
                continue
            try:
                if command == "place" and len(rest) == 2:
                    result = client.act(view["id"], "place", int(rest[0]), int(rest[1]))
                elif command == "remove" and len(rest) == 1:
                    result = client.act(view["id"], "remove", None, int(rest[0]))
                else:
                    print(_HELP_LINE)
                    continue
            except ValueError:
                print(_HELP_LINE)
                continue
            except ActionRejected as exc:
                print(f"the table refuses: {exc}")
                continue
            chapters = len(view["transcript"])
            view = result["session"]
            _print_events(result["events"], view)
            _print_board(view)
            if len(view["transcript"]) > chapters:
                print("the story goes on...")
                _print_story(view)
    finally:
        client.close()


# ---------------------------------------------------------------------------
# serve
# ---------------------------------------------------------------------------


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    overrides = {"mode": args.narrator} if args.narrator else {}
    try:
        narrator = NarratorConfig.from_env(**overrides)
        tileset = _load_tiles(args.tiles, animal_dinner_set())
    except (TileSetError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    ui_dir = args.ui_dir
    if ui_dir is None and Path("frontend/dist").is_dir():
        ui_dir = "frontend/dist"
    app = create_app(
        ServiceConfig(
            data_dir=args.data_dir,
            narrator=narrator,
            tileset=tileset,
            ui_dir=ui_dir,
            workers=args.workers,
        )
    )
    # probe the port first; uvicorn's own bind failure is a log line
    # followed by sys.exit, which makes for a muddy error message
    probe = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
    try:
        probe.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        probe.bind((args.host, args.port))
    except OSError as exc:
        print(f"error: cannot listen on {args.host}:{args.port}: {exc}", file=sys.stderr)
        return 1
    finally:
        probe.close()
    uvicorn.run(app, host=args.host, port=args.port, log_level=args.log_level)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tiletales",
        description="evolve tile-puzzle rules, count solutions, play, or serve",
    )
    commands = parser.add_subparsers(dest="command", required=True)

    evolve_p = commands.add_parser("evolve", help="search for rules hitting a difficulty target")
    evolve_p.add_argument("--target", type=float, required=True, help="difficulty target")
    evolve_p.add_argument("--runs", type=int, default=1, help="independent runs to report")
    evolve_p.add_argument(
        "--evaluator", choices=("count", "entropy"), default="count", help="fitness measure"
    )
    _ga_flags(evolve_p)
    evolve_p.set_defaults(func=cmd_evolve)

    count_p = commands.add_parser("count", help="count the solution sets a rule admits")
    count_p.add_argument("--rules", required=True, help="rule JSON file")
    count_p.add_argument("--tiles", help="tile set JSON file (default: built-in)")
    count_p.add_argument(
        "--oracle", action="store_true", help="use the exhaustive counter instead of the fast one"
    )
    count_p.set_defaults(func=cmd_count)

    play_p = commands.add_parser("play", help="play a narrated game in the terminal")
    play_p.add_argument("--target", type=int, default=100000, help="starting difficulty target")
    play_p.add_argument("--theme", default="", help="story theme (default: tile set name)")
    play_p.add_argument("--url", help="play against a running server instead of in-process")
    _ga_flags(play_p)
    play_p.set_defaults(func=cmd_play)

    serve_p = commands.add_parser("serve", help="run the HTTP session service")
    serve_p.add_argument("--host", default="127.0.0.1")
    serve_p.add_argument("--port", type=int, default=8000)
    serve_p.add_argument("--data-dir", default="tiletales_sessions", help="session storage")
    serve_p.add_argument(
        "--narrator", choices=("stub", "remote"), help="override TILETALES_NARRATOR_MODE"
    )
    serve_p.add_argument("--ui-dir", help="static bundle to serve (default: frontend/dist if present)")
    serve_p.add_argument("--tiles", help="tile set JSON file (default: built-in)")
    serve_p.add_argument("--workers", type=int, default=1, help="parallel fitness processes")
    serve_p.add_argument("--log-level", default="info")
    serve_p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
