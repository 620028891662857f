"""Command-line interface.

Thin client over the HTTP service: every subcommand builds a request
model, posts it to the service — in-process by default, or to a remote
instance via ``--server`` — and renders the response as plain text.

Exit codes are a stable scripting contract: 0 success, 2 usage error,
3 I/O failure, 4 data-invariant violation.
"""

from __future__ import annotations

import argparse
import sys

import httpx

from . import DEFAULT_SEED, __version__
from .errors import EXIT_CODES


def _seed_value(text: str) -> int:
    # Accept decimal or 0x-prefixed hex.
    return int(text, 0)


def _float_list(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v]


def _client(server: str | None):
    if server:
        return httpx.Client(base_url=server, timeout=None)
    from fastapi.testclient import TestClient

    from .service.app import app

    return TestClient(app)


def _post(args, path: str, payload: dict) -> dict:
    """POST to the service and return the JSON body, or exit on error."""
    try:
        with _client(getattr(args, "server", None)) as client:
            resp = client.post(path, json=payload)
    except httpx.HTTPError as exc:
        print(f"error (io): cannot reach server: {exc}", file=sys.stderr)
        raise SystemExit(3)
    if resp.status_code == 200:
        return resp.json()
    try:
        body = resp.json()
    except ValueError:
        body = {}
    if resp.status_code == 422:
        # Request-model validation failure.
        print(f"error (usage): invalid request: {body.get('detail')}", file=sys.stderr)
        raise SystemExit(2)
    kind = body.get("kind", "io")
    message = body.get("message", f"HTTP {resp.status_code}")
    print(f"error ({kind}): {message}", file=sys.stderr)
    raise SystemExit(EXIT_CODES.get(kind, 3))


def cmd_pair(args) -> int:
    body = _post(args, "/pair", {
        "clear_dir": args.clear,
        "depth_dir": args.depth,
        "out_path": args.out,
        "n": args.n,
        "seed": args.seed,
        "strict": args.strict,
        "aligned": args.aligned,
        "test_count": args.test_count,
        "a_set": args.a_set,
        "beta_set": args.beta_set,
    })
    print(f"# seed={body['seed']}")
    print(f"manifest written: {body['manifest_path']}")
    print(
        f"corpus_size={body['corpus_size']} n={body['n']} "
        f"records={body['record_count']} train={body['train_count']} "
        f"test={body['test_count']} fixed_points={body['fixed_points']}"
    )
    if body["violations"]:
        for v in body["violations"]:
            print(f"violation: {v}", file=sys.stderr)
        return 4
    return 0


def cmd_synthesize(args) -> int:
    body = _post(args, "/synthesize", {
        "out_dir": args.out,
        "manifest_path": args.manifest,
        "aligned": args.aligned,
        "clear_dir": args.clear,
        "depth_dir": args.depth,
        "seed": args.seed,
        "workers": args.workers,
        "depth_scale": args.depth_scale,
        "a_set": args.a_set,
        "beta_set": args.beta_set,
    })
    print(f"# seed={body['seed']}")
    print(
        f"synthesized={body['successes']} failures={len(body['failures'])} "
        f"wall_time_s={body['wall_time_s']:.3f} out={body['out_dir']}"
    )
    for failure in body["failures"]:
        print(f"failed {failure['pair_id']}: {failure['message']}", file=sys.stderr)
    return 0


def cmd_evaluate(args) -> int:
    sets = [{"restored_dir": restored, "gt_dir": gt} for restored, gt in args.set or []]
    body = _post(args, "/evaluate", {"sets": sets})
    sys.stdout.write(body["report"])
    return 0


def cmd_fusion_bench(args) -> int:
    body = _post(args, "/fusion-bench", {"seed": args.seed, "steps": args.steps})
    sys.stdout.write(body["report"])
    return 0


def cmd_diff(args) -> int:
    body = _post(args, "/diff", {
        "a_dir": args.a,
        "b_dir": args.b,
        "out_dir": args.out,
    })
    print(f"diffs written: {body['count']} -> {body['out_dir']}")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service.app import app

    uvicorn.run(app, host=args.host, port=args.port)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dahaze",
        description="Depth-agnostic synthetic haze dataset toolkit.",
    )
    parser.add_argument("--version", action="version", version=f"dahaze {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_server(p):
        p.add_argument("--server", help="base URL of a running service "
                       "(default: run the service in-process)")

    def add_seed(p):
        p.add_argument("--seed", type=_seed_value, default=DEFAULT_SEED,
                       help=f"64-bit seed (default 0x{DEFAULT_SEED:X}); "
                       "echoed in every report")

    p = sub.add_parser("pair", help="build a shuffled-pairing dataset manifest")
    p.add_argument("--clear", required=True, help="directory of clear PNG images")
    p.add_argument("--depth", required=True, help="directory of depth maps (.dahz/.png)")
    p.add_argument("-o", "--out", required=True, help="manifest output path")
    p.add_argument("--n", type=int, default=1, help="replicas per clear image")
    p.add_argument("--strict", action="store_true",
                   help="forbid pairing an image with its own aligned depth")
    p.add_argument("--aligned", action="store_true",
                   help="keep aligned pairs instead of shuffling")
    p.add_argument("--test-count", type=int, default=0,
                   help="clear images to hold out as the test split")
    p.add_argument("--a-set", type=_float_list, default=None,
                   help="comma-separated atmospheric light values")
    p.add_argument("--beta-set", type=_float_list, default=None,
                   help="comma-separated scattering coefficients")
    add_seed(p)
    add_server(p)
    p.set_defaults(func=cmd_pair)

    p = sub.add_parser("synthesize", help="synthesize hazy images from a manifest")
    p.add_argument("--manifest", help="manifest file to synthesize")
    p.add_argument("-o", "--out", required=True, help="output image directory")
    p.add_argument("--workers", type=int, default=1, help="worker pool size")
    p.add_argument("--aligned", action="store_true",
                   help="bypass shuffling: build and run an aligned manifest "
                   "from --clear/--depth")
    p.add_argument("--clear", help="clear image directory (aligned mode)")
    p.add_argument("--depth", help="depth map directory (aligned mode)")
    p.add_argument("--depth-scale", type=float, default=None,
                   help="linear scale for 16-bit PNG depth input")
    p.add_argument("--a-set", type=_float_list, default=None)
    p.add_argument("--beta-set", type=_float_list, default=None)
    add_seed(p)
    add_server(p)
    p.set_defaults(func=cmd_synthesize)

    p = sub.add_parser("evaluate", help="score restored images against ground truth")
    p.add_argument("--set", nargs=2, action="append", metavar=("RESTORED", "GT"),
                   required=True, help="restored/ground-truth directory pair "
                   "(repeat for multiple sets)")
    add_server(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("fusion-bench", help="cost, gradient, and demo-training "
                       "report for the three fusion modes")
    p.add_argument("--steps", type=int, default=60, help="demo training steps")
    add_seed(p)
    add_server(p)
    p.set_defaults(func=cmd_fusion_bench)

    p = sub.add_parser("diff", help="emit per-pair absolute-difference images")
    p.add_argument("--a", required=True, help="first image directory")
    p.add_argument("--b", required=True, help="second image directory")
    p.add_argument("-o", "--out", required=True, help="output directory")
    add_server(p)
    p.set_defaults(func=cmd_diff)

    p = sub.add_parser("serve", help="run the HTTP service under uvicorn")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8571)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 1


if __name__ == "__main__":
    sys.exit(main())
