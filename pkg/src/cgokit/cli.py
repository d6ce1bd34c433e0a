"""Command line entry point: ``cgokit run --config path.json [--out dir] [--threads n]``."""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
import traceback
from pathlib import Path

import jsonschema

from . import errors
from . import experiments as ex

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2
THREADS_ENV = "CGOKIT_THREADS"


class ConfigError(errors.ConfigError):
    def __init__(self, message, path=()):
        super().__init__(message)
        self.path = list(path)


def load_config(path):
    """Parse and validate a config file; raise ConfigError on any problem."""
    try:
        raw = Path(path).read_bytes()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}")
    try:
        cfg = json.loads(raw)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}")
    if not isinstance(cfg, dict) or not cfg:
        raise ConfigError("config is empty")
    try:
        jsonschema.validate(cfg, ex.BASE_SCHEMA)
        jsonschema.validate(cfg, ex.schema_for(cfg["experiment"]))
    except jsonschema.ValidationError as e:
        raise ConfigError(e.message, e.absolute_path)
    return cfg, hashlib.sha256(raw).hexdigest()


def resolve_threads(arg, cfg=None):
    if arg is not None:
        return max(1, int(arg))
    env = os.environ.get(THREADS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got {env!r}")
    return int((cfg or {}).get("threads", 1))


def _sha(path):
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def run(cfg, out_dir, threads=1, config_sha=None):
    """Execute one experiment and write ``manifest.json``; return the manifest dict."""
    full = ex.merged(cfg)
    ctx = ex.RunContext(out_dir, full["seed"], threads)
    t0 = time.perf_counter()
    error = None
    try:
        ex.RUNNERS[full["experiment"]](full, ctx)
    except Exception as e:  # module errors are reported, not raised
        error = {"type": type(e).__name__, "message": str(e),
                 "traceback": traceback.format_exc().splitlines()[-6:]}
    ctx.wall["total"] = time.perf_counter() - t0
    ctx.text("config_resolved.json", json.dumps(full, indent=2, sort_keys=True) + "\n")
    manifest = {
        "experiment": full["experiment"],
        "version": ex.artifact_version(),
        "config_sha256": config_sha,
        "seed": full["seed"],
        "threads": threads,
        "outputs": {f: _sha(ctx.out / f) for f in sorted(set(ctx.files))},
        "assertions": ctx.assertions,
        "wall_times": ctx.wall,
        "error": error,
        "pass": error is None and bool(ctx.assertions) and all(a["pass"] for a in ctx.assertions),
    }
    (ctx.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def _config_error(e):
    json.dump({"error": "invalid_config", "message": str(e), "path": e.path}, sys.stdout)
    sys.stdout.write("\n")
    return EXIT_CONFIG


def main(argv=None):
    ap = argparse.ArgumentParser(prog="cgokit")
    sub = ap.add_subparsers(dest="command", required=True)
    r = sub.add_parser("run", help="run one experiment from a JSON config")
    r.add_argument("--config", required=True)
    r.add_argument("--out", default=None, help="output directory (default: config output_dir or ./out)")
    r.add_argument("--threads", type=int, default=None)
    args = ap.parse_args(argv)
    try:
        cfg, sha = load_config(args.config)
        threads = resolve_threads(args.threads, cfg)
    except ConfigError as e:
        return _config_error(e)
    out = args.out or cfg.get("output_dir") or "out"
    m = run(cfg, out, threads, sha)
    for a in m["assertions"]:
        print(f"{'PASS' if a['pass'] else 'FAIL'} {a['name']}: {a['value']} {a['op']} {a['threshold']}")
    if m["error"]:
        print(f"ERROR {m['error']['type']}: {m['error']['message']}")
    print(f"manifest: {Path(out) / 'manifest.json'}")
    return EXIT_OK if m["pass"] else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
