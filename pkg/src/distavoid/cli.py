"""Command-line front end.

Every run resolves a flat config (defaults, then ``--config`` file, then
explicit flags), executes one command and writes an artifact that embeds the
version, the resolved config and the seed.  Timing and worker count live in a
separate ``runtime`` block so payloads are comparable across machines.

Exit codes: 0 success, 2 refused precondition, 1 internal error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
import time
from datetime import datetime, timezone
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .grid import DistanceSet, GridIndicator, density
from .mis import SolverLimitError

COMMANDS = ("m1d", "product1d", "zoom", "zoom-props", "saturation", "satprops", "mgrid",
            "product-scan", "clique-cert")

# per-command defaults; a key absent here and from the config is required
DEFAULTS: dict[str, dict] = {
    "m1d": {"node_limit": 20_000_000},
    "product1d": {"nmax": None, "node_limit": 20_000_000},
    "zoom": {"delta": None, "delta_cells": None},
    "zoom-props": {"trials": 1000, "kmax": 64, "dims": "1,2"},
    "saturation": {"measure": "circle:1.0:720", "measure2": None, "strict": False},
    "satprops": {"trials": 200, "atoms": 360},
    "mgrid": {"dim": 2, "eps": "0.1", "override": "", "mode": "exhaustive", "budget": 0,
              "restarts": 1, "delta0": None, "R0": None},
    "product-scan": {"dim": 2, "override": "", "mode": "local-search", "budget": 100000,
                     "restarts": 1},
    "clique-cert": {"dim": None, "tol": 1e-9, "det_trials": 10},
}
REQUIRED = {
    "m1d": ("distances", "nmax"),
    "product1d": ("d1", "d2", "k", "t_list"),
    "zoom": ("input", "eps"),
    "zoom-props": (),
    "saturation": ("raster",),
    "satprops": (),
    "mgrid": ("distances",),
    "product-scan": ("d1", "d2", "t_list", "override"),
    "clique-cert": ("points",),
}
# keys that never enter the payload config
RUNTIME_KEYS = {"threads", "config", "out", "csv", "json"}


class Refusal(ValueError):
    """A precondition failed; reported with exit code 2."""


# parsing helpers --------------------------------------------------------------

def _int_list(text) -> list[int]:
    if isinstance(text, list):
        return [int(x) for x in text]
    try:
        return [int(x) for x in str(text).split(",")]
    except ValueError:
        raise Refusal(f"expected comma-separated integers, got {text!r}") from None


def _count(text) -> int:
    """Integer that may be written as 1e6."""
    try:
        v = float(text)
    except (TypeError, ValueError):
        raise Refusal(f"expected a number, got {text!r}") from None
    if v != int(v):
        raise Refusal(f"expected a whole number, got {text!r}")
    return int(v)


def parse_overrides(text: str) -> dict:
    out = {}
    for item in filter(None, (s.strip() for s in str(text).split(","))):
        if "=" not in item:
            raise Refusal(f"override {item!r} is not key=value")
        key, val = item.split("=", 1)
        out[key.strip()] = val.strip()
    return out


def _distances(text) -> DistanceSet:
    if isinstance(text, list):
        text = ",".join(str(x) for x in text)
    return DistanceSet.parse(str(text))


def _load_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise Refusal(f"no such file: {path}") from None
    except json.JSONDecodeError as e:
        raise Refusal(f"{path} is not valid JSON: {e}") from None


def default_threads() -> int:
    raw = os.environ.get("AVOID_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise Refusal(f"AVOID_THREADS must be an integer, got {raw!r}") from None
    return max(n, 1)


# serialization ----------------------------------------------------------------

def _jsonable(obj):
    if isinstance(obj, Fraction):
        return str(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, (tuple, set, frozenset)):
        return list(obj)
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj) -> str:
    return json.dumps(obj, sort_keys=True, indent=2, default=_jsonable, ensure_ascii=False) + "\n"


def csv_text(header: list[str], rows: list[list[str]]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    if not directory.is_dir():
        raise Refusal(f"output directory {directory} does not exist")
    fd, tmp = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


# commands ---------------------------------------------------------------------
# each returns (result dict, optional (header, rows) table)

def cmd_m1d(cfg, threads):
    from .onedim import bounds_1d

    D = _distances(cfg["distances"])
    b = bounds_1d(D, _count(cfg["nmax"]), threads=threads, node_limit=_count(cfg["node_limit"]))
    out = b.to_report().to_json()
    out["exact_value"] = b.exact
    out["distances"] = D.to_list()
    return out, None


def cmd_product1d(cfg, threads):
    from .onedim import PRODUCT_HEADER, product_experiment_1d

    D1, D2 = _distances(cfg["d1"]), _distances(cfg["d2"])
    k = _count(cfg["k"])
    ts = _int_list(cfg["t_list"])
    rows = []
    for t in ts:
        nmax = _count(cfg["nmax"]) if cfg["nmax"] is not None else 3 * t
        rows += product_experiment_1d(D1, D2, k, [t], nmax, threads=threads,
                                      node_limit=_count(cfg["node_limit"]))
    result = {"rows": [{"t": r.t, "lower": r.lower, "upper": r.upper, "reference": r.reference,
                        "verdict": r.verdict, "combined": list(r.combined)} for r in rows]}
    return result, (PRODUCT_HEADER, [r.csv_row() for r in rows])


def cmd_zoom(cfg, threads):
    from .zoom import ZoomParams, zoom_out

    A = GridIndicator.from_json(_load_json(cfg["input"]))
    if (cfg["delta"] is None) == (cfg["delta_cells"] is None):
        raise Refusal("give exactly one of --delta and --delta-cells")
    if cfg["delta_cells"] is not None:
        p = ZoomParams.in_cells(_count(cfg["delta_cells"]), cfg["eps"], A)
    else:
        p = ZoomParams(cfg["delta"], cfg["eps"])
    Z = zoom_out(A, p)
    return {"raster": Z.to_json(), "window_cells": p.cells(A), "density": density(Z)}, None


def cmd_zoom_props(cfg, threads):
    from .zoom import zoom_property_battery

    dims = tuple(_int_list(cfg["dims"]))
    trials = _count(cfg["trials"])
    res = zoom_property_battery(_count(cfg["seed"]), trials, dims, _count(cfg["kmax"]))
    res["all_passed"] = all(v["zm_a_pass"] == trials and v["zm_b_pass"] == trials
                            for v in res.values())
    return res, None


def cmd_saturation(cfg, threads):
    from .saturation import i_or, i_sigma, parse_measure

    A = GridIndicator.from_json(_load_json(cfg["raster"]))
    s1 = parse_measure(cfg["measure"])
    if cfg["measure2"]:
        v = i_or(A, s1, parse_measure(cfg["measure2"]))
    else:
        v = i_sigma(A, s1, strict=bool(cfg["strict"]))
    return {"saturation": v.to_json(), "measures": [m for m in (cfg["measure"], cfg["measure2"]) if m]}, None


def cmd_satprops(cfg, threads):
    from .saturation import satprops_battery

    trials = _count(cfg["trials"])
    res = satprops_battery(_count(cfg["seed"]), trials, _count(cfg["atoms"]))
    res["all_passed"] = res["zoomingout_pass"] == trials and res["convlem_pass"] == trials
    return res, None


def _granular_overrides(cfg) -> dict:
    ov = parse_overrides(cfg["override"])
    ov.setdefault("mode", cfg["mode"])
    ov.setdefault("budget", _count(cfg["budget"]))
    ov.setdefault("seed", _count(cfg["seed"]))
    ov.setdefault("restarts", _count(cfg["restarts"]))
    if ov["mode"] == "local":
        ov["mode"] = "local-search"
    for key in ("budget", "restarts", "seed", "k2"):
        if key in ov:
            ov[key] = _count(ov[key])
    return ov


def cmd_mgrid(cfg, threads):
    from .granular import m_approx

    D = _distances(cfg["distances"])
    ov = _granular_overrides(cfg)
    if cfg["delta0"] is not None or cfg["R0"] is not None:
        ov["delta0"], ov["R0"] = cfg["delta0"], cfg["R0"]
    m, sched, res, tags = m_approx(cfg["eps"], D, _count(cfg["dim"]), ov, threads=threads)
    return {"m_prime": {"exact": str(m), "value": float(m)}, "guarantee": tags,
            "schedule": sched.to_json(), "search": res.to_json()}, None


def cmd_product_scan(cfg, threads):
    from .granular import SCAN_HEADER, product_scan

    D1, D2 = _distances(cfg["d1"]), _distances(cfg["d2"])
    ov = _granular_overrides(cfg)
    rows = product_scan(D1, D2, _int_list(cfg["t_list"]), _count(cfg["dim"]), ov, threads=threads)
    result = {"rows": [{"t": r.t, "lower_combined": r.lower_combined, "lower_d1": r.lower_d1,
                        "lower_d2": r.lower_d2, "product_of_lowers": r.product} for r in rows]}
    return result, (SCAN_HEADER, [r.csv_row() for r in rows])


def cmd_clique_cert(cfg, threads):
    from .rankcert import (PointConfig, generic_symmetric_det_nonzero, rank_bound_check,
                           repeated_distance_audit)

    obj = _load_json(cfg["points"])
    if isinstance(obj, list):
        obj = {"points": obj}
    exact = obj.get("exact", True)
    dim = cfg["dim"] if cfg["dim"] is not None else obj.get("dim")
    X = PointConfig(obj["points"], None if dim is None else _count(dim), exact)
    rank, passes = rank_bound_check(X, float(cfg["tol"]))
    audit = repeated_distance_audit(X, 0.0 if exact else float(cfg["tol"]))
    out = {"rank": rank, "passes": passes, "dim": X.dim, "n": X.n, "exact": X.exact,
           "distinct_distance_subsets": [list(s) for s in audit]}
    n_det = X.dim + 3
    if n_det <= 9:
        out["generic_det_nonzero"] = {
            "n": n_det,
            "value": generic_symmetric_det_nonzero(n_det, _count(cfg["det_trials"]),
                                                   seed=_count(cfg["seed"])),
        }
    return out, None


HANDLERS = {
    "m1d": cmd_m1d, "product1d": cmd_product1d, "zoom": cmd_zoom, "zoom-props": cmd_zoom_props,
    "saturation": cmd_saturation, "satprops": cmd_satprops, "mgrid": cmd_mgrid,
    "product-scan": cmd_product_scan, "clique-cert": cmd_clique_cert,
}


# argument parser ----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    common.add_argument("--config", help="flat JSON config (or a previous artifact) to start from")
    common.add_argument("--seed", type=int)
    common.add_argument("--threads", type=int, help="worker cap (default: $AVOID_THREADS or 1)")
    common.add_argument("--out", help="write the JSON artifact here")
    common.add_argument("--json", action="store_true", help="print the JSON artifact to stdout")

    parser = argparse.ArgumentParser(prog="distavoid", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_):
        return sub.add_parser(name, parents=[common], help=help_,
                              argument_default=argparse.SUPPRESS)

    p = add("m1d", "certified bracket on m(D) for integer D")
    p.add_argument("--distances")
    p.add_argument("--nmax")
    p.add_argument("--node-limit", dest="node_limit")

    p = add("product1d", "1-D product experiment over t")
    p.add_argument("--d1")
    p.add_argument("--d2")
    p.add_argument("--k")
    p.add_argument("--t-list", dest="t_list")
    p.add_argument("--nmax", help="period/window cap (default 3t per t)")
    p.add_argument("--node-limit", dest="node_limit")
    p.add_argument("--csv", help="write the table here as CSV")

    p = add("zoom", "apply the zooming-out operator to a raster")
    p.add_argument("--in", dest="input")
    p.add_argument("--delta", help="window side in period units")
    p.add_argument("--delta-cells", dest="delta_cells", help="window side in cells")
    p.add_argument("--eps")

    p = add("zoom-props", "seeded zoom lemma battery")
    p.add_argument("--trials")
    p.add_argument("--kmax")
    p.add_argument("--dims")

    p = add("saturation", "saturation functional of a raster")
    p.add_argument("--raster")
    p.add_argument("--measure", help="circle:R:N or points:x,y;...")
    p.add_argument("--measure2", help="second measure for the OR functional")
    p.add_argument("--strict", action="store_true")

    p = add("satprops", "seeded zooming-out and convolution gap battery")
    p.add_argument("--trials")
    p.add_argument("--atoms")

    p = add("mgrid", "granular lower bound on m(D) in dim 1 or 2")
    p.add_argument("--distances")
    p.add_argument("--dim")
    p.add_argument("--eps")
    p.add_argument("--override", help="comma list such as R=4,k2=24")
    p.add_argument("--mode", choices=["exhaustive", "local", "local-search"])
    p.add_argument("--budget")
    p.add_argument("--restarts")
    p.add_argument("--delta0")
    p.add_argument("--R0")

    p = add("product-scan", "granular lower bounds for D1 U tD2")
    p.add_argument("--d1")
    p.add_argument("--d2")
    p.add_argument("--t-list", dest="t_list")
    p.add_argument("--dim")
    p.add_argument("--override")
    p.add_argument("--mode", choices=["exhaustive", "local", "local-search"])
    p.add_argument("--budget")
    p.add_argument("--restarts")
    p.add_argument("--csv", help="write the table here as CSV")

    p = add("clique-cert", "rank and repeated-distance certificates for a point set")
    p.add_argument("--points")
    p.add_argument("--dim")
    p.add_argument("--tol")
    p.add_argument("--det-trials", dest="det_trials")
    return parser


def resolve_config(command: str, given: dict) -> dict:
    cfg = {"seed": 0, **DEFAULTS[command]}
    if "config" in given:
        loaded = _load_json(given["config"])
        if "config" in loaded and isinstance(loaded["config"], dict):
            loaded = loaded["config"]
        if loaded.get("command", command) != command:
            raise Refusal(f"config is for {loaded['command']!r}, not {command!r}")
        cfg.update({k: v for k, v in loaded.items() if k != "command"})
    cfg.update({k: v for k, v in given.items() if k not in RUNTIME_KEYS})
    unknown = set(cfg) - set(DEFAULTS[command]) - set(REQUIRED[command]) - {"seed"}
    if unknown:
        raise Refusal(f"unknown config keys for {command}: {sorted(unknown)}")
    missing = [k for k in REQUIRED[command] if cfg.get(k) in (None, "")]
    if missing:
        raise Refusal(f"{command} needs {', '.join('--' + m.replace('_', '-') for m in missing)}")
    cfg["seed"] = _count(cfg["seed"])
    return {"command": command, **cfg}


def run(command: str, given: dict, stdout=None) -> int:
    stdout = stdout or sys.stdout
    cfg = resolve_config(command, given)
    threads = int(given["threads"]) if "threads" in given else default_threads()
    if threads < 1:
        raise Refusal("--threads must be positive")
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    result, table = HANDLERS[command](cfg, threads)
    elapsed = time.perf_counter() - t0
    artifact = {
        "version": __version__,
        "command": command,
        "config": cfg,
        "seed": cfg["seed"],
        "result": result,
        "runtime": {"started_utc": started, "wall_clock_s": round(elapsed, 6),
                    "threads": threads},
    }
    text = dumps(artifact)
    if table is not None and "csv" in given:
        # CSV cannot carry metadata, so a sidecar holds the full artifact
        atomic_write(given["csv"], csv_text(*table))
        atomic_write(f"{given['csv']}.meta.json", text)
    if "out" in given:
        atomic_write(given["out"], text)
    if given.get("json") or ("out" not in given and (table is None or "csv" in given)):
        stdout.write(text)
    elif table is not None and "csv" not in given and "out" not in given:
        stdout.write(csv_text(*table))
    return 0


def main(argv=None) -> int:
    from .granular import SearchLimitError

    parser = build_parser()
    args = vars(parser.parse_args(argv))
    command = args.pop("command")
    try:
        return run(command, args)
    except (Refusal, SearchLimitError, SolverLimitError, ValueError, OSError) as e:
        kind = type(e).__name__
        sys.stderr.write(json.dumps({"error": kind, "message": str(e), "command": command},
                                    sort_keys=True) + "\n")
        return 2
    except Exception as e:  # noqa: BLE001
        sys.stderr.write(json.dumps({"error": "internal", "message": f"{type(e).__name__}: {e}",
                                     "command": command}, sort_keys=True) + "\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
