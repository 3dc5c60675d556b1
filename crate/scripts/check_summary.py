#!/usr/bin/env python3
"""Recompute the checks in `<command>.summary.json` from the data files the
same run wrote, and compare with the pass/fail the summary claims.

    scripts/check_summary.py OUT_DIR_OR_SUMMARY [...]

Exit status 0 when every recomputed verdict agrees with the summary.
"""

import csv
import json
import math
import sys
from pathlib import Path

LEVEL_TOL = 1e-12


def num(x):
    return None if x in ("", None) else float(x)


def read_csv(path):
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def load_table(out, artifacts, name):
    """Rows of `name` from its .json (under key `points`/`rows`) or .csv."""
    for a in artifacts:
        if a == f"{name}.csv":
            return "csv", read_csv(out / a)
        if a == f"{name}.json":
            return "json", json.loads((out / a).read_text())
    raise SystemExit(f"no {name} artifact in {artifacts}")


def count_between(levels, a, b):
    lo, hi = min(a, b), max(a, b)
    return sum(m for v, m in levels if lo < v < hi)


def levels_to(levels, x):
    n = count_between(levels, 0.0, x)
    return n if x >= 0 else -n


# -------------------------------------------------------------- commands


def spectrum(out, s):
    kind, data = load_table(out, s["artifacts"], "spectrum")
    if kind == "json":
        entries = [(e["value"], e["multiplicity"]) for e in data["entries"]]
        numeric = data["numeric"]
    else:
        entries = [(float(r["value"]), int(r["multiplicity"])) for r in data if r["kind"] == "exact"]
        numeric = [float(r["value"]) for r in data if r["kind"] == "numeric"]
    window, cutoff = s["params"]["window"], s["params"]["cutoff"]

    def mult(level):
        return next((m for v, m in entries if abs(v - level) <= LEVEL_TOL), 0)

    asym = [v for v, m in entries if abs(v) < cutoff - 1e-9 and mult(-v) != m]
    exact = sorted(v for v, m in entries for _ in range(m) if abs(v) < window)
    numeric = sorted(numeric)
    dev = max((abs(a - b) for a, b in zip(numeric, exact)), default=0.0) if len(exact) == len(numeric) else math.inf
    return {"spectrum_symmetric": not asym, "numeric_matches_exact": dev <= 1e-9}


def grid(out, s):
    if s["params"]["mode"] == "z":
        kind, data = load_table(out, s["artifacts"], "grid")
        if kind == "json":
            rows = [
                dict(d=p["dist_to_w"], on=p["on_w"], fr=p["fredholm"], err=p["error"] or "")
                for p in data["points"]
            ]
        else:
            rows = [
                dict(d=float(r["dist_to_w"]), on=r["on_w"] == "true", fr=r["fredholm"] == "true", err=r["error"])
                for r in data
            ]
        cell = s["params"]["cell_radius"]
        return {
            "fredholm_iff_off_w": all(r["fr"] != r["on"] and r["on"] == (r["d"] < 1e-9) for r in rows),
            "gap_failures_near_w": not any(r["err"] == "NoSpectralGap" and r["d"] > cell for r in rows),
            "no_other_errors": not any(r["err"] not in ("", "NoSpectralGap") for r in rows),
        }
    kind, data = load_table(out, s["artifacts"], "grid")
    if kind == "json":
        wm = [tuple(x) for x in data["walls_minus"]]
        wp = [tuple(x) for x in data["walls_plus"]]
        rows = [dict(dm=p["delta"][0], dp=p["delta"][1], fr=p["fredholm"], idx=p["index"], err=p["error"]) for p in data["points"]]
    else:
        walls = read_csv(out / "walls.csv")
        wm = [(float(r["value"]), int(r["multiplicity"])) for r in walls if r["end"] == "minus"]
        wp = [(float(r["value"]), int(r["multiplicity"])) for r in walls if r["end"] == "plus"]
        rows = [
            dict(
                dm=float(r["delta_minus"]),
                dp=float(r["delta_plus"]),
                fr=r["fredholm"] == "true",
                idx=None if r["index"] == "" else int(r["index"]),
                err=r["error"] or None,
            )
            for r in read_csv(out / "grid.csv")
        ]

    def on_wall(levels, d):
        return any(abs(v - d) <= LEVEL_TOL for v, _ in levels)

    corrected = {r["idx"] - levels_to(wp, r["dp"]) + levels_to(wm, r["dm"]) for r in rows if r["idx"] is not None}
    return {
        "fredholm_matches_walls": all(r["fr"] != (on_wall(wm, r["dm"]) or on_wall(wp, r["dp"])) for r in rows),
        "index_jumps_match_walls": len(corrected) == 1,
        "no_errors": not any(r["err"] for r in rows),
    }


def index(out, s):
    kind, data = load_table(out, s["artifacts"], "index")
    rows = data["rows"] if kind == "json" else [{k: int(v) if k in ("index", "flow", "correction") else v for k, v in r.items()} for r in data]
    return {"index_equals_minus_flow": all(r["index"] == -r["flow"] + r["correction"] for r in rows)}


def scan(out, s):
    lines = [json.loads(l) for l in (out / "monopole.jsonl").read_text().splitlines() if l.strip()]
    header = next(l for l in lines if l["kind"] == "header")
    pts = [l for l in lines if l["kind"] == "point"]
    higgs = max((p["higgs_defect"] for p in pts), default=0.0)
    links = max((d for p in pts for d in p["link_defects"] if d is not None), default=0.0)

    def diff(a, b):
        if a is None and b is None:
            return 0.0
        if a is None or b is None:
            return math.inf
        return abs(a - b)

    order = max((diff(a, b) for p in pts for a, b in zip(p["plaquette_norms"], p["alt_plaquette_norms"])), default=0.0)
    return {
        "higgs_anti_hermitian": higgs <= 1e-10,
        "links_unitary": links <= 1e-10,
        "tree_order_invariant": order <= 1e-8,
        "nonzero_rank": header["rank"] > 0 and all(p["rank"] == header["rank"] for p in pts),
    }


def singularity(out, s):
    data = json.loads((out / "singular_report.json").read_text())
    rep, audit = data["report"], data["audit"]
    cs = [abs(r["c_signed"]) for r in rep["rays"] if r["c_signed"] is not None]
    full = len(cs) == len(rep["rays"]) and cs
    c_mean = sum(cs) / len(cs) if full else None
    spread = max(abs(c - c_mean) for c in cs) / c_mean if full else None
    pole = max((r["pole_rank"] for r in rep["rays"]), default=0)
    return {
        "coefficient_half": c_mean is not None and abs(2 * c_mean - 1) <= 0.05,
        "isotropic": spread is not None and spread <= 0.02,
        "pole_rank_matches_audit": pole == audit["h"] - audit["k_bar"] and pole > 0,
    }


def audit(out, s):
    kind, data = load_table(out, s["artifacts"], "audit")
    if kind == "json":
        rows = [dict(r["audit"], fraction=r["fraction"]) for r in data["rows"]]
    else:
        rows = [{k: (num(v) if k == "fraction" else v) for k, v in r.items()} for r in data]
        for r in rows:
            for k in ("v_bar", "v_lower_right", "e_hat", "k_bar", "h", "dh", "w_prime", "rk_h_case"):
                r[k] = int(r[k])
    near = [r for r in rows if r["fraction"] is not None]
    at = [r for r in rows if r["fraction"] is None]

    def residuals(r):
        vb, vl, e, k, wp = r["v_bar"], r["v_lower_right"], r["e_hat"], r["k_bar"], r["w_prime"]
        return [vb - e - wp, e - (vl + wp - k), vb - (vl + r["h"] - k)]

    return {
        "sequence_residuals_zero": all(residuals(r) == [0, 0, 0] for r in near),
        "rk_h_matches_case_table": all(r["h"] == r["rk_h_case"] == 2 * r["w_prime"] for r in near),
        "v_lower_right_equals_e_hat_at_w": all(r["v_lower_right"] == r["e_hat"] for r in at),
    }


COMMANDS = {f.__name__: f for f in (spectrum, grid, index, scan, singularity, audit)}


def check(summary_path):
    s = json.loads(summary_path.read_text())
    out = summary_path.parent
    recomputed = COMMANDS[s["header"]["command"]](out, s)
    ok = True
    for c in s["checks"]:
        mine = recomputed.get(c["name"])
        agree = mine == c["pass"]
        ok &= agree
        print(f"{'ok  ' if agree else 'DIFF'} {s['header']['command']}.{c['name']}: claimed {c['pass']}, recomputed {mine}")
    claimed_all = all(c["pass"] for c in s["checks"])
    if s["pass"] != claimed_all:
        print(f"DIFF {s['header']['command']}: overall pass {s['pass']} but checks say {claimed_all}")
        ok = False
    return ok


def main(argv):
    if not argv:
        print(__doc__.strip())
        return 2
    paths = []
    for a in map(Path, argv):
        paths.extend(sorted(a.glob("*.summary.json")) if a.is_dir() else [a])
    if not paths:
        print("no summaries found")
        return 2
    return 0 if all([check(p) for p in paths]) else 1


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
