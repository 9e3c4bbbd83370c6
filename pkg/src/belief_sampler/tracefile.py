"""Comma-separated trace files.

Layout: one ``#`` metadata line of ``key=value`` pairs, one column header
row, then one record per (round, agent).  Floats are written as the
shortest decimal that round-trips the binary value.  Action and counter
cells are empty for the full-belief rule.
"""

from __future__ import annotations

import numpy as np

from .engine import SimulationTrace
from .errors import ValidationError

META_KEYS = ("config_hash", "seed", "rule", "m", "n", "thinning", "horizon", "true_state")


def header_columns(m: int) -> list[str]:
    return (["t", "agent", "signal", "action"]
            + [f"belief_{k}" for k in range(m)] + [f"count_{k}" for k in range(m)])


def format_trace(trace: SimulationTrace) -> str:
    m, n = trace.m, trace.n
    meta = {"config_hash": trace.config_hash, "seed": trace.seed, "rule": trace.rule,
            "m": m, "n": n, "thinning": trace.thinning, "horizon": trace.horizon,
            "true_state": trace.true_state}
    lines = ["# " + ",".join(f"{k}={meta[k]}" for k in META_KEYS),
             ",".join(header_columns(m))]
    pooled = trace.pooled
    blank_counts = "," * (m - 1)
    for k, t in enumerate(trace.rounds.tolist()):
        beliefs = pooled[k].tolist()
        signals = trace.signals[k].tolist()
        actions = trace.actions[k].tolist()
        counts = None if trace.counters is None else trace.counters[k].tolist()
        for i in range(n):
            action = "" if actions[i] < 0 else str(actions[i])
            cnt = blank_counts if counts is None else ",".join(map(str, counts[i]))
            lines.append(f"{t},{i},{signals[i]},{action},"
                         + ",".join(map(repr, beliefs[i])) + "," + cnt)
    return "\n".join(lines) + "\n"


def write_trace(trace: SimulationTrace, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(format_trace(trace))


def read_trace(path) -> SimulationTrace:
    """Load a trace file; private beliefs are not stored and come back as None."""
    with open(path, encoding="utf-8") as fh:
        first = fh.readline().rstrip("\n")
        if not first.startswith("# "):
            raise ValidationError(f"{path}: missing metadata line")
        meta = dict(item.split("=", 1) for item in first[2:].split(","))
        m, n = int(meta["m"]), int(meta["n"])
        if fh.readline().rstrip("\n").split(",") != header_columns(m):
            raise ValidationError(f"{path}: unexpected column header")
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    if len(rows) % n:
        raise ValidationError(f"{path}: record count {len(rows)} not a multiple of n={n}")
    r = len(rows) // n
    rounds = np.array([int(rows[k * n][0]) for k in range(r)], dtype=np.int64)
    signals = np.array([int(row[2]) for row in rows], dtype=np.int64).reshape(r, n)
    actions = np.array([int(row[3]) if row[3] else -1 for row in rows],
                       dtype=np.int64).reshape(r, n)
    beliefs = np.array([[float(x) for x in row[4:4 + m]] for row in rows]).reshape(r, n, m)
    if rows[0][4 + m]:
        counters = np.array([[int(x) for x in row[4 + m:]] for row in rows],
                            dtype=np.int64).reshape(r, n, m)
    else:
        counters = None
    with np.errstate(divide="ignore"):
        log_pooled = np.log(beliefs)
    return SimulationTrace(rounds=rounds, log_private=None, log_pooled=log_pooled,
                           actions=actions, counters=counters, signals=signals,
                           config_hash=meta["config_hash"], seed=int(meta["seed"]),
                           rule=meta["rule"], thinning=int(meta["thinning"]),
                           horizon=int(meta["horizon"]), true_state=int(meta["true_state"]),
                           beliefs=beliefs)
