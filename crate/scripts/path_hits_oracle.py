#!/usr/bin/env python3
"""Reference path-hits counter for a JSON Lines span file.

    python3 scripts/path_hits_oracle.py fixtures/traces-1000.jsonl > fixtures/traces-1000.hits.json

Deliberately naive: groups spans per trace, sorts children by
(start_time, span_id), walks every root-to-leaf branch, collapses consecutive
spans of one service and counts the resulting service keys. Output is a list
of [key, count] pairs, count descending then key ascending.
"""
import json
import sys
from collections import Counter, defaultdict

REQUIRED = {
    "trace_id": str,
    "span_id": str,
    "service": str,
    "endpoint": str,
    "start_time": int,
    "duration": int,
    "status": str,
}


def parse(line):
    try:
        rec = json.loads(line)
    except json.JSONDecodeError:
        return None
    if not isinstance(rec, dict):
        return None
    for field, ty in REQUIRED.items():
        v = rec.get(field)
        if not isinstance(v, ty) or isinstance(v, bool):
            return None
    if rec["start_time"] < 0 or rec["duration"] < 0 or rec["status"] not in ("ok", "error"):
        return None
    parent = rec.get("parent_span_id")
    if parent is not None and not isinstance(parent, str):
        return None
    return rec


def main(path):
    traces = defaultdict(list)
    malformed = 0
    with open(path) as f:
        for line in f:
            if not line.strip():
                continue
            rec = parse(line)
            if rec is None:
                malformed += 1
                continue
            traces[rec["trace_id"]].append(rec)

    counts = Counter()
    for spans in traces.values():
        roots = [s for s in spans if s.get("parent_span_id") is None]
        if len(roots) != 1:
            continue
        children = defaultdict(list)
        for s in spans:
            if s.get("parent_span_id") is not None:
                children[s["parent_span_id"]].append(s)

        def walk(span, prefix):
            services = prefix if prefix and prefix[-1] == span["service"] else prefix + [span["service"]]
            kids = sorted(children.get(span["span_id"], []), key=lambda c: (c["start_time"], c["span_id"]))
            if not kids:
                counts[">".join(services)] += 1
            for k in kids:
                walk(k, services)

        walk(roots[0], [])

    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    json.dump([[k, v] for k, v in ranked], sys.stdout, indent=1)
    sys.stdout.write("\n")
    print(f"traces={len(traces)} malformed={malformed} branches={sum(counts.values())}", file=sys.stderr)


if __name__ == "__main__":
    main(sys.argv[1])
