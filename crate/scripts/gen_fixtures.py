#!/usr/bin/env python3
"""Regenerates the bundled fixtures under fixtures/.

    python3 scripts/gen_fixtures.py

Output is deterministic (fixed RNG seed).
"""
import json
import os
import random

ROOT = os.path.join(os.path.dirname(os.path.abspath(__file__)), "..", "fixtures")

SERVICES = [
    "admin-basic-info", "admin-order", "admin-route", "admin-travel", "admin-user",
    "assurance", "auth", "basic", "cancel", "config", "consign-price", "consign",
    "contacts", "delivery", "execute", "food", "inside-payment", "news",
    "notification", "order-other", "order", "payment", "preserve-other", "preserve",
    "price", "rebook", "route-plan", "route", "seat", "security", "station-food",
    "station", "ticket-office", "train-food", "train", "travel-plan", "travel",
    "travel2", "user", "verification-code", "voucher",
]
assert len(SERVICES) == 41

# caller -> [(callee, endpoint index on callee)]
CALLS = {
    "preserve": [("security", 0), ("contacts", 0), ("travel", 0), ("travel", 1),
                 ("station", 0), ("seat", 0), ("order", 0), ("order", 1),
                 ("assurance", 0), ("food", 0), ("consign", 0), ("user", 0),
                 ("notification", 0), ("basic", 0)],
    "preserve-other": [("security", 0), ("contacts", 0), ("travel2", 0), ("station", 0),
                       ("seat", 0), ("order-other", 0), ("order-other", 1),
                       ("assurance", 0), ("food", 0), ("consign", 0), ("user", 0),
                       ("notification", 0), ("basic", 0)],
    "travel": [("route", 0), ("train", 0), ("basic", 0), ("seat", 1), ("order", 2)],
    "travel2": [("route", 0), ("train", 0), ("basic", 0), ("seat", 1), ("order-other", 2)],
    "basic": [("station", 0), ("station", 1), ("train", 0), ("route", 0), ("price", 0)],
    "seat": [("order", 2), ("order-other", 2), ("config", 0), ("travel", 2), ("travel2", 2)],
    "order": [("station", 1)],
    "order-other": [("station", 1)],
    "cancel": [("order", 0), ("order", 3), ("order-other", 0), ("order-other", 3),
               ("inside-payment", 0), ("user", 0), ("notification", 0)],
    "rebook": [("order", 0), ("order", 3), ("order-other", 0), ("travel", 0), ("travel2", 0),
               ("station", 0), ("seat", 0), ("inside-payment", 1)],
    "inside-payment": [("order", 0), ("order", 3), ("order-other", 0), ("payment", 0)],
    "execute": [("order", 0), ("order", 3), ("order-other", 0), ("order-other", 3)],
    "security": [("order", 4), ("order-other", 4)],
    "route-plan": [("route", 0), ("travel", 0), ("travel2", 0), ("station", 0)],
    "travel-plan": [("route-plan", 0), ("seat", 0), ("travel", 0), ("travel2", 0), ("station", 0)],
    "food": [("station-food", 0), ("train-food", 0), ("travel", 0)],
    "consign": [("consign-price", 0)],
    "admin-basic-info": [("station", 0), ("train", 0), ("config", 0), ("price", 0), ("contacts", 0)],
    "admin-order": [("order", 0), ("order-other", 0)],
    "admin-route": [("route", 0), ("route", 1)],
    "admin-travel": [("travel", 0), ("travel", 3), ("travel2", 0)],
    "admin-user": [("user", 0), ("user", 1)],
    "user": [("auth", 0)],
    "auth": [("verification-code", 0)],
}

ENTRY_WEIGHTS = {
    "preserve": 18, "preserve-other": 6, "travel-plan": 9, "cancel": 8, "rebook": 6,
    "execute": 5, "food": 5, "admin-order": 4, "admin-travel": 3, "admin-user": 3,
    "admin-basic-info": 3, "route-plan": 4, "inside-payment": 4, "consign": 3,
    "user": 5, "news": 2, "travel": 8,
}


def svc_name(short):
    return f"ts-{short}-service"


def base_route(short):
    return "/api/v1/" + short.replace("-", "") + "service"


def entity(short):
    return short.split("-")[-1] if short != "travel2" else "trip"


def endpoints_for(short):
    e = entity(short)
    return [
        ("GET", f"/{e}s"),
        ("POST", f"/{e}s/query"),
        ("GET", f"/{e}s/{{id}}"),
        ("PUT", f"/{e}s"),
        ("POST", f"/{e}s/security"),
    ]


def ep_id(short, idx):
    m, p = endpoints_for(short)[idx]
    return f"{m} {p}"


def order_service_extra():
    functions = ["createOrder", "validateOrder", "checkSeat", "saveOrder", "queryOrders",
                 "filterByDate", "updateOrder", "securityInfo"]
    flows = {
        ("POST", "/orders"): [
            {"seq": 1, "function": "createOrder", "calls": ["validateOrder"]},
            {"seq": 2, "function": "validateOrder", "calls": ["checkSeat"]},
            {"seq": 3, "function": "createOrder", "calls": ["saveOrder"]},
            {"seq": 4, "function": "saveOrder", "calls": []},
        ],
        ("POST", "/orders/query"): [
            {"seq": 1, "function": "queryOrders", "calls": ["filterByDate"]},
        ],
        ("PUT", "/orders"): [
            {"seq": 1, "function": "updateOrder", "calls": ["validateOrder", "saveOrder"]},
        ],
    }
    return functions, flows


def build_manifest():
    services = []
    for short in SERVICES:
        eps = [{"method": m, "path": p, "calls": [], "flow": []} for m, p in endpoints_for(short)]
        functions = []
        if short == "order":
            functions, flows = order_service_extra()
            eps.append({"method": "POST", "path": "/orders", "calls": [], "flow": []})
            for ep in eps:
                ep["flow"] = flows.get((ep["method"], ep["path"]), [])
        # Spread calls across the caller's endpoints so pair counts vary.
        for i, (callee, idx) in enumerate(CALLS.get(short, [])):
            eps[i % 2]["calls"].append({"service": svc_name(callee), "endpoint": ep_id(callee, idx)})
        services.append({
            "name": svc_name(short),
            "base_route": base_route(short),
            "endpoints": eps,
            "functions": [{"name": f} for f in functions],
        })
    return {"system_name": "Train Ticket", "services": services}


def six_manifest():
    def svc(name, route, calls, endpoints=None, functions=(), flows=None):
        eps = endpoints or [("GET", "/work")]
        out = []
        for j, (m, p) in enumerate(eps):
            out.append({
                "method": m,
                "path": p,
                "calls": [{"service": c, "endpoint": "GET /work"} for c in calls] if j == 0 else [],
                "flow": (flows or {}).get(f"{m} {p}", []),
            })
        return {"name": name, "base_route": route, "endpoints": out,
                "functions": [{"name": f} for f in functions]}

    return {
        "system_name": "Six Services",
        "services": [
            svc("S1", "/api/c1", ["S4", "S6"],
                endpoints=[("GET", "/work"), ("POST", "/orders")],
                functions=["receive", "validate", "persist", "notify"],
                flows={"POST /orders": [
                    {"seq": 1, "function": "receive", "calls": ["validate"]},
                    {"seq": 2, "function": "validate", "calls": ["persist"]},
                    {"seq": 3, "function": "persist", "calls": ["notify"]},
                ]}),
            svc("S2", "/api/c1", ["S1"]),
            svc("S3", "/api/c2", ["S2"]),
            svc("S4", "/api/c2", ["S6"]),
            svc("S5", "/api/c3", ["S4"]),
            svc("S6", "/api/c4", []),
        ],
    }


def gen_traces(manifest, n_traces, rng):
    calls = {}
    for s in manifest["services"]:
        out = []
        for ep in s["endpoints"]:
            for c in ep["calls"]:
                out.append((c["service"], c["endpoint"]))
        calls[s["name"]] = sorted(set(out))
    endpoints = {s["name"]: [f'{e["method"]} {e["path"]}' for e in s["endpoints"]]
                 for s in manifest["services"]}

    entries = sorted(ENTRY_WEIGHTS)
    weights = [ENTRY_WEIGHTS[e] for e in entries]
    records = []
    counter = 0

    def new_id():
        nonlocal counter
        counter += 1
        return "%016x" % rng.getrandbits(64)

    for t in range(n_traces):
        trace_id = "%032x" % rng.getrandbits(128)
        root_svc = svc_name(rng.choices(entries, weights)[0])
        t0 = 1_700_000_000_000_000 + t * 10_000

        def emit(service, endpoint, parent, start, depth):
            sid = new_id()
            dur = rng.randint(200, 5_000)
            rec = {
                "trace_id": trace_id,
                "span_id": sid,
                "parent_span_id": parent,
                "service": service,
                "endpoint": endpoint,
                "start_time": start,
                "duration": dur,
                "status": "error" if rng.random() < 0.03 else "ok",
            }
            if parent is None and rng.random() < 0.5:
                del rec["parent_span_id"]
            if rng.random() < 0.1:
                rec["tags"] = {"http.status_code": 200}
            records.append(rec)
            # Internal span of the same service, collapsed during extraction.
            if rng.random() < 0.15 and depth < 4:
                emit(service, endpoint + " (internal)", sid, start + 1, depth + 1)
                return
            options = calls[service]
            if not options or depth >= 4:
                return
            k = rng.choice([1, 1, 1, 2, 2, 3])
            chosen = rng.sample(options, min(k, len(options)))
            child_start = start + 10
            for callee, ep in chosen:
                # Occasional equal start times exercise the span-id tie-break.
                if rng.random() >= 0.2:
                    child_start += rng.randint(1, 50)
                emit(callee, ep, sid, child_start, depth + 1)

        emit(root_svc, rng.choice(endpoints[root_svc]), None, t0, 0)

    lines = [json.dumps(r, separators=(",", ":")) for r in records]
    rng.shuffle(lines)
    malformed = [
        '{"trace_id":"broken","span_id":"x"',
        'not json at all',
        '{"trace_id":"m1","span_id":"a","service":"ts-order-service","start_time":1,"duration":1,"status":"ok"}',
        '{"trace_id":"m2","span_id":"a","service":"ts-order-service","endpoint":"GET /orders","start_time":"soon","duration":1,"status":"ok"}',
        '{"trace_id":"m3","span_id":"a","service":"ts-order-service","endpoint":"GET /orders","start_time":1,"duration":1,"status":"maybe"}',
    ]
    for i, bad in enumerate(malformed):
        lines.insert((i + 1) * len(lines) // 6, bad)
    return lines


def main():
    rng = random.Random(20211018)
    manifest = build_manifest()
    with open(os.path.join(ROOT, "trainticket.json"), "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    with open(os.path.join(ROOT, "six.json"), "w") as f:
        json.dump(six_manifest(), f, indent=2)
        f.write("\n")
    lines = gen_traces(manifest, 1000, rng)
    with open(os.path.join(ROOT, "traces-1000.jsonl"), "w") as f:
        f.write("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
