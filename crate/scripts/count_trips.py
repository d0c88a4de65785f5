#!/usr/bin/env python3
"""Count OD pairs and total demand in a TNTP trips file.

Written independently of the Rust parser so its totals can be checked
against it. Pairs with an origin equal to the destination or zero demand
are not counted as pairs; all demand is included in the total.

Usage: python3 scripts/count_trips.py crates/core/data/SiouxFalls_trips.tntp
Prints a JSON object with keys pairs, total, zones and header_total.
"""
import json
import re
import sys


def count(text):
    header = dict(re.findall(r"<([^>]+)>\s*([^\n<]*)", text.split("<END OF METADATA>")[0]))
    body = text.split("<END OF METADATA>", 1)[1]
    pairs = 0
    total = 0.0
    origins = set()
    origin = None
    for raw in body.splitlines():
        line = raw.split("~")[0].strip()
        if not line:
            continue
        m = re.match(r"Origin\s+(\d+)", line)
        if m:
            origin = int(m.group(1))
            origins.add(origin)
            continue
        for dest, amount in re.findall(r"(\d+)\s*:\s*([-+0-9.eE]+)\s*;", line):
            amount = float(amount)
            total += amount
            if int(dest) != origin and amount > 0:
                pairs += 1
    return {
        "pairs": pairs,
        "total": total,
        "zones": int(float(header.get("NUMBER OF ZONES", "0").strip() or 0)),
        "header_total": float(header.get("TOTAL OD FLOW", "nan").strip()),
    }


if __name__ == "__main__":
    with open(sys.argv[1]) as fh:
        print(json.dumps(count(fh.read())))
