#!/usr/bin/env python3
"""Cut the (20, 10) four-route subgraph out of the public Sioux Falls link file.

Usage: make_sf_subgraph.py SiouxFalls_net.tntp KAPPA > sf_20_10_subgraph.tntp

Links are given by their 1-based record position in the public file. The
routes are 20-18-16-10, 20-19-17-16-10, 20-21-22-15-10 and
20-18-7-8-6-5-9-10; their union has 16 links and holds exactly these four
simple 20 -> 10 paths. Capacities are multiplied by KAPPA.
"""
import sys

LINKS = [60, 55, 48, 61, 58, 52, 62, 65, 67, 43, 54, 17, 19, 15, 13, 25]


def records(path):
    out = []
    past_meta = False
    for raw in open(path):
        line = raw.split("~", 1)[0].strip()
        if not past_meta:
            past_meta = "<END OF METADATA>" in raw
            continue
        if line:
            out.append(line.rstrip(";").split())
    return out


def main():
    src, kappa = sys.argv[1], float(sys.argv[2])
    recs = records(src)
    print(f"<NUMBER OF LINKS> {len(LINKS)}")
    print(f"<CAPACITY SCALE> {kappa}")
    print("<END OF METADATA>")
    print()
    print("~\tinit_node\tterm_node\tcapacity\tlength\tfree_flow_time\tb\tpower\tspeed\ttoll\tlink_type\t;")
    for lid in sorted(LINKS):
        tail, head, cap, length, fft, b, power, speed, toll, kind = recs[lid - 1][:10]
        scaled = float(cap) * kappa
        print(f"\t{tail}\t{head}\t{scaled:.6f}\t{length}\t{fft}\t{b}\t{power}\t{speed}\t{toll}\t{kind}\t;")


if __name__ == "__main__":
    main()
