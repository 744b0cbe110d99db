#!/usr/bin/env python3
"""Recomputes the mock row of golden_report.tsv from a test set file.

Usage: python3 check_golden.py <synthetic.test.tsv>
"""
import os
import sys

HERE = os.path.dirname(os.path.abspath(__file__))

test = [l.rstrip("\n").split("\t") for l in open(sys.argv[1], encoding="utf-8") if not l.startswith("#")]
mock = {}
for line in open(os.path.join(HERE, "mock_predictions.tsv"), encoding="utf-8"):
    if not line.startswith("#"):
        parts = line.rstrip("\n").split("\t")
        mock[parts[0]] = parts[1]

c = dict(tf=0, tm=0, ff=0, fm=0, uf=0, um=0)
for name, g in test:
    pred = mock.get(name, "unknown")
    if g == "F":
        c["tf" if pred == "female" else "fm" if pred == "male" else "uf"] += 1
    else:
        c["tm" if pred == "male" else "ff" if pred == "female" else "um"] += 1
total = sum(c.values())
decided = c["tf"] + c["tm"] + c["ff"] + c["fm"]
acc = 100 * (c["tf"] + c["tm"]) / total
prec = 100 * c["tf"] / (c["tf"] + c["ff"])
rec = 100 * c["tf"] / (c["tf"] + c["fm"] + c["uf"])
f1 = 2 * prec * rec / (prec + rec)
gbe = 100 * (c["ff"] - c["fm"]) / decided
expected = "\t".join(
    ["mock", "synthetic", str(total)]
    + [f"{v:.4f}" for v in (acc, prec, rec, f1, gbe)]
    + [str(c[k]) for k in ("tf", "tm", "ff", "fm", "uf", "um")]
)
golden = open(os.path.join(HERE, "golden_report.tsv"), encoding="utf-8").read().splitlines()
print("expected:", expected)
print("match" if expected in golden else "MISMATCH")
sys.exit(0 if expected in golden else 1)
