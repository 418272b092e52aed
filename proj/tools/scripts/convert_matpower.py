"""Convert a MATPOWER-format case (as shipped with PYPOWER) into the gridse case schema.

Usage: python convert_matpower.py case14 out.json
Requires the `pypower` package on the import path.
"""
import importlib
import json
import sys

KIND = {1: "load", 2: "generator", 3: "slack"}


def convert(name):
    case = getattr(importlib.import_module(f"pypower.{name}"), name)()
    doc = {"name": name, "base_mva": float(case["baseMVA"]), "buses": [], "branches": [], "loads": [], "gens": []}
    for row in case["bus"]:
        bus_id = str(int(row[0]))
        doc["buses"].append({"id": bus_id, "kind": KIND[int(row[1])], "gs": float(row[4]),
                             "bs": float(row[5]), "base_kv": float(row[9])})
        if row[2] != 0 or row[3] != 0:
            doc["loads"].append({"bus": bus_id, "p": float(row[2]), "q": float(row[3])})
    for row in case["branch"]:
        doc["branches"].append({"from": str(int(row[0])), "to": str(int(row[1])), "r": float(row[2]),
                                "x": float(row[3]), "b": float(row[4]),
                                "tap": float(row[8]) if row[8] != 0 else 1.0,
                                "shift": float(row[9]), "status": int(row[10])})
    for row in case["gen"]:
        if int(row[7]) <= 0:
            continue
        doc["gens"].append({"bus": str(int(row[0])), "p": float(row[1]), "vset": float(row[5])})
    return doc


def dump_records(doc):
    """JSON with one record per line so fixture diffs stay readable."""
    lines = ["{"]
    keys = list(doc)
    for i, key in enumerate(keys):
        sep = "," if i + 1 < len(keys) else ""
        value = doc[key]
        if isinstance(value, list):
            lines.append(f' "{key}": [')
            for j, rec in enumerate(value):
                lines.append("  " + json.dumps(rec) + ("," if j + 1 < len(value) else ""))
            lines.append(" ]" + sep)
        else:
            lines.append(f' "{key}": {json.dumps(value)}{sep}')
    lines.append("}")
    return "\n".join(lines) + "\n"


if __name__ == "__main__":
    doc = convert(sys.argv[1])
    with open(sys.argv[2], "w") as fh:
        fh.write(dump_records(doc))
