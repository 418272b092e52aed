"""Build the measurement plan fixture for the IEEE 118-bus case.

Usage: python make_ieee118_plan.py fixtures/ieee118.json fixtures/ieee118_5area.json out.json

SCADA: a voltage magnitude at every generator bus and the first bus of each
area, P/Q flow pairs at the from end of every branch, P/Q injection pairs at
every other bus. PMUs: greedy placement with all incident currents until every
bus is a PMU bus or the far end of a metered current.
"""
import json
import sys


def main(case_path, partition_path, out_path):
    case = json.load(open(case_path))
    partition = json.load(open(partition_path))
    area_of = {}
    for area in partition["areas"]:
        for bus in area["buses"]:
            area_of[bus] = area["name"]
    buses = [b["id"] for b in case["buses"]]
    kinds = {b["id"]: b["kind"] for b in case["buses"]}
    branches = [(i, br["from"], br["to"]) for i, br in enumerate(case["branches"]) if br.get("status", 1)]
    adjacent = {b: set() for b in buses}
    for _, f, t in branches:
        adjacent[f].add(t)
        adjacent[t].add(f)

    scada = []
    v_buses = {b for b in buses if kinds[b] != "load"}
    v_buses.update(area["buses"][0] for area in partition["areas"])
    for b in buses:
        if b in v_buses:
            scada.append({"kind": "v", "bus": b, "area": area_of[b]})
    for k, b in enumerate(buses):
        if k % 2 == 0:
            scada.append({"kind": "p_inj", "bus": b, "area": area_of[b]})
            scada.append({"kind": "q_inj", "bus": b, "area": area_of[b]})
    for i, f, _ in branches:
        scada.append({"kind": "p_flow", "branch": i, "end": "from", "area": area_of[f]})
        scada.append({"kind": "q_flow", "branch": i, "end": "from", "area": area_of[f]})

    covered = set()
    placed = []
    while len(covered) < len(buses):
        best = max(buses, key=lambda b: (len(({b} | adjacent[b]) - covered), -buses.index(b)))
        placed.append(best)
        covered |= {best} | adjacent[best]
    pmu = []
    for b in placed:
        currents = [i for i, f, t in branches if b in (f, t)]
        pmu.append({"bus": b, "currents": currents, "area": area_of[b]})

    doc = {
        "note": f"{len(v_buses)} voltage magnitudes, {sum(1 for k in range(len(buses)) if k % 2 == 0)} injection pairs "
                f"and {len(branches)} flow pairs; {len(placed)} PMUs with all incident currents from a greedy "
                "covering placement.",
        "scada": scada,
        "pmu": pmu,
    }
    with open(out_path, "w") as out:
        out.write("{\n")
        out.write(f' "note": {json.dumps(doc["note"])},\n')
        for key in ("scada", "pmu"):
            out.write(f' "{key}": [\n')
            rows = doc[key]
            for n, row in enumerate(rows):
                out.write("  " + json.dumps(row) + (",\n" if n + 1 < len(rows) else "\n"))
            out.write(" ]" + (",\n" if key == "scada" else "\n"))
        out.write("}\n")


if __name__ == "__main__":
    main(*sys.argv[1:4])
