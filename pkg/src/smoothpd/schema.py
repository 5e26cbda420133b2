"""JSON forms of every instance type; covering rows travel as JSON lines."""
from __future__ import annotations

import json
import math
from pathlib import Path
from typing import Iterable, Iterator, Mapping

import numpy as np

from .apps.energy import EnergyInstance, Job, PowerFunction
from .apps.facility import Facility, FacilityInstance
from .apps.routing import RoutingInstance, RoutingRequest
from .apps.vecsched import VectorSchedulingInstance
from .core import GeneralInstance, InputError, Request, Strategy
from .costlib import cost_from_json
from .covering import CoveringRow


def _num(x) -> float | str:
    return "inf" if isinstance(x, float) and math.isinf(x) else x


def _float(x) -> float:
    return math.inf if x in ("inf", None) else float(x)


def general_to_json(inst: GeneralInstance) -> dict:
    return {
        "resources": [{"id": e, "cost": inst.costs[e].to_json()} for e in sorted(inst.costs)],
        "requests": [
            {"id": r.id, "strategies": [{"uses": {str(e): c for e, c in s.uses.items()}} for s in r.strategies]}
            for r in inst.requests
        ],
    }


def general_from_json(d: Mapping) -> GeneralInstance:
    try:
        costs = {int(r["id"]): cost_from_json(r["cost"]) for r in d.get("resources", [])}
        reqs = tuple(
            Request(int(r["id"]), tuple(Strategy({int(e): float(c) for e, c in s["uses"].items()}) for s in r["strategies"]))
            for r in d.get("requests", [])
        )
    except (KeyError, TypeError) as exc:
        raise InputError(f"malformed general instance: {exc}") from exc
    return GeneralInstance(costs, reqs)


def row_to_json(row: CoveringRow) -> dict:
    return {"i": row.i, "b": {str(e): v for e, v in sorted(row.b.items())}}


def row_from_json(d: Mapping) -> CoveringRow:
    return CoveringRow(int(d["i"]), {int(e): float(v) for e, v in d["b"].items()})


def write_rows(rows: Iterable[CoveringRow], path) -> None:
    with open(path, "w") as fh:
        for r in rows:
            fh.write(json.dumps(row_to_json(r)) + "\n")


def read_rows(path) -> Iterator[CoveringRow]:
    """Yield rows one at a time, as an online stream."""
    with open(path) as fh:
        for line in fh:
            if line.strip():
                yield row_from_json(json.loads(line))


def covering_to_json(f, n: int, rows: Iterable[CoveringRow] | None = None) -> dict:
    d = {"n": n, "cost": f.to_json()}
    if rows is not None:
        d["rows"] = [row_to_json(r) for r in rows]
    return d


def covering_from_json(d: Mapping):
    """(cost, n, rows) where rows may be empty when they come from a separate stream."""
    return cost_from_json(d["cost"]), int(d["n"]), [row_from_json(r) for r in d.get("rows", [])]


def routing_to_json(inst: RoutingInstance) -> dict:
    return {
        "kind": "routing",
        "n_nodes": inst.n_nodes,
        "edges": [{"u": u, "v": v, "cost": f.to_json()} for (u, v), f in zip(inst.edges, inst.costs)],
        "requests": [
            {"s": r.s, "t": r.t, "k": r.k, "load": {str(e): p for e, p in r.load.items()}, "default_load": r.default_load}
            for r in inst.requests
        ],
    }


def routing_from_json(d: Mapping) -> RoutingInstance:
    edges = tuple((int(e["u"]), int(e["v"])) for e in d["edges"])
    costs = tuple(cost_from_json(e["cost"]) for e in d["edges"])
    reqs = tuple(
        RoutingRequest(int(r["s"]), int(r["t"]), int(r.get("k", 1)),
                       {int(e): float(p) for e, p in r.get("load", {}).items()}, float(r.get("default_load", 1.0)))
        for r in d.get("requests", [])
    )
    return RoutingInstance(int(d["n_nodes"]), edges, costs, reqs)


def vecsched_to_json(inst: VectorSchedulingInstance) -> dict:
    return {"kind": "vecsched", "alpha": _num(float(inst.alpha)), "p": inst.p.tolist()}


def vecsched_from_json(d: Mapping) -> VectorSchedulingInstance:
    p = np.asarray(d["p"], dtype=float)
    if p.size == 0:
        p = p.reshape(0, 1, 1)
    return VectorSchedulingInstance(p, _float(d.get("alpha", 2.0)))


def energy_to_json(inst: EnergyInstance) -> dict:
    return {
        "kind": "energy",
        "eps": inst.eps,
        "delta": inst.delta,
        "L": inst.L,
        "power": [P.to_json() for P in inst.power],
        "jobs": [
            {"release": j.release, "deadline": j.deadline, "volume": list(j.volume), "penalty": _num(j.penalty)}
            for j in inst.jobs
        ],
    }


def energy_from_json(d: Mapping) -> EnergyInstance:
    power = tuple(
        PowerFunction(float(p.get("alpha", 2.0)), float(p.get("scale", 1.0)), None if p.get("flat") is None else tuple(p["flat"]))
        for p in d["power"]
    )
    jobs = tuple(
        Job(int(j["release"]), int(j["deadline"]), tuple(float(v) for v in j["volume"]), _float(j.get("penalty")))
        for j in d.get("jobs", [])
    )
    return EnergyInstance(power, jobs, float(d.get("eps", 0.5)), float(d.get("delta", 1.0)), d.get("L"))


def facility_to_json(inst: FacilityInstance) -> dict:
    return {
        "kind": "facility",
        "dist": inst.dist.tolist(),
        "facilities": [{"point": f.point, "opening": f.opening, "serving": f.serving.to_json()} for f in inst.facilities],
        "clients": list(inst.clients),
    }


def facility_from_json(d: Mapping) -> FacilityInstance:
    facs = tuple(Facility(int(f["point"]), float(f["opening"]), cost_from_json(f["serving"])) for f in d["facilities"])
    return FacilityInstance(np.asarray(d["dist"], dtype=float), facs, tuple(int(c) for c in d.get("clients", [])))


APP_READERS = {
    "routing": routing_from_json,
    "vecsched": vecsched_from_json,
    "energy": energy_from_json,
    "prize": energy_from_json,
    "facility": facility_from_json,
}


def load_json(path) -> dict:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: {exc}") from exc


def dump_json(obj, path=None) -> str:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path is not None:
        Path(path).write_text(text + "\n")
    return text
