"""Grid data model, per-unit handling and file ingestion.

Grid files are JSON with top-level keys ``base_mva``, ``buses``, ``branches``,
``generators`` and ``demands``.  An optional ``"units": "physical"`` key means
power quantities (``p_max``, ``q_min``, ``q_max``, ``p_base``, ``s_max``) are
given in MW / MVAr / MVA and get divided by ``base_mva`` on load.  Branch
admittances are always per-unit.

Time series are CSV files with a ``t`` column followed by ``d_<id>`` and
``g_<id>`` multiplier columns.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components


class GridError(ValueError):
    """Base class for grid ingestion errors."""


class GridParseError(GridError):
    pass


class GridValidationError(GridError):
    pass


class GridConnectivityError(GridError):
    pass


class TimeseriesError(GridError):
    pass


@dataclass(frozen=True)
class Bus:
    id: int
    v_min: float = 0.9
    v_max: float = 1.1


@dataclass(frozen=True)
class Branch:
    id: int
    from_bus: int
    to_bus: int
    g: float
    b: float
    s_max: float
    b_shunt: float = 0.0
    attackable: bool = True


@dataclass(frozen=True)
class Generator:
    id: int
    bus: int
    p_max: float
    q_min: float = 0.0
    q_max: float = 0.0
    alpha: float = 0.0
    external: bool = False


@dataclass(frozen=True)
class Demand:
    # alpha may be negative (capacitive load); any finite value is accepted
    id: int
    bus: int
    p_base: float
    alpha: float = 0.0


@dataclass(frozen=True)
class Network:
    base_mva: float
    buses: tuple
    branches: tuple
    generators: tuple
    demands: tuple
    name: str = ""

    @property
    def bus_ids(self) -> tuple:
        return tuple(b.id for b in self.buses)

    @property
    def bus_index(self) -> dict:
        """Dense 0-based index for every bus id."""
        return {b.id: k for k, b in enumerate(self.buses)}

    def branch(self, branch_id: int) -> Branch:
        for br in self.branches:
            if br.id == branch_id:
                return br
        raise KeyError(branch_id)

    @property
    def attackable_ids(self) -> tuple:
        return tuple(br.id for br in self.branches if br.attackable)

    def directed_branches(self) -> list:
        """Ordered pairs ``(branch_id, i, j)``; both directions share one attack variable."""
        out = []
        for br in self.branches:
            out.append((br.id, br.from_bus, br.to_bus))
            out.append((br.id, br.to_bus, br.from_bus))
        return out

    @property
    def reference_bus(self) -> int:
        for g in self.generators:
            if g.external:
                return g.bus
        return min(self.bus_ids)

    @property
    def total_demand(self) -> float:
        return sum(d.p_base for d in self.demands)


@dataclass(frozen=True)
class LoadCase:
    timestep: int
    demand_scale: dict = field(default_factory=dict)
    gen_scale: dict = field(default_factory=dict)

    def __hash__(self):
        return hash((self.timestep, tuple(sorted(self.demand_scale.items())),
                     tuple(sorted(self.gen_scale.items()))))


_POWER_FIELDS = {
    "generators": ("p_max", "q_min", "q_max"),
    "demands": ("p_base",),
    "branches": ("s_max",),
}


def _build(cls, rec: dict, where: str):
    try:
        names = cls.__dataclass_fields__
        unknown = set(rec) - set(names)
        if unknown:
            raise GridParseError(f"{where}: unknown field(s) {sorted(unknown)}")
        obj = cls(**rec)
    except TypeError as exc:
        raise GridParseError(f"{where}: {exc}") from None
    for k, v in asdict(obj).items():
        if isinstance(v, float) and not math.isfinite(v):
            raise GridValidationError(f"{where}: field {k} is not finite")
    return obj


def network_from_dict(data: dict) -> Network:
    if not isinstance(data, dict):
        raise GridParseError("grid file must contain a JSON object")
    for key in ("base_mva", "buses", "branches", "generators", "demands"):
        if key not in data:
            raise GridParseError(f"missing top-level key {key!r}")
    base = float(data["base_mva"])
    if base <= 0:
        raise GridValidationError("base_mva must be positive")
    physical = data.get("units", "pu") == "physical"
    if data.get("units", "pu") not in ("pu", "physical"):
        raise GridParseError("units must be 'pu' or 'physical'")

    def records(key, cls):
        out = []
        for k, rec in enumerate(data[key]):
            rec = dict(rec)
            if physical:
                for f in _POWER_FIELDS.get(key, ()):
                    if f in rec:
                        rec[f] = float(rec[f]) / base
            for f, fdef in cls.__dataclass_fields__.items():
                if f in rec and fdef.type in ("float",) and rec[f] is not None:
                    rec[f] = float(rec[f])
            out.append(_build(cls, rec, f"{key}[{k}]"))
        return tuple(out)

    net = Network(
        base_mva=base,
        buses=records("buses", Bus),
        branches=records("branches", Branch),
        generators=records("generators", Generator),
        demands=records("demands", Demand),
        name=str(data.get("name", "")),
    )
    validate_network(net)
    return net


def validate_network(net: Network) -> None:
    bus_ids = [b.id for b in net.buses]
    if len(set(bus_ids)) != len(bus_ids):
        raise GridValidationError("duplicate bus id")
    if not bus_ids:
        raise GridValidationError("network has no buses")
    known = set(bus_ids)
    for b in net.buses:
        if not 0 < b.v_min <= b.v_max:
            raise GridValidationError(f"bus {b.id}: need 0 < v_min <= v_max")
    for kind in ("branches", "generators", "demands"):
        ids = [o.id for o in getattr(net, kind)]
        if len(set(ids)) != len(ids):
            raise GridValidationError(f"duplicate id in {kind}")
    for br in net.branches:
        for end in (br.from_bus, br.to_bus):
            if end not in known:
                raise GridValidationError(f"branch {br.id} references unknown bus {end}")
        if br.from_bus == br.to_bus:
            raise GridValidationError(f"branch {br.id} is a self-loop")
        if not br.s_max > 0:
            raise GridValidationError(f"branch {br.id}: s_max must be positive")
        if br.b == 0:
            raise GridValidationError(f"branch {br.id}: susceptance must be nonzero")
    for g in net.generators:
        if g.bus not in known:
            raise GridValidationError(f"generator {g.id} references unknown bus {g.bus}")
        if g.p_max < 0:
            raise GridValidationError(f"generator {g.id}: p_max must be >= 0")
        if g.q_min > g.q_max:
            raise GridValidationError(f"generator {g.id}: q_min > q_max")
    for d in net.demands:
        if d.bus not in known:
            raise GridValidationError(f"demand {d.id} references unknown bus {d.bus}")
        if d.p_base < 0:
            raise GridValidationError(f"demand {d.id}: p_base must be >= 0")
    if not net.generators:
        raise GridValidationError("network needs at least one generator")
    idx = net.bus_index
    n = len(bus_ids)
    rows = [idx[br.from_bus] for br in net.branches]
    cols = [idx[br.to_bus] for br in net.branches]
    adj = coo_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    n_comp, _ = connected_components(adj, directed=False)
    if n_comp > 1:
        raise GridConnectivityError(f"grid is disconnected ({n_comp} components)")


def network_to_dict(net: Network) -> dict:
    return {
        "name": net.name,
        "base_mva": net.base_mva,
        "units": "pu",
        "buses": [asdict(b) for b in net.buses],
        "branches": [asdict(b) for b in net.branches],
        "generators": [asdict(g) for g in net.generators],
        "demands": [asdict(d) for d in net.demands],
    }


def load_network(path) -> Network:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except FileNotFoundError:
        raise
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise GridParseError(f"{path}: {exc}") from None
    return network_from_dict(data)


def save_network(net: Network, path) -> None:
    Path(path).write_text(json.dumps(network_to_dict(net), indent=2) + "\n", encoding="utf-8")


def load_timeseries(path, network: Network) -> list:
    """Read multiplier rows; ``t`` is reassigned 1..T in file order."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise TimeseriesError(f"{path}: empty file") from None
        rows = [r for r in reader if r and any(c.strip() for c in r)]
    header = [h.strip() for h in header]
    if not header or header[0] != "t":
        raise TimeseriesError(f"{path}: first column must be 't'")
    demand_ids = {d.id for d in network.demands}
    gen_ids = {g.id for g in network.generators}
    cols = []
    for h in header[1:]:
        kind, _, num = h.partition("_")
        try:
            ident = int(num)
        except ValueError:
            raise TimeseriesError(f"{path}: bad column name {h!r}") from None
        if kind == "d" and ident in demand_ids:
            cols.append(("d", ident))
        elif kind == "g" and ident in gen_ids:
            cols.append(("g", ident))
        else:
            raise TimeseriesError(f"{path}: column {h!r} matches no {kind or '?'} id in the network")
    if not rows:
        raise TimeseriesError(f"{path}: no data rows")
    cases = []
    for t, row in enumerate(rows, start=1):
        if len(row) != len(header):
            raise TimeseriesError(f"{path}: row {t} has {len(row)} cells, expected {len(header)}")
        dscale, gscale = {}, {}
        for (kind, ident), cell in zip(cols, row[1:]):
            try:
                val = float(cell)
            except ValueError:
                raise TimeseriesError(f"{path}: row {t}: not a number: {cell!r}") from None
            if not math.isfinite(val) or val < 0:
                raise TimeseriesError(f"{path}: row {t}: multiplier must be finite and >= 0, got {val}")
            (dscale if kind == "d" else gscale)[ident] = val
        cases.append(LoadCase(t, dscale, gscale))
    return cases


def apply_case(network: Network, case: LoadCase) -> Network:
    """Snapshot with effective demand and generator limits for one time step."""
    demand_ids = {d.id for d in network.demands}
    gen_ids = {g.id for g in network.generators}
    for ident in case.demand_scale:
        if ident not in demand_ids:
            raise GridValidationError(f"load case references unknown demand {ident}")
    for ident in case.gen_scale:
        if ident not in gen_ids:
            raise GridValidationError(f"load case references unknown generator {ident}")
    demands = tuple(replace(d, p_base=d.p_base * case.demand_scale.get(d.id, 1.0))
                    for d in network.demands)
    gens = tuple(replace(g, p_max=g.p_max * case.gen_scale.get(g.id, 1.0))
                 for g in network.generators)
    return replace(network, demands=demands, generators=gens)
