"""Topological analysis of MV grids: energization, radiality, resupply.

Switch semantics: a line conducts iff it is in service and every switch
attached to it is closed; a bus-line connection without a switch is hard
wired. Transformers always conduct. All functions accept an optional
``switch_state`` mapping (switch id -> closed) overriding the stored states,
so planning code can explore switching configurations without copying grids.

The restoration model mirrors MV practice: a line fault trips the closed
circuit breakers bounding the galvanically affected region, the two switches
adjacent to the faulted line are opened to isolate it, the tripped breakers
are re-closed where that does not re-energize the fault, and normally-open
sectioning points are closed until no further station can be resupplied.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Callable

from gridforge.grid_model import Grid, Line, Switch

__all__ = [
    "Feeder",
    "FaultAnalysis",
    "SwitchAction",
    "SwitchingSequence",
    "TopologyViolation",
    "check_contingency_supply",
    "check_radiality",
    "check_supply",
    "derive_radial_state",
    "energized_buses",
    "fault_analysis",
    "feeder_bays",
    "find_feeders",
    "find_stubs",
    "resupply_sequence",
]

SPLITTING_KINDS = ("primary_substation", "switching_station")


@dataclass(frozen=True)
class TopologyViolation:
    kind: str  # unsupplied | closed_ring | feeder_coupling | no_second_path
    element: str  # offending bus or line id
    message: str

    def __str__(self) -> str:
        return f"{self.kind}({self.element}): {self.message}"


def _state_map(grid: Grid, switch_state: dict[str, bool] | None) -> dict[str, bool]:
    state = {s.id: s.closed for s in grid.switches}
    if switch_state:
        for sid, closed in switch_state.items():
            if sid in state:
                state[sid] = closed
    return state


def _conducting_lines(grid: Grid, state: dict[str, bool],
                      exclude: frozenset[str] = frozenset()) -> list[Line]:
    out = []
    for line in grid.lines:
        if not line.in_service or line.id in exclude:
            continue
        switches = grid.switches_by_line.get(line.id, ())
        if all(state[s.id] for s in switches):
            out.append(line)
    return out


def energized_buses(grid: Grid, switch_state: dict[str, bool] | None = None,
                    exclude_lines: frozenset[str] = frozenset()) -> frozenset[str]:
    """Buses reachable from any external source over the conducting grid."""
    state = _state_map(grid, switch_state)
    return _energized(grid, state, exclude_lines)


def _energized(grid: Grid, state: dict[str, bool],
               exclude_lines: frozenset[str] = frozenset()) -> frozenset[str]:
    adj: dict[str, list[str]] = {}
    for line in _conducting_lines(grid, state, exclude_lines):
        adj.setdefault(line.from_bus, []).append(line.to_bus)
        adj.setdefault(line.to_bus, []).append(line.from_bus)
    for t in grid.transformers:
        adj.setdefault(t.hv_bus, []).append(t.lv_bus)
        adj.setdefault(t.lv_bus, []).append(t.hv_bus)

    seen: set[str] = set()
    queue = deque(b for b in grid.source_buses if b in grid.buses_by_id)
    seen.update(queue)
    while queue:
        bus = queue.popleft()
        for other in adj.get(bus, ()):
            if other not in seen:
                seen.add(other)
                queue.append(other)
    return frozenset(seen)


def check_supply(grid: Grid, switch_state: dict[str, bool] | None = None) -> list[TopologyViolation]:
    """Every secondary substation and switching station must be energized."""
    energized = energized_buses(grid, switch_state)
    return [
        TopologyViolation("unsupplied", b.id, f"{b.kind} {b.id} has no energized path to a source")
        for b in grid.stations() if b.id not in energized
    ]


# ---------------------------------------------------------------------------
# Radiality
# ---------------------------------------------------------------------------

def _split_graph(grid: Grid, state: dict[str, bool]):
    """Split-node view used for radiality: busbars split per incident edge.

    Returns (edges, splitting) where edges are logical conducting branches
    (exact parallels collapsed, transformers included) as tuples
    (node_u, node_v, key, is_line, line_ids) over split-aware node ids.
    """
    energized = _energized(grid, state)
    splitting = {b.id for b in grid.buses if b.kind in SPLITTING_KINDS and b.id in energized}

    groups: dict[tuple[str, str], list[str]] = {}
    for line in _conducting_lines(grid, state):
        if line.from_bus not in energized or line.to_bus not in energized:
            continue
        key = (min(line.from_bus, line.to_bus), max(line.from_bus, line.to_bus))
        groups.setdefault(key, []).append(line.id)

    def node(bus: str, key) -> tuple:
        return (bus, key) if bus in splitting else (bus,)

    edges = []
    for (u, v), line_ids in sorted(groups.items()):
        key = ("line", u, v)
        edges.append((node(u, key), node(v, key), key, True, tuple(sorted(line_ids))))
    for t in grid.transformers:
        if t.hv_bus in energized and t.lv_bus in energized:
            key = ("xfmr", t.id)
            edges.append((node(t.hv_bus, key), node(t.lv_bus, key), key, False, ()))
    return edges, splitting


class _UnionFind:
    def __init__(self):
        self.parent: dict = {}

    def find(self, x):
        parent = self.parent
        root = parent.setdefault(x, x)
        while parent[root] != root:
            root = parent[root]
        while parent[x] != root:
            parent[x], x = root, parent[x]
        return root

    def union(self, a, b) -> bool:
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        self.parent[rb] = ra
        return True


def check_radiality(grid: Grid, switch_state: dict[str, bool] | None = None) -> list[TopologyViolation]:
    """Open-ring operation check.

    With primary-substation and switching-station busbars split per incident
    branch, the conducting sub-graph must be a forest (no galvanic ring that
    avoids every busbar) and no component may tie together two feeder roots
    at primary busbars. Rings through a switching station busbar survive the
    splitting and are therefore permitted, as are exact parallel lines.
    """
    state = _state_map(grid, switch_state)
    edges, _ = _split_graph(grid, state)
    primary = {b.id for b in grid.buses if b.kind == "primary_substation"}

    violations = []
    uf = _UnionFind()
    for u, v, key, is_line, line_ids in edges:
        if not uf.union(u, v) and is_line:
            violations.append(TopologyViolation(
                "closed_ring", line_ids[0],
                f"line {line_ids[0]} closes a galvanic ring that bypasses every busbar"))

    roots: dict = {}
    for u, v, key, is_line, line_ids in edges:
        if not is_line:
            continue
        for node in (u, v):
            if len(node) == 2 and node[0] in primary:
                roots.setdefault(uf.find(node), []).append(node[0])
    for attached in roots.values():
        if len(attached) > 1:
            buses = sorted(set(attached))
            element = buses[0] if len(buses) == 1 else ",".join(buses)
            violations.append(TopologyViolation(
                "feeder_coupling", element,
                f"{len(attached)} feeder roots at primary busbar(s) {', '.join(buses)} "
                f"are galvanically connected"))
    violations.sort(key=lambda v: (v.kind, v.element))
    return violations


def derive_radial_state(grid: Grid, switch_state: dict[str, bool] | None = None) -> dict[str, bool]:
    """Choose the normal-operation switch state: open rings, balanced cuts.

    Every conducting cycle of the bus graph is opened — including rings that
    run through station busbars, which are structurally legal but operated
    with a sectioning point in practice. Exact parallel branches count as one
    logical edge and stay closed (doubled supply). Each cut lands on the
    openable switch nearest the middle of the ring, measured in hops from
    where the ring hangs off the feeding tree; a galvanic path between two
    primary feeder roots is cut the same way. Returns a full switch-state
    map; violations without an openable switch are left for
    :func:`check_radiality`.
    """
    state = _state_map(grid, switch_state)
    for _ in range(len(grid.lines) + len(grid.switches) + 1):
        target = _pick_radiality_cut(grid, state)
        if target is None:
            return state
        state[target] = False
    return state


def _pick_radiality_cut(grid: Grid, state: dict[str, bool]) -> str | None:
    def openable(line_ids: tuple[str, ...]) -> list[Switch]:
        if len(line_ids) != 1:
            return []  # exact parallels stay one logical branch
        switches = [s for s in grid.switches_by_line.get(line_ids[0], ()) if state[s.id]]
        switches.sort(key=lambda s: (s.kind != "load_break", s.id))
        return switches

    # bus-level adjacency; parallel branches collapse into one logical edge
    bundles: dict[tuple, tuple[str, ...]] = {}
    for line in _conducting_lines(grid, state):
        key = ("L", frozenset((line.from_bus, line.to_bus)))
        bundles[key] = bundles.get(key, ()) + (line.id,)
    for t in grid.transformers:
        bundles.setdefault(("T", frozenset((t.hv_bus, t.lv_bus))), ())
    adj: dict[str, list[tuple[str, tuple, tuple[str, ...]]]] = {}
    for key, line_ids in bundles.items():
        u, v = sorted(key[1])
        adj.setdefault(u, []).append((v, key, line_ids))
        adj.setdefault(v, []).append((u, key, line_ids))

    # BFS forest rooted at the feed-ins, so ring middles are measured from
    # where power enters; every non-tree edge closes a cycle
    prev: dict[str, tuple | None] = {}
    depth: dict[str, int] = {}
    closing: list[tuple[str, tuple[str, str], tuple]] = []
    sources = grid.source_buses
    for start in sorted(adj, key=lambda n: (n not in sources, n)):
        if start in prev:
            continue
        prev[start] = None
        depth[start] = 0
        queue = deque([start])
        while queue:
            node = queue.popleft()
            for other, key, line_ids in sorted(adj[node], key=lambda e: str(e[1])):
                if other not in prev:
                    prev[other] = (node, key, line_ids)
                    depth[other] = depth[node] + 1
                    queue.append(other)
                    continue
                pn, po = prev[node], prev[other]
                if (pn is not None and pn[0] == other and pn[1] == key) or \
                        (po is not None and po[0] == node and po[1] == key):
                    continue  # the tree edge itself
                if node < other:  # record each closing edge once
                    sort_key = line_ids[0] if line_ids else str(key)
                    closing.append((sort_key, (node, other), (key, line_ids)))

    # lay each cycle out as a line from the point where it hangs off the
    # tree, then open the switch nearest its middle (balanced sectioning)
    for _, (a, b), closer in sorted(closing, key=lambda item: item[0]):
        up_a: list[tuple] = []
        up_b: list[tuple] = []
        x, y = a, b
        while depth[x] > depth[y]:
            px = prev[x]
            up_a.append(px[1:])
            x = px[0]
        while depth[y] > depth[x]:
            py = prev[y]
            up_b.append(py[1:])
            y = py[0]
        while x != y:
            px, py = prev[x], prev[y]
            up_a.append(px[1:])
            up_b.append(py[1:])
            x, y = px[0], py[0]
        seq = list(reversed(up_a)) + [closer] + up_b
        mid = (len(seq) - 1) / 2.0
        candidates = [
            (abs(i - mid), line_ids[0], openable(line_ids)[0].id)
            for i, (key, line_ids) in enumerate(seq) if openable(line_ids)]
        if candidates:
            return min(candidates)[2]

    # remaining case: two primary feeder roots coupled along a path (no
    # bus-graph cycle); find it on the split graph and cut near the middle
    edges, _ = _split_graph(grid, state)
    primary = {bus.id for bus in grid.buses if bus.kind == "primary_substation"}
    split_adj: dict = {}
    uf = _UnionFind()
    for u, v, key, is_line, line_ids in edges:
        split_adj.setdefault(u, []).append((v, key, is_line, line_ids))
        split_adj.setdefault(v, []).append((u, key, is_line, line_ids))
        uf.union(u, v)
    root_nodes: dict = {}
    for u, v, key, is_line, line_ids in edges:
        if not is_line:
            continue
        for node in (u, v):
            if len(node) == 2 and node[0] in primary:
                root_nodes.setdefault(uf.find(node), []).append(node)
    for _, comp_nodes in sorted(root_nodes.items(), key=lambda kv: str(kv[0])):
        if len(comp_nodes) < 2:
            continue
        a, b = sorted(comp_nodes)[:2]
        path = _split_path(split_adj, a, b)
        if path is None:
            continue
        switchable = [(i, openable(line_ids)) for i, (key, is_line, line_ids) in enumerate(path)
                      if is_line and openable(line_ids)]
        if not switchable:
            continue
        mid = (len(path) - 1) / 2.0
        switchable.sort(key=lambda item: (abs(item[0] - mid), item[1][0].id))
        return switchable[0][1][0].id
    return None


def _split_path(adj, start, goal):
    """Edge payload sequence of the shortest split-graph path start -> goal."""
    prev: dict = {start: None}
    queue = deque([start])
    while queue:
        node = queue.popleft()
        if node == goal:
            break
        for other, key, is_line, line_ids in adj[node]:
            if other not in prev:
                prev[other] = (node, key, is_line, line_ids)
                queue.append(other)
    if goal not in prev:
        return None
    path = []
    node = goal
    while prev[node] is not None:
        parent, key, is_line, line_ids = prev[node]
        path.append((key, is_line, line_ids))
        node = parent
    path.reverse()
    return path


# ---------------------------------------------------------------------------
# Contingency supply / stubs (two-edge connectivity to the sources)
# ---------------------------------------------------------------------------

def conducting_path(grid: Grid, state: dict[str, bool], exclude_line: str,
                    start: str, goal: str) -> list[str] | None:
    """Line ids of a conducting path start -> goal that avoids
    ``exclude_line``, or None. Transformer couplings count as conducting
    but contribute no line id."""
    adj: dict[str, list[tuple[str, str | None]]] = {}
    for line in grid.lines:
        if line.id == exclude_line or not line.in_service:
            continue
        if not all(state[s.id] for s in grid.switches_by_line.get(line.id, ())):
            continue
        adj.setdefault(line.from_bus, []).append((line.to_bus, line.id))
        adj.setdefault(line.to_bus, []).append((line.from_bus, line.id))
    for t in grid.transformers:
        adj.setdefault(t.hv_bus, []).append((t.lv_bus, None))
        adj.setdefault(t.lv_bus, []).append((t.hv_bus, None))

    prev: dict[str, tuple[str, str | None] | None] = {start: None}
    queue = deque([start])
    while queue:
        bus = queue.popleft()
        if bus == goal:
            path = []
            while prev[bus] is not None:
                bus, line_id = prev[bus]
                if line_id is not None:
                    path.append(line_id)
            return path[::-1]
        for other, line_id in adj.get(bus, ()):
            if other not in prev:
                prev[other] = (bus, line_id)
                queue.append(other)
    return None


def _bridge_analysis(grid: Grid):
    """Bridges and 2-edge-connected components of the all-switches-closable
    graph (in-service lines + transformers), as a component tree."""
    nodes = [b.id for b in grid.buses]
    index = {bus: i for i, bus in enumerate(nodes)}
    edges: list[tuple[int, int, str, bool]] = []  # (u, v, element id, is_line)
    for line in grid.lines:
        if line.in_service:
            edges.append((index[line.from_bus], index[line.to_bus], line.id, True))
    for t in grid.transformers:
        edges.append((index[t.hv_bus], index[t.lv_bus], t.id, False))

    adj: list[list[tuple[int, int]]] = [[] for _ in nodes]
    for ei, (u, v, _, _) in enumerate(edges):
        adj[u].append((ei, v))
        adj[v].append((ei, u))

    n = len(nodes)
    disc = [-1] * n
    low = [0] * n
    bridge = [False] * len(edges)
    timer = 0
    for root in range(n):
        if disc[root] != -1:
            continue
        stack: list[tuple[int, int, int]] = [(root, -1, 0)]
        while stack:
            node, via, ptr = stack.pop()
            if ptr == 0:
                disc[node] = low[node] = timer
                timer += 1
            if ptr < len(adj[node]):
                stack.append((node, via, ptr + 1))
                ei, other = adj[node][ptr]
                if ei == via:
                    continue
                if disc[other] == -1:
                    stack.append((other, ei, 0))
                else:
                    low[node] = min(low[node], disc[other])
            elif via != -1:
                u, v, _, _ = edges[via]
                parent = u if disc[u] < disc[v] else v
                low[parent] = min(low[parent], low[node])
                if low[node] > disc[parent]:
                    bridge[via] = True

    # components of the graph without bridges
    comp = [-1] * n
    n_comp = 0
    for root in range(n):
        if comp[root] != -1:
            continue
        comp[root] = n_comp
        queue = deque([root])
        while queue:
            node = queue.popleft()
            for ei, other in adj[node]:
                if not bridge[ei] and comp[other] == -1:
                    comp[other] = n_comp
                    queue.append(other)
        n_comp += 1

    tree: dict[int, list[tuple[int, str, bool]]] = {i: [] for i in range(n_comp)}
    for ei, (u, v, eid, is_line) in enumerate(edges):
        if bridge[ei]:
            tree[comp[u]].append((comp[v], eid, is_line))
            tree[comp[v]].append((comp[u], eid, is_line))
    return index, comp, n_comp, tree


def _weak_stations(grid: Grid, cuttable: Callable[[str], bool]) -> frozenset[str]:
    """Stations separable from every source by removing one cuttable line."""
    index, comp, n_comp, tree = _bridge_analysis(grid)
    source_comps = {comp[index[b]] for b in grid.source_buses if b in index}
    if not source_comps:
        return frozenset(b.id for b in grid.stations())

    # Steiner subtree of the source components: nodes on some source-source
    # path; any bridge removal keeps them attached to at least one source.
    order: list[tuple[int, int]] = []
    parent: dict[int, int] = {}
    root = min(source_comps)
    parent[root] = -1
    queue = deque([root])
    while queue:
        node = queue.popleft()
        for other, eid, is_line in tree[node]:
            if other not in parent:
                parent[other] = node
                order.append((other, node))
                queue.append(other)
    has_source_below = {c: c in source_comps for c in parent}
    for child, par in reversed(order):
        if has_source_below[child]:
            has_source_below[par] = True
    steiner = {c for c in parent if has_source_below[c]}

    # expand from the Steiner subtree across bridges that can never fail
    safe = set(steiner)
    queue = deque(steiner)
    while queue:
        node = queue.popleft()
        for other, eid, is_line in tree[node]:
            if other not in safe and not (is_line and cuttable(eid)):
                safe.add(other)
                queue.append(other)

    return frozenset(b.id for b in grid.stations() if comp[index[b.id]] not in safe)


def find_stubs(grid: Grid) -> frozenset[str]:
    """Stations that cannot survive every single line failure, even allowing
    arbitrary reconfiguration — exempt from the contingency-supply rule."""
    return _weak_stations(grid, cuttable=lambda line_id: True)


def check_contingency_supply(grid: Grid,
                             switch_state: dict[str, bool] | None = None) -> list[TopologyViolation]:
    """Each station flagged ``requires_contingency_supply`` must stay
    connectable to a source after removal of any single energized line,
    allowing arbitrary reconfiguration of the existing switches."""
    state = _state_map(grid, switch_state)
    energized = _energized(grid, state)
    energized_lines = {l.id for l in _conducting_lines(grid, state)
                       if l.from_bus in energized or l.to_bus in energized}
    weak = _weak_stations(grid, cuttable=lambda line_id: line_id in energized_lines)
    out = []
    for b in grid.stations():
        if b.requires_contingency_supply and b.id in weak:
            out.append(TopologyViolation(
                "no_second_path", b.id,
                f"station {b.id} loses its supply for some single line failure"))
    out.sort(key=lambda v: v.element)
    return out


# ---------------------------------------------------------------------------
# Feeders
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Feeder:
    root: str  # busbar the feeder leaves from
    head_line: str  # first line of the feeder
    breaker: str | None  # circuit breaker switch at the root, if present
    buses: tuple[str, ...]
    lines: tuple[str, ...]


def _busbar_order(grid: Grid, state: dict[str, bool], energized: frozenset[str]) -> list[str]:
    """Busbars (primary + switching-station) in hop order from the sources."""
    adj: dict[str, list[str]] = {}
    for line in _conducting_lines(grid, state):
        adj.setdefault(line.from_bus, []).append(line.to_bus)
        adj.setdefault(line.to_bus, []).append(line.from_bus)
    for t in grid.transformers:
        adj.setdefault(t.hv_bus, []).append(t.lv_bus)
        adj.setdefault(t.lv_bus, []).append(t.hv_bus)
    dist: dict[str, int] = {b: 0 for b in grid.source_buses if b in grid.buses_by_id}
    queue = deque(sorted(dist))
    while queue:
        bus = queue.popleft()
        for other in adj.get(bus, ()):
            if other not in dist:
                dist[other] = dist[bus] + 1
                queue.append(other)
    busbars = [b.id for b in grid.buses
               if b.kind in SPLITTING_KINDS and b.id in energized and b.id in dist]
    busbars.sort(key=lambda bid: (dist[bid], bid))
    return busbars


def find_feeders(grid: Grid, switch_state: dict[str, bool] | None = None) -> list[Feeder]:
    """Decompose the energized grid into feeders hanging off busbars.

    Intended for radially operated states: every energized bus that is not
    itself a busbar then belongs to exactly one feeder. Claiming starts at
    the busbars nearest the sources, so a run between a primary busbar and a
    switching station belongs to the primary-side feeder.
    """
    state = _state_map(grid, switch_state)
    energized = _energized(grid, state)
    busbars = _busbar_order(grid, state, energized)
    busbar_set = set(busbars)

    lines_at: dict[str, list[Line]] = {}
    for line in _conducting_lines(grid, state):
        if line.from_bus in energized and line.to_bus in energized:
            lines_at.setdefault(line.from_bus, []).append(line)
            lines_at.setdefault(line.to_bus, []).append(line)

    claimed_bus: set[str] = set()
    claimed_line: set[str] = set()
    feeders: list[Feeder] = []
    for busbar in busbars:
        for head in sorted(lines_at.get(busbar, ()), key=lambda l: l.id):
            if head.id in claimed_line:
                continue
            buses: list[str] = []
            lines: list[str] = []
            queue = deque([head])
            claimed_line.add(head.id)
            lines.append(head.id)
            frontier = deque()
            first_hop = head.to_bus if head.from_bus == busbar else head.from_bus
            if first_hop not in busbar_set and first_hop not in claimed_bus:
                claimed_bus.add(first_hop)
                buses.append(first_hop)
                frontier.append(first_hop)
            while frontier:
                bus = frontier.popleft()
                for line in sorted(lines_at.get(bus, ()), key=lambda l: l.id):
                    if line.id in claimed_line:
                        continue
                    claimed_line.add(line.id)
                    lines.append(line.id)
                    other = line.to_bus if line.from_bus == bus else line.from_bus
                    if other in busbar_set or other in claimed_bus:
                        continue
                    claimed_bus.add(other)
                    buses.append(other)
                    frontier.append(other)
            breaker = grid.switch_at.get((busbar, head.id))
            feeders.append(Feeder(
                root=busbar,
                head_line=head.id,
                breaker=breaker.id if breaker and breaker.kind == "circuit_breaker" else None,
                buses=tuple(sorted(buses)),
                lines=tuple(sorted(lines)),
            ))
    return feeders


def feeder_bays(grid: Grid, switch_state: dict[str, bool] | None = None) -> int:
    """Number of feeder bays at primary-substation MV busbars (protection
    devices are counted per bay, which also works for meshed operation)."""
    state = _state_map(grid, switch_state)
    energized = _energized(grid, state)
    bays = 0
    for line in _conducting_lines(grid, state):
        if line.from_bus not in energized and line.to_bus not in energized:
            continue
        for end in (line.from_bus, line.to_bus):
            if end in grid.slack_buses:
                bays += 1
    return bays


# ---------------------------------------------------------------------------
# Fault simulation and resupply
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SwitchAction:
    switch: str
    action: str  # open | close
    stage: str  # trip | isolate | resupply
    actuation: str  # protection_trip | manual | remote


@dataclass(frozen=True)
class SwitchingSequence:
    failed_line: str
    actions: tuple[SwitchAction, ...]
    resulting_state: dict[str, bool]
    unsupplied: tuple[str, ...]  # stations left without supply


@dataclass(frozen=True)
class FaultAnalysis:
    """Per-fault data used by the FMEA: who goes dark and who is restorable
    without a crew driving out."""

    failed_line: str
    tripped_breakers: tuple[str, ...]
    affected_stations: frozenset[str]
    remote_resuppliable: frozenset[str]


def _fault_closure(grid: Grid, failed: Line, state: dict[str, bool],
                   tie: Callable[[Switch | None], bool],
                   stop_at_breakers: bool = False):
    """Galvanic closure of the fault on ``failed`` over untieable connections.

    The faulted line is severed at the fault spot, so the closure starts at
    each endpoint still tied through its own end connection. ``tie`` decides
    whether a (bus, line) connection can conduct into the closure; with
    ``stop_at_breakers`` closed circuit breakers block expansion and are
    collected as the protection devices that trip.
    """
    buses: set[str] = set()
    bodies: set[str] = {failed.id}
    breakers: set[str] = set()

    def connection(bus: str, line: Line) -> tuple[bool, Switch | None]:
        sw = grid.switch_at.get((bus, line.id))
        if sw is not None and not state[sw.id]:
            return False, sw
        if stop_at_breakers and sw is not None and sw.kind == "circuit_breaker":
            return False, sw
        return tie(sw), sw

    queue: deque[str] = deque()
    for end in (failed.from_bus, failed.to_bus):
        ok, sw = connection(end, failed)
        if stop_at_breakers and sw is not None and sw.kind == "circuit_breaker" and state[sw.id]:
            breakers.add(sw.id)
        if ok and end not in buses:
            buses.add(end)
            queue.append(end)
    while queue:
        bus = queue.popleft()
        for line in grid.lines_at_bus.get(bus, ()):
            if not line.in_service or line.id == failed.id or line.id in bodies:
                continue
            ok, sw = connection(bus, line)
            if stop_at_breakers and sw is not None and sw.kind == "circuit_breaker" and state[sw.id]:
                breakers.add(sw.id)
            if not ok:
                continue
            bodies.add(line.id)
            other = line.to_bus if line.from_bus == bus else line.from_bus
            ok2, sw2 = connection(other, line)
            if stop_at_breakers and sw2 is not None and sw2.kind == "circuit_breaker" and state[sw2.id]:
                breakers.add(sw2.id)
            if ok2 and other not in buses:
                buses.add(other)
                queue.append(other)
    return buses, bodies, breakers


def _closed_tie(state):
    return lambda sw: sw is None or state[sw.id]


def _non_remote_tie(state):
    return lambda sw: sw is None or (state[sw.id] and not sw.remote_controlled)


def _reach_avoiding(grid: Grid, state: dict[str, bool], failed_id: str,
                    avoid_buses: set[str], avoid_bodies: set[str],
                    remote_only: bool) -> frozenset[str]:
    """Buses reachable from the sources avoiding the fault closure.

    With ``remote_only`` open switches may be crossed only if they are remote
    controlled (the existence check behind the FMEA's t_remote class);
    otherwise any open switch may be closed (manual reconfiguration).
    """

    def passable(bus: str, line: Line) -> bool:
        sw = grid.switch_at.get((bus, line.id))
        if sw is None or state[sw.id]:
            return True
        return sw.remote_controlled if remote_only else True

    seen: set[str] = set()
    queue: deque[str] = deque()
    for b in grid.source_buses:
        if b in grid.buses_by_id and b not in avoid_buses:
            seen.add(b)
            queue.append(b)
    xfmr_adj: dict[str, list[str]] = {}
    for t in grid.transformers:
        xfmr_adj.setdefault(t.hv_bus, []).append(t.lv_bus)
        xfmr_adj.setdefault(t.lv_bus, []).append(t.hv_bus)
    while queue:
        bus = queue.popleft()
        for other in xfmr_adj.get(bus, ()):
            if other not in seen and other not in avoid_buses:
                seen.add(other)
                queue.append(other)
        for line in grid.lines_at_bus.get(bus, ()):
            if not line.in_service or line.id == failed_id or line.id in avoid_bodies:
                continue
            other = line.to_bus if line.from_bus == bus else line.from_bus
            if other in seen or other in avoid_buses:
                continue
            if passable(bus, line) and passable(other, line):
                seen.add(other)
                queue.append(other)
    return frozenset(seen)


def _trip(grid: Grid, failed: Line, state: dict[str, bool]):
    """Protection trip: open the closed breakers bounding the fault region."""
    _, _, breakers = _fault_closure(grid, failed, state, _closed_tie(state),
                                    stop_at_breakers=True)
    post = dict(state)
    for sid in breakers:
        post[sid] = False
    return sorted(breakers), post


def fault_analysis(grid: Grid, failed_line: str,
                   switch_state: dict[str, bool] | None = None) -> FaultAnalysis:
    """Outage footprint of a single line fault.

    ``affected_stations`` lose supply with the protection trip;
    ``remote_resuppliable`` is the subset for which some purely
    remote-controlled switching set isolates the fault and restores supply.
    """
    state = _state_map(grid, switch_state)
    failed = grid.lines_by_id[failed_line]
    pre = _energized(grid, state)
    if failed.from_bus not in pre and failed.to_bus not in pre:
        # nothing feeds the fault: no current, no trip, no outage
        return FaultAnalysis(failed_line, (), frozenset(), frozenset())
    tripped, post = _trip(grid, failed, state)
    after = _energized(grid, post, exclude_lines=frozenset((failed_line,)))
    stations = {b.id for b in grid.stations()}
    affected = frozenset((pre - after) & stations)

    f_buses, f_bodies, _ = _fault_closure(grid, failed, post, _non_remote_tie(post))
    reach = _reach_avoiding(grid, post, failed_line, f_buses, f_bodies, remote_only=True)
    remote = frozenset(affected & reach)
    return FaultAnalysis(failed_line, tuple(tripped), affected, remote)


def resupply_sequence(grid: Grid, failed_line: str,
                      switch_state: dict[str, bool] | None = None) -> SwitchingSequence:
    """Switching sequence restoring supply after a fault on ``failed_line``.

    Stages: protection trip, isolation of the faulted line at its adjacent
    switches, then resupply (re-close tripped breakers where safe, close
    sectioning points until no further station comes back). Greedy closing
    picks the switch re-energizing the most dark stations; ties fall to the
    lowest switch id.

    Raises:
        ValueError: the line is not energized in the pre-fault state.
    """
    state = _state_map(grid, switch_state)
    failed = grid.lines_by_id.get(failed_line)
    if failed is None:
        raise ValueError(f"unknown line {failed_line!r}")
    pre = _energized(grid, state)
    conducting = {l.id for l in _conducting_lines(grid, state)}
    if failed_line not in conducting or (failed.from_bus not in pre and failed.to_bus not in pre):
        raise ValueError(f"line {failed_line!r} is not energized in the pre-fault state")

    actions: list[SwitchAction] = []
    tripped, state = _trip(grid, failed, state)
    for sid in tripped:
        actions.append(SwitchAction(sid, "open", "trip", "protection_trip"))

    excluded = frozenset((failed_line,))
    for end in sorted((failed.from_bus, failed.to_bus)):
        sw = grid.switch_at.get((end, failed_line))
        if sw is not None and state[sw.id]:
            state[sw.id] = False
            actions.append(SwitchAction(
                sw.id, "open", "isolate", "remote" if sw.remote_controlled else "manual"))

    def fault_zone(current: dict[str, bool]):
        buses, bodies, _ = _fault_closure(grid, failed, current, _closed_tie(current))
        return buses, bodies

    def safe_to_close(sid: str, current: dict[str, bool]) -> frozenset[str] | None:
        trial = dict(current)
        trial[sid] = True
        energized = _energized(grid, trial, excluded)
        z_buses, _ = fault_zone(trial)
        if energized & z_buses:
            return None
        return energized

    # re-close tripped breakers unless they would feed the fault again
    for sid in tripped:
        energized = safe_to_close(sid, state)
        if energized is not None:
            state[sid] = True
            sw = grid.switches_by_id[sid]
            actions.append(SwitchAction(
                sid, "close", "resupply", "remote" if sw.remote_controlled else "manual"))

    stations = {b.id for b in grid.stations()}
    isolated = {a.switch for a in actions if a.stage == "isolate"}

    while True:
        energized = _energized(grid, state, excluded)
        dark = (pre & stations) - energized
        if not dark:
            break
        best: tuple[int, str] | None = None
        for sw in grid.switches:
            if state[sw.id] or sw.id in isolated:
                continue
            line = grid.lines_by_id.get(sw.line)
            if line is None or not line.in_service or line.id == failed_line:
                continue
            new_energized = safe_to_close(sw.id, state)
            if new_energized is None:
                continue
            gain = len(dark & new_energized)
            if gain > 0 and (best is None or gain > best[0] or
                             (gain == best[0] and sw.id < best[1])):
                best = (gain, sw.id)
        if best is None:
            break
        sid = best[1]
        sw = grid.switches_by_id[sid]
        state[sid] = True
        actions.append(SwitchAction(
            sid, "close", "resupply", "remote" if sw.remote_controlled else "manual"))

    final = _energized(grid, state, excluded)
    unsupplied = tuple(sorted((pre & stations) - final))
    return SwitchingSequence(failed_line, tuple(actions), state, unsupplied)
