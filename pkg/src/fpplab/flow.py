"""Small min-cost flow solver for two-unit vertex-disjoint path problems.

Successive shortest augmenting paths with Dijkstra on reduced costs.  All
costs are non-negative integers, so zero initial potentials are feasible.
"""

from __future__ import annotations

import heapq

INF = 1 << 62


class FlowNetwork:
    """Directed network; arc ``2k`` is the ``k``-th arc, ``2k+1`` its residual twin."""

    def __init__(self, n_nodes: int):
        self.n = n_nodes
        self.adj: list[list[int]] = [[] for _ in range(n_nodes)]
        self.head: list[int] = []
        self.cap: list[int] = []
        self.cost: list[int] = []
        self.base_cap: list[int] = []

    def add_node(self) -> int:
        self.adj.append([])
        self.n += 1
        return self.n - 1

    def add_arc(self, u: int, v: int, cap: int, cost: int = 0) -> int:
        k = len(self.head)
        self.head += [v, u]
        self.cap += [cap, 0]
        self.base_cap += [cap, 0]
        self.cost += [cost, -cost]
        self.adj[u].append(k)
        self.adj[v].append(k + 1)
        return k

    def flow_on(self, arc: int) -> int:
        return self.base_cap[arc] - self.cap[arc]

    def min_cost_flow(self, s: int, t: int, max_flow: int) -> tuple[int, int]:
        """Push up to ``max_flow`` units; return ``(flow, cost)``."""
        n = self.n
        head, cap, cost, adj = self.head, self.cap, self.cost, self.adj
        pot = [0] * n
        flow = total = 0
        while flow < max_flow:
            dist = [INF] * n
            prev = [-1] * n
            dist[s] = 0
            heap = [(0, s)]
            while heap:
                d, u = heapq.heappop(heap)
                if d > dist[u]:
                    continue
                pu = pot[u]
                for a in adj[u]:
                    if cap[a] <= 0:
                        continue
                    v = head[a]
                    nd = d + cost[a] + pu - pot[v]
                    if nd < dist[v]:
                        dist[v] = nd
                        prev[v] = a
                        heapq.heappush(heap, (nd, v))
            if dist[t] >= INF:
                break
            dt = dist[t]
            for v in range(n):
                pot[v] += dist[v] if dist[v] < dt else dt
            push = max_flow - flow
            v = t
            while v != s:
                a = prev[v]
                push = min(push, cap[a])
                v = head[a ^ 1]
            v = t
            while v != s:
                a = prev[v]
                cap[a] -= push
                cap[a ^ 1] += push
                total += push * cost[a]
                v = head[a ^ 1]
            flow += push
        return flow, total

    def decompose(self, s: int, t: int) -> list[list[int]]:
        """Split the current flow into ``s``-``t`` node paths, dropping cycles."""
        remaining = {}
        for k in range(0, len(self.head), 2):
            f = self.flow_on(k)
            if f > 0:
                remaining[k] = f
        out_arcs: dict[int, list[int]] = {}
        for k in sorted(remaining):
            out_arcs.setdefault(self.head[k ^ 1], []).append(k)
        paths = []
        while True:
            start = next((a for a in out_arcs.get(s, ()) if remaining[a] > 0), None)
            if start is None:
                break
            path, pos = [s], {s: 0}
            arcs: list[int] = []
            u = s
            while u != t:
                a = next(a for a in out_arcs.get(u, ()) if remaining[a] > 0)
                remaining[a] -= 1
                v = self.head[a]
                if v in pos:
                    # a cycle: discard it
                    cut = pos[v]
                    for w in path[cut + 1:]:
                        del pos[w]
                    path = path[: cut + 1]
                    arcs = arcs[:cut]
                else:
                    pos[v] = len(path)
                    path.append(v)
                    arcs.append(a)
                u = v
            paths.append(path)
        return paths
