"""Dinic's max-flow on a sparse graph with real capacities.

Only the s-t min cut matters to callers: after ``max_flow`` runs,
``source_side()`` gives the nodes still reachable from the source in the
residual graph.
"""

from __future__ import annotations

from collections import deque
from typing import List

import numpy as np


class FlowGraph:
    def __init__(self, n_nodes: int, eps: float = 1e-12):
        self.n = n_nodes
        self.eps = eps
        self.head: List[List[int]] = [[] for _ in range(n_nodes)]
        self.to: List[int] = []
        self.cap: List[float] = []

    def add_edge(self, u: int, v: int, cap: float, rev_cap: float = 0.0) -> None:
        """Arc u->v with capacity ``cap`` and v->u with ``rev_cap``."""
        if cap < 0 or rev_cap < 0:
            raise ValueError("capacities must be non-negative")
        self.head[u].append(len(self.to))
        self.to.append(v)
        self.cap.append(float(cap))
        self.head[v].append(len(self.to))
        self.to.append(u)
        self.cap.append(float(rev_cap))

    def _levels(self, s: int, t: int):
        level = [-1] * self.n
        level[s] = 0
        q = deque([s])
        to, cap, eps = self.to, self.cap, self.eps
        while q:
            u = q.popleft()
            for e in self.head[u]:
                v = to[e]
                if level[v] < 0 and cap[e] > eps:
                    level[v] = level[u] + 1
                    q.append(v)
        return level if level[t] >= 0 else None

    def _augment(self, s: int, t: int, level, it) -> float:
        # iterative DFS along the level graph; returns flow pushed on one path
        to, cap, head, eps = self.to, self.cap, self.head, self.eps
        stack = [s]
        path: List[int] = []
        while stack:
            u = stack[-1]
            if u == t:
                f = min(cap[e] for e in path)
                for e in path:
                    cap[e] -= f
                    cap[e ^ 1] += f
                return f
            advanced = False
            while it[u] < len(head[u]):
                e = head[u][it[u]]
                v = to[e]
                if cap[e] > eps and level[v] == level[u] + 1:
                    stack.append(v)
                    path.append(e)
                    advanced = True
                    break
                it[u] += 1
            if not advanced:
                stack.pop()
                level[u] = -1  # dead end
                if path:
                    path.pop()
                    it[stack[-1]] += 1
        return 0.0

    def max_flow(self, s: int, t: int) -> float:
        total = 0.0
        while True:
            level = self._levels(s, t)
            if level is None:
                return total
            it = [0] * self.n
            while True:
                f = self._augment(s, t, level, it)
                if f <= 0.0:
                    break
                total += f

    def source_side(self, s: int) -> np.ndarray:
        seen = np.zeros(self.n, dtype=bool)
        seen[s] = True
        q = deque([s])
        while q:
            u = q.popleft()
            for e in self.head[u]:
                v = self.to[e]
                if not seen[v] and self.cap[e] > self.eps:
                    seen[v] = True
                    q.append(v)
        return seen
