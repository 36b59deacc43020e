from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .model import Instance, Point, distance_matrix


class Graph:
    """Dense node indexing over depot, customers and extra trip start points.

    Node 0 is the depot, nodes ``1..n`` are customers in ``customer_ids``
    order, and the remaining nodes are the start points passed in ``starts``.
    """

    def __init__(self, instance: Instance, customer_ids: Iterable[int],
                 starts: Sequence[Point] = ()):
        self.instance = instance
        self.customer_ids = list(customer_ids)
        self.index = {cid: k + 1 for k, cid in enumerate(self.customer_ids)}
        custs = [instance.customer(cid) for cid in self.customer_ids]
        self.points: list[Point] = [instance.depot] + [c.pos for c in custs] + list(starts)
        self.demand = [0] + [c.demand for c in custs] + [0] * len(starts)
        self.n_customers = len(custs)
        self.first_start = 1 + len(custs)
        self.dist = distance_matrix(self.points)
        self._np = None

    def __len__(self):
        return len(self.points)

    def cid(self, node: int) -> int:
        return self.customer_ids[node - 1]

    def is_customer(self, node: int) -> bool:
        return 0 < node < self.first_start

    @property
    def np_dist(self) -> np.ndarray:
        if self._np is None:
            self._np = np.asarray(self.dist, dtype=float)
        return self._np
