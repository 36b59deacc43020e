"""Neighborhood engine shared by all improvement methods.

Five move kinds, in scan order: intra-route relocate, swap and 2-opt, then
relocate and swap between routes. Deltas are computed in O(1) from a
distance table; cross-route scans are vectorised with numpy.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import IntEnum
from typing import Sequence

import numpy as np

from ._graph import Graph
from .model import Instance, Solution, Trip, assign_vehicles, make_solution

INF = math.inf


class MoveKind(IntEnum):
    RELOCATE = 0
    SWAP = 1
    TWO_OPT = 2
    CROSS_RELOCATE = 3
    CROSS_SWAP = 4


INTRA = (MoveKind.RELOCATE, MoveKind.SWAP, MoveKind.TWO_OPT)


@dataclass(frozen=True, order=True)
class Move:
    """A neighborhood move.

    RELOCATE takes the customer at ``pos`` out of ``trip`` and reinserts it
    at index ``target_pos`` of the shortened trip. SWAP exchanges two
    positions, TWO_OPT reverses ``pos..target_pos`` inclusive. The cross
    kinds work the same way between ``trip`` and ``target_trip``; for
    CROSS_RELOCATE ``target_pos`` is the insertion index in the target trip.
    """

    kind: MoveKind
    trip: int
    pos: int
    target_trip: int
    target_pos: int


class InvalidMoveError(IndexError):
    pass


class MoveRejected(ValueError):
    """The move would overload a trip."""


class Search:
    """Mutable route state over a :class:`Graph`.

    ``eval_dist`` may be replaced (guided local search does) without
    touching ``cost``, which always tracks the true length.
    """

    def __init__(self, instance: Instance, trips: Sequence[Trip], *,
                 max_trips: int | None = None, pad: bool = True):
        self.instance = instance
        ids = sorted(c for t in trips for c in t.visits)
        starts = [t.start for t in trips if t.start is not None]
        self.graph = g = Graph(instance, ids, starts)
        self.dist = g.dist
        self.np_dist = g.np_dist
        self.eval_dist = self.dist
        self.np_eval = self.np_dist
        self.routes: list[list[int]] = []
        self.start: list[int] = []
        self.cap: list[int] = []
        self.locked: list[int] = []
        self.vehicle: list[int] = []
        self.starts: list = []
        self.load: list[int] = []
        k = 0
        for t in trips:
            if t.start is not None:
                self.start.append(g.first_start + k)
                k += 1
            else:
                self.start.append(0)
            nodes = [g.index[c] for c in t.visits]
            self.routes.append(nodes)
            self.cap.append(instance.capacity if t.capacity is None else t.capacity)
            self.locked.append(t.locked)
            self.vehicle.append(t.vehicle_id)
            self.starts.append(t.start)
            self.load.append(sum(g.demand[v] for v in nodes))
        self.max_trips = max_trips
        self.pad = pad
        self.cost = self.true_cost()
        self._layout = None
        self._plain_cache = None
        if pad:
            self._ensure_pad()

    # -- bookkeeping -------------------------------------------------------

    @property
    def n_customers(self) -> int:
        return self.graph.n_customers

    def route_legs(self, r: int, d=None) -> list[float]:
        d = self.dist if d is None else d
        prev = self.start[r]
        legs = []
        for v in self.routes[r]:
            legs.append(d[prev][v])
            prev = v
        if self.routes[r] or self.start[r] != 0:
            legs.append(d[prev][0])
        return legs

    def true_cost(self) -> float:
        return math.fsum(x for r in range(len(self.routes)) for x in self.route_legs(r))

    def eval_cost(self) -> float:
        return math.fsum(x for r in range(len(self.routes)) for x in self.route_legs(r, self.eval_dist))

    def is_fresh_empty(self, r: int) -> bool:
        return self.start[r] == 0 and not self.routes[r]

    def used(self) -> int:
        return sum(1 for r in range(len(self.routes)) if not self.is_fresh_empty(r))

    def can_open(self) -> bool:
        return self.max_trips is None or self.used() < self.max_trips

    def _ensure_pad(self):
        if any(self.is_fresh_empty(r) for r in range(len(self.routes))):
            return
        if self.can_open():
            self.routes.append([])
            self.start.append(0)
            self.cap.append(self.instance.capacity)
            self.locked.append(0)
            self.vehicle.append(-1)
            self.starts.append(None)
            self.load.append(0)

    def set_eval(self, d_np: np.ndarray | None):
        if d_np is None:
            self.eval_dist, self.np_eval = self.dist, self.np_dist
        else:
            self.np_eval = d_np
            self.eval_dist = d_np.tolist()

    def snapshot(self) -> list[list[int]]:
        return [list(r) for r in self.routes]

    def restore(self, routes: list[list[int]]):
        self.routes = [list(r) for r in routes]
        demand = self.graph.demand
        self.load = [sum(demand[v] for v in r) for r in self.routes]
        self.cost = self.true_cost()
        self._changed()

    def trips(self, routes: list[list[int]] | None = None) -> list[Trip]:
        routes = self.routes if routes is None else routes
        cid = self.graph.cid
        out = []
        for r, nodes in enumerate(routes):
            if self.start[r] == 0 and not nodes:
                continue
            cap = None if self.start[r] == 0 else self.cap[r]
            out.append(Trip(self.vehicle[r], tuple(cid(v) for v in nodes), self.starts[r],
                            cap, self.locked[r]))
        return assign_vehicles(out, self.instance.fleet_size)

    def solution(self, routes=None) -> Solution:
        return make_solution(self.instance, self.trips(routes))

    def node_arcs(self) -> list[tuple[int, int]]:
        arcs = []
        for r, nodes in enumerate(self.routes):
            if not nodes and self.start[r] == 0:
                continue
            prev = self.start[r]
            for v in nodes:
                arcs.append((prev, v))
                prev = v
            arcs.append((prev, 0))
        return arcs

    # -- single-move evaluation ---------------------------------------------

    def _nb(self, r: int, i: int) -> tuple[int, int]:
        R = self.routes[r]
        p = R[i - 1] if i > 0 else self.start[r]
        q = R[i + 1] if i + 1 < len(R) else 0
        return p, q

    def _check(self, move: Move):
        nr = len(self.routes)
        r1, r2 = move.trip, move.target_trip
        if not (0 <= r1 < nr and 0 <= r2 < nr):
            raise InvalidMoveError(f"trip index out of range in {move}")
        n1, n2 = len(self.routes[r1]), len(self.routes[r2])
        k = move.kind
        if k in INTRA and r1 != r2:
            raise InvalidMoveError(f"{k.name} needs a single trip")
        if k not in INTRA and r1 == r2:
            raise InvalidMoveError(f"{k.name} needs two distinct trips")
        if not (0 <= move.pos < n1):
            raise InvalidMoveError(f"position {move.pos} out of range in {move}")
        hi2 = n2 if k is MoveKind.CROSS_RELOCATE else n2 - 1
        if not (0 <= move.target_pos <= hi2):
            raise InvalidMoveError(f"target position {move.target_pos} out of range in {move}")
        if k in (MoveKind.SWAP, MoveKind.TWO_OPT) and move.pos >= move.target_pos:
            raise InvalidMoveError(f"{k.name} needs pos < target_pos")
        if move.pos < self.locked[r1] or move.target_pos < self.locked[r2]:
            raise InvalidMoveError(f"{move} touches a locked visit")

    def feasible(self, move: Move) -> bool:
        k = move.kind
        if k in INTRA:
            return True
        dem = self.graph.demand
        x = self.routes[move.trip][move.pos]
        r1, r2 = move.trip, move.target_trip
        if k is MoveKind.CROSS_RELOCATE:
            return self.load[r2] + dem[x] <= self.cap[r2]
        y = self.routes[r2][move.target_pos]
        return (self.load[r1] - dem[x] + dem[y] <= self.cap[r1]
                and self.load[r2] - dem[y] + dem[x] <= self.cap[r2])

    def delta(self, move: Move, d=None) -> float:
        """Cost change of ``move`` under table ``d`` (true distances by default)."""
        D = self.dist if d is None else d
        k = move.kind
        r, i, r2, j = move.trip, move.pos, move.target_trip, move.target_pos
        R = self.routes[r]
        x = R[i]
        p, q = self._nb(r, i)
        if k is MoveKind.RELOCATE:
            if i == j:
                return 0.0
            n = len(R)
            rem = D[p][q] - D[p][x] - D[x][q]
            if j < i:
                a = R[j - 1] if j > 0 else self.start[r]
                b = R[j]
            else:
                a = R[j]
                b = R[j + 1] if j + 1 < n else 0
            return rem + D[a][x] + D[x][b] - D[a][b]
        if k is MoveKind.SWAP:
            y = R[j]
            p2, q2 = self._nb(r, j)
            if j == i + 1:
                return D[p][y] + D[y][x] + D[x][q2] - D[p][x] - D[x][y] - D[y][q2]
            return (D[p][y] + D[y][q] + D[p2][x] + D[x][q2]
                    - D[p][x] - D[x][q] - D[p2][y] - D[y][q2])
        if k is MoveKind.TWO_OPT:
            y = R[j]
            _, e = self._nb(r, j)
            return D[p][y] + D[x][e] - D[p][x] - D[y][e]
        S = self.routes[r2]
        if k is MoveKind.CROSS_RELOCATE:
            rem = D[p][q] - D[p][x] - D[x][q]
            a = S[j - 1] if j > 0 else self.start[r2]
            b = S[j] if j < len(S) else 0
            return rem + D[a][x] + D[x][b] - D[a][b]
        y = S[j]
        p2, q2 = self._nb(r2, j)
        return (D[p][y] + D[y][q] - D[p][x] - D[x][q]
                + D[p2][x] + D[x][q2] - D[p2][y] - D[y][q2])

    def moved(self, move: Move) -> list[tuple[int, int, int]]:
        """(node, from trip, to trip) for each customer the move displaces."""
        R = self.routes[move.trip]
        x = R[move.pos]
        k = move.kind
        if k is MoveKind.RELOCATE:
            # every customer between the two positions shifts by one
            lo, hi = sorted((move.pos, move.target_pos))
            return [(v, move.trip, move.trip) for v in R[lo:hi + 1]]
        if k in (MoveKind.SWAP, MoveKind.TWO_OPT):
            return [(x, move.trip, move.trip), (R[move.target_pos], move.trip, move.trip)]
        if k is MoveKind.CROSS_RELOCATE:
            return [(x, move.trip, move.target_trip)]
        y = self.routes[move.target_trip][move.target_pos]
        return [(x, move.trip, move.target_trip), (y, move.target_trip, move.trip)]

    def apply(self, move: Move, delta: float | None = None) -> float:
        """Apply ``move`` in place and return its true-cost delta."""
        if delta is None:
            delta = self.delta(move)
        k = move.kind
        r, i, r2, j = move.trip, move.pos, move.target_trip, move.target_pos
        R = self.routes[r]
        dem = self.graph.demand
        if k is MoveKind.RELOCATE:
            x = R.pop(i)
            R.insert(j, x)
        elif k is MoveKind.SWAP:
            R[i], R[j] = R[j], R[i]
        elif k is MoveKind.TWO_OPT:
            R[i:j + 1] = R[i:j + 1][::-1]
        elif k is MoveKind.CROSS_RELOCATE:
            x = R.pop(i)
            self.routes[r2].insert(j, x)
            self.load[r] -= dem[x]
            self.load[r2] += dem[x]
        else:
            S = self.routes[r2]
            x, y = R[i], S[j]
            R[i], S[j] = y, x
            self.load[r] += dem[y] - dem[x]
            self.load[r2] += dem[x] - dem[y]
        self.cost += delta
        self._changed()
        if self.pad:
            self._ensure_pad()
        return delta

    # -- scans ----------------------------------------------------------------

    def _plain(self):
        if self._plain_cache is not None:
            return self._plain_cache
        pr, pi, px, pp, pq, alone = [], [], [], [], [], []
        sr, sj, sa, sb, spad = [], [], [], [], []
        pad_used = False
        open_ok = self.can_open()
        for r, R in enumerate(self.routes):
            n = len(R)
            s = self.start[r]
            lo = self.locked[r]
            for i in range(lo, n):
                pr.append(r)
                pi.append(i)
                px.append(R[i])
                pp.append(R[i - 1] if i > 0 else s)
                pq.append(R[i + 1] if i + 1 < n else 0)
                alone.append(s == 0 and n == 1)
            if s == 0 and n == 0:
                if pad_used or not open_ok:
                    continue
                pad_used = True
            for j in range(lo, n + 1):
                sr.append(r)
                sj.append(j)
                sa.append(R[j - 1] if j > 0 else s)
                sb.append(R[j] if j < n else 0)
                spad.append(s == 0 and n == 0)
        self._plain_cache = P = {
            "pr": pr, "pi": pi, "px": px, "pp": pp, "pq": pq, "alone": alone,
            "sr": sr, "sj": sj, "sa": sa, "sb": sb, "spad": spad,
        }
        return P

    def _lay(self):
        if self._layout is not None:
            return self._layout
        P = self._plain()
        lay = {k: np.asarray(v, dtype=bool if k in ("alone", "spad") else np.intp) for k, v in P.items()}
        lay["load"] = np.asarray(self.load, dtype=np.int64)
        lay["cap"] = np.asarray(self.cap, dtype=np.int64)
        lay["dem"] = np.asarray(self.graph.demand, dtype=np.int64)
        self._layout = lay
        return lay

    def _changed(self):
        self._layout = None
        self._plain_cache = None

    def save(self):
        return ([list(r) for r in self.routes], list(self.start), list(self.cap), list(self.locked),
                list(self.vehicle), list(self.starts), list(self.load), self.cost)

    def load_state(self, state):
        (routes, self.start, self.cap, self.locked, self.vehicle, self.starts,
         self.load, self.cost) = state
        self.routes = [list(r) for r in routes]
        self._changed()

    def key(self):
        """Hashable form of the current solution, blind to trip order and
        to the direction of depot trips."""
        parts = []
        for r, R in enumerate(self.routes):
            if self.start[r] == 0:
                if R:
                    t = tuple(R)
                    parts.append((0, min(t, t[::-1])))
            else:
                parts.append((self.start[r], tuple(R)))
        return frozenset(parts)

    def best(self, kind: MoveKind, tabu=None, it: int = 0, aspire: float = -INF, exclude=()):
        """Lowest-delta admissible move of ``kind`` under the evaluation table.

        A move is admissible when it respects capacity and, if ``tabu`` is
        given, either places no customer into a trip it is tabu for (expiry
        iteration in ``tabu[node, trip]`` greater than ``it``) or has delta
        below ``aspire``. Moves in ``exclude`` are skipped. Ties go to the
        lexicographically smallest indices. Returns ``(delta, move)`` or ``None``.
        """
        skip = {(m.trip, m.pos, m.target_trip, m.target_pos) for m in exclude if m.kind is kind}
        if kind in INTRA:
            return self._best_intra(kind, tabu, it, aspire, skip)
        if kind is MoveKind.CROSS_RELOCATE:
            return self._best_cross_relocate(tabu, it, aspire, skip)
        return self._best_cross_swap(tabu, it, aspire, skip)

    def _best_intra(self, kind, tabu, it, aspire, skip):
        D = self.eval_dist
        best_d = INF
        best = None
        for r, R in enumerate(self.routes):
            n = len(R)
            lo = self.locked[r]
            if n - lo < 2:
                continue
            s = self.start[r]
            tab = None
            if tabu is not None:
                tab = [tabu[x, r] > it for x in R]
            # on depot trips, reversing the whole trip changes nothing
            mirror = s == 0
            for i in range(lo, n):
                x = R[i]
                p = R[i - 1] if i > 0 else s
                q = R[i + 1] if i + 1 < n else 0
                Dx = D[x]
                if kind is MoveKind.RELOCATE:
                    rem = D[p][q] - Dx[p] - Dx[q]
                    for j in range(lo, n):
                        if j == i or (mirror and n == 2):
                            continue
                        if j < i:
                            a = R[j - 1] if j > 0 else s
                            b = R[j]
                        else:
                            a = R[j]
                            b = R[j + 1] if j + 1 < n else 0
                        d = rem + Dx[a] + Dx[b] - D[a][b]
                        if (d < best_d and (tab is None or not tab[i] or d < aspire)
                                and not (skip and (r, i, r, j) in skip)):
                            best_d, best = d, (r, i, j)
                elif kind is MoveKind.SWAP:
                    for j in range(i + 1, n):
                        if mirror and n <= 3 and i == 0 and j == n - 1:
                            continue
                        y = R[j]
                        Dy = D[y]
                        q2 = R[j + 1] if j + 1 < n else 0
                        if j == i + 1:
                            d = Dy[p] + Dy[x] + Dx[q2] - Dx[p] - Dx[y] - Dy[q2]
                        else:
                            p2 = R[j - 1]
                            d = Dy[p] + Dy[q] + Dx[p2] + Dx[q2] - Dx[p] - Dx[q] - Dy[p2] - Dy[q2]
                        if (d < best_d and (tab is None or not (tab[i] or tab[j]) or d < aspire)
                                and not (skip and (r, i, r, j) in skip)):
                            best_d, best = d, (r, i, j)
                else:
                    for j in range(i + 1, n):
                        if mirror and i == 0 and j == n - 1:
                            continue
                        y = R[j]
                        e = R[j + 1] if j + 1 < n else 0
                        d = D[p][y] + Dx[e] - Dx[p] - D[y][e]
                        if (d < best_d and (tab is None or not (tab[i] or tab[j]) or d < aspire)
                                and not (skip and (r, i, r, j) in skip)):
                            best_d, best = d, (r, i, j)
        if best is None:
            return None
        r, i, j = best
        return best_d, Move(kind, r, i, r, j)

    def _best_cross_relocate(self, tabu, it, aspire, skip):
        L = self._lay()
        px, sr = L["px"], L["sr"]
        if len(px) == 0 or len(sr) == 0:
            return None
        Dn = self.np_eval
        pp, pq, sa, sb = L["pp"], L["pq"], L["sa"], L["sb"]
        rem = Dn[pp, pq] - Dn[pp, px] - Dn[px, pq]
        X = px[:, None]
        delta = rem[:, None] + Dn[X, sa[None, :]] + Dn[X, sb[None, :]] - Dn[sa, sb][None, :]
        ok = L["pr"][:, None] != sr[None, :]
        # moving a lone customer into an empty depot trip is the same solution
        ok &= ~(L["alone"][:, None] & L["spad"][None, :])
        ok &= (L["load"][sr][None, :] + L["dem"][px][:, None]) <= L["cap"][sr][None, :]
        if tabu is not None:
            t = tabu[X, sr[None, :]] > it
            ok &= ~t | (delta < aspire)
        delta = np.where(ok, delta, INF)
        if skip:
            where = {(r, i, r2, j): (u, v) for u, (r, i) in enumerate(zip(L["pr"].tolist(), L["pi"].tolist()))
                     for v, (r2, j) in enumerate(zip(sr.tolist(), L["sj"].tolist())) if (r, i, r2, j) in skip}
            for u, v in where.values():
                delta[u, v] = INF
        k = int(np.argmin(delta))
        u, v = divmod(k, delta.shape[1])
        d = float(delta[u, v])
        if d == INF:
            return None
        return d, Move(MoveKind.CROSS_RELOCATE, int(L["pr"][u]), int(L["pi"][u]), int(sr[v]), int(L["sj"][v]))

    def _best_cross_swap(self, tabu, it, aspire, skip):
        L = self._lay()
        px, pr = L["px"], L["pr"]
        if len(px) < 2:
            return None
        Dn = self.np_eval
        pp, pq = L["pp"], L["pq"]
        here = Dn[pp, px] + Dn[px, pq]
        # put[u, v]: change from putting customer u into the slot of customer v
        put = Dn[pp[None, :], px[:, None]] + Dn[px[:, None], pq[None, :]] - here[None, :]
        delta = put + put.T
        dem = L["dem"][px]
        load = L["load"][pr]
        cap = L["cap"][pr]
        ok = pr[:, None] < pr[None, :]
        ok &= (load - dem)[:, None] + dem[None, :] <= cap[:, None]
        ok &= (load - dem)[None, :] + dem[:, None] <= cap[None, :]
        if tabu is not None:
            t = (tabu[px[:, None], pr[None, :]] > it) | (tabu[px[None, :], pr[:, None]] > it)
            ok &= ~t | (delta < aspire)
        delta = np.where(ok, delta, INF)
        if skip:
            at = {(r, i): u for u, (r, i) in enumerate(zip(pr.tolist(), L["pi"].tolist()))}
            for r, i, r2, j in skip:
                delta[at[r, i], at[r2, j]] = INF
        k = int(np.argmin(delta))
        u, v = divmod(k, delta.shape[1])
        d = float(delta[u, v])
        if d == INF:
            return None
        return d, Move(MoveKind.CROSS_SWAP, int(pr[u]), int(L["pi"][u]), int(pr[v]), int(L["pi"][v]))

    # -- random proposals ---------------------------------------------------

    def random_move(self, rng, kind: MoveKind) -> Move | None:
        """Uniform draw over the index tuples of ``kind`` (capacity unchecked)."""
        routes = self.routes
        if kind in INTRA:
            weights = []
            for r, R in enumerate(routes):
                m = len(R) - self.locked[r]
                w = m * (m - 1) if m >= 2 else 0
                if kind is not MoveKind.RELOCATE:
                    w //= 2
                weights.append(w)
            total = sum(weights)
            if total == 0:
                return None
            r = rng.choices(range(len(routes)), weights=weights)[0]
            lo = self.locked[r]
            m = len(routes[r]) - lo
            i = lo + rng.randrange(m)
            j = lo + rng.randrange(m - 1)
            if j >= i:
                j += 1
            if kind is not MoveKind.RELOCATE and i > j:
                i, j = j, i
            return Move(kind, r, i, r, j)
        P = self._plain()
        pr, pi = P["pr"], P["pi"]
        npos = len(pr)
        if kind is MoveKind.CROSS_RELOCATE:
            sr, sj = P["sr"], P["sj"]
            pos_routes, slot_routes = set(pr), set(sr)
            if not pos_routes or not slot_routes or (len(slot_routes) == 1 and pos_routes <= slot_routes):
                return None
            while True:
                u = rng.randrange(npos)
                v = rng.randrange(len(sr))
                if pr[u] != sr[v]:
                    return Move(kind, pr[u], pi[u], sr[v], sj[v])
        if len(set(pr)) < 2:
            return None
        while True:
            u = rng.randrange(npos)
            v = rng.randrange(npos)
            if pr[u] != pr[v]:
                if pr[u] > pr[v]:
                    u, v = v, u
                return Move(kind, pr[u], pi[u], pr[v], pi[v])


def apply_move(instance: Instance, solution: Solution, move: Move) -> tuple[Solution, float]:
    """Apply ``move`` to a copy of ``solution``; return the new solution and the cost delta.

    Raises :class:`InvalidMoveError` for out-of-range or locked indices and
    :class:`MoveRejected` when a cross-route move would overload a trip.
    """
    s = Search(instance, solution.trips, pad=False)
    s._check(move)
    if not s.feasible(move):
        raise MoveRejected(f"{move} exceeds trip capacity")
    delta = s.apply(move)
    trips = []
    for r, nodes in enumerate(s.routes):
        t = solution.trips[r]
        if not nodes and not t.anchored:
            continue
        trips.append(t.replace_visits(tuple(s.graph.cid(v) for v in nodes)))
    return make_solution(instance, trips), delta
