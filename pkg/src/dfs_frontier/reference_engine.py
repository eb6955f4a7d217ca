"""Transparent query-by-query DFS exploration engine.

This is the trusted implementation: it plays the exploration protocol one
pair query at a time with no shortcuts, keeping an explicit per-vertex record
of queried candidates. The protocol over the partition (S completed, U stack,
T undiscovered):

* If U is nonempty, the last vertex u of U queries the smallest-labelled
  vertex of T it has not queried yet. A positive answer moves the target from
  T to the top of U; a negative answer costs one clock tick and nothing else.
* If u has no unqueried T-candidate, u moves to S (no query).
* If U is empty and T is nonempty, the smallest-labelled vertex of T moves
  into U as a root (no query).
* The clock m counts pair queries only.

The query ledger (q_ST, q_SU_internal, q_UT) classifies every queried pair
by the CURRENT location of its endpoints, so counts are reclassified when a
vertex changes set: every query is asked as U-T; a push makes the target's
queried pairs internal; a completion turns the completing vertex's queried
pairs that still point into T into S-T pairs. Two exact identities hold at
every moment and are asserted at checkpoints (every event with
debug_checks=True): q_ST = |S| * |T| and q_ST + q_SU + q_UT = m.

Answers come from an oracle: either an explicit Graph or a Bernoulli bit
stream (anything with next_bit()). Post-run completion queries (the pairs
the DFS never asked) exist only in graph-realization mode and are excluded
from every DFS statistic.

Event log records are plain tuples, one of:
    ("query",    m, u, v, answer)
    ("push",     m, v, -1, -1)
    ("complete", m, v, -1, -1)
    ("root",     m, v, -1, -1)
with m the clock value at the event (a query's own tick; pushes carry the
clock of the query that discovered them, roots the current clock).

Scale cap: n <= 5000. The engine is O(total queries) time and memory and a
full supercritical run asks nearly C(n,2) queries.
"""

from __future__ import annotations

from dataclasses import dataclass

from .diagnostics import (TrajectorySample, atomic_write_text,
                          assemble_run_report, default_checkpoints)
from .errors import ConfigError, InvariantViolation
from .randomness import Graph, pair_count

MAX_REFERENCE_N = 5000


@dataclass(frozen=True)
class QueryLedger:
    q_ST: int
    q_SU_internal: int
    q_UT: int


@dataclass(frozen=True)
class DfsState:
    """Snapshot of the exploration partition at one moment."""
    completed: frozenset
    stack: tuple
    undiscovered: tuple
    m: int
    queried: dict  # vertex -> frozenset of queried candidates


@dataclass
class ReferenceResult:
    report: object            # RunReport
    samples: list             # TrajectorySample, one per reached checkpoint
    event_log: list | None
    parents: list             # DFS forest: parents[v] = parent or -1
    push_order: list          # vertices in push order
    push_m: list              # clock at each vertex's push
    unqueried_pairs: int      # C(n,2) - dfs_query_total
    realized_graph: Graph | None


def ledger_at(state, pairs):
    """Classify queried pairs by the current membership in `state`.

    Pure function used for spot checks; the engine maintains the same counts
    incrementally. A pair with both endpoints undiscovered cannot have been
    queried and raises.
    """
    in_s = state.completed
    in_t = frozenset(state.undiscovered)
    q_st = q_su = q_ut = 0
    for a, b in pairs:
        a_t = a in in_t
        b_t = b in in_t
        if a_t and b_t:
            raise InvariantViolation("queried pair inside T", {"pair": (a, b)})
        if a_t or b_t:
            other = b if a_t else a
            if other in in_s:
                q_st += 1
            else:
                q_ut += 1
        else:
            q_su += 1
    return QueryLedger(q_st, q_su, q_ut)


def first_giant_entry(event_log, giant):
    """Smallest clock at which a vertex of `giant` is pushed to U, or None."""
    members = set(int(v) for v in giant)
    for ev in event_log:
        if ev[0] == "push" and ev[2] in members:
            return ev[1]
    return None


def write_event_csv(event_log, path):
    """Columns (m, event_kind, vertex_or_pair, answer); pairs as "u:v"."""
    lines = ["m,event_kind,vertex_or_pair,answer"]
    for ev in event_log:
        kind, m = ev[0], ev[1]
        if kind == "query":
            lines.append(f"{m},query,{ev[2]}:{ev[3]},{ev[4]}")
        else:
            lines.append(f"{m},{kind},{ev[2]},")
    atomic_write_text(path, "\n".join(lines) + "\n")


def run_reference(n, oracle, checkpoints=None, *, epsilon=None, p=None,
                  seed=None, realize=False, record_events=True,
                  debug_checks=False):
    """Run the exploration protocol to termination.

    `oracle` is an explicit Graph or a bit stream with next_bit(). Trajectory
    samples are emitted at the given checkpoint moments under the settled
    convention: the state reported at moment c is the one in force after
    every zero-cost transition that precedes the query asked at clock c+1
    (or run end). Checkpoints beyond the run length are dropped.

    realize=True (stream oracles only) asks the remaining never-queried
    pairs, in lexicographic order, off the same stream after the run and
    returns the fully realized graph; this completion phase touches no DFS
    statistic.
    """
    if n < 1:
        raise ConfigError(f"n must be >= 1, got {n}")
    if n > MAX_REFERENCE_N:
        raise ConfigError(
            f"reference engine is capped at n <= {MAX_REFERENCE_N}, got {n}")
    graph_mode = isinstance(oracle, Graph)
    if graph_mode:
        if oracle.n != n:
            raise ConfigError(f"oracle graph has n={oracle.n}, run has n={n}")
        nbr_sets = [set() for _ in range(n)]
        for a, b in zip(oracle.edge_u.tolist(), oracle.edge_v.tolist()):
            nbr_sets[a].add(b)
            nbr_sets[b].add(a)
        if realize:
            raise ConfigError("realize=True needs a stream oracle")
    if checkpoints is None:
        checkpoints = default_checkpoints(n, epsilon)
    cps = sorted(set(int(c) for c in checkpoints))
    if cps and cps[0] < 0:
        raise ConfigError("checkpoints must be >= 0")

    # T as a doubly linked list over labels, ascending.
    nxt = list(range(1, n + 1))
    nxt[n - 1] = -1
    prv = list(range(-1, n - 1))
    head = 0
    code = bytearray(n)          # 0 = T, 1 = U, 2 = S
    queried = [set() for _ in range(n)]
    partners = [[] for _ in range(n)]
    stack = []
    parents = [-1] * n
    push_order = []
    push_m = [-1] * n
    size_s = 0
    size_t = n
    q_st = q_su = q_ut = 0
    m = 0
    max_u = 0
    max_u_m = 0
    events = [] if record_events else None
    samples = []
    cp_i = 0
    n_cps = len(cps)
    # Candidate scan session: within one run of consecutive negatives by the
    # same stack top, the scan continues forward; any push or pop resets it.
    sess_vertex = -1
    sess_pos = -1
    if debug_checks:
        seen_pairs = set()

    def unlink(v):
        nonlocal head
        pv, nx = prv[v], nxt[v]
        if pv >= 0:
            nxt[pv] = nx
        else:
            head = nx
        if nx >= 0:
            prv[nx] = pv

    while True:
        # Settle: complete exhausted stack tops (zero-cost).
        cand = -1
        while stack:
            u = stack[-1]
            if sess_vertex != u:
                sess_vertex = u
                sess_pos = head
            t = sess_pos
            q = queried[u]
            while t >= 0 and t in q:
                t = nxt[t]
            sess_pos = t
            if t >= 0:
                cand = t
                break
            stack.pop()
            sess_vertex = -1
            code[u] = 2
            size_s += 1
            for t2 in queried[u]:
                if not code[t2]:        # still in T: U-T pair becomes S-T
                    q_ut -= 1
                    q_st += 1
            if events is not None:
                events.append(("complete", m, u, -1, -1))
            if debug_checks and (q_st != size_s * size_t
                                 or q_st + q_su + q_ut != m):
                raise InvariantViolation("ledger identity broken at complete",
                                         {"m": m, "vertex": u})
        if not stack:
            if head < 0:
                break
            r = head
            unlink(r)
            code[r] = 1
            size_t -= 1
            # A root leaves T like any push: pairs queried at it (by what is
            # now all of S, since U is empty) become internal.
            for x in partners[r]:
                if code[x] == 1:
                    q_ut -= 1
                else:
                    q_st -= 1
                q_su += 1
            stack.append(r)
            push_order.append(r)
            push_m[r] = m
            sess_vertex = -1
            if events is not None:
                events.append(("root", m, r, -1, -1))
                events.append(("push", m, r, -1, -1))
            if len(stack) > max_u:
                max_u = len(stack)
                max_u_m = m
            if debug_checks and q_st != size_s * size_t:
                raise InvariantViolation("ledger identity broken at root",
                                         {"m": m, "vertex": r})
            continue
        # Settled; emit any checkpoint at the current clock before querying.
        while cp_i < n_cps and cps[cp_i] == m:
            samples.append(_sample(m, size_s, len(stack), size_t,
                                   q_st, q_su, q_ut))
            cp_i += 1
        # One query: u (stack top) asks its smallest unqueried T-candidate.
        if graph_mode:
            ans = cand in nbr_sets[u]
        else:
            ans = oracle.next_bit()
        m += 1
        q.add(cand)
        partners[cand].append(u)
        q_ut += 1
        if debug_checks:
            key = u * n + cand if u < cand else cand * n + u
            if key in seen_pairs:
                raise InvariantViolation("pair queried twice",
                                         {"pair": (u, cand), "m": m})
            seen_pairs.add(key)
        if events is not None:
            events.append(("query", m, u, cand, 1 if ans else 0))
        if ans:
            unlink(cand)
            code[cand] = 1
            size_t -= 1
            for x in partners[cand]:
                if code[x] == 1:        # U-T pair becomes U-internal
                    q_ut -= 1
                else:                   # S-T pair becomes S/U-internal
                    q_st -= 1
                q_su += 1
            stack.append(cand)
            parents[cand] = u
            push_order.append(cand)
            push_m[cand] = m
            sess_vertex = -1
            if events is not None:
                events.append(("push", m, cand, -1, -1))
            if len(stack) > max_u:
                max_u = len(stack)
                max_u_m = m
        else:
            sess_pos = nxt[cand]
        if debug_checks and (q_st != size_s * size_t
                             or q_st + q_su + q_ut != m):
            raise InvariantViolation("ledger identity broken after query",
                                     {"m": m, "pair": (u, cand)})

    while cp_i < n_cps and cps[cp_i] == m:
        samples.append(_sample(m, size_s, 0, 0, q_st, q_su, q_ut))
        cp_i += 1

    realized = None
    if realize:
        realized = _realize_graph(n, parents, queried, oracle)
    graph = oracle if graph_mode else realized
    config = {"n": n, "epsilon": epsilon, "p": p, "seed": seed,
              "engine": "reference"}
    report = assemble_run_report(
        config=config, n=n, epsilon=epsilon, p=p, samples=samples,
        max_U=max_u, max_U_argmax_m=max_u_m, dfs_query_total=m,
        parents=parents, push_order=push_order, push_m=push_m, graph=graph)
    return ReferenceResult(
        report=report, samples=samples, event_log=events, parents=parents,
        push_order=push_order, push_m=push_m,
        unqueried_pairs=pair_count(n) - m, realized_graph=realized)


def _sample(m, size_s, size_u, size_t, q_st, q_su, q_ut):
    if q_st != size_s * size_t or q_st + q_su + q_ut != m:
        raise InvariantViolation("ledger identity broken at checkpoint",
                                 {"m": m, "q_ST": q_st, "q_SU": q_su,
                                  "q_UT": q_ut, "size_S": size_s,
                                  "size_T": size_t})
    return TrajectorySample(m=m, size_S=size_s, size_U=size_u, size_T=size_t,
                            q_ST=q_st, q_SU=q_su, q_UT=q_ut)


def _realize_graph(n, parents, queried, stream):
    """Completion phase: ask every never-queried pair, in lexicographic
    order, off the continuing stream. DFS positives are exactly the forest
    edges (a positive answer always pushes)."""
    edges = [(parents[v], v) for v in range(n) if parents[v] >= 0]
    for u in range(n):
        qu = queried[u]
        for v in range(u + 1, n):
            if v in qu or u in queried[v]:
                continue
            if stream.next_bit():
                edges.append((u, v))
    return Graph.from_edges(n, edges)


def snapshot_state(*, completed, stack, undiscovered, m, queried=None):
    """Convenience constructor for DfsState in tests and spot checks."""
    return DfsState(completed=frozenset(completed), stack=tuple(stack),
                    undiscovered=tuple(sorted(undiscovered)), m=m,
                    queried={k: frozenset(v)
                             for k, v in (queried or {}).items()})
