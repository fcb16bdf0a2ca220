"""Polynomial-time planning over the shared-count statistics.

Three bottom-up passes over the tree, each linear in the number of edges:

* empirical pass: per-subtree best plug-in value contributions ("g") and the
  empirically best total policy;
* optimistic pass: per subtree, the best (contribution + width) achievable by
  designating one descendant terminal as the count-carrier and letting every
  sibling subtree follow the empirical best.  Carrying the raw contribution
  and the designated count separately keeps the width out of interior
  arithmetic; it is applied once per candidate comparison;
* constrained pass: the same maximization restricted to policies whose
  consistent-terminal set differs from a reference policy, composed from the
  optimistic pass plus a "cheapest deviation" value pass.

Subtree values are absolute contributions (global reach estimates times
global returns), so no probability scaling appears at interior nodes and
never-visited branches simply contribute zero.

The uniform-estimator variants re-plan per designated terminal with a count
mask, since their per-terminal ratios depend on the policy's own play count.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .estimator import BoundConfig, CountsTable, width_constant
from .tree import Policy, StructureView, TreeMdp

INF = float("inf")


class NoSecondPolicyError(RuntimeError):
    """The tree carries a single policy class; no distinct challenger exists."""


def _width(wconst: float, m: int) -> float:
    return math.sqrt(wconst / m) if m > 0 else INF


@dataclass
class EmpiricalPass:
    contrib: list  # per terminal: q_hat * rho (0 when unplayed)
    g: list  # per state: best subtree contribution
    best_actions: list  # per state: argmax action
    action_values: list  # per state: per-action contribution sums
    value: float
    visits: int


def empirical_pass(counts: CountsTable, view: StructureView) -> EmpiricalPass:
    n, n_plus, rho = counts.n, counts.n_plus, view.rho
    contrib = [
        (n_plus[t] / n[t] * rho[t]) if n[t] else 0.0
        for t in range(view.num_terminals)
    ]
    g = [0.0] * view.num_states
    best_actions = [0] * view.num_states
    action_values: list = [None] * view.num_states
    visits = 0
    for sid in view.order_bottom_up:
        visits += 1
        best = -INF
        best_a = 0
        vals = []
        for a, kids in enumerate(view.children[sid]):
            v = 0.0
            for cid, is_term in kids:
                v += contrib[cid] if is_term else g[cid]
            vals.append(v)
            if v > best:
                best = v
                best_a = a
        g[sid] = best
        best_actions[sid] = best_a
        action_values[sid] = vals
    value = sum(g[r] for r in view.root_ids)
    return EmpiricalPass(contrib, g, best_actions, action_values, value, visits)


def best_empirical_policy(counts: CountsTable, mdp: TreeMdp) -> tuple[Policy, float]:
    """Policy maximizing the plug-in value estimate, ties to the lowest
    action index."""
    emp = empirical_pass(counts, mdp.structure())
    return Policy(tuple(emp.best_actions)), emp.value


@dataclass(frozen=True)
class UcbTuple:
    """Result of an optimistic maximization over a (sub)tree."""

    U: float
    sigma_star: int
    n_star: int
    contribution: float  # U minus the width at n_star
    trace: tuple | None = None  # linked (state, action, rest) chain
    deviation: tuple[int, int] | None = None  # single off-chain override


def _policy_from(base_actions, trace, deviation) -> Policy:
    actions = list(base_actions)
    node = trace
    while node is not None:
        sid, a, node = node
        actions[sid] = a
    if deviation is not None:
        actions[deviation[0]] = deviation[1]
    return Policy(tuple(actions))


def _same_class(view: StructureView, a, b) -> bool:
    """Whether two total assignments induce the same consistent-terminal
    set: they agree on every state reachable under their shared prefix."""
    if a == b:
        return True
    children = view.children
    stack = list(view.root_ids)
    while stack:
        sid = stack.pop()
        ai = a[sid]
        if ai != b[sid]:
            return False
        for cid, is_term in children[sid][ai]:
            if not is_term:
                stack.append(cid)
    return True


def _optimistic_pass(view, counts, emp, wconst):
    """Per-state optimistic tuples (contribution, sigma, count, trace)."""
    n = counts.n
    g, aval = emp.g, emp.action_values
    children = view.children
    sqrt = math.sqrt
    R = [0.0] * view.num_states
    sig = [0] * view.num_states
    cnt = [0] * view.num_states
    trace: list = [None] * view.num_states
    visits = 0
    for sid in view.order_bottom_up:
        visits += 1
        best_u = -INF
        best = None
        avals = aval[sid]
        for a, kids in enumerate(children[sid]):
            base = avals[a]
            for cid, is_term in kids:
                if is_term:
                    r = base
                    s, m, tr = cid, n[cid], (sid, a, None)
                else:
                    r = base - g[cid] + R[cid]
                    s, m, tr = sig[cid], cnt[cid], (sid, a, trace[cid])
                u = r + (sqrt(wconst / m) if m > 0 else INF)
                if u > best_u:
                    best_u = u
                    best = (r, s, m, tr)
        R[sid], sig[sid], cnt[sid], trace[sid] = best
    return R, sig, cnt, trace, visits


def _top_optimistic(view, emp, wconst, opt):
    """Combine per-root optimistic tuples over the initial distribution."""
    R, sig, cnt, trace = opt
    total_g = sum(emp.g[r] for r in view.root_ids)
    best_u = -INF
    best = None
    for rid in view.root_ids:
        r = total_g - emp.g[rid] + R[rid]
        u = r + _width(wconst, cnt[rid])
        if u > best_u:
            best_u = u
            best = (r, sig[rid], cnt[rid], trace[rid])
    return best


def find_max_ucb(
    counts: CountsTable,
    mdp: TreeMdp,
    t: int,
    config: BoundConfig,
    *,
    empirical: EmpiricalPass | None = None,
    stats: dict | None = None,
) -> tuple[Policy, UcbTuple]:
    """Policy maximizing value estimate plus confidence width, in one
    bottom-up pass; exact (verified against enumeration by the oracle)."""
    view = mdp.structure()
    emp = empirical if empirical is not None else empirical_pass(counts, view)
    wconst = width_constant(t, config)
    R, sig, cnt, trace, visits = _optimistic_pass(view, counts, emp, wconst)
    r, s, m, tr = _top_optimistic(view, emp, wconst, (R, sig, cnt, trace))
    if stats is not None:
        stats["visits"] = emp.visits + visits
    policy = _policy_from(emp.best_actions, tr, None)
    return policy, UcbTuple(U=r + _width(wconst, m), sigma_star=s, n_star=m,
                            contribution=r, trace=tr)


def _deviation_pass(view, emp):
    """Per state: best subtree contribution among policies whose consistent
    set differs from the empirical-best assignment, plus the single action
    override achieving it."""
    g, aval, best_actions = emp.g, emp.action_values, emp.best_actions
    D = [-INF] * view.num_states
    pair: list = [None] * view.num_states
    visits = 0
    for sid in view.order_bottom_up:
        visits += 1
        pa = best_actions[sid]
        best = -INF
        best_pair = None
        for a in range(len(view.children[sid])):
            if a != pa and aval[sid][a] > best:
                best = aval[sid][a]
                best_pair = (sid, a)
        for cid, is_term in view.children[sid][pa]:
            if not is_term and D[cid] > -INF:
                cand = g[sid] - g[cid] + D[cid]
                if cand > best:
                    best = cand
                    best_pair = pair[cid]
        D[sid] = best
        pair[sid] = best_pair
    return D, pair, visits


def second_max_ucb(
    counts: CountsTable,
    mdp: TreeMdp,
    pi1: Policy,
    t: int,
    config: BoundConfig,
    *,
    empirical: EmpiricalPass | None = None,
    stats: dict | None = None,
) -> tuple[Policy, UcbTuple]:
    """Max-UCB policy among those inducing a different consistent-terminal
    set than `pi1`.  Short-circuits when the unconstrained maximizer already
    differs; otherwise composes the constrained bottom-up pass."""
    view = mdp.structure()
    emp = empirical if empirical is not None else empirical_pass(counts, view)
    wconst = width_constant(t, config)

    Ru, sig_u, cnt_u, trace_u, visits_u = _optimistic_pass(view, counts, emp, wconst)
    r_u, s_u, m_u, tr_u = _top_optimistic(view, emp, wconst,
                                          (Ru, sig_u, cnt_u, trace_u))
    pol_u = _policy_from(emp.best_actions, tr_u, None)
    if not _same_class(view, pol_u.actions, pi1.actions):
        if stats is not None:
            stats["visits"] = emp.visits + visits_u
        return pol_u, UcbTuple(U=r_u + _width(wconst, m_u), sigma_star=s_u,
                               n_star=m_u, contribution=r_u, trace=tr_u)

    if not _same_class(view, tuple(emp.best_actions), pi1.actions):
        # the constrained pass deviates from the empirical-best assignment;
        # a reference from a different class has no well-defined pass here
        raise ValueError("pi1 must belong to the empirical-best class")

    n = counts.n
    g, aval, best_actions = emp.g, emp.action_values, emp.best_actions
    D, dev_pair, visits_d = _deviation_pass(view, emp)

    Rc = [-INF] * view.num_states
    sc = [0] * view.num_states
    nc = [0] * view.num_states
    trc: list = [None] * view.num_states
    devc: list = [None] * view.num_states
    visits_c = 0

    for sid in view.order_bottom_up:
        visits_c += 1
        pa = best_actions[sid]
        best_u = -INF
        best = None
        for a, kids in enumerate(view.children[sid]):
            base = aval[sid][a]
            if a != pa:
                # deviate here; designated subtree is then unconstrained
                for cid, is_term in kids:
                    if is_term:
                        r, s, m, tr = base, cid, n[cid], (sid, a, None)
                        dv = None
                    else:
                        r = base - g[cid] + Ru[cid]
                        s, m, tr = sig_u[cid], cnt_u[cid], (sid, a, trace_u[cid])
                        dv = None
                    u = r + _width(wconst, m)
                    if u > best_u:
                        best_u, best = u, (r, s, m, tr, dv)
            else:
                # keep the best action; the difference must sit below
                deltas = [
                    (D[cid] - g[cid], cid)
                    for cid, is_term in kids
                    if not is_term and D[cid] > -INF
                ]
                top = sorted(deltas, key=lambda d: -d[0])[:2]
                for cid, is_term in kids:
                    if not is_term and Rc[cid] > -INF:
                        # difference inside the designated subtree
                        r = base - g[cid] + Rc[cid]
                        u = r + _width(wconst, nc[cid])
                        if u > best_u:
                            best_u = u
                            best = (r, sc[cid], nc[cid], (sid, a, trc[cid]), devc[cid])
                    # difference in a sibling subtree, designation in cid
                    # (terminal and state ids live in separate namespaces,
                    # so the self-exclusion only applies to decision children)
                    pick = None
                    for delta, jid in top:
                        if is_term or jid != cid:
                            pick = (delta, jid)
                            break
                    if pick is not None:
                        if is_term:
                            r0, s, m, tr = base, cid, n[cid], (sid, a, None)
                        else:
                            r0 = base - g[cid] + Ru[cid]
                            s, m, tr = sig_u[cid], cnt_u[cid], (sid, a, trace_u[cid])
                        r = r0 + pick[0]
                        u = r + _width(wconst, m)
                        if u > best_u:
                            best_u = u
                            best = (r, s, m, tr, dev_pair[pick[1]])
        if best is not None:
            Rc[sid], sc[sid], nc[sid], trc[sid], devc[sid] = best

    total_g = sum(g[r] for r in view.root_ids)
    root_deltas = sorted(
        ((D[r] - g[r], r) for r in view.root_ids if D[r] > -INF),
        key=lambda d: -d[0],
    )[:2]
    best_u = -INF
    best = None
    for rid in view.root_ids:
        if Rc[rid] > -INF:
            r = total_g - g[rid] + Rc[rid]
            u = r + _width(wconst, nc[rid])
            if u > best_u:
                best_u = u
                best = (r, sc[rid], nc[rid], trc[rid], devc[rid])
        pick = None
        for delta, jid in root_deltas:
            if jid != rid:
                pick = (delta, jid)
                break
        if pick is not None:
            r = total_g - g[rid] + Ru[rid] + pick[0]
            u = r + _width(wconst, cnt_u[rid])
            if u > best_u:
                best_u = u
                best = (r, sig_u[rid], cnt_u[rid], trace_u[rid], dev_pair[pick[1]])

    if best is None:
        raise NoSecondPolicyError("tree has a single policy class")
    r, s, m, tr, dv = best
    if stats is not None:
        stats["visits"] = emp.visits + visits_u + visits_d + visits_c
    policy = _policy_from(best_actions, tr, dv)
    return policy, UcbTuple(U=r + _width(wconst, m), sigma_star=s, n_star=m,
                            contribution=r, trace=tr, deviation=dv)


# -- uniform-estimator planning ------------------------------------------
#
# The uniform estimate of a policy uses only the first m outcomes of every
# consistent terminal, m being the policy's own play count, so per-terminal
# values depend on the policy through m.  Planning designates the
# count-minimizing terminal sigma* (fixing m = n(sigma*)), masks out
# terminals with fewer than m plays, and maximizes the masked value along
# sigma*'s path.  One masked pass per distinct count value.


@dataclass
class _MaskedPass:
    feasible_t: list
    wcontrib: list
    feasible_s: list
    gm: list
    actions: list
    aval: list
    dev: list  # per state: (value, (sid, action)) best feasible deviation vs pi1
    root_value: float  # sum of masked maxima over roots (-INF if infeasible)


def _masked_pass(view, counts, m, pi1_actions) -> _MaskedPass:
    n, log, rho = counts.n, counts.log, view.rho
    nT, nS = view.num_terminals, view.num_states
    feasible_t = [n[t] >= m for t in range(nT)]
    wcontrib = [
        (log.head_sum(t, m) / m * rho[t]) if feasible_t[t] else 0.0
        for t in range(nT)
    ]
    feasible_s = [False] * nS
    gm = [0.0] * nS
    actions = [0] * nS
    aval: list = [None] * nS
    D = [-INF] * nS
    dev_pair: list = [None] * nS
    for sid in view.order_bottom_up:
        best = -INF
        best_a = 0
        vals = []
        for a, kids in enumerate(view.children[sid]):
            ok = True
            v = 0.0
            for cid, is_term in kids:
                if is_term:
                    if not feasible_t[cid]:
                        ok = False
                        break
                    v += wcontrib[cid]
                else:
                    if not feasible_s[cid]:
                        ok = False
                        break
                    v += gm[cid]
            vals.append(v if ok else None)
            if ok and v > best:
                best = v
                best_a = a
        feasible_s[sid] = best > -INF
        gm[sid] = best
        actions[sid] = best_a
        aval[sid] = vals
        # best feasible subtree value differing from pi1
        pa = pi1_actions[sid]
        bd = -INF
        bp = None
        for a, v in enumerate(vals):
            if v is not None and a != pa and v > bd:
                bd, bp = v, (sid, a)
        if pa < len(vals) and vals[pa] is not None:
            for cid, is_term in view.children[sid][pa]:
                if not is_term and D[cid] > -INF:
                    cand = vals[pa] - gm[cid] + D[cid]
                    if cand > bd:
                        bd, bp = cand, dev_pair[cid]
        elif feasible_s[sid]:
            # pi1's action is infeasible under the mask: anything feasible differs
            if gm[sid] > bd:
                bd, bp = gm[sid], (sid, actions[sid])
        D[sid] = bd
        dev_pair[sid] = bp
    root_value = 0.0
    for rid in view.root_ids:
        if not feasible_s[rid]:
            root_value = -INF
            break
        root_value += gm[rid]
    return _MaskedPass(feasible_t, wcontrib, feasible_s, gm, actions, aval,
                       list(zip(D, dev_pair)), root_value)


def _designated_value(view, mp: _MaskedPass, path, sigma):
    """Masked value of the best policy routed through `sigma`, plus the best
    single-deviation delta over off-path positions (for constrained use)."""
    if mp.root_value == -INF:
        return None
    roots = view.root_ids
    root_of = path[0][0] if path else None
    value = mp.wcontrib[sigma]
    best_delta = -INF
    best_dev = None
    for rid in roots:
        if rid != root_of:
            value += mp.gm[rid]
            d, p = mp.dev[rid]
            if d > -INF and d - mp.gm[rid] > best_delta:
                best_delta, best_dev = d - mp.gm[rid], p
    for i, (sid, a) in enumerate(path):
        vals = mp.aval[sid]
        if a >= len(vals) or vals[a] is None:
            return None
        nxt = path[i + 1][0] if i + 1 < len(path) else sigma
        nxt_term = i + 1 >= len(path)
        for cid, is_term in view.children[sid][a]:
            if is_term == nxt_term and cid == nxt:
                continue
            value += mp.wcontrib[cid] if is_term else mp.gm[cid]
            if not is_term:
                d, p = mp.dev[cid]
                if d > -INF and d - mp.gm[cid] > best_delta:
                    best_delta, best_dev = d - mp.gm[cid], p
    return value, best_delta, best_dev


def _uniform_candidates(counts: CountsTable, mdp: TreeMdp, pi1_actions):
    """Yield (sigma, m, value, delta, dev, masked_pass) per designated
    terminal, memoizing masked passes per distinct count."""
    view = mdp.structure()
    paths = view.terminal_path
    passes: dict[int, _MaskedPass] = {}
    for sigma in range(view.num_terminals):
        m = counts.n[sigma]
        if m < 1:
            continue
        mp = passes.get(m)
        if mp is None:
            mp = passes[m] = _masked_pass(view, counts, m, pi1_actions)
        out = _designated_value(view, mp, paths[sigma], sigma)
        if out is None:
            continue
        value, delta, dev = out
        yield sigma, m, value, delta, dev, mp


def _uniform_reconstruct(view, mp: _MaskedPass, path, deviation) -> Policy:
    actions = list(mp.actions)
    for sid, a in path:
        actions[sid] = a
    if deviation is not None:
        actions[deviation[0]] = deviation[1]
    return Policy(tuple(actions))


def uniform_best_policy(counts: CountsTable, mdp: TreeMdp) -> tuple[Policy, float]:
    """Argmax of the uniform (first-m-outcomes) value estimate."""
    view = mdp.structure()
    dummy = [0] * view.num_states
    best = None
    for sigma, m, value, _, _, mp in _uniform_candidates(counts, mdp, dummy):
        if best is None or value > best[0]:
            best = (value, sigma, mp)
    if best is None:
        raise NoSecondPolicyError("no terminal has been played")
    value, sigma, mp = best
    return _uniform_reconstruct(view, mp, view.terminal_path[sigma], None), value


def find_max_ucb_uniform(counts: CountsTable, mdp: TreeMdp, t: int,
                         config: BoundConfig) -> tuple[Policy, UcbTuple]:
    view = mdp.structure()
    wconst = width_constant(t, config)
    dummy = [0] * view.num_states
    best = None
    for sigma, m, value, _, _, mp in _uniform_candidates(counts, mdp, dummy):
        u = value + _width(wconst, m)
        if best is None or u > best[0]:
            best = (u, value, sigma, m, mp)
    u, value, sigma, m, mp = best
    pol = _uniform_reconstruct(view, mp, view.terminal_path[sigma], None)
    return pol, UcbTuple(U=u, sigma_star=sigma, n_star=m, contribution=value)


def second_max_ucb_uniform(counts: CountsTable, mdp: TreeMdp, pi1: Policy,
                           t: int, config: BoundConfig) -> tuple[Policy, UcbTuple]:
    view = mdp.structure()
    wconst = width_constant(t, config)
    sig1 = set(view.consistent_terminals(pi1))
    best = None
    for sigma, m, value, delta, dev, mp in _uniform_candidates(
        counts, mdp, list(pi1.actions)
    ):
        if sigma in sig1:
            if delta == -INF:
                continue
            cand = (value + delta + _width(wconst, m), value + delta, sigma, m, mp, dev)
        else:
            cand = (value + _width(wconst, m), value, sigma, m, mp, None)
        if best is None or cand[0] > best[0]:
            best = cand
    if best is None:
        raise NoSecondPolicyError("tree has a single policy class")
    u, value, sigma, m, mp, dev = best
    pol = _uniform_reconstruct(view, mp, view.terminal_path[sigma], dev)
    return pol, UcbTuple(U=u, sigma_star=sigma, n_star=m, contribution=value,
                         deviation=dev)
