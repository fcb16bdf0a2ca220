"""Line-based text serialization for tree problems.

One record per line:

    gamma <float>
    horizon <int>
    node <id> level <h> [label <text>]
    terminal <id> rho=<float> [label <text>]
    edge <s> <a> <s'> p=<float> r=<float>
    root <id> [w=<float>]

Floats are written with `repr`, so decimal round-trips are exact.  File ids
share one namespace; on load they are canonicalized (states first in file
order, then terminals), so dump(load(dump(m))) == dump(m).
"""

from __future__ import annotations

from .tree import TreeBuilder, TreeError, TreeMdp


def dumps(mdp: TreeMdp) -> str:
    lines = [f"gamma {mdp.gamma!r}", f"horizon {mdp.horizon}"]
    n = mdp.num_states
    for s in mdp.states:
        lab = f" label {s.label}" if s.label else ""
        lines.append(f"node {s.id} level {s.level}{lab}")
    for t in mdp.terminals:
        lab = f" label {t.label}" if t.label else ""
        lines.append(f"terminal {n + t.id} rho={t.rho!r}{lab}")
    for s in mdp.states:
        for a, edges in enumerate(s.children):
            for e in edges:
                cid = n + e.child if e.is_terminal else e.child
                lines.append(f"edge {s.id} {a} {cid} p={e.prob!r} r={e.reward!r}")
    for rid, w in mdp.roots:
        if len(mdp.roots) == 1 and w == 1.0:
            lines.append(f"root {rid}")
        else:
            lines.append(f"root {rid} w={w!r}")
    return "\n".join(lines) + "\n"


def dump(mdp: TreeMdp, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(mdp))


def _kv(token: str, key: str, lineno: int) -> str:
    if not token.startswith(key + "="):
        raise TreeError(f"line {lineno}: expected {key}=<value>, got {token!r}")
    return token[len(key) + 1:]


def loads(text: str) -> TreeMdp:
    gamma = 1.0
    declared_horizon = None
    node_lines: list[tuple[int, int, str]] = []  # (file id, level, label)
    term_lines: list[tuple[int, float, str]] = []
    edge_lines: list[tuple[int, int, int, float, float]] = []
    root_lines: list[tuple[int, float]] = []

    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        tok = line.split()
        try:
            kind = tok[0]
            if kind == "gamma":
                gamma = float(tok[1])
            elif kind == "horizon":
                declared_horizon = int(tok[1])
            elif kind == "node":
                if tok[2] != "level":
                    raise TreeError(f"line {lineno}: malformed node record")
                label = tok[5] if len(tok) > 5 and tok[4] == "label" else ""
                node_lines.append((int(tok[1]), int(tok[3]), label))
            elif kind == "terminal":
                rho = float(_kv(tok[2], "rho", lineno))
                label = tok[4] if len(tok) > 4 and tok[3] == "label" else ""
                term_lines.append((int(tok[1]), rho, label))
            elif kind == "edge":
                edge_lines.append(
                    (int(tok[1]), int(tok[2]), int(tok[3]),
                     float(_kv(tok[4], "p", lineno)), float(_kv(tok[5], "r", lineno)))
                )
            elif kind == "root":
                w = float(_kv(tok[2], "w", lineno)) if len(tok) > 2 else 1.0
                root_lines.append((int(tok[1]), w))
            else:
                raise TreeError(f"line {lineno}: unknown record {kind!r}")
        except (IndexError, ValueError) as exc:
            if isinstance(exc, TreeError):
                raise
            raise TreeError(f"line {lineno}: parse error in {line!r}") from exc

    b = TreeBuilder(gamma=gamma)
    state_map: dict[int, int] = {}
    term_map: dict[int, int] = {}
    declared_rho: dict[int, float] = {}
    for fid, level, label in node_lines:
        if fid in state_map or fid in term_map:
            raise TreeError(f"duplicate id {fid}")
        state_map[fid] = b.state(label=label)
    for fid, rho, label in term_lines:
        if fid in state_map or fid in term_map:
            raise TreeError(f"duplicate id {fid}")
        tid = b.terminal(label=label)
        term_map[fid] = tid
        declared_rho[tid] = rho
    for s, a, c, p, r in edge_lines:
        if s not in state_map:
            raise TreeError(f"edge from unknown state {s}")
        if c in state_map:
            b.edge(state_map[s], a, state_map[c], terminal=False, p=p, r=r)
        elif c in term_map:
            b.edge(state_map[s], a, term_map[c], terminal=True, p=p, r=r)
        else:
            raise TreeError(f"edge to unknown node {c}")
    for fid, w in root_lines:
        if fid not in state_map:
            raise TreeError(f"unknown root {fid}")
        b.root(state_map[fid], w)

    mdp = b.build()
    for tid, rho in declared_rho.items():
        if abs(mdp.terminals[tid].rho - rho) > 1e-9:
            raise TreeError(
                f"terminal {tid} declared rho={rho!r} but path rewards sum to "
                f"{mdp.terminals[tid].rho!r}"
            )
    if declared_horizon is not None and declared_horizon != mdp.horizon:
        raise TreeError(
            f"declared horizon {declared_horizon} != derived {mdp.horizon}"
        )
    return mdp


def load(path) -> TreeMdp:
    with open(path, "r", encoding="utf-8") as fh:
        return loads(fh.read())
