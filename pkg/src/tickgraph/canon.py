"""Canonical forms for bigraphs.

Two bigraphs get equal encodings exactly when they are isomorphic: same
controls and parameters, isomorphic place forests (regions and siblings
permute freely), isomorphic link structure with open names compared by
identity and closed edges anonymous.  Used for state deduplication, so
stability across runs and platforms matters: no builtin ``hash`` anywhere.

The scheme is colour refinement over the combined place/link structure to
rank every entity and hyperedge, then a minimum serialization of the forest
where siblings sort by an iso-invariant pre-encoding and closed edges are
numbered by first use.  Residual ties (genuinely symmetric parts) are
branched over and the lexicographically smallest complete serialization
wins, so the result stays canonical even under closed-edge symmetry.
"""

from __future__ import annotations

import hashlib
from itertools import permutations

from .bigraph import Bigraph, Control, Link, Ref

_BRANCH_CAP = 20160  # alternatives kept per sibling group; beyond this something is off


def _param_repr(param) -> str:
    return "" if param is None else str(param)


def _refine(g: Bigraph) -> tuple[list[int], list[int]]:
    """Stable colour ranks for entities and hyperedges (no salted hashing)."""
    ncolor = [
        ("ctrl", ctrl.name, _param_repr(param), str(ctrl.arity))
        for ctrl, param in g.nodes
    ]
    ecolor = [
        ("edge", lk.name if lk.name is not None else "\x00closed", ",".join(sorted(lk.inner)))
        for lk in g.links
    ]

    def ranks(sigs):
        table = {sig: i for i, sig in enumerate(sorted(set(sigs)))}
        return [table[s] for s in sigs]

    nrank, erank = ranks(ncolor), ranks(ecolor)
    for _ in range(g.nnodes + len(g.links) + 2):
        nsig = []
        for i in range(g.nnodes):
            par = g.parent(("n", i))
            kids = sorted(
                (0, nrank[c]) if k == "n" else (1, 0) for k, c in g.node_children[i]
            )
            edges = sorted((erank[e], cnt) for e, cnt in g.edge_counts(i).items())
            nsig.append(
                (ncolor[i], "r" if par[0] == "r" else str(nrank[par[1]]), tuple(kids), tuple(edges))
            )
        esig = []
        for e, lk in enumerate(g.links):
            members: dict[int, int] = {}
            for n, _p in lk.ports:
                members[n] = members.get(n, 0) + 1
            esig.append((ecolor[e], tuple(sorted((nrank[n], c) for n, c in members.items()))))
        new_n, new_e = ranks(nsig), ranks(esig)
        stable = len(set(new_n)) == len(set(nrank)) and len(set(new_e)) == len(set(erank))
        nrank, erank = new_n, new_e
        if stable:
            break
    return nrank, erank


# An alternative is a partial serialization: (text so far, closed-edge numbering).
Alt = tuple[str, tuple[tuple[int, int], ...]]


class _Serializer:
    def __init__(self, g: Bigraph):
        self.g = g
        self.nrank, self.erank = _refine(g)
        self._pre: dict[int, str] = {}

    # Pre-encoding: full structure with closed edges blurred to their colour
    # rank.  Iso-invariant, so it serves as the sibling sort key; siblings
    # with equal pre-encodings are genuinely ambiguous and get branched.
    def pre(self, node: int) -> str:
        if node in self._pre:
            return self._pre[node]
        g = self.g
        ctrl, param = g.nodes[node]
        refs = []
        for e, cnt in g.edge_counts(node).items():
            lk = g.links[e]
            key = f"o{lk.name}" if lk.name is not None else f"c?{self.erank[e]:04d}"
            refs.extend([key] * cnt)
        kids = [self.pre(c) if k == "n" else f"\x7f${c}" for k, c in g.node_children[node]]
        enc = (
            f"{ctrl.name}({_param_repr(param)})"
            + "{" + ",".join(sorted(refs)) + "}"
            + "[" + ";".join(sorted(kids)) + "]"
        )
        self._pre[node] = enc
        return enc

    @staticmethod
    def _tie_orders(keyed: list[tuple[str, object]]):
        """All orderings of (key, item) sorted by key with tied runs permuted."""
        keyed = sorted(keyed, key=lambda kv: kv[0])
        groups: list[list[object]] = []
        keys: list[str] = []
        for key, item in keyed:
            if keys and keys[-1] == key:
                groups[-1].append(item)
            else:
                keys.append(key)
                groups.append([item])

        def rec(idx: int):
            if idx == len(groups):
                yield []
                return
            grp = groups[idx]
            tails = list(rec(idx + 1))
            if len(grp) == 1:
                for t in tails:
                    yield grp + t
            else:
                for perm in permutations(grp):
                    for t in tails:
                        yield list(perm) + t

        yield from rec(0)

    def _emit_node(self, node: int, alt: Alt) -> list[Alt]:
        g = self.g
        text, numbering = alt
        ctrl, param = g.nodes[node]
        open_refs: list[str] = []
        pending: list[tuple[int, int, int]] = []  # (edge rank, edge, count), closed
        for e, cnt in g.edge_counts(node).items():
            lk = g.links[e]
            if lk.name is not None:
                open_refs.extend([f"o{lk.name}"] * cnt)
            else:
                pending.append((self.erank[e], e, cnt))
        num = dict(numbering)
        # Fresh closed edges are numbered by rank order; equal-rank fresh edges
        # at one node are symmetric at this point, and any later asymmetry is
        # reachable only through sibling ties, which are branched upstream.
        for _rk, e, _cnt in sorted(pending):
            if e not in num:
                num[e] = len(num)
        closed_refs = [f"c{num[e]}" for _rk, e, cnt in pending for _ in range(cnt)]
        refs = sorted(open_refs) + sorted(closed_refs, key=lambda s: int(s[1:]))
        head = f"{ctrl.name}({_param_repr(param)})" + "{" + ",".join(refs) + "}["
        alts = self._emit_children(
            g.node_children[node], (text + head, tuple(sorted(num.items())))
        )
        return [(t + "]", n) for t, n in alts]

    def _emit_seq(self, order: list[Ref], alt: Alt) -> list[Alt]:
        alts = [alt]
        for i, (k, c) in enumerate(order):
            sep = ";" if i else ""
            if k == "s":
                alts = [(t + sep + f"${c}", n) for t, n in alts]
            else:
                nxt: list[Alt] = []
                for t, n in alts:
                    nxt.extend(self._emit_node(c, (t + sep, n)))
                alts = nxt
        return alts

    def _emit_children(self, children: tuple[Ref, ...], alt: Alt) -> list[Alt]:
        keyed = [
            (self.pre(c) if k == "n" else f"\x7f${c}", (k, c)) for k, c in children
        ]
        out: list[Alt] = []
        for order in self._tie_orders(keyed):
            out.extend(self._emit_seq(order, alt))  # type: ignore[arg-type]
            if len(out) > _BRANCH_CAP:
                raise RuntimeError("canonicalisation tie budget exceeded")
        # Alternatives that agree on the numbering can only diverge through
        # their text, and later output depends on the numbering alone: keep
        # the smallest text per numbering.
        best: dict[tuple, str] = {}
        for t, n in out:
            if n not in best or t < best[n]:
                best[n] = t
        return [(t, n) for n, t in best.items()]

    def serialize(self) -> str:
        g = self.g
        keyed = []
        for r in range(g.nregions):
            kids = sorted(
                self.pre(c) if k == "n" else f"\x7f${c}" for k, c in g.region_children[r]
            )
            keyed.append((";".join(kids), r))

        finals: list[str] = []
        for order in self._tie_orders(keyed):
            alts: list[Alt] = [(f"bg;{g.nregions};{g.nsites};", ())]
            for r in order:  # type: ignore[assignment]
                alts = [(t + "R[", n) for t, n in alts]
                nxt: list[Alt] = []
                for a in alts:
                    nxt.extend(self._emit_children(g.region_children[r], a))
                alts = [(t + "]", n) for t, n in nxt]
                if len(alts) > _BRANCH_CAP:
                    raise RuntimeError("canonicalisation tie budget exceeded")
            for text, numbering in alts:
                finals.append(text + self._tail(dict(numbering)))
        return min(finals)

    def _tail(self, numbering: dict[int, int]) -> str:
        g = self.g
        # portless closed edges (possible only via inner names) get trailing numbers
        leftover = sorted(
            (self.erank[e], e) for e, lk in enumerate(g.links) if lk.closed and e not in numbering
        )
        for _rk, e in leftover:
            numbering[e] = len(numbering)
        portless = sorted(lk.name for lk in g.links if lk.name is not None and not lk.ports)
        inner = []
        for e, lk in enumerate(g.links):
            for x in lk.inner:
                ref = f"o{lk.name}" if lk.name is not None else f"c{numbering[e]}"
                inner.append(f"{x}>{ref}")
        return ";Y=" + ",".join(portless) + ";X=" + ",".join(sorted(inner))


def canonical_form(g: Bigraph) -> bytes:
    """Deterministic encoding equal exactly for isomorphic bigraphs."""
    if g._canon is None:
        g._canon = _Serializer(g).serialize().encode("ascii")
    return g._canon


def canonical_digest(g: Bigraph) -> str:
    return hashlib.sha256(canonical_form(g)).hexdigest()


def is_iso(a: Bigraph, b: Bigraph) -> bool:
    return canonical_form(a) == canonical_form(b)


# ---------------------------------------------------------------------------
# decoding (used by the MDP cache; the encoding doubles as a full structural
# serialization of the bigraph)


class _Decoder:
    def __init__(self, text: str, controls: dict[str, Control]):
        self.text = text
        self.pos = 0
        self.controls = controls
        self.nodes: list[tuple[Control, int | None]] = []
        self.node_children: list[list[Ref]] = []
        self.closed_edges: dict[int, list[tuple[int, int]]] = {}
        self.open_edges: dict[str, list[tuple[int, int]]] = {}

    def fail(self, why: str):
        raise ValueError(f"bad canonical encoding at byte {self.pos}: {why}")

    def expect(self, lit: str):
        if not self.text.startswith(lit, self.pos):
            self.fail(f"expected {lit!r}")
        self.pos += len(lit)

    def until(self, stops: str) -> str:
        start = self.pos
        while self.pos < len(self.text) and self.text[self.pos] not in stops:
            self.pos += 1
        return self.text[start : self.pos]

    def parse(self) -> Bigraph:
        self.expect("bg;")
        nregions = int(self.until(";"))
        self.expect(";")
        nsites = int(self.until(";"))
        self.expect(";")
        region_children: list[list[Ref]] = []
        for _ in range(nregions):
            self.expect("R[")
            region_children.append(self.children())
            self.expect("]")
        self.expect(";Y=")
        portless = self.until(";")
        self.expect(";X=")
        inner_spec = self.text[self.pos :]

        inner_by_ref: dict[str, list[str]] = {}
        if inner_spec:
            for item in inner_spec.split(","):
                x, ref = item.split(">")
                inner_by_ref.setdefault(ref, []).append(x)
        links: list[Link] = []
        for num in sorted(self.closed_edges):
            links.append(
                Link(None, tuple(self.closed_edges[num]), tuple(sorted(inner_by_ref.get(f"c{num}", ()))))
            )
        for name in sorted(self.open_edges):
            links.append(
                Link(name, tuple(self.open_edges[name]), tuple(sorted(inner_by_ref.get(f"o{name}", ()))))
            )
        if portless:
            for name in portless.split(","):
                links.append(Link(name, (), tuple(sorted(inner_by_ref.get(f"o{name}", ())))))
        return Bigraph(self.nodes, self.node_children, region_children, nsites, links)

    def children(self) -> list[Ref]:
        out: list[Ref] = []
        while self.pos < len(self.text) and self.text[self.pos] != "]":
            if self.text[self.pos] == ";":
                self.pos += 1
                continue
            if self.text[self.pos] == "$":
                self.pos += 1
                out.append(("s", int(self.until(";]"))))
            else:
                out.append(("n", self.node()))
        return out

    def node(self) -> int:
        name = self.until("(")
        self.expect("(")
        param_s = self.until(")")
        self.expect("){")
        refs_s = self.until("}")
        self.expect("}[")
        if name not in self.controls:
            self.fail(f"unknown control {name!r}")
        ctrl = self.controls[name]
        param = int(param_s) if param_s else None
        idx = len(self.nodes)
        self.nodes.append((ctrl, param))
        self.node_children.append([])
        port = 0
        if refs_s:
            for ref in refs_s.split(","):
                if ref.startswith("o"):
                    self.open_edges.setdefault(ref[1:], []).append((idx, port))
                else:
                    self.closed_edges.setdefault(int(ref[1:]), []).append((idx, port))
                port += 1
        kids = self.children()
        self.expect("]")
        self.node_children[idx] = kids
        return idx


def decode_canonical(data: bytes, controls: dict[str, Control]) -> Bigraph:
    """Rebuild a bigraph from its canonical encoding (inverse up to iso)."""
    return _Decoder(data.decode("ascii"), controls).parse()
