"""Parametric timed automata and the operators that combine them.

An automaton has locations, clocks, parameters, guarded edges with
clock resets, and location invariants. Actions are split into low
(observable) and high (confidential) classes; the name ``eps`` is the
silent action, never declared and never synchronized.

Guards and invariants are conjunctions of the exact atoms from
ptasynth.constraints, over the automaton's own context. The parallel
product embeds them into the joint context by variable name.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product as cartesian
from typing import Iterable, Mapping, Optional, Sequence

from ptasynth.constraints import (
    Atom,
    Context,
    Rel,
    RationalLike,
    as_fraction,
    parse_atoms,
)

SILENT = "eps"

_FALSE_GUARD = "__false__"


@dataclass(frozen=True)
class Edge:
    """One guarded transition. Guard atoms live in the automaton context."""

    source: str
    action: str
    guard: tuple[Atom, ...]
    resets: frozenset[str]
    target: str

    def __repr__(self) -> str:
        r = ",".join(sorted(self.resets))
        return f"Edge({self.source} --{self.action}[{len(self.guard)} atoms]/reset {{{r}}}--> {self.target})"


def _embed_atoms(atoms: Iterable[Atom], sub: Context, ctx: Context) -> tuple[Atom, ...]:
    out = []
    for a in atoms:
        vec = [0] * ctx.arity
        for c, name in zip(a.coeffs, sub.vars):
            if c:
                vec[ctx.index(name)] = c
        out.append(Atom(tuple(vec), a.rel, a.const))
    return tuple(out)


def _instantiate_atoms(
    atoms: Iterable[Atom], ctx: Context, new_ctx: Context, values: Mapping[int, Fraction]
) -> Optional[tuple[Atom, ...]]:
    """Substitute parameter values; None when an atom becomes flat false."""
    keep = [i for i in range(ctx.arity) if i not in values]
    out = []
    for a in atoms:
        shift = sum(a.coeffs[i] * v for i, v in values.items())
        denom = shift.denominator
        vec = tuple(a.coeffs[i] * denom for i in keep)
        const = (Fraction(a.const) - shift) * denom
        if not any(vec):
            ok = const == 0 if a.rel == Rel.EQ else const >= 0 if a.rel == Rel.LE else const > 0
            if ok:
                continue
            return None
        out.append(Atom(vec, a.rel, int(const)))
    return tuple(out)


class Automaton:
    """A parametric timed automaton, immutable once constructed."""

    def __init__(
        self,
        name: str,
        ctx: Context,
        locations: Sequence[str],
        init: str,
        edges: Sequence[Edge],
        invariants: Mapping[str, tuple[Atom, ...]] = (),
        low: Iterable[str] = (),
        high: Iterable[str] = (),
        components: Optional[Sequence[str]] = None,
        parts: Optional[Mapping[str, tuple[str, ...]]] = None,
    ):
        self.name = name
        self.ctx = ctx
        self.locations = tuple(locations)
        self.init = init
        self.edges = tuple(edges)
        self.invariants = {loc: tuple(atoms) for loc, atoms in dict(invariants).items()}
        self.low = frozenset(low)
        self.high = frozenset(high)
        self.components = tuple(components) if components is not None else (name,)
        self.parts = (
            dict(parts) if parts is not None else {loc: (loc,) for loc in self.locations}
        )
        self._validate()
        self._by_source: dict[str, list[Edge]] = {loc: [] for loc in self.locations}
        for e in self.edges:
            self._by_source[e.source].append(e)

    def _validate(self) -> None:
        locs = set(self.locations)
        if len(locs) != len(self.locations):
            raise ValueError(f"{self.name}: duplicate locations")
        if self.init not in locs:
            raise ValueError(f"{self.name}: unknown initial location {self.init!r}")
        if SILENT in self.low or SILENT in self.high:
            raise ValueError(f"{self.name}: {SILENT!r} cannot be declared")
        overlap = self.low & self.high
        if overlap:
            raise ValueError(f"{self.name}: actions both low and high: {sorted(overlap)}")
        clocks = set(self.ctx.clocks)
        for e in self.edges:
            if e.source not in locs or e.target not in locs:
                raise ValueError(f"{self.name}: edge references unknown location: {e}")
            if e.action != SILENT and e.action not in self.alphabet:
                raise ValueError(f"{self.name}: undeclared action {e.action!r}")
            bad = set(e.resets) - clocks
            if bad:
                raise ValueError(f"{self.name}: resetting non-clocks {sorted(bad)}")
            for a in e.guard:
                if len(a.coeffs) != self.ctx.arity:
                    raise ValueError(f"{self.name}: guard atom arity mismatch on {e}")
        for loc, atoms in self.invariants.items():
            if loc not in locs:
                raise ValueError(f"{self.name}: invariant on unknown location {loc!r}")
            for a in atoms:
                if len(a.coeffs) != self.ctx.arity:
                    raise ValueError(f"{self.name}: invariant atom arity mismatch at {loc}")

    @property
    def alphabet(self) -> frozenset[str]:
        return self.low | self.high

    def invariant(self, loc: str) -> tuple[Atom, ...]:
        return self.invariants.get(loc, ())

    def edges_from(self, loc: str) -> list[Edge]:
        return self._by_source[loc]

    def __repr__(self) -> str:
        return (
            f"Automaton({self.name}: {len(self.locations)} locations, "
            f"{len(self.edges)} edges, clocks={list(self.ctx.clocks)}, "
            f"params={list(self.ctx.params)})"
        )

    @classmethod
    def build(
        cls,
        name: str,
        clocks: Sequence[str] = (),
        params: Sequence[str] = (),
        locations: Sequence[str] = (),
        init: Optional[str] = None,
        edges: Sequence[tuple] = (),
        invariants: Mapping[str, str] = (),
        low: Iterable[str] = (),
        high: Iterable[str] = (),
    ) -> "Automaton":
        """Convenience constructor with textual guards and invariants.

        Each edge is (source, action, guard text, resets, target).
        """
        ctx = Context(tuple(clocks), tuple(params))
        built = [
            Edge(src, act, tuple(parse_atoms(ctx, g)), frozenset(resets), tgt)
            for src, act, g, resets, tgt in edges
        ]
        invs = {loc: tuple(parse_atoms(ctx, text)) for loc, text in dict(invariants).items()}
        return cls(name, ctx, locations, init or locations[0], built, invs, low, high)

    def instantiate(self, valuation: Mapping[str, RationalLike]) -> "Automaton":
        """Fix some parameters to exact values; they leave the context."""
        values_by_name = {n: as_fraction(v) for n, v in valuation.items()}
        for n in values_by_name:
            if n not in self.ctx.params:
                raise KeyError(f"{self.name}: unknown parameter {n!r}")
            if values_by_name[n] < 0:
                raise ValueError(f"{self.name}: negative value for {n!r}")
        new_ctx = Context(
            self.ctx.clocks, tuple(p for p in self.ctx.params if p not in values_by_name)
        )
        values = {self.ctx.index(n): v for n, v in values_by_name.items()}
        edges = []
        for e in self.edges:
            guard = _instantiate_atoms(e.guard, self.ctx, new_ctx, values)
            if guard is None:
                continue
            edges.append(Edge(e.source, e.action, guard, e.resets, e.target))
        invariants = {}
        for loc, atoms in self.invariants.items():
            inv = _instantiate_atoms(atoms, self.ctx, new_ctx, values)
            if inv is None:
                # invariant became flat false for this valuation, so the
                # location can never be occupied
                inv = (Atom((0,) * new_ctx.arity, Rel.LT, 0),)
            invariants[loc] = inv
        return Automaton(
            self.name,
            new_ctx,
            self.locations,
            self.init,
            edges,
            invariants,
            self.low,
            self.high,
            self.components,
            self.parts,
        )


def restrict(auto: Automaton) -> Automaton:
    """Drop every high edge: the view with confidential behavior removed."""
    edges = [e for e in auto.edges if e.action not in auto.high]
    return Automaton(
        auto.name + "_low",
        auto.ctx,
        auto.locations,
        auto.init,
        edges,
        auto.invariants,
        auto.low,
        frozenset(),
        auto.components,
        auto.parts,
    )


def hide(auto: Automaton, actions: Iterable[str]) -> Automaton:
    """Relabel the given actions to the silent action."""
    hidden = frozenset(actions)
    edges = [
        Edge(e.source, SILENT, e.guard, e.resets, e.target) if e.action in hidden else e
        for e in auto.edges
    ]
    return Automaton(
        auto.name + "_hide",
        auto.ctx,
        auto.locations,
        auto.init,
        edges,
        auto.invariants,
        auto.low - hidden,
        auto.high - hidden,
        auto.components,
        auto.parts,
    )


def build_interf(
    high: Iterable[str],
    low: Iterable[str],
    rate_param: str = "n",
    clock: str = "xi",
    name: str = "interf",
) -> Automaton:
    """The rate-limited attacker: high actions at least ``rate_param`` apart.

    Two locations. The first high action is free and starts the clock;
    afterwards each high action needs clock >= rate_param and resets it.
    Low actions self-loop everywhere so composition never blocks them.
    """
    high = tuple(high)
    low = tuple(low)
    ctx = Context((clock,), (rate_param,))
    gate = tuple(parse_atoms(ctx, f"{clock} >= {rate_param}"))
    edges = []
    for a in low:
        edges.append(Edge("i0", a, (), frozenset(), "i0"))
        edges.append(Edge("i1", a, (), frozenset(), "i1"))
    for a in high:
        edges.append(Edge("i0", a, (), frozenset({clock}), "i1"))
        edges.append(Edge("i1", a, gate, frozenset({clock}), "i1"))
    return Automaton(name, ctx, ("i0", "i1"), "i0", edges, {}, low, high)


def parallel(
    components: Sequence[Automaton],
    name: Optional[str] = None,
    sync: Optional[Iterable[str]] = None,
) -> Automaton:
    """Parallel product. Shared declared actions synchronize.

    By default an action synchronizes over every component that declares
    it; actions declared by a single component interleave, and the
    silent action always interleaves. Pass ``sync`` to name the
    synchronizing actions explicitly (each still spans all components
    that declare it). Only location vectors reachable by ignoring guards
    are materialized.
    """
    if len(components) < 2:
        raise ValueError("parallel needs at least two components")
    flat_names: list[str] = []
    for c in components:
        flat_names.extend(c.components)
    if len(set(flat_names)) != len(flat_names):
        raise ValueError(f"duplicate component names in product: {flat_names}")
    clocks: list[str] = []
    params: list[str] = []
    for c in components:
        for x in c.ctx.clocks:
            if x in clocks:
                raise ValueError(f"clock {x!r} appears in two components")
            clocks.append(x)
        for p in c.ctx.params:
            if p not in params:
                params.append(p)
    name_clash = set(clocks) & set(params)
    if name_clash:
        raise ValueError(f"name used as clock and parameter: {sorted(name_clash)}")
    ctx = Context(tuple(clocks), tuple(params))

    low: set[str] = set()
    high: set[str] = set()
    for c in components:
        low |= c.low
        high |= c.high
    both = low & high
    if both:
        raise ValueError(f"actions classified low and high across components: {sorted(both)}")

    declared = [c.alphabet for c in components]
    if sync is None:
        counts: dict[str, int] = {}
        for alpha in declared:
            for a in alpha:
                counts[a] = counts.get(a, 0) + 1
        sync_actions = {a for a, k in counts.items() if k >= 2}
    else:
        sync_actions = set(sync)
        if SILENT in sync_actions:
            raise ValueError(f"{SILENT!r} cannot synchronize")

    def joined(vec: tuple[str, ...]) -> str:
        return ".".join(vec)

    init_vec = tuple(c.init for c in components)
    seen = {init_vec}
    queue = [init_vec]
    locations = []
    parts: dict[str, tuple[str, ...]] = {}
    edges: list[Edge] = []
    while queue:
        vec = queue.pop()
        label = joined(vec)
        locations.append(label)
        flat: list[str] = []
        for c, loc in zip(components, vec):
            flat.extend(c.parts[loc])
        parts[label] = tuple(flat)

        moves: list[tuple[str, tuple[Optional[Edge], ...]]] = []
        for a in sorted(sync_actions):
            members = [i for i, alpha in enumerate(declared) if a in alpha]
            if len(members) < 2:
                continue
            choices = []
            for i in members:
                local = [e for e in components[i].edges_from(vec[i]) if e.action == a]
                choices.append(local)
            if any(not ch for ch in choices):
                continue
            for combo in cartesian(*choices):
                picked: list[Optional[Edge]] = [None] * len(components)
                for i, e in zip(members, combo):
                    picked[i] = e
                moves.append((a, tuple(picked)))
        for i, c in enumerate(components):
            for e in c.edges_from(vec[i]):
                a = e.action
                if a in sync_actions and sum(a in alpha for alpha in declared) >= 2:
                    continue
                picked = [None] * len(components)
                picked[i] = e
                moves.append((a, tuple(picked)))

        for action, picked in moves:
            guard: list[Atom] = []
            resets: set[str] = set()
            tgt = list(vec)
            for i, e in enumerate(picked):
                if e is None:
                    continue
                guard.extend(_embed_atoms(e.guard, components[i].ctx, ctx))
                resets |= e.resets
                tgt[i] = e.target
            tgt_vec = tuple(tgt)
            edges.append(Edge(label, action, tuple(guard), frozenset(resets), joined(tgt_vec)))
            if tgt_vec not in seen:
                seen.add(tgt_vec)
                queue.append(tgt_vec)

    invariants: dict[str, tuple[Atom, ...]] = {}
    for vec in seen:
        atoms: list[Atom] = []
        for c, loc in zip(components, vec):
            atoms.extend(_embed_atoms(c.invariant(loc), c.ctx, ctx))
        if atoms:
            invariants[joined(vec)] = tuple(atoms)

    return Automaton(
        name or "_".join(c.name for c in components),
        ctx,
        sorted(locations),
        joined(init_vec),
        edges,
        invariants,
        low,
        high,
        tuple(flat_names),
        parts,
    )
