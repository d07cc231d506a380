"""Exact closure of periodic self-loops during symbolic exploration.

A guard of the form ``x = pi`` on a self-loop that resets x makes the
loop fire every pi time units, so the reachable zones at the looping
location form an arithmetic family indexed by the fire count. Plain
exploration enumerates that family forever. When the rest of the state
fits a narrow shape, the family and every exit through it have an exact
closed form: unions of per-count windows whose bounds are the guard
constants divided by the count. Consecutive windows start to overlap
once the count passes a computable threshold, so the whole union is a
finite disjunction.

Nothing here approximates. The pattern match is deliberately strict,
the reconstructed family is verified against the real successor
operator for two induction steps before it is trusted, and any exit
whose window union is not expressible as finitely many polyhedra makes
the whole attempt report failure so the caller falls back to plain
exploration.

Applicability, checked mechanically:

- the popped location has exactly one self-loop and a trivial
  invariant, and the loop resets at least one clock;
- every other edge from it leads to a terminal location (no outgoing
  edges, trivial invariant), so closed states need no re-exploration;
- the loop guard splits into one pace equality ``x = pi`` (x reset,
  pi parameter-affine), atoms over reset clocks only, single-clock
  window atoms over never-reset clocks, and parameter-only atoms;
- the popped zone equals the reconstructed shape
  elapse(reset clocks = 0, never-reset clocks = m * pi, its own
  parameter projection) for some integer m between 0 and 8;
- applying the loop's successor operator reproduces the reconstructed
  shapes for the next two indices.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from ptasynth.automata import Automaton, Edge
from ptasynth.constraints import (
    Atom,
    ConvexPolyhedron,
    Context,
    Rel,
    _eliminate_cols,
    _reduce,
    _Unsat,
)

_MAX_SHAPE_OFFSET = 8


@dataclass
class LoopClosure:
    """Result of a successful acceleration at one symbolic state."""

    location: str
    loop: Edge
    offset: int
    hits: list[tuple[str, list[ConvexPolyhedron]]]


@dataclass
class _Window:
    """A loop-guard atom over one never-reset clock, as beta*y rel k - params."""

    beta: int
    param_coeffs: tuple[int, ...]
    const: int
    rel: Rel

    def at_index(self, i: int, pace: "_Pace", nparams: int) -> Optional[Atom]:
        # substitute y := i * pi, exact in integers
        vec = tuple(
            self.beta * i * pace.coeffs[q] + self.param_coeffs[q] for q in range(nparams)
        )
        const = self.const - self.beta * i * pace.const
        try:
            return _reduce(vec, self.rel, const)
        except _Unsat:
            return Atom((0,) * nparams, Rel.LT, 0)


@dataclass
class _Pace:
    """The loop period pi as an integer-affine parameter expression."""

    clock: int
    coeffs: tuple[int, ...]
    const: int

    def times(self, k: int, nparams: int) -> tuple[tuple[int, ...], int]:
        return tuple(k * c for c in self.coeffs), k * self.const


def _loop_post(zone: ConvexPolyhedron, loop: Edge) -> ConvexPolyhedron:
    # invariants are trivial here by the applicability check, so the
    # successor formula collapses to elapse(reset(zone && guard))
    return zone.conjoin(loop.guard).reset(loop.resets).elapse()


def _substitute_reset_clocks(atom: Atom, nclocks: int, pace: _Pace) -> Optional[Atom]:
    """Value of a reset-clock guard atom at fire time, when clocks equal pi."""
    nparams = len(atom.coeffs) - nclocks
    total = sum(atom.coeffs[:nclocks])
    vec = tuple(total * pace.coeffs[q] + atom.coeffs[nclocks + q] for q in range(nparams))
    const = atom.const - total * pace.const
    try:
        return _reduce(vec, atom.rel, const)
    except _Unsat:
        return Atom((0,) * nparams, Rel.LT, 0)


def try_accelerate(auto: Automaton, label: str, zone: ConvexPolyhedron) -> Optional[LoopClosure]:
    """Attempt the closure at one popped state; None when anything fails."""
    out_edges = auto.edges_from(label)
    loops = [e for e in out_edges if e.target == label]
    exits = [e for e in out_edges if e.target != label]
    if len(loops) != 1 or auto.invariant(label):
        return None
    loop = loops[0]
    if not loop.resets:
        return None
    for f in exits:
        if auto.invariant(f.target) or auto.edges_from(f.target):
            return None

    ctx = auto.ctx
    nclocks = len(ctx.clocks)
    nparams = len(ctx.params)
    if nclocks == 0:
        return None
    reset_idx = sorted(ctx.index(c) for c in loop.resets)
    never_idx = [i for i in range(nclocks) if i not in reset_idx]
    pctx = ctx.param_only()

    # classify the loop guard
    pace: Optional[_Pace] = None
    reset_atoms: list[Atom] = []
    windows: list[_Window] = []
    side_raw: list[Atom] = []
    for a in sorted(loop.guard):
        support = [i for i in range(nclocks) if a.coeffs[i]]
        if not support:
            side_raw.append(Atom(a.coeffs[nclocks:], a.rel, a.const))
        elif all(i in reset_idx for i in support):
            if (
                pace is None
                and a.rel == Rel.EQ
                and len(support) == 1
                and a.coeffs[support[0]] == 1
            ):
                pace = _Pace(
                    clock=support[0],
                    coeffs=tuple(-c for c in a.coeffs[nclocks:]),
                    const=a.const,
                )
            else:
                reset_atoms.append(a)
        elif len(support) == 1 and support[0] in never_idx:
            a_ = a
            windows.append(
                _Window(
                    beta=a_.coeffs[support[0]],
                    param_coeffs=a_.coeffs[nclocks:],
                    const=a_.const,
                    rel=a_.rel,
                )
            )
        else:
            return None
    if pace is None:
        return None
    # an equality window pins the fire times both ways
    flat_windows: list[_Window] = []
    for w in windows:
        if w.rel == Rel.EQ:
            flat_windows.append(_Window(w.beta, w.param_coeffs, w.const, Rel.LE))
            flat_windows.append(
                _Window(-w.beta, tuple(-c for c in w.param_coeffs), -w.const, Rel.LE)
            )
        else:
            flat_windows.append(w)
    windows = flat_windows

    # find the shape offset m
    offset = None
    if not never_idx:
        offset = 0
    else:
        for m in range(_MAX_SHAPE_OFFSET + 1):
            ok = True
            for y in never_idx:
                vec = [0] * ctx.arity
                vec[y] = 1
                vec[pace.clock] = -1
                for q in range(nparams):
                    vec[nclocks + q] = -m * pace.coeffs[q]
                atom = Atom(tuple(vec), Rel.EQ, m * pace.const)
                if not zone.entails(atom):
                    ok = False
                    break
            if ok:
                offset = m
                break
        if offset is None:
            return None

    proj = zone.project_params()
    if proj.is_empty():
        return None

    # parameter-only side constraints valid once the loop fires again:
    # guard atoms over reset clocks read at the fire instant, the
    # lower windows at their first new index, and pi >= 0 itself
    side: list[Atom] = list(side_raw)
    for a in reset_atoms:
        sub = _substitute_reset_clocks(a, nclocks, pace)
        if sub is not None:
            side.append(sub)
    first = offset + 1
    for w in windows:
        if w.beta < 0:
            lo = w.at_index(first, pace, nparams)
            if lo is not None:
                side.append(lo)
    side.append(
        Atom(tuple(-c for c in pace.coeffs), Rel.LE, pace.const)
    )  # pi >= 0

    def family(j: int) -> ConvexPolyhedron:
        """Reconstructed zone after j more loop fires (j = 0 is the input)."""
        atoms: list[Atom] = []
        g = offset + j
        for i in reset_idx:
            vec = [0] * ctx.arity
            vec[i] = 1
            atoms.append(Atom(tuple(vec), Rel.EQ, 0))
        for y in never_idx:
            vec = [0] * ctx.arity
            vec[y] = 1
            for q in range(nparams):
                vec[nclocks + q] = -g * pace.coeffs[q]
            atoms.append(Atom(tuple(vec), Rel.EQ, g * pace.const))
        base = proj
        if j >= 1:
            base = base.conjoin(side)
            for w in windows:
                if w.beta > 0:
                    up = w.at_index(g, pace, nparams)
                    if up is not None:
                        base = base.conjoin([up])
        atoms.extend(base.embed(ctx).atoms or ())
        return ConvexPolyhedron(ctx, atoms).elapse()

    if family(0) != zone:
        return None
    step1 = _loop_post(zone, loop)
    if step1 != family(1):
        return None
    if _loop_post(step1, loop) != family(2):
        return None

    # per-exit closed forms
    base_side = proj.conjoin(side)
    hits: list[tuple[str, list[ConvexPolyhedron]]] = []
    for f in exits:
        pieces = _exit_closure(f, ctx, pctx, pace, windows, reset_idx, never_idx, first, base_side)
        if pieces is None:
            return None
        hits.append((f.target, pieces))
    return LoopClosure(location=label, loop=loop, offset=offset, hits=hits)


def _exit_closure(
    f: Edge,
    ctx: Context,
    pctx: Context,
    pace: _Pace,
    windows: list[_Window],
    reset_idx: list[int],
    never_idx: list[int],
    first: int,
    base_side: ConvexPolyhedron,
) -> Optional[list[ConvexPolyhedron]]:
    """Union over fire counts g >= first of the exit's parameter hits.

    Works in an auxiliary space (params, u, s) where u stands for g*pi
    and s for the time since the last fire. None when the union is not
    finitely polyhedral within this pattern.
    """
    nclocks = len(ctx.clocks)
    nparams = len(ctx.params)
    aux = nparams + 2
    U, S = nparams, nparams + 1
    rows: list[Atom] = []
    for a in f.guard:
        vec = [0] * aux
        for q in range(nparams):
            vec[q] = a.coeffs[nclocks + q]
        for i in reset_idx:
            vec[S] += a.coeffs[i]
        for y in never_idx:
            vec[U] += a.coeffs[y]
            vec[S] += a.coeffs[y]
        rows.append(Atom(tuple(vec), a.rel, a.const))
    rows.append(Atom((0,) * nparams + (0, -1), Rel.LE, 0))  # s >= 0
    for w in windows:
        if w.beta > 0:
            vec = list(w.param_coeffs) + [w.beta, 0]
            rows.append(Atom(tuple(vec), w.rel, w.const))
    try:
        rows = _eliminate_cols(rows, [S])
    except _Unsat:
        return []

    side_atoms: list[Atom] = []
    uppers: list[tuple[tuple[Fraction, ...], Fraction, bool]] = []
    lowers: list[tuple[tuple[Fraction, ...], Fraction, bool]] = []
    for r in rows:
        beta = r.coeffs[U]
        if beta == 0:
            side_atoms.append(Atom(r.coeffs[:nparams], r.rel, r.const))
            continue
        if r.rel == Rel.EQ:
            # u pinned to a parameter expression: one hit per count, not
            # a finite union in general
            return None
        bound_vec = tuple(Fraction(-r.coeffs[q], beta) for q in range(nparams))
        bound_const = Fraction(r.const, beta)
        strict = r.rel == Rel.LT
        if beta > 0:
            uppers.append((bound_vec, bound_const, strict))
        else:
            lowers.append((bound_vec, bound_const, strict))

    base = base_side.conjoin(side_atoms)
    if base.is_empty():
        return []

    def pi_times(k: int) -> tuple[tuple[Fraction, ...], Fraction]:
        return (
            tuple(Fraction(k * c) for c in pace.coeffs),
            Fraction(k * pace.const),
        )

    def affine_atom(
        lhs_vec, lhs_const, rel: str, rhs_vec, rhs_const
    ) -> Optional[Atom]:
        # lhs rel rhs over the parameter context, scaled to integers
        from math import lcm

        diff = [a - b for a, b in zip(lhs_vec, rhs_vec)]
        const = rhs_const - lhs_const
        denoms = [x.denominator for x in diff] + [const.denominator]
        d = 1
        for v in denoms:
            d = lcm(d, v)
        vec = tuple(int(x * d) for x in diff)
        r = {"<": Rel.LT, "<=": Rel.LE, "=": Rel.EQ}[rel]
        try:
            return _reduce(vec, r, int(const * d))
        except _Unsat:
            return Atom((0,) * nparams, Rel.LT, 0)

    pieces: list[ConvexPolyhedron] = []

    def emit(atoms: list[Optional[Atom]]) -> None:
        poly = base.conjoin([a for a in atoms if a is not None])
        if not poly.is_empty():
            pieces.append(poly)

    if not uppers and not lowers:
        emit([])
        return pieces

    if not lowers:
        # every count works once the first one does
        vec, const = pi_times(first)
        atoms = [
            affine_atom(vec, const, "<" if strict else "<=", bvec, bconst)
            for bvec, bconst, strict in uppers
        ]
        emit(atoms)
        return pieces

    if not uppers:
        # any positive pi eventually clears every lower bound
        pvec = tuple(Fraction(c) for c in pace.coeffs)
        pconst = Fraction(pace.const)
        zero = tuple(Fraction(0) for _ in range(nparams))
        emit([affine_atom(zero, Fraction(0), "<", pvec, pconst)])
        zero_pi = affine_atom(pvec, pconst, "=", zero, Fraction(0))
        atoms = [zero_pi]
        for bvec, bconst, strict in lowers:
            atoms.append(affine_atom(bvec, bconst, "<" if strict else "<=", zero, Fraction(0)))
        emit(atoms)
        return pieces

    # both bounds: need constant window edges for the interval chain
    for bvec, _, _ in uppers + lowers:
        if any(bvec):
            return None
    alpha, alpha_strict = max(
        ((bconst, strict) for _, bconst, strict in lowers),
        key=lambda t: (t[0], t[1]),
    )
    gamma, gamma_strict = min(
        ((bconst, strict) for _, bconst, strict in uppers),
        key=lambda t: (t[0], not t[1]),
    )
    if gamma < alpha or (gamma == alpha and (gamma_strict or alpha_strict)):
        return []
    if gamma == alpha:
        # exactly one admissible instant per count: infinitely many points
        return None

    # counts below the chaining threshold are emitted one by one
    threshold = alpha / (gamma - alpha)
    g_star = max(first, int(threshold) + 1 if threshold >= 0 else first)
    pvec = tuple(Fraction(c) for c in pace.coeffs)
    pconst = Fraction(pace.const)
    zero = tuple(Fraction(0) for _ in range(nparams))
    czero = Fraction(0)
    for g in range(first, g_star):
        gv, gc = pi_times(g)
        emit(
            [
                affine_atom((czero,) * nparams, alpha, "<" if alpha_strict else "<=", gv, gc),
                affine_atom(gv, gc, "<" if gamma_strict else "<=", zero, gamma),
            ]
        )
    # the chained tail collapses to one interval ending at gamma / g_star
    gv, gc = pi_times(g_star)
    allow_zero = alpha < 0 or (alpha == 0 and not alpha_strict)
    tail = [affine_atom(gv, gc, "<" if gamma_strict else "<=", zero, gamma)]
    if not allow_zero:
        tail.append(affine_atom(zero, czero, "<", pvec, pconst))
    emit(tail)
    return pieces
