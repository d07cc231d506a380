"""Exact linear constraints over clocks and parameters.

Building blocks for symbolic reachability: integer-scaled linear atoms,
convex polyhedra kept in a canonical irredundant form, and finite
disjunctions of polyhedra. All arithmetic is exact rational arithmetic;
no floats anywhere. Every variable (clock or parameter) ranges over the
nonnegative rationals, and the canonical form makes that explicit by
conjoining domain atoms before simplification.

Variable elimination is Fourier-Motzkin with equality pivoting, which is
exact over the rationals. Strictness propagates through combination: a
combined bound is strict when either parent is strict.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from enum import IntEnum
from fractions import Fraction
from math import gcd, lcm
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence, Union


class Rel(IntEnum):
    """Relation of a linear atom, ordered for canonical sorting."""

    EQ = 0
    LE = 1
    LT = 2


RationalLike = Union[int, str, Fraction]

_REL_SYMBOL = {Rel.EQ: "=", Rel.LE: "<=", Rel.LT: "<"}
_REL_FLIPPED = {Rel.LE: ">=", Rel.LT: ">"}


class _Unsat(Exception):
    """Internal signal: an atom system is unsatisfiable."""


def as_fraction(value: RationalLike) -> Fraction:
    """Coerce an int, Fraction, or string like "3/2" to an exact Fraction."""
    if isinstance(value, Fraction):
        return value
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    raise TypeError(f"not an exact rational: {value!r}")


class Atom(NamedTuple):
    """One linear atom ``coeffs . vars  rel  const`` with integer scaling.

    Atoms are gcd-reduced; equalities have their first nonzero
    coefficient positive. Use :func:`make_atom` to build one from
    rational data.
    """

    coeffs: tuple[int, ...]
    rel: Rel
    const: int

    def evaluate(self, point: Sequence[Fraction]) -> bool:
        lhs = sum(c * v for c, v in zip(self.coeffs, point))
        if self.rel == Rel.EQ:
            return lhs == self.const
        if self.rel == Rel.LE:
            return lhs <= self.const
        return lhs < self.const

    def negations(self) -> tuple["Atom", ...]:
        """Atoms whose disjunction is the complement of this atom."""
        neg = tuple(-c for c in self.coeffs)
        if self.rel == Rel.EQ:
            return (
                Atom(self.coeffs, Rel.LT, self.const),
                Atom(neg, Rel.LT, -self.const),
            )
        flipped = Rel.LE if self.rel == Rel.LT else Rel.LT
        return (Atom(neg, flipped, -self.const),)


def _reduce(coeffs: tuple[int, ...], rel: Rel, const: int) -> Optional[Atom]:
    """Normalize an atom; None when trivially true; _Unsat when trivially false."""
    if not any(coeffs):
        if rel == Rel.EQ:
            ok = const == 0
        elif rel == Rel.LE:
            ok = const >= 0
        else:
            ok = const > 0
        if ok:
            return None
        raise _Unsat
    g = 0
    for c in coeffs:
        g = gcd(g, c)
    g = gcd(g, const)
    if g > 1:
        coeffs = tuple(c // g for c in coeffs)
        const = const // g
    if rel == Rel.EQ:
        lead = next(c for c in coeffs if c)
        if lead < 0:
            coeffs = tuple(-c for c in coeffs)
            const = -const
    return Atom(coeffs, rel, const)


def make_atom(
    arity: int,
    coeffs: Mapping[int, RationalLike],
    rel: str,
    const: RationalLike,
) -> Optional[Atom]:
    """Build a normalized atom from rational coefficients by column index.

    ``rel`` is one of ``<  <=  =  ==  >=  >``. Returns None when the atom
    is trivially true; raises _Unsat internally for trivially false input
    (callers outside this module get an empty polyhedron instead).
    """
    cs = {i: as_fraction(v) for i, v in coeffs.items()}
    k = as_fraction(const)
    if rel in (">=", ">"):
        cs = {i: -v for i, v in cs.items()}
        k = -k
        rel = "<=" if rel == ">=" else "<"
    r = {"<": Rel.LT, "<=": Rel.LE, "=": Rel.EQ, "==": Rel.EQ}[rel]
    denom = lcm(k.denominator, *(v.denominator for v in cs.values())) if cs else k.denominator
    vec = [0] * arity
    for i, v in cs.items():
        vec[i] = int(v * denom)
    return _reduce(tuple(vec), r, int(k * denom))


# ---------------------------------------------------------------------------
# Raw row machinery. Rows are Atom tuples of a fixed arity.
# ---------------------------------------------------------------------------


def _pivot_sub(eq: Atom, row: Atom, j: int) -> Optional[Atom]:
    """Add a multiple of equality eq to row so column j becomes zero."""
    a = eq.coeffs[j]
    b = row.coeffs[j]
    s = abs(a)
    k = -b if a > 0 else b
    coeffs = tuple(s * rc + k * ec for rc, ec in zip(row.coeffs, eq.coeffs))
    return _reduce(coeffs, row.rel, s * row.const + k * eq.const)


def _fm_combine(lo: Atom, up: Atom, j: int) -> Optional[Atom]:
    """Combine a lower bound (coeff < 0 at j) with an upper bound (> 0)."""
    l = -lo.coeffs[j]
    u = up.coeffs[j]
    coeffs = tuple(u * lc + l * uc for lc, uc in zip(lo.coeffs, up.coeffs))
    rel = Rel.LT if Rel.LT in (lo.rel, up.rel) else Rel.LE
    return _reduce(coeffs, rel, u * lo.const + l * up.const)


def _dedupe(rows: Iterable[Atom]) -> list[Atom]:
    """Keep the tightest atom per coefficient vector; detect flat conflicts."""
    buckets: dict[tuple[int, ...], list[Atom]] = {}
    for r in rows:
        buckets.setdefault(r.coeffs, []).append(r)
    out = []
    for vec, group in buckets.items():
        eqs = [a for a in group if a.rel == Rel.EQ]
        if eqs:
            c = eqs[0].const
            for a in eqs[1:]:
                if a.const != c:
                    raise _Unsat
            for a in group:
                if a.rel == Rel.LE and not c <= a.const:
                    raise _Unsat
                if a.rel == Rel.LT and not c < a.const:
                    raise _Unsat
            out.append(eqs[0])
        else:
            out.append(min(group, key=lambda a: (a.const, a.rel != Rel.LT)))
    return out


def _eliminate_one(rows: list[Atom], j: int) -> list[Atom]:
    eqs = [r for r in rows if r.rel == Rel.EQ and r.coeffs[j]]
    if eqs:
        piv = min(eqs)
        out = []
        for r in rows:
            if r is piv:
                continue
            if r.coeffs[j]:
                reduced = _pivot_sub(piv, r, j)
                if reduced is None:
                    continue
                r = reduced
            out.append(r)
        return _dedupe(out)
    keep = []
    lowers = []
    uppers = []
    for r in rows:
        if r.coeffs[j] == 0:
            keep.append(r)
        elif r.coeffs[j] < 0:
            lowers.append(r)
        else:
            uppers.append(r)
    for lo in lowers:
        for up in uppers:
            combined = _fm_combine(lo, up, j)
            if combined is not None:
                keep.append(combined)
    return _dedupe(keep)


def _elimination_order(rows: list[Atom], cols: set[int]) -> Optional[int]:
    """Pick the cheapest column to eliminate next, None when all are free."""
    best = None
    for j in sorted(cols):
        pos = neg = 0
        has_eq = False
        for r in rows:
            c = r.coeffs[j]
            if c == 0:
                continue
            if r.rel == Rel.EQ:
                has_eq = True
                break
            if c > 0:
                pos += 1
            else:
                neg += 1
        if pos == 0 and neg == 0 and not has_eq:
            cols.discard(j)
            continue
        cost = 0 if has_eq else pos * neg
        if best is None or cost < best[0]:
            best = (cost, j)
    return None if best is None else best[1]


def _prepare(rows: Iterable[Atom]) -> list[Atom]:
    """Reduce raw rows, dropping trivial truths; _Unsat on a flat falsehood."""
    out = []
    for r in rows:
        reduced = _reduce(r.coeffs, r.rel, r.const)
        if reduced is not None:
            out.append(reduced)
    return _dedupe(out)


def _eliminate_cols(rows: list[Atom], cols: Iterable[int]) -> list[Atom]:
    """Fourier-Motzkin elimination of the given columns. Raises _Unsat."""
    remaining = set(cols)
    rows = _prepare(rows)
    while remaining:
        j = _elimination_order(rows, remaining)
        if j is None:
            break
        rows = _eliminate_one(rows, j)
        remaining.discard(j)
    return rows


def _feasible(rows: list[Atom], arity: int) -> bool:
    try:
        _eliminate_cols(list(rows), range(arity))
        return True
    except _Unsat:
        return False


def _entails(rows: list[Atom], atom: Atom, arity: int) -> bool:
    """True when every point of the row system satisfies the atom."""
    if atom.rel == Rel.EQ:
        neg = tuple(-c for c in atom.coeffs)
        return not _feasible(rows + [Atom(atom.coeffs, Rel.LT, atom.const)], arity) and not _feasible(
            rows + [Atom(neg, Rel.LT, -atom.const)], arity
        )
    flipped = Rel.LE if atom.rel == Rel.LT else Rel.LT
    neg = tuple(-c for c in atom.coeffs)
    return not _feasible(rows + [Atom(neg, flipped, -atom.const)], arity)


def _rref(eqs: list[Atom], arity: int) -> list[tuple[int, Atom]]:
    """Reduced row echelon form of the equality rows, pivots right to left.

    Returns (pivot column, atom) pairs. Right-to-left pivoting keeps the
    earliest variables (clocks) primary in the reduced inequalities.
    """
    work = [[Fraction(c) for c in a.coeffs] + [Fraction(a.const)] for a in sorted(eqs)]
    pivots: list[tuple[int, list[Fraction]]] = []
    for col in range(arity - 1, -1, -1):
        idx = next((i for i, row in enumerate(work) if row[col] != 0), None)
        if idx is None:
            continue
        pivot_row = work.pop(idx)
        inv = Fraction(1) / pivot_row[col]
        pivot_row = [x * inv for x in pivot_row]
        for other in work:
            if other[col] != 0:
                f = other[col]
                for i in range(arity + 1):
                    other[i] -= f * pivot_row[i]
        for _, prow in pivots:
            if prow[col] != 0:
                f = prow[col]
                for i in range(arity + 1):
                    prow[i] -= f * pivot_row[i]
        pivots.append((col, pivot_row))
    out = []
    for col, prow in pivots:
        denom = lcm(*(x.denominator for x in prow)) if any(prow) else 1
        ints = [int(x * denom) for x in prow]
        atom = _reduce(tuple(ints[:arity]), Rel.EQ, ints[arity])
        if atom is not None:
            out.append((col, atom))
    return sorted(out)


def _canonicalize(rows: Iterable[Atom], arity: int) -> Optional[tuple[Atom, ...]]:
    """Canonical irredundant atom tuple, or None for the empty set.

    Pipeline: conjoin domain atoms, test feasibility, promote implicit
    equalities, put the equality part in reduced echelon form, reduce
    the inequalities modulo the equalities, then drop redundant ones.
    The result is unique for the underlying point set.
    """
    try:
        work = list(rows)
        for j in range(arity):
            vec = tuple(-1 if i == j else 0 for i in range(arity))
            work.append(Atom(vec, Rel.LE, 0))
        work = _prepare(work)
        if not _feasible(work, arity):
            return None
        promoted = []
        for a in work:
            if a.rel == Rel.LE:
                neg = tuple(-c for c in a.coeffs)
                if _entails(work, Atom(neg, Rel.LE, -a.const), arity):
                    a = _reduce(a.coeffs, Rel.EQ, a.const)
                    assert a is not None
            promoted.append(a)
        eqs = [a for a in promoted if a.rel == Rel.EQ]
        ineqs = [a for a in promoted if a.rel != Rel.EQ]
        pivots = _rref(eqs, arity)
        reduced = []
        for a in ineqs:
            cur: Optional[Atom] = a
            for col, eq in pivots:
                if cur is None or cur.coeffs[col] == 0:
                    continue
                cur = _pivot_sub(eq, cur, col)
            if cur is not None:
                reduced.append(cur)
        reduced = _dedupe(reduced)
        eq_atoms = [eq for _, eq in pivots]
        kept = sorted(reduced)
        i = 0
        while i < len(kept):
            rest = eq_atoms + kept[:i] + kept[i + 1 :]
            if _entails(rest, kept[i], arity):
                del kept[i]
            else:
                i += 1
        return tuple(sorted(eq_atoms + kept, key=lambda a: (a.rel != Rel.EQ, a)))
    except _Unsat:
        return None


# ---------------------------------------------------------------------------
# Contexts and polyhedra.
# ---------------------------------------------------------------------------

_IDENT = re.compile(r"[A-Za-z_][A-Za-z0-9_]*\Z")


@dataclass(frozen=True)
class Context:
    """Ordered variable namespace: clocks first, then parameters."""

    clocks: tuple[str, ...]
    params: tuple[str, ...]

    def __post_init__(self) -> None:
        names = self.clocks + self.params
        seen = set()
        for n in names:
            if not _IDENT.match(n):
                raise ValueError(f"bad variable name: {n!r}")
            if n in seen:
                raise ValueError(f"duplicate variable name: {n!r}")
            seen.add(n)
        object.__setattr__(self, "_index", {n: i for i, n in enumerate(names)})

    @property
    def vars(self) -> tuple[str, ...]:
        return self.clocks + self.params

    @property
    def arity(self) -> int:
        return len(self.clocks) + len(self.params)

    def index(self, name: str) -> int:
        try:
            return self._index[name]  # type: ignore[attr-defined]
        except KeyError:
            raise KeyError(f"unknown variable: {name!r}") from None

    def clock_indices(self) -> range:
        return range(len(self.clocks))

    def param_only(self) -> "Context":
        return Context((), self.params)

    def point(self, valuation: Mapping[str, RationalLike]) -> tuple[Fraction, ...]:
        missing = [n for n in self.vars if n not in valuation]
        if missing:
            raise KeyError(f"valuation missing {missing}")
        return tuple(as_fraction(valuation[n]) for n in self.vars)


class ConvexPolyhedron:
    """A conjunction of linear atoms over a Context, canonicalized.

    Instances are immutable. Construction always canonicalizes, so two
    polyhedra denote the same point set exactly when their atoms match.
    """

    __slots__ = ("ctx", "atoms", "_empty")

    def __init__(self, ctx: Context, atoms: Iterable[Atom]):
        self.ctx = ctx
        canon = _canonicalize(atoms, ctx.arity)
        self.atoms: Optional[tuple[Atom, ...]] = canon
        self._empty = canon is None

    @classmethod
    def _make(cls, ctx: Context, canonical: Optional[tuple[Atom, ...]]) -> "ConvexPolyhedron":
        poly = cls.__new__(cls)
        poly.ctx = ctx
        poly.atoms = canonical
        poly._empty = canonical is None
        return poly

    @classmethod
    def universe(cls, ctx: Context) -> "ConvexPolyhedron":
        return cls(ctx, ())

    @classmethod
    def empty(cls, ctx: Context) -> "ConvexPolyhedron":
        return cls._make(ctx, None)

    @classmethod
    def of(cls, ctx: Context, text: str) -> "ConvexPolyhedron":
        """Parse a conjunction like ``x - y <= 2 && 0 <= p < 3``."""
        return cls(ctx, parse_atoms(ctx, text))

    def is_empty(self) -> bool:
        return self._empty

    def is_universe(self) -> bool:
        return self.atoms == _canonicalize((), self.ctx.arity)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, ConvexPolyhedron)
            and self.ctx == other.ctx
            and self.atoms == other.atoms
        )

    def __hash__(self) -> int:
        return hash((self.ctx, self.atoms))

    def __repr__(self) -> str:
        return f"ConvexPolyhedron({self})"

    def __str__(self) -> str:
        if self._empty:
            return "false"
        if not self.atoms:
            return "true"
        return " && ".join(atom_text(self.ctx, a) for a in self.atoms)

    # -- set operations ----------------------------------------------------

    def intersect(self, other: "ConvexPolyhedron") -> "ConvexPolyhedron":
        if self.ctx != other.ctx:
            raise ValueError("context mismatch")
        if self._empty or other._empty:
            return ConvexPolyhedron.empty(self.ctx)
        return ConvexPolyhedron(self.ctx, self.atoms + other.atoms)

    def conjoin(self, atoms: Iterable[Atom]) -> "ConvexPolyhedron":
        if self._empty:
            return self
        return ConvexPolyhedron(self.ctx, tuple(self.atoms) + tuple(atoms))

    def elapse(self) -> "ConvexPolyhedron":
        """Future closure: let all clocks advance by a common delay."""
        if self._empty or not self.ctx.clocks:
            return self
        n = self.ctx.arity
        nclocks = len(self.ctx.clocks)
        ext = []
        for a in self.atoms:
            d = -sum(a.coeffs[:nclocks])
            ext.append(Atom(a.coeffs + (d,), a.rel, a.const))
        ext.append(Atom((0,) * n + (-1,), Rel.LE, 0))
        try:
            rows = _eliminate_cols(ext, [n])
        except _Unsat:
            return ConvexPolyhedron.empty(self.ctx)
        return ConvexPolyhedron(self.ctx, [Atom(r.coeffs[:n], r.rel, r.const) for r in rows])

    def reset(self, clocks: Iterable[str]) -> "ConvexPolyhedron":
        """Set the named clocks to zero, leaving everything else free."""
        if self._empty:
            return self
        idx = [self.ctx.index(c) for c in clocks]
        for i in idx:
            if i not in self.ctx.clock_indices():
                raise ValueError(f"not a clock: {self.ctx.vars[i]}")
        try:
            rows = _eliminate_cols(list(self.atoms), idx)
        except _Unsat:
            return ConvexPolyhedron.empty(self.ctx)
        zero = [
            Atom(tuple(1 if k == i else 0 for k in range(self.ctx.arity)), Rel.EQ, 0)
            for i in idx
        ]
        return ConvexPolyhedron(self.ctx, rows + zero)

    def eliminate(self, names: Iterable[str]) -> "ConvexPolyhedron":
        """Existentially project away the named variables, keeping the context."""
        if self._empty:
            return self
        idx = [self.ctx.index(n) for n in names]
        try:
            rows = _eliminate_cols(list(self.atoms), idx)
        except _Unsat:
            return ConvexPolyhedron.empty(self.ctx)
        return ConvexPolyhedron(self.ctx, rows)

    def project_params(self) -> "ConvexPolyhedron":
        """Projection onto the parameters, over the parameter-only context."""
        pctx = self.ctx.param_only()
        if self._empty:
            return ConvexPolyhedron.empty(pctx)
        nclocks = len(self.ctx.clocks)
        try:
            rows = _eliminate_cols(list(self.atoms), range(nclocks))
        except _Unsat:
            return ConvexPolyhedron.empty(pctx)
        return ConvexPolyhedron(pctx, [Atom(r.coeffs[nclocks:], r.rel, r.const) for r in rows])

    def embed(self, ctx: Context) -> "ConvexPolyhedron":
        """Reinterpret over a larger context, matching variables by name."""
        if self._empty:
            return ConvexPolyhedron.empty(ctx)
        out = []
        for a in self.atoms:
            vec = [0] * ctx.arity
            for c, name in zip(a.coeffs, self.ctx.vars):
                if c:
                    vec[ctx.index(name)] = c
            out.append(Atom(tuple(vec), a.rel, a.const))
        return ConvexPolyhedron(ctx, out)

    def instantiate(self, valuation: Mapping[str, RationalLike]) -> "ConvexPolyhedron":
        """Substitute exact values for some parameters; they leave the context."""
        values = {self.ctx.index(n): as_fraction(v) for n, v in valuation.items()}
        for i in values:
            if i in self.ctx.clock_indices():
                raise ValueError(f"cannot instantiate clock {self.ctx.vars[i]}")
        new_params = tuple(p for p in self.ctx.params if p not in valuation)
        ctx = Context(self.ctx.clocks, new_params)
        if self._empty:
            return ConvexPolyhedron.empty(ctx)
        keep = [i for i in range(self.ctx.arity) if i not in values]
        out = []
        for a in self.atoms:
            shift = sum(a.coeffs[i] * values[i] for i in values)
            denom = shift.denominator
            vec = tuple(a.coeffs[i] * denom for i in keep)
            out.append(Atom(vec, a.rel, int((a.const - shift) * denom)))
        return ConvexPolyhedron(ctx, out)

    def any_point(self) -> Optional[dict[str, Fraction]]:
        """One exact member of the polyhedron, or None when empty.

        Walks the variables in context order, projecting away the suffix
        and picking a value inside the exact fiber interval each time.
        """
        if self._empty:
            return None
        n = self.ctx.arity
        chosen: list[Fraction] = []
        for j in range(n):
            rows = _eliminate_cols(list(self.atoms), range(j + 1, n))
            lo = hi = None
            lo_closed = hi_closed = True
            pin = None
            for a in rows:
                aj = a.coeffs[j]
                rest = sum(
                    Fraction(a.coeffs[i]) * chosen[i] for i in range(j) if a.coeffs[i]
                )
                if aj == 0:
                    continue
                bound = (Fraction(a.const) - rest) / aj
                if a.rel == Rel.EQ:
                    pin = bound
                elif aj > 0:
                    if hi is None or bound < hi or (bound == hi and a.rel == Rel.LT):
                        hi, hi_closed = bound, a.rel == Rel.LE
                else:
                    if lo is None or bound > lo or (bound == lo and a.rel == Rel.LT):
                        lo, lo_closed = bound, a.rel == Rel.LE
            if pin is not None:
                value = pin
            elif lo is not None and hi is not None:
                value = lo if lo == hi else (lo + hi) / 2
            elif lo is not None:
                value = lo if lo_closed else lo + 1
            elif hi is not None:
                # canonical atoms keep the fiber nonnegative, so hi >= 0 here
                value = hi if hi_closed else hi / 2
            else:
                value = Fraction(0)
            chosen.append(value)
        return dict(zip(self.ctx.vars, chosen))

    # -- queries -------------------------------------------------------------

    def satisfies(self, valuation: Mapping[str, RationalLike]) -> bool:
        if self._empty:
            return False
        point = self.ctx.point(valuation)
        if any(v < 0 for v in point):
            return False
        return all(a.evaluate(point) for a in self.atoms)

    def entails(self, atom: Atom) -> bool:
        if self._empty:
            return True
        return _entails(list(self.atoms), atom, self.ctx.arity)

    def includes(self, other: "ConvexPolyhedron") -> bool:
        """True when other is a subset of self. Exact for convex operands."""
        if self.ctx != other.ctx:
            raise ValueError("context mismatch")
        if other._empty:
            return True
        if self._empty:
            return False
        mine = set(self.atoms)
        if mine <= set(other.atoms):
            return True
        rows = list(other.atoms)
        return all(_entails(rows, a, self.ctx.arity) for a in self.atoms)

    def complement(self) -> "ConstraintSet":
        """Complement within the nonnegative orthant, as a disjunction."""
        if self._empty:
            return ConstraintSet.universe(self.ctx)
        pieces = []
        domain = set()
        for j in range(self.ctx.arity):
            vec = tuple(-1 if i == j else 0 for i in range(self.ctx.arity))
            domain.add(Atom(vec, Rel.LE, 0))
        prefix: list[Atom] = []
        for a in self.atoms:
            if a not in domain:
                for neg in a.negations():
                    piece = ConvexPolyhedron(self.ctx, prefix + [neg])
                    if not piece.is_empty():
                        pieces.append(piece)
            prefix.append(a)
        return ConstraintSet(self.ctx, pieces)


class ConstraintSet:
    """A finite union of convex polyhedra over one context."""

    __slots__ = ("ctx", "pieces")

    def __init__(self, ctx: Context, pieces: Iterable[ConvexPolyhedron]):
        self.ctx = ctx
        kept: list[ConvexPolyhedron] = []
        seen = set()
        for p in sorted((p for p in pieces if not p.is_empty()), key=lambda p: p.atoms):
            if p.ctx != ctx:
                raise ValueError("context mismatch")
            if p.atoms in seen:
                continue
            seen.add(p.atoms)
            kept.append(p)
        pruned = []
        for i, p in enumerate(kept):
            covered = any(
                j != i and q.includes(p) and not (p.includes(q) and j > i)
                for j, q in enumerate(kept)
            )
            if not covered:
                pruned.append(p)
        self.pieces = tuple(pruned)

    @classmethod
    def universe(cls, ctx: Context) -> "ConstraintSet":
        return cls(ctx, [ConvexPolyhedron.universe(ctx)])

    @classmethod
    def empty(cls, ctx: Context) -> "ConstraintSet":
        return cls(ctx, [])

    @classmethod
    def of(cls, ctx: Context, text: str) -> "ConstraintSet":
        """Parse a disjunction of conjunctions, e.g. ``p < 1 || p > 2``."""
        text = text.strip()
        if text == "false":
            return cls.empty(ctx)
        parts = _split_disjuncts(text)
        return cls(ctx, [ConvexPolyhedron.of(ctx, part) for part in parts])

    def is_empty(self) -> bool:
        return not self.pieces

    def is_universe(self) -> bool:
        return self.includes(ConstraintSet.universe(self.ctx))

    def __str__(self) -> str:
        if not self.pieces:
            return "false"
        texts = sorted(str(p) for p in self.pieces)
        if len(texts) == 1:
            return texts[0]
        return " || ".join(f"({t})" for t in texts)

    def __repr__(self) -> str:
        return f"ConstraintSet({self})"

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, ConstraintSet)
            and self.ctx == other.ctx
            and self.includes(other)
            and other.includes(self)
        )

    def __hash__(self) -> int:
        raise TypeError("ConstraintSet is not hashable; equality is semantic")

    def union(self, other: "ConstraintSet") -> "ConstraintSet":
        if self.ctx != other.ctx:
            raise ValueError("context mismatch")
        return ConstraintSet(self.ctx, self.pieces + other.pieces)

    def add(self, piece: ConvexPolyhedron) -> "ConstraintSet":
        return ConstraintSet(self.ctx, self.pieces + (piece,))

    def intersect(self, other: "ConstraintSet") -> "ConstraintSet":
        if self.ctx != other.ctx:
            raise ValueError("context mismatch")
        out = []
        for p in self.pieces:
            for q in other.pieces:
                r = p.intersect(q)
                if not r.is_empty():
                    out.append(r)
        return ConstraintSet(self.ctx, out)

    def negate(self) -> "ConstraintSet":
        """Complement within the nonnegative orthant."""
        result = ConstraintSet.universe(self.ctx)
        for p in self.pieces:
            result = result.intersect(p.complement())
        return result

    def includes(self, other: "ConstraintSet") -> bool:
        """True when other is a subset of self, tested exactly."""
        if self.ctx != other.ctx:
            raise ValueError("context mismatch")
        hard = []
        for t in other.pieces:
            if not any(s.includes(t) for s in self.pieces):
                hard.append(t)
        if not hard:
            return True
        neg = self.negate()
        return all(
            all(t.intersect(n).is_empty() for n in neg.pieces) for t in hard
        )

    def satisfies(self, valuation: Mapping[str, RationalLike]) -> bool:
        return any(p.satisfies(valuation) for p in self.pieces)

    def project_params(self) -> "ConstraintSet":
        pctx = self.ctx.param_only()
        return ConstraintSet(pctx, [p.project_params() for p in self.pieces])

    def instantiate(self, valuation: Mapping[str, RationalLike]) -> "ConstraintSet":
        pieces = [p.instantiate(valuation) for p in self.pieces]
        ctx = pieces[0].ctx if pieces else Context(
            self.ctx.clocks, tuple(p for p in self.ctx.params if p not in valuation)
        )
        return ConstraintSet(ctx, pieces)

    def to_json(self) -> dict:
        return {
            "text": str(self),
            "disjuncts": [
                [atom_json(self.ctx, a) for a in p.atoms] for p in self.pieces
            ],
        }


def set_equal(a: ConstraintSet, b: ConstraintSet) -> bool:
    """Exact semantic equality of two constraint sets."""
    return a.includes(b) and b.includes(a)


# ---------------------------------------------------------------------------
# Text and JSON rendering.
# ---------------------------------------------------------------------------


def _display_parts(ctx: Context, atom: Atom):
    """Sign-normalized (coeffs by name, rel symbol, const) for printing."""
    coeffs, rel, const = atom
    rel_sym = _REL_SYMBOL[rel]
    lead = next(c for c in coeffs if c)
    if lead < 0 and rel != Rel.EQ:
        coeffs = tuple(-c for c in coeffs)
        const = -const
        rel_sym = _REL_FLIPPED[rel]
    named = [(ctx.vars[i], c) for i, c in enumerate(coeffs) if c]
    if len(named) == 1:
        name, c = named[0]
        return [(name, Fraction(1))], rel_sym, Fraction(const, c)
    return [(n, Fraction(c)) for n, c in named], rel_sym, Fraction(const)


def atom_text(ctx: Context, atom: Atom) -> str:
    named, rel_sym, const = _display_parts(ctx, atom)
    parts = []
    for k, (name, c) in enumerate(named):
        mag = abs(c)
        term = name if mag == 1 else f"{mag} {name}"
        if k == 0:
            parts.append(term if c > 0 else f"-{term}")
        else:
            parts.append(f"+ {term}" if c > 0 else f"- {term}")
    return f"{' '.join(parts)} {rel_sym} {const}"


def atom_json(ctx: Context, atom: Atom) -> dict:
    named, rel_sym, const = _display_parts(ctx, atom)
    return {
        "coeffs": {name: str(c) for name, c in named},
        "rel": rel_sym,
        "const": str(const),
    }


# ---------------------------------------------------------------------------
# Parsing.
# ---------------------------------------------------------------------------

_TOKEN = re.compile(
    r"\s*(?:(?P<num>\d+(?:/\d+)?)|(?P<name>[A-Za-z_][A-Za-z0-9_]*)"
    r"|(?P<op><=|>=|==|<|>|=|\+|-|\*|&&))"
)


def _tokenize(text: str) -> list[str]:
    out = []
    pos = 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if not m:
            rest = text[pos:].strip()
            if not rest:
                break
            raise ValueError(f"cannot tokenize constraint at: {rest[:20]!r}")
        out.append(m.group(m.lastgroup))
        pos = m.end()
    return out


def _parse_expr(ctx: Context, tokens: list[str], pos: int):
    """Parse a linear expression; returns (coeff dict, const, next position)."""
    coeffs: dict[int, Fraction] = {}
    const = Fraction(0)
    sign = Fraction(1)
    expect_term = True
    while pos < len(tokens):
        t = tokens[pos]
        if expect_term:
            if t == "-":
                sign = -sign
                pos += 1
                continue
            if t == "+":
                pos += 1
                continue
            value = None
            if re.fullmatch(r"\d+(/\d+)?", t):
                value = Fraction(t)
                pos += 1
                if pos < len(tokens) and tokens[pos] == "*":
                    pos += 1
                if pos < len(tokens) and _IDENT.match(tokens[pos]):
                    i = ctx.index(tokens[pos])
                    coeffs[i] = coeffs.get(i, Fraction(0)) + sign * value
                    pos += 1
                else:
                    const += sign * value
            elif _IDENT.match(t):
                i = ctx.index(t)
                coeffs[i] = coeffs.get(i, Fraction(0)) + sign
                pos += 1
            else:
                raise ValueError(f"expected a term, got {t!r}")
            sign = Fraction(1)
            expect_term = False
        else:
            if t in ("+", "-"):
                sign = Fraction(1) if t == "+" else Fraction(-1)
                pos += 1
                expect_term = True
            else:
                break
    if expect_term:
        raise ValueError("dangling operator in constraint")
    return coeffs, const, pos


def parse_atoms(ctx: Context, text: str) -> list[Atom]:
    """Parse ``&&``-joined, possibly chained comparisons into atoms.

    Accepts things like ``x - y <= 2 && 0 <= p < 3``. The keywords
    ``true`` and ``false`` denote the trivial and the infeasible guard.
    """
    out: list[Atom] = []
    for part in text.split("&&"):
        part = part.strip()
        if part in ("", "true"):
            continue
        if part == "false":
            out.append(Atom((0,) * ctx.arity, Rel.LT, 0))
            continue
        tokens = _tokenize(part)
        sides = []
        rels = []
        pos = 0
        while True:
            coeffs, const, pos = _parse_expr(ctx, tokens, pos)
            sides.append((coeffs, const))
            if pos >= len(tokens):
                break
            if tokens[pos] not in ("<", "<=", "=", "==", ">=", ">"):
                raise ValueError(f"expected a relation, got {tokens[pos]!r}")
            rels.append(tokens[pos])
            pos += 1
        if not rels:
            raise ValueError(f"no relation in constraint part: {part!r}")
        for (lc, lk), rel, (rc, rk) in zip(sides, rels, sides[1:]):
            diff = dict(lc)
            for i, v in rc.items():
                diff[i] = diff.get(i, Fraction(0)) - v
            try:
                atom = make_atom(ctx.arity, diff, rel, rk - lk)
            except _Unsat:
                atom = Atom((0,) * ctx.arity, Rel.LT, 0)
            if atom is not None:
                out.append(atom)
    return out


def _split_disjuncts(text: str) -> list[str]:
    parts = []
    for chunk in text.split("||"):
        chunk = chunk.strip()
        if chunk.startswith("(") and chunk.endswith(")"):
            chunk = chunk[1:-1].strip()
        parts.append(chunk)
    return parts


def parse_valuation(text: str) -> dict[str, Fraction]:
    """Parse ``name=value`` pairs separated by commas, values exact rationals."""
    out: dict[str, Fraction] = {}
    for pair in text.split(","):
        pair = pair.strip()
        if not pair:
            continue
        if "=" not in pair:
            raise ValueError(f"expected name=value, got {pair!r}")
        name, _, value = pair.partition("=")
        name = name.strip()
        if not _IDENT.match(name):
            raise ValueError(f"bad variable name: {name!r}")
        out[name] = as_fraction(value)
    return out
