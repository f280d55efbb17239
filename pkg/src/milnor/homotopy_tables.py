"""Symbolic bookkeeping for homotopy groups of classifying spaces.

Groups are tokens compared by structure.  pi_k(BG) is read off a table of
pi_{k-1}(G), and extensions 1 -> G' -> G -> G'' -> 1 are checked against the
long exact sequence

    ... -> pi_n(BG') -> pi_n(BG) -> pi_n(BG'') -> pi_{n-1}(BG') -> ...

in the fragment where exactness alone decides: a nontrivial stretch between
two trivial terms of length one must vanish, and one of length two must be
an isomorphism.  Longer stretches are reported, never guessed.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


@dataclass(frozen=True)
class AbGroupToken:
    kind: str  # Trivial, Z, ZmodN, Q, PointSet, Opaque, Unknown
    rank: int = 0
    n: int = 0
    name: str = ""
    size: int = 1

    def __str__(self) -> str:
        if self.kind == "Trivial":
            return "0"
        if self.kind == "Z":
            return "Z" if self.rank == 1 else f"Z^{self.rank}"
        if self.kind == "ZmodN":
            return f"Z/{self.n}"
        if self.kind == "Q":
            return "Q"
        if self.kind == "PointSet":
            return "pt" if self.size == 1 and not self.name else f"PointSet({self.name or self.size})"
        if self.kind == "Unknown":
            return "?"
        return self.name

    @property
    def trivial(self) -> bool:
        return self.kind == "Trivial"

    @property
    def known(self) -> bool:
        return self.kind != "Unknown"

    @property
    def concrete(self) -> bool:
        return self.kind not in ("Unknown", "Opaque")


TRIVIAL = AbGroupToken("Trivial")
POINT = AbGroupToken("PointSet")
UNKNOWN = AbGroupToken("Unknown")
Q = AbGroupToken("Q")


def Z(rank: int = 1) -> AbGroupToken:
    if rank < 0:
        raise ValueError("rank must be >= 0")
    return TRIVIAL if rank == 0 else AbGroupToken("Z", rank=rank)


def ZmodN(n: int) -> AbGroupToken:
    if n < 1:
        raise ValueError("modulus must be >= 1")
    return TRIVIAL if n == 1 else AbGroupToken("ZmodN", n=n)


def PointSet(name: str = "", size: int = 1) -> AbGroupToken:
    return AbGroupToken("PointSet", name=name, size=size)


def Opaque(name: str) -> AbGroupToken:
    return AbGroupToken("Opaque", name=name)


def parse_token(text) -> AbGroupToken:
    """Read a token from its text form (``0``, ``Z``, ``Z^2``, ``Z2``, ``Z/2``, ``Q``, ``pt``, ``?``)."""
    if isinstance(text, AbGroupToken):
        return text
    s = str(text).strip()
    if s in ("0", "1", "Trivial", "trivial"):
        return TRIVIAL
    if s in ("?", "Unknown", "unknown"):
        return UNKNOWN
    if s == "Q":
        return Q
    if s in ("pt", "point", "PointSet"):
        return POINT
    m = re.fullmatch(r"Z(?:\^(\d+)|(\d+))?", s)
    if m:
        return Z(int(m.group(1) or m.group(2) or 1))
    m = re.fullmatch(r"Z/(\d+)", s)
    if m:
        return ZmodN(int(m.group(1)))
    m = re.fullmatch(r"PointSet\((\w*)(?:,\s*(\d+))?\)", s)
    if m:
        return PointSet(m.group(1), int(m.group(2) or 1))
    return Opaque(s)


@dataclass
class PiTable:
    """pi_k(G) for k = 0 .. bound."""

    name: str
    entries: dict
    bound: int

    def __post_init__(self):
        self.entries = {int(k): parse_token(v) for k, v in self.entries.items()}
        for k in range(self.bound + 1):
            self.entries.setdefault(k, UNKNOWN)

    def __getitem__(self, k: int) -> AbGroupToken:
        if k < 0 or k > self.bound:
            raise KeyError(f"pi_{k}({self.name}) beyond table bound {self.bound}")
        return self.entries[k]

    @classmethod
    def from_json(cls, name: str, data: dict) -> "PiTable":
        entries = {k: v for k, v in data.items() if k != "bound"}
        bound = int(data.get("bound", max((int(k) for k in entries), default=0)))
        return cls(name, entries, bound)

    def to_json(self) -> dict:
        return {str(k): str(v) for k, v in sorted(self.entries.items())}


def pi_bg(table: PiTable, k: int) -> AbGroupToken:
    """pi_k(BG) = pi_{k-1}(G); pi_0(BG) is a point."""
    if k < 0:
        raise ValueError("k must be >= 0")
    if k == 0:
        return POINT
    t = table[k - 1]
    if k == 1 and t.kind == "PointSet" and t.size == 1:
        return TRIVIAL  # connected group
    return t


def bg_table(table: PiTable) -> PiTable:
    return PiTable(f"B{table.name}", {k: pi_bg(table, k) for k in range(table.bound + 2)}, table.bound + 1)


# ---------------------------------------------------------------------------
# Catalog


def catalog_tables() -> dict:
    return {
        "U1": PiTable("U1", {0: "pt", 1: "Z", 2: "0", 3: "0", 4: "0", 5: "0"}, 5),
        "T_alpha": PiTable("T_alpha", {0: "pt", 1: "Z^2", 2: "0", 3: "0", 4: "0", 5: "0"}, 5),
        "SO3": PiTable("SO3", {0: "pt", 1: "Z/2", 2: "0", 3: "Z"}, 3),
        "R": PiTable("R", {k: "0" if k else "pt" for k in range(8)}, 7),
        "Q": PiTable("Q", {k: "0" if k else "Q" for k in range(8)}, 7),
        "R/Q": PiTable("R/Q", {}, 7),
    }


# ---------------------------------------------------------------------------
# Long exact sequence


@dataclass
class LesReport:
    status: str  # exact, violated, undetermined
    terms: list = field(default_factory=list)
    violations: list = field(default_factory=list)
    deductions: dict = field(default_factory=dict)
    constraints: list = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "status": self.status,
            "terms": [[label, str(tok)] for label, tok in self.terms],
            "violations": self.violations,
            "deductions": self.deductions,
            "constraints": self.constraints,
        }


def _same(a: AbGroupToken, b: AbGroupToken):
    """True / False when decidable, None otherwise."""
    if not (a.known and b.known):
        return None
    if a == b:
        return True
    if a.concrete and b.concrete:
        return False
    return None


def verify_les(sub: PiTable, total: PiTable, quotient: PiTable, bound: int) -> LesReport:
    """Check the classifying-space sequence of an extension up to pi_bound.

    Unknown entries of any table are filled in where exactness forces them;
    the report lists those deductions, any contradictions, and the
    relations left open.
    """
    if bound < 1:
        raise ValueError("bound must be >= 1")
    labels, toks = [], []
    if bound <= quotient.bound and quotient[bound].known:
        # the term just above the window closes the top stretch when it is known
        labels.append(f"pi_{bound + 1}(B{quotient.name})")
        toks.append(pi_bg(quotient, bound + 1))
    for n in range(bound, 0, -1):
        for tab in (sub, total, quotient):
            labels.append(f"pi_{n}(B{tab.name})")
            toks.append(pi_bg(tab, n))
    rep = LesReport("undetermined")
    violations: list = []
    constraints: list = []
    changed = True
    while changed:
        changed = False
        violations, constraints = [], []
        # stretches of non-trivial terms; the tail (pi_0 of a classifying space) is trivial
        runs, cur, closed_left = [], [], False
        for i, t in enumerate(toks):
            if t.trivial:
                if cur:
                    runs.append((cur, closed_left))
                cur, closed_left = [], True
            else:
                cur.append(i)
        if cur:
            runs.append((cur, closed_left))
        for run, left in runs:
            names = " -> ".join(labels[i] for i in run)
            if not left:
                constraints.append(f"stretch above the table bound: {names} -> 0")
                continue
            if len(run) == 1:
                (i,) = run
                if not toks[i].known:
                    toks[i] = TRIVIAL
                    rep.deductions[labels[i]] = str(TRIVIAL)
                    changed = True
                elif not toks[i].concrete:
                    constraints.append(f"{labels[i]} = {toks[i]} must vanish")
                else:
                    violations.append(f"0 -> {labels[i]} = {toks[i]} -> 0 forces it to vanish")
            elif len(run) == 2:
                i, j = run
                same = _same(toks[i], toks[j])
                if not toks[i].known and toks[j].known:
                    toks[i] = toks[j]
                    rep.deductions[labels[i]] = str(toks[j])
                    changed = True
                elif toks[i].known and not toks[j].known:
                    toks[j] = toks[i]
                    rep.deductions[labels[j]] = str(toks[i])
                    changed = True
                elif same is False:
                    violations.append(f"0 -> {labels[i]} = {toks[i]} -> {labels[j]} = {toks[j]} -> 0 needs an isomorphism")
                elif same is None:
                    constraints.append(f"{labels[i]} = {toks[i]} is isomorphic to {labels[j]} = {toks[j]}")
            else:
                constraints.append(f"exact stretch 0 -> {names} -> 0")

    rep.terms = list(zip(labels, toks))
    rep.violations = violations
    rep.constraints = constraints
    if violations:
        rep.status = "violated"
    elif constraints or any(not t.known for t in toks):
        rep.status = "undetermined"
    else:
        rep.status = "exact"
    return rep
