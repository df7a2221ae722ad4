"""Leaf-topology arithmetic: the flat/mapping-torus dichotomy and Betti parity.

A compact Hessian leaf is either flat (vanishing first Koszul form forces
the dual connection to coincide with Levi-Civita) or a mapping torus of a
2-torus with periodic glueing matrix A in SL2(Z), characterized by
A = +-I or |tr A| < 2.  For the mapping-torus branch the Wang exact
sequence reduces every Betti number to integer arithmetic on A - I, and
all four Betti numbers come out odd.  Everything here is exact integer
work; no floating point enters the homology."""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product
from typing import Optional

__all__ = [
    "FLAT",
    "MAPPING_TORUS",
    "InconsistentLeafError",
    "NonPeriodicMonodromyError",
    "MonodromyMatrix",
    "LeafTopologyReport",
    "classify_dichotomy",
    "is_periodic",
    "periodic_order",
    "mapping_torus_betti",
    "parity_check",
    "sl2_bounded",
    "leaf_topology_report",
]

FLAT = "Flat"
MAPPING_TORUS = "MappingTorus"


class InconsistentLeafError(ValueError):
    """Koszul form vanishes but curvature does not: not a Hessian leaf."""


class NonPeriodicMonodromyError(ValueError):
    """Monodromy of infinite order (Nil or Sol glueing, outside scope)."""


@dataclass(frozen=True)
class MonodromyMatrix:
    """An element of SL2(Z): integer 2x2 matrix with determinant one."""

    entries: tuple[tuple[int, int], tuple[int, int]]

    def __post_init__(self):
        rows = tuple(tuple(v for v in row) for row in self.entries)
        if len(rows) != 2 or any(len(r) != 2 for r in rows):
            raise ValueError("monodromy matrix must be 2x2")
        for row in rows:
            for v in row:
                if isinstance(v, bool) or not isinstance(v, int):
                    raise ValueError(f"entry {v!r} is not an integer")
        object.__setattr__(self, "entries", rows)
        if self.det != 1:
            raise ValueError(f"determinant is {self.det}, must be 1")

    @classmethod
    def from_flat(cls, a: int, b: int, c: int, d: int) -> "MonodromyMatrix":
        return cls(((a, b), (c, d)))

    @property
    def det(self) -> int:
        (a, b), (c, d) = self.entries
        return a * d - b * c

    @property
    def trace(self) -> int:
        return self.entries[0][0] + self.entries[1][1]

    def power(self, m: int) -> tuple[tuple[int, int], tuple[int, int]]:
        """Exact integer m-th power of the matrix, m >= 0."""
        if m < 0:
            raise ValueError("nonnegative powers only")
        out = ((1, 0), (0, 1))
        for _ in range(m):
            (p, q), (r, s) = out
            (a, b), (c, d) = self.entries
            out = ((p * a + q * c, p * b + q * d),
                   (r * a + s * c, r * b + s * d))
        return out


_IDENTITY = ((1, 0), (0, 1))


def periodic_order(A: MonodromyMatrix) -> Optional[int]:
    """Smallest m with A^m = I, or None; finite orders are 1, 2, 3, 4, 6."""
    for m in range(1, 7):
        if A.power(m) == _IDENTITY:
            return m
    return None


def is_periodic(A: MonodromyMatrix) -> bool:
    """True iff A = +-I or |tr A| < 2 (equivalently, A has finite order)."""
    (a, b), (c, d) = A.entries
    by_criterion = (A.entries == _IDENTITY
                    or A.entries == ((-1, 0), (0, -1))
                    or abs(a + d) < 2)
    return by_criterion


def mapping_torus_betti(A: MonodromyMatrix) -> tuple[int, int, int, int]:
    """Betti numbers of the torus bundle over the circle glued by A.

    Wang sequence: b0 = b3 = 1 and b1 = b2 = 1 + dim ker(A - I) over the
    rationals, the kernel dimension read off exactly from the integer
    matrix A - I.
    """
    if not is_periodic(A):
        raise NonPeriodicMonodromyError(
            f"{A.entries} has infinite order (trace {A.trace}); "
            "the classification covers periodic glueing only")
    (a, b), (c, d) = A.entries
    m = ((a - 1, b), (c, d - 1))
    if m == ((0, 0), (0, 0)):
        kernel = 2
    elif m[0][0] * m[1][1] - m[0][1] * m[1][0] == 0:
        kernel = 1
    else:
        kernel = 0
    b1 = 1 + kernel
    return (1, b1, b1, 1)


def parity_check(betti) -> bool:
    """True iff every Betti number in the tuple is odd."""
    return all(int(b) % 2 == 1 for b in betti)


def sl2_bounded(bound: int = 3) -> list[MonodromyMatrix]:
    """Every SL2(Z) element with all entries in [-bound, bound]."""
    out = []
    for a, b, c, d in product(range(-bound, bound + 1), repeat=4):
        if a * d - b * c == 1:
            out.append(MonodromyMatrix(((a, b), (c, d))))
    return out


def classify_dichotomy(koszul_norm: float, curvature_norm: float,
                       tol: float = 1e-6) -> str:
    """Flat leaf or mapping torus, from the Koszul-form norm on the leaf.

    A vanishing Koszul form makes the dual connection Levi-Civita, hence
    the leaf metric flat; a vanishing Koszul form next to substantial
    curvature is contradictory and raises instead of classifying.
    """
    koszul_norm = float(koszul_norm)
    curvature_norm = float(curvature_norm)
    if koszul_norm < 0 or curvature_norm < 0:
        raise ValueError("norms must be nonnegative")
    if koszul_norm < tol:
        if curvature_norm >= tol:
            raise InconsistentLeafError(
                f"Koszul norm {koszul_norm:.3e} below {tol:.1e} but curvature "
                f"norm {curvature_norm:.3e} is not: not a Hessian leaf")
        return FLAT
    return MAPPING_TORUS


@dataclass(frozen=True)
class LeafTopologyReport:
    """Dichotomy outcome with the optional Betti/parity data behind it."""

    dichotomy: str
    koszul_norm: float
    curvature_norm: float
    betti: Optional[tuple[int, int, int, int]]
    parity: Optional[bool]


def leaf_topology_report(koszul_norm: float, curvature_norm: float,
                         monodromy: MonodromyMatrix | None = None,
                         tol: float = 1e-6) -> LeafTopologyReport:
    """Classify and, on the mapping-torus branch, attach Betti parity.

    The flat branch reports no Betti tuple (torus-quotient homology is not
    computed here).
    """
    verdict = classify_dichotomy(koszul_norm, curvature_norm, tol)
    betti = parity = None
    if verdict == MAPPING_TORUS and monodromy is not None:
        betti = mapping_torus_betti(monodromy)
        parity = parity_check(betti)
    return LeafTopologyReport(verdict, float(koszul_norm),
                              float(curvature_norm), betti, parity)
