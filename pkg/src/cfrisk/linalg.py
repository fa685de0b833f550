"""Exact linear algebra over the rationals.

Matrices are lists of rows, vectors are lists; entries are ``Fraction`` or
``int``. Nothing here touches floating point.
"""
from __future__ import annotations

from fractions import Fraction
from functools import reduce
from math import gcd, lcm
from typing import List, Optional, Sequence, Tuple

Vector = List[Fraction]
Matrix = List[List[Fraction]]


def as_fraction_matrix(rows: Sequence[Sequence]) -> Matrix:
    return [[Fraction(v) for v in row] for row in rows]


def identity(n: int) -> Matrix:
    return [[Fraction(int(i == j)) for j in range(n)] for i in range(n)]


def transpose(rows: Sequence[Sequence]) -> list:
    return [list(col) for col in zip(*rows)]


def dot(u: Sequence, v: Sequence) -> Fraction:
    return sum((a * b for a, b in zip(u, v) if a and b), Fraction(0))


def mat_vec(rows: Sequence[Sequence], v: Sequence) -> Vector:
    return [dot(row, v) for row in rows]


def mat_mul(a: Sequence[Sequence], b: Sequence[Sequence]) -> Matrix:
    bt = transpose(b)
    return [[dot(row, col) for col in bt] for row in a]


def _integer_rows(rows: Sequence[Sequence]) -> List[List[int]]:
    out = []
    for row in rows:
        fr = [Fraction(v) for v in row]
        scale = reduce(lcm, (f.denominator for f in fr), 1)
        out.append([int(f * scale) for f in fr])
    return out


def bareiss_rank(rows: Sequence[Sequence]) -> int:
    """Rank by fraction-free (Bareiss) elimination.

    Rows are first cleared of denominators, so every intermediate value is an
    integer minor of the scaled matrix and each division is exact.
    """
    m = _integer_rows(rows)
    if not m:
        return 0
    nrows, ncols = len(m), len(m[0])
    prev = 1
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, nrows) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        for i in range(r + 1, nrows):
            a = m[i][c]
            row_i, row_r = m[i], m[r]
            for j in range(c + 1, ncols):
                row_i[j] = (row_i[j] * p - a * row_r[j]) // prev
            row_i[c] = 0
        prev = p
        r += 1
        if r == nrows:
            break
    return r


def rank(rows: Sequence[Sequence]) -> int:
    return bareiss_rank(rows)


def rref(rows: Sequence[Sequence], ncols: Optional[int] = None) -> Tuple[Matrix, List[int]]:
    """Reduced row echelon form by Gauss-Jordan over ``Fraction``.

    Only the first ``ncols`` columns are used as pivot candidates, which lets
    callers carry an augmented block along.
    """
    m = as_fraction_matrix(rows)
    if not m:
        return m, []
    width = len(m[0])
    ncols = width if ncols is None else ncols
    pivots: List[int] = []
    r = 0
    for c in range(ncols):
        piv = next((i for i in range(r, len(m)) if m[i][c] != 0), None)
        if piv is None:
            continue
        m[r], m[piv] = m[piv], m[r]
        p = m[r][c]
        if p != 1:
            m[r] = [v / p for v in m[r]]
        row_r = m[r]
        nz = [j for j in range(width) if row_r[j] != 0]
        for i in range(len(m)):
            if i != r and m[i][c] != 0:
                a = m[i][c]
                row_i = m[i]
                for j in nz:
                    row_i[j] -= a * row_r[j]
        pivots.append(c)
        r += 1
        if r == len(m):
            break
    return m, pivots


def nullspace(rows: Sequence[Sequence], ncols: Optional[int] = None) -> List[Vector]:
    """Basis of ``{v : rows @ v = 0}``, one vector per free column."""
    if not rows:
        return [[Fraction(int(i == j)) for i in range(ncols or 0)] for j in range(ncols or 0)]
    n = len(rows[0])
    r, pivots = rref(rows)
    free = [c for c in range(n) if c not in set(pivots)]
    basis = []
    for f in free:
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -r[i][f]
        basis.append(v)
    return basis


def solve_affine(rows: Sequence[Sequence], rhs: Sequence) -> Optional[Tuple[Vector, List[Vector]]]:
    """General solution of ``rows @ x = rhs``.

    Returns ``(x0, basis)`` with free variables of ``x0`` pinned to zero, or
    ``None`` when the system is inconsistent.
    """
    n = len(rows[0])
    aug = [list(row) + [b] for row, b in zip(rows, rhs)]
    r, pivots = rref(aug, ncols=n)
    for i in range(len(pivots), len(r)):
        if r[i][n] != 0:
            return None
    x0 = [Fraction(0)] * n
    for i, pc in enumerate(pivots):
        x0[pc] = r[i][n]
    pivset = set(pivots)
    basis = []
    for f in range(n):
        if f in pivset:
            continue
        v = [Fraction(0)] * n
        v[f] = Fraction(1)
        for i, pc in enumerate(pivots):
            v[pc] = -r[i][f]
        basis.append(v)
    return x0, basis


def solve_square(rows: Sequence[Sequence], rhs: Sequence) -> Optional[Vector]:
    """Unique solution of a square system, ``None`` if singular."""
    n = len(rows)
    aug = [list(row) + [b] for row, b in zip(rows, rhs)]
    r, pivots = rref(aug, ncols=n)
    if len(pivots) < n:
        return None
    return [r[i][n] for i in range(n)]


def inverse(rows: Sequence[Sequence]) -> Matrix:
    n = len(rows)
    aug = [list(row) + e for row, e in zip(as_fraction_matrix(rows), identity(n))]
    r, pivots = rref(aug, ncols=n)
    if len(pivots) < n:
        raise ZeroDivisionError("matrix is singular")
    return [row[n:] for row in r]


class ImageSolver:
    """Cached solver for repeated membership tests against one matrix.

    Gauss-Jordan is run once on ``[A | I]``; the right block ``T`` then
    satisfies ``T A = rref(A)``. For a right-hand side ``b`` the rows of
    ``T b`` past the rank must vanish for ``b`` to lie in ``im(A)``, and the
    same rows of ``T`` span the left null space used for residuals.
    """

    def __init__(self, rows: Sequence[Sequence]):
        a = as_fraction_matrix(rows)
        self.nrows = len(a)
        self.ncols = len(a[0])
        aug = [row + e for row, e in zip(a, identity(self.nrows))]
        r, pivots = rref(aug, ncols=self.ncols)
        self.pivots = pivots
        self.rank = len(pivots)
        self._reduced = [row[: self.ncols] for row in r[: self.rank]]
        self._transform = [row[self.ncols:] for row in r]
        self._left_null = self._transform[self.rank:]
        self._projector = self._build_projector()
        pivset = set(pivots)
        self.free_columns = [c for c in range(self.ncols) if c not in pivset]

    def _build_projector(self) -> Optional[Matrix]:
        n = self._left_null
        if not n:
            return None
        gram_inv = inverse(mat_mul(n, transpose(n)))
        return mat_mul(transpose(n), mat_mul(gram_inv, n))

    def contains(self, b: Sequence) -> bool:
        return all(dot(t, b) == 0 for t in self._left_null)

    def solve(self, b: Sequence) -> Optional[Vector]:
        """Particular solution with free columns set to 0, or ``None``."""
        if not self.contains(b):
            return None
        x = [Fraction(0)] * self.ncols
        for i, pc in enumerate(self.pivots):
            x[pc] = dot(self._transform[i], b)
        return x

    def residual(self, b: Sequence) -> Vector:
        """Orthogonal projection of ``b`` onto ``ker(A^T)``."""
        if self._projector is None:
            return [Fraction(0)] * self.nrows
        return mat_vec(self._projector, b)

    def kernel(self) -> List[Vector]:
        basis = []
        for f in self.free_columns:
            v = [Fraction(0)] * self.ncols
            v[f] = Fraction(1)
            for i, pc in enumerate(self.pivots):
                v[pc] = -self._reduced[i][f]
            basis.append(v)
        return basis


def common_denominator(values: Sequence[Fraction]) -> int:
    return reduce(lcm, (Fraction(v).denominator for v in values), 1)


def primitive(v: Sequence[Fraction]) -> List[int]:
    """Scale a rational vector to coprime integers (sign kept)."""
    scale = common_denominator(v)
    ints = [int(Fraction(x) * scale) for x in v]
    g = reduce(gcd, ints, 0)
    return [x // g for x in ints] if g else ints
