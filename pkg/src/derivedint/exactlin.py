"""Exact sparse linear algebra over the rationals.

Everything here works with ``fractions.Fraction`` and never rounds.  Matrices
are stored as a mapping ``(row, col) -> Fraction`` holding only nonzero
entries; vectors are plain lists of Fractions.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence

DENSE_THRESHOLD = 0.25


class ComplexError(ValueError):
    """Raised when a would-be cochain complex has a nonzero square."""


def _frac(x) -> Fraction:
    return x if isinstance(x, Fraction) else Fraction(x)


@dataclass(frozen=True)
class RatMatrix:
    rows: int
    cols: int
    entries: Mapping[tuple[int, int], Fraction] = field(default_factory=dict)

    def __post_init__(self):
        clean = {}
        for (r, c), v in self.entries.items():
            if not (0 <= r < self.rows and 0 <= c < self.cols):
                raise IndexError(f"entry ({r},{c}) outside {self.rows}x{self.cols}")
            v = _frac(v)
            if v:
                clean[(r, c)] = v
        object.__setattr__(self, "entries", clean)

    @classmethod
    def from_rows(cls, data: Sequence[Sequence], cols: int | None = None) -> "RatMatrix":
        nrows = len(data)
        ncols = cols if cols is not None else (len(data[0]) if data else 0)
        ent = {(i, j): v for i, row in enumerate(data) for j, v in enumerate(row) if v}
        return cls(nrows, ncols, ent)

    @classmethod
    def zero(cls, rows: int, cols: int) -> "RatMatrix":
        return cls(rows, cols, {})

    @classmethod
    def identity(cls, n: int) -> "RatMatrix":
        return cls(n, n, {(i, i): Fraction(1) for i in range(n)})

    def to_dense(self) -> list[list[Fraction]]:
        out = [[Fraction(0)] * self.cols for _ in range(self.rows)]
        for (r, c), v in self.entries.items():
            out[r][c] = v
        return out

    def row_dicts(self) -> list[dict[int, Fraction]]:
        out: list[dict[int, Fraction]] = [dict() for _ in range(self.rows)]
        for (r, c), v in self.entries.items():
            out[r][c] = v
        return out

    def density(self) -> float:
        size = self.rows * self.cols
        return len(self.entries) / size if size else 0.0

    def is_zero(self) -> bool:
        return not self.entries

    def matvec(self, v: Sequence) -> list[Fraction]:
        if len(v) != self.cols:
            raise ValueError("shape mismatch in matvec")
        out = [Fraction(0)] * self.rows
        for (r, c), x in self.entries.items():
            if v[c]:
                out[r] += x * v[c]
        return out

    def __matmul__(self, other: "RatMatrix") -> "RatMatrix":
        if self.cols != other.rows:
            raise ValueError(f"cannot compose {self.rows}x{self.cols} with {other.rows}x{other.cols}")
        by_row: dict[int, list[tuple[int, Fraction]]] = {}
        for (r, c), v in other.entries.items():
            by_row.setdefault(r, []).append((c, v))
        acc: dict[tuple[int, int], Fraction] = {}
        for (r, k), a in self.entries.items():
            for c, b in by_row.get(k, ()):
                key = (r, c)
                acc[key] = acc.get(key, Fraction(0)) + a * b
        return RatMatrix(self.rows, other.cols, acc)

    def __sub__(self, other: "RatMatrix") -> "RatMatrix":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")
        acc = dict(self.entries)
        for k, v in other.entries.items():
            acc[k] = acc.get(k, Fraction(0)) - v
        return RatMatrix(self.rows, self.cols, acc)

    def __add__(self, other: "RatMatrix") -> "RatMatrix":
        if (self.rows, self.cols) != (other.rows, other.cols):
            raise ValueError("shape mismatch")
        acc = dict(self.entries)
        for k, v in other.entries.items():
            acc[k] = acc.get(k, Fraction(0)) + v
        return RatMatrix(self.rows, self.cols, acc)

    def scale(self, c) -> "RatMatrix":
        c = _frac(c)
        return RatMatrix(self.rows, self.cols, {k: c * v for k, v in self.entries.items()})

    def transpose(self) -> "RatMatrix":
        return RatMatrix(self.cols, self.rows, {(c, r): v for (r, c), v in self.entries.items()})

    def hstack(self, other: "RatMatrix") -> "RatMatrix":
        if self.rows != other.rows:
            raise ValueError("row mismatch in hstack")
        ent = dict(self.entries)
        ent.update({(r, c + self.cols): v for (r, c), v in other.entries.items()})
        return RatMatrix(self.rows, self.cols + other.cols, ent)

    @classmethod
    def from_columns(cls, columns: Sequence[Sequence], rows: int) -> "RatMatrix":
        ent = {}
        for j, col in enumerate(columns):
            if len(col) != rows:
                raise ValueError("column length mismatch")
            for i, v in enumerate(col):
                if v:
                    ent[(i, j)] = v
        return cls(rows, len(columns), ent)


# ---------------------------------------------------------------------------
# reduced row echelon form


def _rref_sparse(rows: Iterable[dict[int, Fraction]]) -> dict[int, dict[int, Fraction]]:
    """Return pivot column -> normalized row, fully reduced."""
    pivots: dict[int, dict[int, Fraction]] = {}
    for raw in rows:
        row = {c: v for c, v in raw.items() if v}
        for pc in sorted(c for c in row if c in pivots):
            coef = row.get(pc)
            if not coef:
                continue
            for c, v in pivots[pc].items():
                nv = row.get(c, Fraction(0)) - coef * v
                if nv:
                    row[c] = nv
                else:
                    row.pop(c, None)
        if not row:
            continue
        pc = min(row)
        inv = 1 / row[pc]
        row = {c: v * inv for c, v in row.items()}
        for other in pivots.values():
            coef = other.get(pc)
            if coef:
                for c, v in row.items():
                    nv = other.get(c, Fraction(0)) - coef * v
                    if nv:
                        other[c] = nv
                    else:
                        del other[c]
        pivots[pc] = row
    return pivots


def _rref_dense(m: RatMatrix) -> dict[int, dict[int, Fraction]]:
    a = m.to_dense()
    nrows, ncols = m.rows, m.cols
    pivot_rows: list[tuple[int, int]] = []
    r = 0
    for c in range(ncols):
        if r >= nrows:
            break
        sel = next((i for i in range(r, nrows) if a[i][c]), None)
        if sel is None:
            continue
        a[r], a[sel] = a[sel], a[r]
        inv = 1 / a[r][c]
        a[r] = [v * inv for v in a[r]]
        for i in range(nrows):
            if i != r and a[i][c]:
                f = a[i][c]
                ai, ar = a[i], a[r]
                a[i] = [x - f * y for x, y in zip(ai, ar)]
        pivot_rows.append((c, r))
        r += 1
    return {c: {j: v for j, v in enumerate(a[i]) if v} for c, i in pivot_rows}


def rref(m: RatMatrix) -> dict[int, dict[int, Fraction]]:
    """Reduced row echelon form as pivot column -> row; dense path above 25% fill."""
    if m.density() > DENSE_THRESHOLD and m.rows * m.cols <= 250_000:
        return _rref_dense(m)
    return _rref_sparse(m.row_dicts())


def rank_kernel(m: RatMatrix) -> tuple[int, list[list[Fraction]]]:
    piv = rref(m)
    free = [c for c in range(m.cols) if c not in piv]
    kernel = []
    for f in free:
        v = [Fraction(0)] * m.cols
        v[f] = Fraction(1)
        for pc, row in piv.items():
            if f in row:
                v[pc] = -row[f]
        kernel.append(v)
    return len(piv), kernel


def rank(m: RatMatrix) -> int:
    return len(rref(m))


def solve(m: RatMatrix, b: Sequence) -> list[Fraction] | None:
    """Some x with m x = b, or None when b is outside the column space."""
    if len(b) != m.rows:
        raise ValueError("right-hand side has wrong length")
    col = RatMatrix(m.rows, 1, {(i, 0): _frac(v) for i, v in enumerate(b) if v})
    piv = rref(m.hstack(col))
    if m.cols in piv:
        return None
    x = [Fraction(0)] * m.cols
    for pc, row in piv.items():
        x[pc] = row.get(m.cols, Fraction(0))
    return x


def independent_columns(vectors: Sequence[Sequence], length: int) -> list[int]:
    """Indices of a greedy maximal independent subfamily, in input order."""
    if not vectors:
        return []
    piv = rref(RatMatrix.from_columns(vectors, length))
    return sorted(piv)


def span_rank(vectors: Sequence[Sequence], length: int) -> int:
    if not vectors:
        return 0
    return rank(RatMatrix.from_columns(vectors, length))


# ---------------------------------------------------------------------------
# complexes


@dataclass(frozen=True)
class SlicedComplex:
    """Finite cochain complex; ``differentials[n]`` maps degree n to n+1."""

    dims: Mapping[int, int]
    differentials: Mapping[int, RatMatrix]
    basis_labels: Mapping[int, Sequence] = field(default_factory=dict)

    def __post_init__(self):
        for n, d in self.differentials.items():
            src, tgt = self.dim(n), self.dim(n + 1)
            if (d.rows, d.cols) != (tgt, src):
                raise ValueError(f"d^{n} has shape {d.rows}x{d.cols}, expected {tgt}x{src}")

    @property
    def degrees(self) -> range:
        ks = list(self.dims)
        if not ks:
            return range(0)
        return range(min(ks), max(ks) + 1)

    def dim(self, n: int) -> int:
        return self.dims.get(n, 0)

    def d(self, n: int) -> RatMatrix:
        m = self.differentials.get(n)
        if m is None:
            return RatMatrix.zero(self.dim(n + 1), self.dim(n))
        return m

    def square_defects(self) -> list[int]:
        return [n for n in self.degrees if not (self.d(n + 1) @ self.d(n)).is_zero()]

    def euler_characteristic(self) -> int:
        return sum((-1) ** (n % 2) * self.dim(n) for n in self.degrees)


@dataclass(frozen=True)
class DegreeCohomology:
    dim: int
    representatives: list[list[Fraction]]


def cohomology(c: SlicedComplex, representatives: bool = True) -> dict[int, DegreeCohomology]:
    bad = c.square_defects()
    if bad:
        raise ComplexError(f"d∘d is nonzero starting in degree(s) {bad}")
    out: dict[int, DegreeCohomology] = {}
    for n in c.degrees:
        dn = c.d(n)
        rk_n, ker = rank_kernel(dn)
        prev = c.d(n - 1)
        rk_prev = rank(prev)
        h = c.dim(n) - rk_n - rk_prev
        reps: list[list[Fraction]] = []
        if representatives and h:
            image_cols = [[Fraction(0)] * c.dim(n) for _ in range(prev.cols)]
            for (r, col), v in prev.entries.items():
                image_cols[col][r] = v
            family = image_cols + ker
            chosen = independent_columns(family, c.dim(n))
            reps = [family[j] for j in chosen if j >= len(image_cols)]
        out[n] = DegreeCohomology(h, reps)
    return out


def cohomology_dims(c: SlicedComplex) -> dict[int, int]:
    return {n: h.dim for n, h in cohomology(c, representatives=False).items()}


def induced_rank(chain_map: Mapping[int, RatMatrix], source: SlicedComplex,
                 target: SlicedComplex, degree: int) -> int:
    """Rank of the map H^degree(source) -> H^degree(target)."""
    reps = cohomology(source)[degree].representatives if degree in source.degrees else []
    if not reps:
        return 0
    f = chain_map[degree]
    imgs = [f.matvec(v) for v in reps]
    prev = target.d(degree - 1)
    bcols = [[prev.entries.get((r, j), Fraction(0)) for r in range(prev.rows)] for j in range(prev.cols)]
    n = target.dim(degree)
    return span_rank(bcols + imgs, n) - span_rank(bcols, n)
