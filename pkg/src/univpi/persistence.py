"""Z/2 persistence: reduction, π-value measures, one-simplex stability and cascades."""
from __future__ import annotations

import bisect
from dataclasses import dataclass, field

import numba
import numpy as np

from .complex import FilteredComplex, assemble

EMPTY = -2  # partner of the first vertex under the reduced-homology convention


class EmptyMeasure(ValueError):
    pass


class InvalidFiltration(ValueError):
    pass


class NotNegative(ValueError):
    pass


@numba.njit(cache=True)
def _add_into(a, na, b, lo, hi, out):
    """Write the symmetric difference of sorted a[:na] and b[lo:hi] into out; return its length."""
    i, j, n = 0, lo, 0
    while i < na and j < hi:
        if a[i] < b[j]:
            out[n] = a[i]
            i += 1
            n += 1
        elif b[j] < a[i]:
            out[n] = b[j]
            j += 1
            n += 1
        else:
            i += 1
            j += 1
    while i < na:
        out[n] = a[i]
        i += 1
        n += 1
    while j < hi:
        out[n] = b[j]
        j += 1
        n += 1
    return n


@numba.njit(cache=True)
def _reduce(indptr, indices, dims, max_dim):
    """Standard column reduction with clearing, dimensions processed top-down.

    Reduced columns are kept in one flat arena; the working column ping-pongs
    between two buffers so no allocation happens per addition.
    """
    m = dims.size
    partner = np.full(m, -1, dtype=np.int64)
    low_owner = np.full(m, -1, dtype=np.int64)
    start = np.zeros(m, dtype=np.int64)
    stop = np.zeros(m, dtype=np.int64)
    cleared = np.zeros(m, dtype=np.bool_)
    arena = np.empty(max(1024, 4 * indices.size), dtype=np.int64)
    used = 0
    cap = 64
    work = np.empty(cap, dtype=np.int64)
    spare = np.empty(cap, dtype=np.int64)
    for p in range(max_dim, 0, -1):
        for j in range(m):
            if dims[j] != p or cleared[j]:
                continue
            n = indptr[j + 1] - indptr[j]
            work[:n] = indices[indptr[j]:indptr[j + 1]]
            while n > 0:
                owner = low_owner[work[n - 1]]
                if owner == -1:
                    break
                need = n + stop[owner] - start[owner]
                if need > cap:
                    cap = 2 * need
                    grown = np.empty(cap, dtype=np.int64)
                    grown[:n] = work[:n]
                    work = grown
                    spare = np.empty(cap, dtype=np.int64)
                n = _add_into(work, n, arena, start[owner], stop[owner], spare)
                work, spare = spare, work
            if n > 0:
                if used + n > arena.size:
                    bigger = np.empty(2 * (used + n), dtype=np.int64)
                    bigger[:used] = arena[:used]
                    arena = bigger
                arena[used:used + n] = work[:n]
                start[j] = used
                used += n
                stop[j] = used
                low = work[n - 1]
                low_owner[low] = j
                partner[j] = low
                partner[low] = j
                cleared[low] = True
    return partner


@dataclass(frozen=True)
class PersistencePair:
    dim: int
    birth: float
    death: float
    birth_simplex: tuple
    death_simplex: tuple | None

    @property
    def pi(self) -> float:
        return self.death / self.birth


@dataclass(frozen=True, eq=False)
class Diagrams:
    """All pairs with birth < death plus infinite bars, as parallel arrays."""

    dims: np.ndarray
    births: np.ndarray
    deaths: np.ndarray
    birth_idx: np.ndarray
    death_idx: np.ndarray  # -1 for infinite bars

    def in_dim(self, k: int) -> "Diagrams":
        sel = self.dims == k
        return Diagrams(self.dims[sel], self.births[sel], self.deaths[sel],
                        self.birth_idx[sel], self.death_idx[sel])

    def __len__(self) -> int:
        return len(self.dims)

    def pairs(self, fc: FilteredComplex) -> list[PersistencePair]:
        return [
            PersistencePair(int(k), float(b), float(d), fc.simplex(bi),
                            fc.simplex(di) if di >= 0 else None)
            for k, b, d, bi, di in zip(self.dims, self.births, self.deaths, self.birth_idx, self.death_idx)
        ]

    def betti(self, k: int, r: float) -> int:
        sel = (self.dims == k) & (self.births <= r) & (self.deaths > r)
        return int(sel.sum())


@dataclass(frozen=True, eq=False)
class PairingTable:
    """``partner[i]`` is the simplex paired with ``i`` (-1 unpaired, EMPTY for the first vertex)."""

    partner: np.ndarray

    @property
    def negative(self) -> np.ndarray:
        idx = np.arange(len(self.partner))
        return ((self.partner >= 0) & (self.partner < idx)) | (self.partner == EMPTY)

    @property
    def positive(self) -> np.ndarray:
        return ~self.negative

    def kills(self, i: int) -> int | None:
        """The negative simplex that kills positive simplex ``i``, or None for an infinite bar."""
        j = int(self.partner[i])
        return j if j > i else None


def reduce(fc: FilteredComplex) -> tuple[Diagrams, PairingTable]:
    if len(fc) == 0:
        empty = np.zeros(0, dtype=np.int64)
        return Diagrams(empty, np.zeros(0), np.zeros(0), empty, empty), PairingTable(empty)
    indptr, indices = fc.boundary
    partner = _reduce(indptr, indices, fc.dims.astype(np.int64), fc.max_dim)
    first_vertex = int(np.flatnonzero(fc.dims == 0)[0])
    partner[first_vertex] = EMPTY
    table = PairingTable(partner)
    idx = np.arange(len(fc))
    neg = (partner >= 0) & (partner < idx)
    death_idx = idx[neg]
    birth_idx = partner[neg]
    unpaired = np.flatnonzero(partner == -1)
    birth_idx = np.concatenate([birth_idx, unpaired])
    death_idx = np.concatenate([death_idx, np.full(len(unpaired), -1)])
    births = fc.values[birth_idx]
    deaths = np.where(death_idx >= 0, fc.values[np.maximum(death_idx, 0)], np.inf)
    keep = births < deaths
    order = np.lexsort((birth_idx[keep], fc.dims[birth_idx[keep]]))
    sel = np.flatnonzero(keep)[order]
    dgm = Diagrams(fc.dims[birth_idx[sel]], births[sel], deaths[sel], birth_idx[sel], death_idx[sel])
    return dgm, table


@dataclass(frozen=True, eq=False)
class PiMeasure:
    dim: int
    r_max: float
    pi_values: np.ndarray = field(repr=False)

    @property
    def total(self) -> int:
        return len(self.pi_values)

    def weights(self) -> np.ndarray:
        return np.full(self.total, 1.0 / self.total) if self.total else np.zeros(0)


def pi_measure(dgm: Diagrams, k: int, r_max: float) -> PiMeasure:
    sub = dgm.in_dim(k)
    sel = np.isfinite(sub.deaths) & (sub.deaths <= r_max) & (sub.births > 0)
    return PiMeasure(k, float(r_max), np.sort(sub.deaths[sel] / sub.births[sel]))


def pi_count_alpha(m: PiMeasure, alpha: float) -> int:
    if alpha < 1:
        raise ValueError("alpha must be >= 1")
    return int(m.total - np.searchsorted(m.pi_values, alpha, side="left"))


def empirical_cdf(m: PiMeasure):
    """Right-continuous CDF of the π multiset."""
    if m.total == 0:
        raise EmptyMeasure("π measure is empty")
    values = m.pi_values.tolist()
    total = m.total

    def cdf(x: float) -> float:
        return bisect.bisect_right(values, x) / total

    return cdf


def persistent_count(fc: FilteredComplex, k: int, alpha: float, r_max: float) -> int:
    """Π_k(α; F); without a finite cutoff infinite bars count as α-persistent."""
    dgm, _ = reduce(fc)
    sub = dgm.in_dim(k)
    if np.isfinite(r_max):
        return pi_count_alpha(pi_measure(dgm, k, r_max), alpha)
    with np.errstate(divide="ignore"):
        pis = np.where(np.isfinite(sub.deaths), sub.deaths / sub.births, np.inf)
    return int(np.sum(pis >= alpha))


def insert_simplex(fc: FilteredComplex, sigma, value: float) -> FilteredComplex:
    sigma = tuple(sorted(int(v) for v in sigma))
    if sigma in fc.index:
        raise InvalidFiltration(f"{sigma} already present")
    dim = len(sigma) - 1
    if dim > fc.max_dim:
        raise InvalidFiltration("simplex exceeds max_dim")
    if dim > 0:
        for drop in range(len(sigma)):
            face = sigma[:drop] + sigma[drop + 1:]
            pos = fc.index.get(face)
            if pos is None or fc.values[pos] > value:
                raise InvalidFiltration(f"face {face} missing or enters after {value}")
    by_dim, vals = [], []
    for p in range(fc.max_dim + 1):
        sel = fc.dims == p
        rows = fc.verts[sel, : p + 1]
        v = fc.values[sel]
        if p == dim:
            rows = np.vstack([rows, np.array(sigma, dtype=np.int64)[None]])
            v = np.append(v, value)
        by_dim.append(rows)
        vals.append(v)
    return assemble(fc.points, fc.flavor, max(fc.r_max, value), fc.max_dim, by_dim, vals)


@dataclass(frozen=True)
class StabilityResult:
    delta: int
    dim_sigma: int
    k: int
    cutoff_active: bool

    @property
    def passes(self) -> bool:
        if self.dim_sigma == self.k and self.cutoff_active:
            return self.delta == 0
        if self.dim_sigma in (self.k, self.k + 1):
            return abs(self.delta) <= 1
        return self.delta == 0


def stability_probe(fc, sigma, value, alpha, k, r_max=np.inf) -> StabilityResult:
    grown = insert_simplex(fc, sigma, value)
    before = persistent_count(fc, k, alpha, r_max)
    after = persistent_count(grown, k, alpha, r_max)
    return StabilityResult(after - before, len(sigma) - 1, k, bool(np.isfinite(r_max)))


@dataclass
class CascadeReport:
    sigma: tuple
    entries: list  # (birth simplex, birth, death before, killer before, killer after)
    mismatches: list
    ordered: bool
    sigma_kills_first: bool
    shifted: bool

    @property
    def passes(self) -> bool:
        return not self.mismatches and self.ordered and self.sigma_kills_first and self.shifted


def _killers(fc: FilteredComplex, table: PairingTable, k: int) -> dict:
    out = {}
    for i in np.flatnonzero((fc.dims == k) & table.positive):
        j = table.kills(int(i))
        out[fc.simplex(int(i))] = None if j is None else fc.simplex(j)
    return out


def cascade_verify(fc: FilteredComplex, sigma, value: float) -> CascadeReport:
    sigma = tuple(sorted(int(v) for v in sigma))
    grown = insert_simplex(fc, sigma, value)
    _, before = reduce(fc)
    _, after = reduce(grown)
    pos = grown.index[sigma]
    if not after.negative[pos]:
        raise NotNegative(f"{sigma} creates a class")
    k = len(sigma) - 2
    old, new = _killers(fc, before, k), _killers(grown, after, k)
    mismatches = sorted(set(old) ^ set(new))
    changed = [b for b in old if b in new and old[b] != new[b]]
    changed.sort(key=lambda b: grown.index[b], reverse=True)

    def value_of(s, cx):
        return np.inf if s is None else float(cx.values[cx.index[s]])

    entries = [(b, value_of(b, fc), value_of(old[b], fc), old[b], new[b]) for b in changed]
    deaths = [e[2] for e in entries]
    births = [e[1] for e in entries]
    ordered = all(value <= d for d in deaths[:1]) and all(
        deaths[j] <= deaths[j + 1] and births[j] >= births[j + 1] for j in range(len(entries) - 1)
    )
    first = not entries or entries[0][4] == sigma
    shifted = all(entries[j][4] == entries[j - 1][3] for j in range(1, len(entries)))
    return CascadeReport(sigma, entries, mismatches, ordered, first, shifted)


def format_float(x: float) -> str:
    return "inf" if x == np.inf else repr(float(x))


def diagram_csv(dgm: Diagrams) -> str:
    lines = ["dim,birth,death"]
    for k, b, d in zip(dgm.dims, dgm.births, dgm.deaths):
        lines.append(f"{int(k)},{format_float(b)},{format_float(d)}")
    return "\n".join(lines) + "\n"


def pi_csv(measures) -> str:
    lines = ["dim,pi"]
    for m in measures:
        lines.extend(f"{m.dim},{format_float(p)}" for p in m.pi_values)
    return "\n".join(lines) + "\n"
