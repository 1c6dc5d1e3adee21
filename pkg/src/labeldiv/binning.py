"""Interval partitions of a target's support and diverse ensembles of them.

A :class:`Discretization` is an ordered partition of a half-open support
``[lo, hi)`` into contiguous bins.  Every ensemble is derived from a *base*
discretization with ``K`` classes, and every member bin is a union of
consecutive base classes, so member edges are always a subset of base edges.

Membership is half-open, ``t in [lo, hi)``; the single exception is the
support maximum, which maps to the last bin so that a target equal to the
upper end of its range is still representable.
"""

from __future__ import annotations

import math
import re
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, OutOfRangeError

__all__ = [
    "Interval",
    "Discretization",
    "DiscretizationEnsemble",
    "equal_width_base",
    "equal_width_overlapping",
    "randomized_bins",
    "randomized_member",
    "explicit_ensemble",
    "parse_ensemble_spec",
    "load_ensemble_file",
    "format_ensemble_spec",
    "locate",
    "bin_mean",
    "overlap_ratio",
    "class_ranges",
]


def _fmt(x: float) -> str:
    return repr(int(x)) if float(x).is_integer() else repr(float(x))


@dataclass(frozen=True)
class Interval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (math.isfinite(lo) and math.isfinite(hi)):
            raise ConfigError(f"interval bounds must be finite, got [{lo}, {hi})")
        if not lo < hi:
            raise ConfigError(f"degenerate interval [{lo}, {hi})")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lo + self.hi)

    def __contains__(self, t: float) -> bool:
        return self.lo <= t < self.hi

    def __str__(self) -> str:
        return f"[{_fmt(self.lo)}, {_fmt(self.hi)})"


class Discretization:
    """An exact partition of ``support`` into ``len(self)`` half-open bins.

    Stored as the strictly increasing edge vector ``edges`` (length
    ``n_bins + 1``); bin ``l`` is ``[edges[l], edges[l + 1])``.
    """

    __slots__ = ("_edges",)

    def __init__(self, edges: Sequence[float] | np.ndarray):
        e = np.array(edges, dtype=np.float64)
        if e.ndim != 1 or e.size < 2:
            raise ConfigError("a discretization needs at least one bin (two edges)")
        if not np.all(np.isfinite(e)):
            raise ConfigError("discretization edges must be finite")
        if not np.all(np.diff(e) > 0):
            raise ConfigError("discretization edges must be strictly increasing")
        e.setflags(write=False)
        self._edges = e

    @classmethod
    def from_bins(cls, bins: Sequence[Interval]) -> "Discretization":
        if not bins:
            raise ConfigError("a discretization needs at least one bin")
        for i, (a, b) in enumerate(zip(bins, bins[1:])):
            if a.hi != b.lo:
                raise ConfigError(f"bins {i} and {i + 1} do not abut: {a} then {b}")
        return cls([b.lo for b in bins] + [bins[-1].hi])

    @property
    def edges(self) -> np.ndarray:
        return self._edges

    @property
    def support(self) -> Interval:
        return Interval(self._edges[0], self._edges[-1])

    @property
    def bins(self) -> tuple[Interval, ...]:
        e = self._edges
        return tuple(Interval(e[i], e[i + 1]) for i in range(len(e) - 1))

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self._edges)

    @property
    def midpoints(self) -> np.ndarray:
        return 0.5 * (self._edges[:-1] + self._edges[1:])

    def __len__(self) -> int:
        return self._edges.size - 1

    def __iter__(self) -> Iterator[Interval]:
        return iter(self.bins)

    def __getitem__(self, l: int) -> Interval:
        return self.bins[l]

    def __eq__(self, other) -> bool:
        if not isinstance(other, Discretization):
            return NotImplemented
        return np.array_equal(self._edges, other._edges)

    def __hash__(self):
        return hash(self._edges.tobytes())

    def __repr__(self) -> str:
        return f"Discretization({len(self)} bins over {self.support})"

    def __str__(self) -> str:
        return "{" + ", ".join(str(b) for b in self.bins) + "}"

    def locate(self, t) -> np.ndarray | int:
        """Bin index of each target; scalars in, scalar out."""
        arr = np.asarray(t, dtype=np.float64)
        lo, hi = self._edges[0], self._edges[-1]
        bad = ~((arr >= lo) & (arr <= hi))
        if np.any(bad):
            first = arr[bad].flat[0] if arr.ndim else float(arr)
            raise OutOfRangeError(
                f"target {first!r} outside support {self.support} "
                "(the right edge itself is accepted)"
            )
        idx = np.searchsorted(self._edges, arr, side="right") - 1
        idx = np.minimum(idx, len(self) - 1)
        return int(idx) if idx.ndim == 0 else idx.astype(np.int64)

    def bin_means(self, targets: np.ndarray | None = None) -> np.ndarray:
        """Representative value of every bin.

        Midpoints by default.  With ``targets``, the empirical mean of the
        targets falling in each bin; empty bins keep their midpoint.
        """
        means = self.midpoints
        if targets is None:
            return means
        targets = np.asarray(targets, dtype=np.float64).ravel()
        if targets.size == 0:
            return means
        idx = self.locate(targets)
        counts = np.bincount(idx, minlength=len(self))
        sums = np.bincount(idx, weights=targets, minlength=len(self))
        filled = counts > 0
        means[filled] = sums[filled] / counts[filled]
        return means


class DiscretizationEnsemble:
    """``M`` discretizations of one support, all derived from ``base``."""

    __slots__ = ("members", "base")

    def __init__(self, members: Sequence[Discretization], base: Discretization):
        members = tuple(members)
        if not members:
            raise ConfigError("an ensemble needs at least one member")
        lo, hi = base.edges[0], base.edges[-1]
        for m, d in enumerate(members):
            if d.edges[0] != lo or d.edges[-1] != hi:
                raise ConfigError(
                    f"member {m} covers {d.support}, base covers {base.support}"
                )
        self.members = members
        self.base = base

    @property
    def support(self) -> Interval:
        return self.base.support

    @property
    def M(self) -> int:
        return len(self.members)

    @property
    def K(self) -> int:
        return len(self.base)

    @property
    def head_sizes(self) -> tuple[int, ...]:
        return tuple(len(d) for d in self.members)

    @property
    def offsets(self) -> np.ndarray:
        """Start column of each head in the concatenated output, plus the total."""
        return np.concatenate([[0], np.cumsum(self.head_sizes)]).astype(np.int64)

    def __len__(self) -> int:
        return len(self.members)

    def __iter__(self) -> Iterator[Discretization]:
        return iter(self.members)

    def __getitem__(self, m: int) -> Discretization:
        return self.members[m]

    def __eq__(self, other) -> bool:
        if not isinstance(other, DiscretizationEnsemble):
            return NotImplemented
        return self.base == other.base and self.members == other.members

    def __repr__(self) -> str:
        return f"DiscretizationEnsemble(M={self.M}, K={self.K}, head_sizes={self.head_sizes})"

    def bin_means(self, targets: np.ndarray | None = None) -> list[np.ndarray]:
        return [d.bin_means(targets) for d in self.members]


def equal_width_base(support: Interval, K: int) -> Discretization:
    if K < 1:
        raise ConfigError(f"K must be >= 1, got {K}")
    lo, hi = support.lo, support.hi
    i = np.arange(K + 1, dtype=np.float64)
    edges = (lo * (K - i) + hi * i) / K
    return Discretization(edges)


def _regroup(base: Discretization, cuts: Sequence[int]) -> Discretization:
    """Member whose bins break the base partition at base-edge indices ``cuts``."""
    idx = np.unique(np.concatenate([[0], np.asarray(cuts, dtype=np.int64), [len(base)]]))
    return Discretization(base.edges[idx])


def equal_width_overlapping(base: Discretization, L: int, M: int) -> DiscretizationEnsemble:
    """``M`` grids of bins ``W = ceil(K / L)`` base classes wide, mutually shifted.

    Member ``m`` (0-based) has interior cuts at ``s + j*W`` base classes,
    with ``s = m * (W // M)``; the first and last bins are truncated by the
    support, so a shifted member opens with an edge bin ``s`` classes wide.
    """
    if L < 1 or M < 1:
        raise ConfigError(f"L and M must be >= 1, got L={L}, M={M}")
    K = len(base)
    if L * M > K:
        warnings.warn(f"L*M = {L * M} exceeds K = {K}; members will repeat cuts", stacklevel=2)
    W = -(-K // L)
    step = W // M
    if M > 1 and step == 0:
        warnings.warn(f"W = {W} < M = {M}: shift rounds to zero, members are identical", stacklevel=2)
    members = []
    for m in range(M):
        s = m * step
        if s >= K:
            raise ConfigError(f"shift of {s} base classes for member {m} exceeds K = {K}")
        members.append(_regroup(base, np.arange(s, K, W)))
    return DiscretizationEnsemble(members, base)


def randomized_member(base: Discretization, center_indices: Sequence[int]) -> Discretization:
    """Bins grown around the chosen base classes by nearest-center assignment.

    Duplicate centers collapse; ties go to the lower center.
    """
    centers = np.unique(np.asarray(center_indices, dtype=np.int64))
    K = len(base)
    if centers.size == 0 or centers[0] < 0 or centers[-1] >= K:
        raise ConfigError(f"center indices must lie in [0, {K}), got {list(center_indices)}")
    mids = base.midpoints
    cmid = mids[centers]
    # nearest sorted center for every base class
    right = np.clip(np.searchsorted(cmid, mids, side="left"), 1, max(centers.size - 1, 1))
    if centers.size == 1:
        owner = np.zeros(K, dtype=np.int64)
    else:
        left = right - 1
        d_left = np.abs(mids - cmid[left])
        d_right = np.abs(cmid[right] - mids)
        owner = np.where(d_left <= d_right, left, right)
    cuts = np.flatnonzero(np.diff(owner)) + 1
    return _regroup(base, cuts)


def randomized_bins(base: Discretization, L: int, M: int, seed: int) -> DiscretizationEnsemble:
    """``M`` members from ``L`` base classes sampled with replacement per member."""
    K = len(base)
    if L < 1:
        raise ConfigError(f"L must be >= 1, got {L}")
    if L >= K:
        raise ConfigError(f"randomized bins need L < K, got L={L}, K={K}")
    if M < 1:
        raise ConfigError(f"M must be >= 1, got {M}")
    rng = np.random.default_rng(seed)
    draws = rng.integers(0, K, size=(M, L))
    return DiscretizationEnsemble([randomized_member(base, row) for row in draws], base)


def explicit_ensemble(
    base: Discretization, sets: Sequence[Sequence[tuple[int, int]]]
) -> DiscretizationEnsemble:
    """Members from inclusive base-index ranges, e.g. ``[[(0, 1), (2, 2), (3, 4)]]``."""
    K = len(base)
    if not sets:
        raise ConfigError("explicit ensemble needs at least one member")
    members = []
    for m, ranges in enumerate(sets):
        if not ranges:
            raise ConfigError(f"member {m} is empty")
        expect = 0
        cuts = []
        for a, b in ranges:
            where = f"member {m}, range {a}-{b}"
            if a < 0 or b >= K or a > b:
                raise ConfigError(f"{where}: out of range for K = {K}")
            if a > expect:
                raise ConfigError(f"{where}: gap, base classes {expect}..{a - 1} uncovered")
            if a < expect:
                raise ConfigError(f"{where}: overlaps the previous range")
            cuts.append(a)
            expect = b + 1
        if expect != K:
            raise ConfigError(f"member {m}: base classes {expect}..{K - 1} uncovered")
        members.append(_regroup(base, cuts))
    return DiscretizationEnsemble(members, base)


_RANGE = re.compile(r"^\s*(\d+)\s*(?:-\s*(\d+)\s*)?$")


def parse_ensemble_spec(text: str) -> list[list[tuple[int, int]]]:
    """Parse the plain-text explicit ensemble format.

    One member per line or per ``;``-separated chunk; bins are
    comma-separated inclusive base-index ranges ``a-b`` (or a single index
    ``a``); ``#`` starts a comment; blank members are skipped.
    """
    sets = []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0]
        for chunk in line.split(";"):
            if not chunk.strip():
                continue
            member = []
            for tok in chunk.split(","):
                mt = _RANGE.match(tok)
                if mt is None:
                    raise ConfigError(f"line {lineno}: cannot parse range {tok.strip()!r}")
                a = int(mt.group(1))
                b = int(mt.group(2)) if mt.group(2) is not None else a
                member.append((a, b))
            sets.append(member)
    return sets


def format_ensemble_spec(ens: DiscretizationEnsemble) -> str:
    lines = []
    for d in ens.members:
        lines.append(", ".join(f"{a}-{b}" for a, b in class_ranges(d, ens.base)))
    return "\n".join(lines) + "\n"


def load_ensemble_file(path: str | Path, base: Discretization) -> DiscretizationEnsemble:
    return explicit_ensemble(base, parse_ensemble_spec(Path(path).read_text()))


def class_ranges(member: Discretization, base: Discretization) -> list[tuple[int, int]]:
    """Inclusive base-class index range spanned by each bin of ``member``."""
    pos = np.searchsorted(base.edges, member.edges)
    if pos[-1] >= base.edges.size or not np.array_equal(base.edges[pos], member.edges):
        raise ConfigError("member edges are not a subset of the base edges")
    return [(int(a), int(b) - 1) for a, b in zip(pos[:-1], pos[1:])]


def locate(d: Discretization, t):
    return d.locate(t)


def bin_mean(d: Discretization, l: int) -> float:
    if not 0 <= l < len(d):
        raise IndexError(f"bin index {l} out of range for {len(d)} bins")
    return float(0.5 * (d.edges[l] + d.edges[l + 1]))


def overlap_ratio(d: Interval, c: Interval) -> float:
    """Fraction of ``d``'s length that lies inside ``c``."""
    inter = min(d.hi, c.hi) - max(d.lo, c.lo)
    return max(inter, 0.0) / d.width
