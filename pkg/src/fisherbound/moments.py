"""One-pass, mergeable estimation of transformation means and covariances.

Samples are processed in fixed blocks of ``BLOCK_SIZE`` consecutive indices.
Each block yields a centred accumulator; blocks are combined by a fixed binary
tree, so results do not depend on how blocks were spread over workers.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

from fisherbound import rng
from fisherbound.errors import DomainError, InsufficientDataError, InvalidSampleError, ValidationError
from fisherbound.models import ModelSpec
from fisherbound.transforms import TransformSet

BLOCK_SIZE = 4096
MAX_SKIP_FRACTION = 1e-6


class MomentAccumulator:
    """Running count, mean and centred cross-product sum of transformation vectors.

    Storing deviations from the running mean (rather than raw sums of outer
    products) keeps the covariance accurate when the mean is large relative to
    the spread.
    """

    __slots__ = ("count", "mean", "m2")

    def __init__(self, dim: int, count: int = 0, mean=None, m2=None):
        self.count = count
        self.mean = np.zeros(dim) if mean is None else mean
        self.m2 = np.zeros((dim, dim)) if m2 is None else m2

    @property
    def dim(self) -> int:
        return self.mean.shape[0]

    @classmethod
    def from_batch(cls, phi: np.ndarray) -> "MomentAccumulator":
        phi = np.asarray(phi, dtype=float)
        if not np.isfinite(phi).all():
            raise InvalidSampleError("non-finite transformation value in batch")
        n, dim = phi.shape
        if n == 0:
            return cls(dim)
        mean = phi.sum(axis=0) / n
        centred = phi - mean
        return cls(dim, n, mean, centred.T @ centred)

    def accumulate(self, phi_z) -> "MomentAccumulator":
        phi_z = np.asarray(phi_z, dtype=float)
        if phi_z.shape != (self.dim,):
            raise ValidationError(f"expected vector of length {self.dim}, got shape {phi_z.shape}")
        if not np.isfinite(phi_z).all():
            raise InvalidSampleError(f"non-finite transformation vector {phi_z}")
        self.count += 1
        delta = phi_z - self.mean
        self.mean = self.mean + delta / self.count
        self.m2 = self.m2 + np.outer(delta, phi_z - self.mean)
        return self

    def merge(self, other: "MomentAccumulator") -> "MomentAccumulator":
        """Combine two disjoint sample sets (pairwise update of Chan et al.)."""
        if other.dim != self.dim:
            raise ValidationError("cannot merge accumulators of different dimension")
        if other.count == 0:
            return self.copy()
        if self.count == 0:
            return other.copy()
        n = self.count + other.count
        delta = other.mean - self.mean
        mean = self.mean + delta * (other.count / n)
        m2 = self.m2 + other.m2 + np.outer(delta, delta) * (self.count * other.count / n)
        return MomentAccumulator(self.dim, n, mean, m2)

    def copy(self) -> "MomentAccumulator":
        return MomentAccumulator(self.dim, self.count, self.mean.copy(), self.m2.copy())

    def finalize(self, theta: float = math.nan) -> "MomentSummary":
        if self.count < 2:
            raise InsufficientDataError(f"need at least 2 samples, have {self.count}")
        cov = self.m2 / self.count
        cov = 0.5 * (cov + cov.T)
        return MomentSummary(self.mean.copy(), cov, self.count, theta)


def accumulate(acc: MomentAccumulator, phi_z) -> MomentAccumulator:
    return acc.accumulate(phi_z)


def finalize(acc: MomentAccumulator, theta: float = math.nan) -> "MomentSummary":
    return acc.finalize(theta)


def tree_merge(accs: Sequence[MomentAccumulator]) -> MomentAccumulator:
    """Merge in a fixed binary tree: neighbours pairwise, level by level."""
    level = list(accs)
    if not level:
        raise InsufficientDataError("nothing to merge")
    while len(level) > 1:
        nxt = [level[i].merge(level[i + 1]) for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            nxt.append(level[-1])
        level = nxt
    return level[0]


@dataclass(frozen=True)
class MomentSummary:
    """Sample mean and 1/N covariance of the transformation vector at one ``theta``."""

    mean: np.ndarray
    cov: np.ndarray
    n: int
    theta: float

    def subset(self, count: int) -> "MomentSummary":
        return MomentSummary(self.mean[:count].copy(), self.cov[:count, :count].copy(), self.n, self.theta)

    def to_row(self) -> list:
        iu = np.triu_indices(self.mean.shape[0])
        return [self.theta, self.n, *self.mean.tolist(), *self.cov[iu].tolist()]


@dataclass(frozen=True)
class MomentTriple:
    at_minus: MomentSummary
    at_center: MomentSummary
    at_plus: MomentSummary
    h: float

    @property
    def theta(self) -> float:
        return self.at_center.theta

    def subset(self, count: int) -> "MomentTriple":
        return MomentTriple(
            self.at_minus.subset(count), self.at_center.subset(count), self.at_plus.subset(count), self.h
        )


def default_step(model: ModelSpec, theta: float) -> float:
    """Relative step ``fd_rel_step * max(|theta|, 1)``, halved until ``theta ± h`` is admissible."""
    h = model.fd_rel_step * max(abs(theta), 1.0)
    for _ in range(64):
        if theta - h in model.theta_domain and theta + h in model.theta_domain:
            return h
        h *= 0.5
    raise DomainError(f"{model.name}: no admissible finite-difference step around theta={theta!r}")


def _check_step(model: ModelSpec, theta: float, h: float) -> None:
    if not h > 0:
        raise ValidationError(f"finite-difference step must be positive, got {h!r}")
    model.check_theta(theta)
    model.check_theta(theta - h, "theta-h")
    model.check_theta(theta + h, "theta+h")


def _block_range(n: int) -> list[tuple[int, int]]:
    return [(start, min(BLOCK_SIZE, n - start)) for start in range(0, n, BLOCK_SIZE)]


def _triple_block(model, tset, thetas, seed, start, count, skip_invalid):
    u = rng.uniforms(seed, start, count, model.n_uniforms)
    with np.errstate(all="ignore"):
        phis = [tset.evaluate_many(model.transform(t, u)) for t in thetas]
    good = np.ones(count, dtype=bool)
    for phi in phis:
        good &= np.isfinite(phi).all(axis=1)
    skipped = int(count - good.sum())
    if skipped:
        if not skip_invalid:
            bad = start + int(np.flatnonzero(~good)[0])
            raise InvalidSampleError(f"{model.name}: non-finite sample at index {bad}")
        phis = [phi[good] for phi in phis]
    return tuple(MomentAccumulator.from_batch(phi) for phi in phis), skipped


def triple_blocks(
    model: ModelSpec,
    tset: TransformSet,
    theta: float,
    h: float,
    n: int,
    seed: int,
    workers: int = 1,
    skip_invalid: bool = False,
) -> list[tuple[MomentAccumulator, MomentAccumulator, MomentAccumulator]]:
    """Per-block accumulators at ``theta - h``, ``theta``, ``theta + h`` on shared draws."""
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples, got n={n}")
    _check_step(model, theta, h)
    thetas = (theta - h, theta, theta + h)
    blocks = _block_range(n)

    def run(chunk):
        return [_triple_block(model, tset, thetas, seed, s, c, skip_invalid) for s, c in chunk]

    if workers <= 1 or len(blocks) < 2:
        results = run(blocks)
    else:
        chunks = [list(c) for c in np.array_split(np.array(blocks, dtype=np.int64), workers) if len(c)]
        chunks = [[(int(s), int(c)) for s, c in chunk] for chunk in chunks]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = [item for part in pool.map(run, chunks) for item in part]

    skipped = sum(s for _, s in results)
    if skipped > math.floor(MAX_SKIP_FRACTION * n):
        raise InvalidSampleError(f"{model.name}: {skipped} invalid samples exceed the skip cap for n={n}")
    return [accs for accs, _ in results]


def merge_triple(blocks: Iterable[tuple], theta: float, h: float) -> MomentTriple:
    blocks = list(blocks)
    parts = [tree_merge([blk[j] for blk in blocks]) for j in range(3)]
    return MomentTriple(
        parts[0].finalize(theta - h), parts[1].finalize(theta), parts[2].finalize(theta + h), h
    )


def group_blocks(blocks: Sequence[tuple], groups: int) -> list[tuple]:
    """Collapse consecutive blocks into at most ``groups`` contiguous sample groups."""
    groups = max(1, min(groups, len(blocks)))
    bounds = np.linspace(0, len(blocks), groups + 1).round().astype(int)
    return [
        tuple(tree_merge([blk[j] for blk in blocks[lo:hi]]) for j in range(3))
        for lo, hi in zip(bounds[:-1], bounds[1:])
    ]


def estimate_triple(
    model: ModelSpec,
    tset: TransformSet,
    theta: float,
    h: Optional[float] = None,
    n: int = 1_000_000,
    seed: int = 0,
    workers: int = 1,
    skip_invalid: bool = False,
) -> MomentTriple:
    """Moments at ``theta - h``, ``theta``, ``theta + h`` from common random numbers.

    Sample index ``i`` uses the same uniforms at all three parameter values.
    With ``h=None`` the default step rule applies (and may shrink near a domain edge);
    an explicit ``h`` must keep both endpoints inside the domain.
    """
    if h is None:
        model.check_theta(theta)
        h = default_step(model, theta)
    blocks = triple_blocks(model, tset, theta, h, n, seed, workers, skip_invalid)
    return merge_triple(blocks, theta, h)


def write_summaries_csv(summaries: Sequence[MomentSummary], path) -> None:
    """Audit dump: theta, n, mean components, upper-triangular covariance."""
    if not summaries:
        raise InsufficientDataError("no summaries to write")
    dim = summaries[0].mean.shape[0]
    header = ["theta", "n"] + [f"mean_{i}" for i in range(dim)]
    header += [f"cov_{i}_{j}" for i, j in zip(*np.triu_indices(dim))]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for s in summaries:
            writer.writerow([f"{v:.17g}" if isinstance(v, float) else v for v in s.to_row()])
