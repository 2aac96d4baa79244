"""Banks of scalar output transformations used as surrogate sufficient statistics."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from fisherbound.errors import InvalidSampleError, TransformSpecError, ValidationError

DEFAULT_LOG_GUARD = 1e-100


@dataclass(frozen=True)
class TransformKind:
    """One transformation: ``power`` (with exponent ``k``), ``abs``, ``logabs`` or ``logabs2``."""

    tag: str
    k: int = 0

    def __post_init__(self):
        if self.tag not in ("power", "abs", "logabs", "logabs2"):
            raise ValidationError(f"unknown transform tag {self.tag!r}")
        if self.tag == "power":
            if self.k < 1:
                raise ValidationError(f"power exponent must be >= 1, got {self.k}")
        elif self.k != 0:
            raise ValidationError(f"{self.tag} takes no exponent")

    @classmethod
    def power(cls, k: int) -> "TransformKind":
        return cls("power", k)

    @property
    def token(self) -> str:
        if self.tag == "power":
            return "z" if self.k == 1 else f"z{self.k}"
        return self.tag

    @property
    def even(self) -> bool:
        return self.tag != "power" or self.k % 2 == 0

    def __str__(self):
        return self.token


ABS = TransformKind("abs")
LOG_ABS = TransformKind("logabs")
LOG_ABS_SQUARED = TransformKind("logabs2")

_TOKENS = {
    "z": TransformKind.power(1),
    "z2": TransformKind.power(2),
    "z3": TransformKind.power(3),
    "z4": TransformKind.power(4),
    "abs": ABS,
    "logabs": LOG_ABS,
    "logabs2": LOG_ABS_SQUARED,
}


@dataclass(frozen=True)
class TransformSet:
    kinds: tuple[TransformKind, ...]
    log_guard_epsilon: float = DEFAULT_LOG_GUARD

    def __post_init__(self):
        object.__setattr__(self, "kinds", tuple(self.kinds))
        if len(self.kinds) < 1:
            raise ValidationError("a transform set needs at least one transformation")
        seen = set()
        for kind in self.kinds:
            if kind in seen:
                raise ValidationError(f"duplicate transformation {kind.token!r}")
            seen.add(kind)
        if not (self.log_guard_epsilon > 0 and math.isfinite(self.log_guard_epsilon)):
            raise ValidationError("log_guard_epsilon must be positive and finite")

    def __len__(self):
        return len(self.kinds)

    @property
    def spec(self) -> str:
        return ",".join(kind.token for kind in self.kinds)

    def subset(self, count: int) -> "TransformSet":
        """The leading ``count`` transformations, keeping the guard."""
        return TransformSet(self.kinds[:count], self.log_guard_epsilon)

    def evaluate(self, z: float) -> np.ndarray:
        if not math.isfinite(z):
            raise InvalidSampleError(f"non-finite sample z={z!r}")
        return self.evaluate_many(np.array([z], dtype=float))[0]

    def evaluate_many(self, z: np.ndarray) -> np.ndarray:
        """Evaluate on a 1-D array of samples, returning shape ``(len(z), L)``.

        Non-finite samples propagate as non-finite rows; the caller decides
        whether to abort or skip.
        """
        z = np.asarray(z, dtype=float)
        # row-major per transformation, handed back as a transposed view
        out = np.empty((len(self.kinds), z.shape[0]))
        absz = np.abs(z)
        powers = {1: z}
        log_abs = None
        if any(kind.tag in ("logabs", "logabs2") for kind in self.kinds):
            with np.errstate(invalid="ignore"):
                log_abs = np.log(np.maximum(absz, self.log_guard_epsilon))
        for row, kind in enumerate(self.kinds):
            if kind.tag == "power":
                out[row] = _power(z, kind.k, powers)
            elif kind.tag == "abs":
                out[row] = absz
            elif kind.tag == "logabs":
                out[row] = log_abs
            else:
                np.multiply(log_abs, log_abs, out=out[row])
        return out.T


def _power(z: np.ndarray, k: int, cache: dict) -> np.ndarray:
    # repeated squaring with memoized intermediate powers
    if k not in cache:
        half = _power(z, k // 2, cache)
        sq = half * half
        cache[k] = sq if k % 2 == 0 else sq * z
    return cache[k]


def standard_transform_set() -> TransformSet:
    """The seven-element bank ``z, z^2, z^3, z^4, |z|, ln|z|, ln^2|z|``."""
    return TransformSet(
        (
            TransformKind.power(1),
            TransformKind.power(2),
            TransformKind.power(3),
            TransformKind.power(4),
            ABS,
            LOG_ABS,
            LOG_ABS_SQUARED,
        )
    )


def parse_transform_spec(text: str, log_guard_epsilon: float = DEFAULT_LOG_GUARD) -> TransformSet:
    tokens = [tok.strip() for tok in text.split(",")]
    kinds = []
    for tok in tokens:
        if tok not in _TOKENS:
            raise TransformSpecError(f"unknown transform token {tok!r}")
        kinds.append(_TOKENS[tok])
    return TransformSet(tuple(kinds), log_guard_epsilon)


def evaluate(tset: TransformSet, z: float) -> np.ndarray:
    return tset.evaluate(z)


def nested_sets(tset: TransformSet) -> Sequence[TransformSet]:
    """Prefix chain ``[phi_1] ⊂ [phi_1, phi_2] ⊂ ... ⊂ tset``."""
    return [tset.subset(i) for i in range(1, len(tset) + 1)]
