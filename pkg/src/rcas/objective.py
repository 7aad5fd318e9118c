"""Set-function oracles F(assignment) -> score with a shared evaluation cache.

Every objective counts cache hits and misses; ``misses`` is the number of
function evaluations reported by the search engines.
"""
from __future__ import annotations

import math
import random
import threading
from collections import OrderedDict
from dataclasses import dataclass
from typing import Literal, Mapping, Sequence

from .domain import Assignment, Element
from .errors import EvaluatorFailure


@dataclass(frozen=True)
class Fidelity:
    """Evaluation effort in (0, 1]; 1.0 means a full evaluation."""

    level: float = 1.0

    def __post_init__(self) -> None:
        level = float(self.level)
        if not (0.0 < level <= 1.0) or math.isnan(level):
            raise ValueError(f"fidelity must lie in (0, 1], got {self.level!r}")
        object.__setattr__(self, "level", level)


FULL = Fidelity(1.0)


def as_fidelity(fid: Fidelity | float | None) -> Fidelity:
    if fid is None:
        return FULL
    return fid if isinstance(fid, Fidelity) else Fidelity(fid)


@dataclass(frozen=True)
class EvalRecord:
    assignment: Assignment
    fidelity: Fidelity
    value: float
    source: Literal["synthetic", "external", "cache"]


class Objective:
    """Base class: subclasses implement ``_score``.

    ``bounds`` is the admissible score range; scores outside it (or NaN) are
    rejected with :class:`EvaluatorFailure` rather than clamped.
    """

    source: Literal["synthetic", "external"] = "synthetic"
    bounds: tuple[float, float] | None = (0.0, 1.0)
    concurrency_safe = True

    def __init__(self, cache_size: int | None = None):
        self.cache_size = cache_size
        self._cache: OrderedDict[tuple[str, float], float] = OrderedDict()
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0
        self.log: list[EvalRecord] = []

    def _score(self, a: Assignment, fid: Fidelity) -> float:
        raise NotImplementedError

    @property
    def calls(self) -> int:
        return self.hits + self.misses

    def _check(self, value, a: Assignment):
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise EvaluatorFailure(f"score for {{{a.key()}}} is not a number", value)
        value = float(value)
        if math.isnan(value) or math.isinf(value):
            raise EvaluatorFailure(f"score for {{{a.key()}}} is not finite", value)
        if self.bounds is not None:
            lo, hi = self.bounds
            if not lo <= value <= hi:
                raise EvaluatorFailure(
                    f"score {value} for {{{a.key()}}} outside [{lo}, {hi}]", value
                )
        return value

    def evaluate_record(self, a: Assignment, fid: Fidelity | float | None = None) -> EvalRecord:
        fid = as_fidelity(fid)
        key = (a.key(), fid.level)
        with self._lock:
            if key in self._cache:
                self.hits += 1
                self._cache.move_to_end(key)
                return EvalRecord(a, fid, self._cache[key], "cache")
        value = self._check(self._score(a, fid), a)
        with self._lock:
            if key in self._cache:
                # another thread finished the same key first
                self.hits += 1
                return EvalRecord(a, fid, self._cache[key], "cache")
            self.misses += 1
            self._cache[key] = value
            if self.cache_size is not None and len(self._cache) > self.cache_size:
                self._cache.popitem(last=False)
            record = EvalRecord(a, fid, value, self.source)
            self.log.append(record)
        return record

    def evaluate(self, a: Assignment, fid: Fidelity | float | None = None) -> float:
        return self.evaluate_record(a, fid).value

    def __call__(self, a: Assignment, fid: Fidelity | float | None = None) -> float:
        return self.evaluate(a, fid)

    def close(self) -> None:
        pass


def marginal_gain(F: Objective, a: Assignment, e: Element, fid: Fidelity | float | None = None) -> float:
    """Delta(e | a) = F(a + e) - F(a)."""
    return F.evaluate(a.add(e), fid) - F.evaluate(a, fid)


class ModularOracle(Objective):
    """F(S) = offset + sum of per-element values. Unbounded range."""

    bounds = None

    def __init__(self, values: Mapping[Element, float], offset: float = 0.0, **kw):
        super().__init__(**kw)
        self.values = dict(values)
        self.offset = offset

    def _score(self, a, fid):
        return self.offset + sum(self.values.get(e, 0.0) for e in a.elements())


class TableOracle(Objective):
    """Explicit set function given as a table over assignments."""

    def __init__(
        self,
        values: Mapping[Assignment, float],
        default: float | None = None,
        bounds: tuple[float, float] | None = (0.0, 1.0),
        **kw,
    ):
        super().__init__(**kw)
        self.values = dict(values)
        self.default = default
        self.bounds = bounds

    def _score(self, a, fid):
        if a in self.values:
            return self.values[a]
        if self.default is None:
            raise EvaluatorFailure(f"no table value for {{{a.key()}}}")
        return self.default


class CoverageOracle(Objective):
    """Weighted coverage: F(S) = w(union of cover sets) / w(universe)."""

    def __init__(self, weights: Sequence[float], cover: Mapping[Element, Sequence[int]], **kw):
        super().__init__(**kw)
        self.weights = [float(w) for w in weights]
        if any(w < 0 for w in self.weights):
            raise ValueError("coverage weights must be nonnegative")
        self.cover = {e: frozenset(items) for e, items in cover.items()}
        for e, items in self.cover.items():
            bad = [j for j in items if not 0 <= j < len(self.weights)]
            if bad:
                raise ValueError(f"element {e} covers unknown items {bad}")
        self.total = sum(self.weights)

    def _score(self, a, fid):
        if self.total == 0:
            return 0.0
        covered: set[int] = set()
        for e in a.elements():
            covered |= self.cover.get(e, frozenset())
        # sorted order keeps the float sum identical for identical unions
        return sum(self.weights[j] for j in sorted(covered)) / self.total


class ConcaveModularOracle(Objective):
    """F(S) = sum_j w_j (sum_{e in S} a_{j,e})^rho, normalized by the same sum over all elements."""

    def __init__(
        self,
        features: Mapping[Element, Sequence[float]],
        outer_weights: Sequence[float],
        rho: float = 0.5,
        **kw,
    ):
        super().__init__(**kw)
        if not 0.0 < rho < 1.0:
            raise ValueError("rho must lie in (0, 1)")
        self.features = {e: [float(x) for x in row] for e, row in features.items()}
        self.outer_weights = [float(w) for w in outer_weights]
        self.rho = rho
        for e, row in self.features.items():
            if len(row) != len(self.outer_weights):
                raise ValueError(f"element {e} has {len(row)} features, expected {len(self.outer_weights)}")
            if any(x < 0 for x in row):
                raise ValueError("features must be nonnegative")
        if any(w < 0 for w in self.outer_weights):
            raise ValueError("outer weights must be nonnegative")
        self.normalizer = self._raw(list(self.features))

    def _raw(self, elements) -> float:
        total = 0.0
        for j, w in enumerate(self.outer_weights):
            s = sum(self.features[e][j] for e in elements if e in self.features)
            total += w * s ** self.rho
        return total

    def _score(self, a, fid):
        if self.normalizer == 0:
            return 0.0
        return min(1.0, self._raw(a.elements()) / self.normalizer)


class SurrogateAccuracyOracle(Objective):
    """Saturating accuracy stand-in: F(S) = 1 - exp(-sum q / kappa).

    Below full fidelity, seeded uniform noise of amplitude sigma*(1 - level) is
    added and the result is clipped to [0, 1]; the noise is a deterministic
    function of (assignment, fidelity, seed).
    """

    def __init__(
        self,
        quality: Mapping[Element, float],
        kappa: float,
        sigma: float = 0.0,
        seed: int = 0,
        **kw,
    ):
        super().__init__(**kw)
        if kappa <= 0:
            raise ValueError("kappa must be positive")
        if sigma < 0:
            raise ValueError("sigma must be nonnegative")
        self.quality = {e: float(q) for e, q in quality.items()}
        if any(q < 0 for q in self.quality.values()):
            raise ValueError("qualities must be nonnegative")
        self.kappa = kappa
        self.sigma = sigma
        self.seed = seed

    def _score(self, a, fid):
        mass = sum(self.quality.get(e, 0.0) for e in a.elements())
        value = 1.0 - math.exp(-mass / self.kappa)
        amplitude = self.sigma * (1.0 - fid.level)
        if amplitude > 0:
            rng = random.Random(f"{self.seed}|{a.key()}|{fid.level!r}")
            value = min(1.0, max(0.0, value + amplitude * rng.uniform(-1.0, 1.0)))
        return value
