"""Reference instruments: exhaustive optimum, submodularity checks, convex-hull gaps."""
from __future__ import annotations

import itertools
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from .costmodel import CostModel
from .domain import EMPTY, Assignment, Budget, Element
from .errors import DegenerateInput, InstanceTooLarge
from .objective import Fidelity, Objective, as_fidelity

DEFAULT_CAP = 2**20


def enumerate_assignments(n_positions: int, n_types: int) -> Iterable[Assignment]:
    """Every partial assignment; position 0 varies slowest, empty before type 1."""
    for combo in itertools.product(range(n_types + 1), repeat=n_positions):
        yield Assignment(tuple((n, t) for n, t in enumerate(combo) if t))


def brute_force_opt(
    F: Objective,
    costs: CostModel,
    budget: Budget,
    fidelity: Fidelity | float | None = None,
    cap: int = DEFAULT_CAP,
) -> tuple[Assignment, float]:
    fid = as_fidelity(fidelity)
    size = (costs.n_types + 1) ** costs.n_positions
    if size > cap:
        raise InstanceTooLarge(
            f"{costs.n_types + 1}^{costs.n_positions} = {size} assignments exceeds cap {cap}"
        )
    best: tuple[Assignment, float] | None = None
    for a in enumerate_assignments(costs.n_positions, costs.n_types):
        if not budget.admits(costs.assignment_cost(a)):
            continue
        value = F.evaluate(a, fid)
        if best is None or value > best[1]:
            best = (a, value)
    if best is None:
        raise ValueError(f"budget {budget} cannot cover the fixed overhead")
    return best


@dataclass(frozen=True)
class Violation:
    smaller: Assignment
    larger: Assignment
    element: Element
    magnitude: float

    def to_json(self) -> dict:
        return {
            "A": self.smaller.to_json()["filled"],
            "B": self.larger.to_json()["filled"],
            "v": {"position": self.element.position, "type": self.element.block},
            "magnitude": self.magnitude,
        }


@dataclass
class ViolationReport:
    triples: int = 0
    monotone_violations: int = 0
    dr_violations: int = 0
    worst_monotone: Violation | None = None
    worst_dr: Violation | None = None
    dr_examples: list[Violation] = field(default_factory=list)
    exhaustive: bool = False
    tolerance: float = 0.0
    chains: int = 0
    chain_gain_increases: int = 0

    @property
    def monotone_rate(self) -> float:
        return self.monotone_violations / self.triples if self.triples else 0.0

    @property
    def dr_rate(self) -> float:
        return self.dr_violations / self.triples if self.triples else 0.0

    def to_json(self) -> dict:
        return {
            "exhaustive": self.exhaustive,
            "tolerance": self.tolerance,
            "triples": self.triples,
            "monotone_violations": self.monotone_violations,
            "monotone_rate": self.monotone_rate,
            "dr_violations": self.dr_violations,
            "dr_rate": self.dr_rate,
            "worst_monotone": self.worst_monotone.to_json() if self.worst_monotone else None,
            "worst_dr": self.worst_dr.to_json() if self.worst_dr else None,
            "dr_examples": [v.to_json() for v in self.dr_examples],
            "chains": self.chains,
            "chain_gain_increases": self.chain_gain_increases,
        }


def _subsets(a: Assignment) -> Iterable[Assignment]:
    items = a.items
    for r in range(len(items) + 1):
        for combo in itertools.combinations(items, r):
            yield Assignment(combo)


def _valid_assignments(ground: Sequence[Element]) -> Iterable[Assignment]:
    by_pos: dict[int, list[Element]] = {}
    for e in ground:
        by_pos.setdefault(e.position, []).append(e)
    positions = sorted(by_pos)
    for choice in itertools.product(*[[None] + by_pos[p] for p in positions]):
        yield Assignment.from_elements(e for e in choice if e is not None)


def check_submodularity(
    F: Objective,
    ground: Sequence[Element],
    samples: int = 1000,
    seed: int = 0,
    fidelity: Fidelity | float | None = None,
    exhaustive: bool | None = None,
    max_examples: int = 20,
    tolerance: float = 0.0,
) -> ViolationReport:
    """Count monotonicity and diminishing-returns violations over triples A <= B, v not in B.

    ``v`` must be addable to ``B`` (its position unfilled). Exhaustive mode
    (default when |V| <= 8) checks every triple; otherwise ``samples`` random
    triples are drawn, each B grown as a random chain from the empty set.
    A violation counts only when its magnitude exceeds ``tolerance`` (absolute
    score units).
    """
    fid = as_fidelity(fidelity)
    ground = sorted(ground)
    if exhaustive is None:
        exhaustive = len(ground) <= 8
    report = ViolationReport(exhaustive=exhaustive, tolerance=tolerance)

    def check(A: Assignment, B: Assignment, v: Element) -> None:
        fa, fav = F.evaluate(A, fid), F.evaluate(A.add(v), fid)
        fb, fbv = F.evaluate(B, fid), F.evaluate(B.add(v), fid)
        report.triples += 1
        if fa - fav > tolerance:
            report.monotone_violations += 1
            viol = Violation(A, A, v, fa - fav)
            if report.worst_monotone is None or viol.magnitude > report.worst_monotone.magnitude:
                report.worst_monotone = viol
        excess = (fbv - fb) - (fav - fa)
        if excess > tolerance:
            report.dr_violations += 1
            viol = Violation(A, B, v, excess)
            if len(report.dr_examples) < max_examples:
                report.dr_examples.append(viol)
            if report.worst_dr is None or viol.magnitude > report.worst_dr.magnitude:
                report.worst_dr = viol

    if exhaustive:
        for B in _valid_assignments(ground):
            addable = [v for v in ground if not B.occupies(v.position)]
            for A in _subsets(B):
                for v in addable:
                    check(A, B, v)
        return report

    rng = random.Random(seed)
    for _ in range(samples):
        chain = [EMPTY]
        order = ground[:]
        rng.shuffle(order)
        target = rng.randint(0, len({e.position for e in ground}))
        for e in order:
            if len(chain[-1]) >= target:
                break
            if not chain[-1].occupies(e.position):
                chain.append(chain[-1].add(e))
        B = chain[-1]
        addable = [v for v in ground if not B.occupies(v.position)]
        if not addable:
            continue
        A = Assignment(tuple(it for it in B.items if rng.random() < 0.5))
        check(A, B, rng.choice(addable))
        # growth-chain gains of the chain's own additions
        values = [F.evaluate(s, fid) for s in chain]
        report.chains += 1
        report.chain_gain_increases += chain_report(values).gain_increases
    return report


@dataclass(frozen=True)
class ChainReport:
    values: tuple[float, ...]
    gains: tuple[float, ...]
    monotone: bool
    gain_increases: int

    @property
    def diminishing(self) -> bool:
        return self.gain_increases == 0

    def to_json(self) -> dict:
        return {
            "values": list(self.values),
            "gains": list(self.gains),
            "monotone": self.monotone,
            "gain_increases": self.gain_increases,
        }


def chain_report(values: Sequence[float]) -> ChainReport:
    """Monotonicity and diminishing gains along one growth chain of scores."""
    values = tuple(values)
    gains = tuple(b - a for a, b in zip(values, values[1:]))
    increases = sum(1 for g0, g1 in zip(gains, gains[1:]) if g1 > g0)
    return ChainReport(values, gains, all(g >= 0 for g in gains), increases)


@dataclass(frozen=True)
class HullPoint:
    cost: float
    value: float
    on_hull: bool
    gap: float


@dataclass(frozen=True)
class HullReport:
    vertices: tuple[tuple[float, float], ...]
    virtual: tuple[tuple[float, float], ...]
    points: tuple[HullPoint, ...]

    def boundary(self, cost: float) -> float:
        return float(_interp([(Fraction(c), Fraction(v)) for c, v in self.vertices], Fraction(cost)))

    def to_json(self) -> dict:
        return {
            "vertices": [list(v) for v in self.vertices],
            "virtual": [list(v) for v in self.virtual],
            "points": [
                {"cost": p.cost, "value": p.value, "on_hull": p.on_hull, "gap": p.gap}
                for p in self.points
            ],
        }

    def gaps_csv(self) -> str:
        lines = ["cost,value,on_hull,gap"]
        lines += [f"{p.cost!r},{p.value!r},{int(p.on_hull)},{p.gap!r}" for p in self.points]
        return "\n".join(lines) + "\n"


def _cross(o, a, b):
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def _interp(hull, x):
    for (x0, y0), (x1, y1) in zip(hull, hull[1:]):
        if x0 <= x <= x1:
            if x1 == x0:
                return max(y0, y1)
            return y0 + (y1 - y0) * (x - x0) / (x1 - x0)
    if len(hull) == 1 and x == hull[0][0]:
        return hull[0][1]
    raise ValueError(f"cost {x} outside hull range")


def upper_hull(points) -> list:
    """Upper boundary of the convex hull, left to right; collinear points are kept."""
    best: dict = {}
    for x, y in points:
        best[x] = max(y, best.get(x, y))
    hull: list = []
    for p in sorted(best.items()):
        while len(hull) >= 2 and _cross(hull[-2], hull[-1], p) > 0:
            hull.pop()
        hull.append(p)
    return hull


def convex_hull_report(points: Sequence[tuple[float, float]]) -> HullReport:
    """Upper hull of (cost, value) pairs augmented with (0,0), (c_max,0), (c_max,f_max).

    Arithmetic is exact (floats are converted to fractions), so points on the
    boundary get a gap of exactly zero.
    """
    if not points:
        raise DegenerateInput("need at least one point")
    exact = [(Fraction(c), Fraction(v)) for c, v in points]
    if any(c < 0 for c, _ in exact):
        raise DegenerateInput("costs must be nonnegative")
    c_max = max(c for c, _ in exact)
    if c_max == 0:
        raise DegenerateInput("all costs are zero; the hull has no extent")
    f_max = max(v for _, v in exact)
    virtual = [(Fraction(0), Fraction(0)), (c_max, Fraction(0)), (c_max, f_max)]
    hull = upper_hull(exact + virtual)
    out = []
    for (c, v), (cf, vf) in zip(exact, points):
        gap = _interp(hull, c) - v
        out.append(HullPoint(float(cf), float(vf), gap <= 0, float(max(gap, Fraction(0)))))
    return HullReport(
        vertices=tuple((float(x), float(y)) for x, y in hull),
        virtual=tuple((float(x), float(y)) for x, y in virtual),
        points=tuple(out),
    )
