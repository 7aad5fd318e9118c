"""Independent reference implementations used to freeze expected values.

None of these import the code paths they check: costs are counted by
materializing weights, greedy and brute force are re-derived naively.
"""
from __future__ import annotations

import math
from fractions import Fraction


def _grouped_weights(cin: int, cout: int, groups: int) -> list[tuple[int, int]]:
    in_per, out_per = cin // groups, cout // groups
    return [(o, i) for o in range(cout) for i in range(cin) if i // in_per == o // out_per]


def enumerate_block_cost(c1, c2, h, w, s, t, ge, gp, k=3):
    """(params, madds) by listing every weight index and every output pixel."""
    hidden = Fraction(c1) * Fraction(t)
    assert hidden.denominator == 1
    hidden = int(hidden)
    expansion = _grouped_weights(c1, hidden, ge)
    depthwise = [(c, ky, kx) for c in range(hidden) for ky in range(k) for kx in range(k)]
    projection = _grouped_weights(hidden, c2, gp)

    params = len(expansion) + len(depthwise) + len(projection)

    def macs(weights_per_out: dict[int, int], out_h: int, out_w: int) -> int:
        total = 0
        for _y in range(out_h):
            for _x in range(out_w):
                for fan_in in weights_per_out.values():
                    total += fan_in
        return total

    def fan_in(weights, index=0):
        out: dict[int, int] = {}
        for wgt in weights:
            out[wgt[index]] = out.get(wgt[index], 0) + 1
        return out

    oh, ow = len(range(0, h, s)), len(range(0, w, s))
    madds = macs(fan_in(expansion), h, w) + macs(fan_in(depthwise), oh, ow) + macs(fan_in(projection), oh, ow)
    return params, madds


def coverage_value(weights, cover, chosen) -> float:
    covered = set()
    for e in chosen:
        covered |= set(cover.get(e, ()))
    total = sum(weights)
    return sum(weights[j] for j in sorted(covered)) / total if total else 0.0


def naive_greedy(f, cost_of, overhead, budget, n_positions, n_types, unit_of, stop_nonpositive=False):
    """Eager ratio greedy written from scratch over (position, type) tuples.

    ``f`` maps a frozenset of (position, type) to a score; ``cost_of`` maps an
    element to (params, madds); ``unit_of`` maps an element to its ratio denominator.
    """
    chosen: set = set()
    used = list(overhead)
    while True:
        best = None
        base = f(frozenset(chosen))
        for n in range(n_positions):
            if any(p == n for p, _ in chosen):
                continue
            for l in range(1, n_types + 1):
                e = (n, l)
                p, m = cost_of(e)
                if used[0] + p > budget[0] or used[1] + m > budget[1]:
                    continue
                gain = f(frozenset(chosen | {e})) - base
                u = unit_of(e)
                key = (math.inf, gain) if u == 0 else (gain / u, 0.0)
                if best is None or key > best[0]:
                    best = (key, e, gain)
        if best is None or (stop_nonpositive and best[2] <= 0):
            return frozenset(chosen)
        chosen.add(best[1])
        p, m = cost_of(best[1])
        used[0] += p
        used[1] += m


def recursive_opt(f, cost_of, overhead, budget, n_positions, n_types):
    """Maximum of f over all partial assignments within budget, by recursion over positions."""
    best = [-math.inf]

    def go(n, chosen, params, madds):
        if params > budget[0] or madds > budget[1]:
            return
        if n == n_positions:
            best[0] = max(best[0], f(frozenset(chosen)))
            return
        go(n + 1, chosen, params, madds)
        for l in range(1, n_types + 1):
            p, m = cost_of((n, l))
            go(n + 1, chosen + [(n, l)], params + p, madds + m)

    go(0, [], overhead[0], overhead[1])
    return best[0]


def upper_envelope(points, x):
    """Upper concave envelope at x: best interpolation over all bracketing point pairs."""
    best = -math.inf
    for (x0, y0) in points:
        for (x1, y1) in points:
            if x0 <= x <= x1:
                if x1 == x0:
                    best = max(best, y0, y1)
                else:
                    best = max(best, y0 + (y1 - y0) * (x - x0) / (x1 - x0))
    return best
