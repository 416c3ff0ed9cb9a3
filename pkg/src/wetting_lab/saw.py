"""Self-avoiding lattice paths weighted by length, with certified truncation.

Vertices live on the half-integer-shifted lattice (Z + 1/2) x Z; internally
the x coordinate is doubled so every vertex is an integer pair (u, y) with u
odd.  A path is a vertex-distinct chain of unit edges; its Boltzmann weight
is exp(-beta * length).

Everything here is enumerated by depth-first search up to a length budget
(minimal length + excess cap).  The discarded mass is bounded rigorously by
the crude path count: at most 4 * 3^(m-1) paths of length m leave any fixed
vertex, so the tail of the weight series is geometric once beta > log 3.
Ensembles therefore refuse to exist below BETA_MIN = log 3 + margin, and
every partition value is returned as (partial sum, certified interval).

Conventions: the span-L ensemble joins (1/2, 0) to (L - 1/2, 0); interior
contacts with height j are vertices (i + 1/2, j) for i in [1, L-2]; external
contacts are height-0 vertices in columns i outside [0, L-1]; horizontal
contacts are horizontal edges at the given height.  Step order is fixed to
E, N, W, S so enumeration streams are reproducible byte for byte.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import permutations

import numpy as np

from .errors import ParameterError, RefusalError
from .kernels import make_sos, sos_normalizer
from .potentials import PinningPotential

BETA_MARGIN = 0.5
BETA_MIN = math.log(3.0) + BETA_MARGIN

# doubled-x steps, lexicographic E, N, W, S
_STEPS = ((2, 0), (0, 1), (-2, 0), (0, -1))


@dataclass(frozen=True)
class LatticePath:
    """Vertex chain in doubled-x coordinates (u odd <-> x = u/2)."""

    vertices: tuple[tuple[int, int], ...]

    @property
    def length(self) -> int:
        return len(self.vertices) - 1

    def edges(self) -> tuple[tuple[tuple[int, int], tuple[int, int]], ...]:
        return tuple(zip(self.vertices[:-1], self.vertices[1:]))

    def validate(self) -> None:
        vs = self.vertices
        if len(vs) < 2:
            raise ParameterError("a path has at least one edge")
        if len(set(vs)) != len(vs):
            raise ParameterError("vertices must be distinct (self-avoidance)")
        for (u1, y1), (u2, y2) in self.edges():
            if u1 % 2 == 0 or u2 % 2 == 0:
                raise ParameterError("x coordinates must be half-integers")
            if not ((abs(u1 - u2) == 2 and y1 == y2)
                    or (u1 == u2 and abs(y1 - y2) == 1)):
                raise ParameterError("consecutive vertices must be unit steps")

    def to_line(self) -> str:
        """Dump format: 'u0,y0;u1,y1;...' with x doubled to stay integral."""
        return ";".join(f"{u},{y}" for u, y in self.vertices)


def _to_doubled(p: tuple[float, int]) -> tuple[int, int]:
    u = int(round(2 * p[0]))
    if u % 2 == 0:
        raise ParameterError(f"x coordinate {p[0]} is not a half-integer")
    return u, int(p[1])


def _manhattan(a: tuple[int, int], b: tuple[int, int]) -> int:
    return abs(a[0] - b[0]) // 2 + abs(a[1] - b[1])


def enumerate_saw(x: tuple[float, int], y: tuple[float, int],
                  excess_cap: int):
    """Yield every self-avoiding path from x to y with length at most
    minimal + excess_cap, in depth-first E, N, W, S order."""
    if excess_cap < 0:
        raise ParameterError("excess_cap must be nonnegative")
    start, goal = _to_doubled(x), _to_doubled(y)
    if start == goal:
        raise ParameterError("endpoints must differ")
    max_len = _manhattan(start, goal) + excess_cap
    trail = [start]
    seen = {start}

    def rec():
        cur = trail[-1]
        if cur == goal:
            yield LatticePath(vertices=tuple(trail))
            return
        rem = max_len - (len(trail) - 1)
        for du, dy in _STEPS:
            nxt = (cur[0] + du, cur[1] + dy)
            if nxt in seen or _manhattan(nxt, goal) > rem - 1:
                continue
            seen.add(nxt)
            trail.append(nxt)
            yield from rec()
            trail.pop()
            seen.remove(nxt)

    yield from rec()


# ---------------------------------------------------------------------------
# certified partition sums
# ---------------------------------------------------------------------------


def saw_tail_bound(min_excluded_len: int, beta: float,
                   eps_max: float = 0.0) -> float:
    """Bound on the discarded weight: per-vertex rewards of at most eps_max
    inflate a length-m path by e^{eps_max (m+1)}, and at most 4*3^{m-1}
    paths of length m leave a fixed vertex."""
    x = 3.0 * math.exp(-(beta - eps_max))
    if x >= 1.0:
        raise RefusalError(
            f"no tail certificate: need beta - eps_max > log 3, "
            f"got beta={beta}, eps_max={eps_max}"
        )
    return math.exp(eps_max) * (4.0 / 3.0) * x ** min_excluded_len / (1.0 - x)


@dataclass(frozen=True)
class TruncatedEnsemble:
    """Partial partition sum plus a rigorous bound on what the cap discarded."""

    L: int
    beta: float
    excess_cap: int
    partial_sum: float
    tail_cert: float

    def __post_init__(self):
        if self.beta < BETA_MIN:
            raise RefusalError(
                f"beta={self.beta} below BETA_MIN={BETA_MIN:.4f}; "
                "the truncation cannot be certified"
            )

    @property
    def lower(self) -> float:
        return self.partial_sum

    @property
    def upper(self) -> float:
        return self.partial_sum + self.tail_cert

    @property
    def interval(self) -> tuple[float, float]:
        return (self.lower, self.upper)


def _sum_paths(L: int, beta: float, excess_cap: int, *, min_y=None,
               avoid_level=None, pot: PinningPotential | None = None,
               eps_ext: float = 0.0, visitor=None) -> float:
    """DFS accumulation of path weights for the span-L ensemble.

    With a visitor, each complete path triggers visitor(vertices, weight)
    where weight already includes all reward factors.  Returns the total.
    """
    start, goal = (1, 0), (2 * L - 1, 0)
    max_len = (L - 1) + excess_cap
    step_w = math.exp(-beta)
    eps = pot.eps if pot is not None else ()
    j_top = len(eps) - 1
    ext_w = math.exp(eps_ext) if eps_ext else 1.0
    u_lo, u_hi = 3, 2 * L - 3  # interior contact columns (doubled)
    total = 0.0
    trail = [start] if visitor is not None else None
    seen = {start}

    def arrival_factor(u: int, y: int) -> float:
        f = 1.0
        if 0 <= y <= j_top and u_lo <= u <= u_hi:
            f *= math.exp(eps[y])
        if eps_ext and y == 0 and (u < 1 or u > 2 * L - 1):
            f *= ext_w
        return f

    def rec(cur, used, w):
        nonlocal total
        if cur == goal:
            total += w
            if visitor is not None:
                visitor(tuple(trail), w)
            return
        rem = max_len - used
        cu, cy = cur
        for du, dy in _STEPS:
            nxt = (cu + du, cy + dy)
            nu, ny = nxt
            if min_y is not None and ny < min_y:
                continue
            if avoid_level is not None and ny == avoid_level and nxt != goal:
                continue
            if nxt in seen or _manhattan(nxt, goal) > rem - 1:
                continue
            seen.add(nxt)
            if trail is not None:
                trail.append(nxt)
            rec(nxt, used + 1, w * step_w * arrival_factor(nu, ny))
            if trail is not None:
                trail.pop()
            seen.remove(nxt)

    rec(start, 0, 1.0)
    return total


def saw_partition(
    L: int,
    beta: float,
    excess_cap: int,
    constraint: str = "none",
    pot: PinningPotential | None = None,
    *,
    avoid_level: int | None = None,
    eps_ext: float = 0.0,
) -> TruncatedEnsemble:
    """Certified partition sum of the span-L ensemble.

    constraint: 'none', 'wall' (all heights >= 0), or 'avoid' (no interior
    vertex at ``avoid_level``).  Rewards from ``pot`` weight interior
    contacts; ``eps_ext`` weights external height-0 contacts.
    """
    if L < 2:
        raise ParameterError("span L must be at least 2")
    if beta < BETA_MIN:
        raise RefusalError(
            f"beta={beta} below BETA_MIN={BETA_MIN:.4f}: refusing, "
            "no truncation certificate is possible"
        )
    if constraint not in ("none", "wall", "avoid"):
        raise ParameterError(f"unknown constraint {constraint!r}")
    if constraint == "avoid" and avoid_level is None:
        raise ParameterError("'avoid' constraint needs avoid_level")
    eps_max = max(
        max(pot.eps) if pot is not None and pot.eps else 0.0,
        eps_ext,
        0.0,
    )
    tail = saw_tail_bound((L - 1) + excess_cap + 1, beta, eps_max)
    part = _sum_paths(
        L, beta, excess_cap,
        min_y=0 if constraint == "wall" else None,
        avoid_level=avoid_level if constraint == "avoid" else None,
        pot=pot, eps_ext=eps_ext,
    )
    return TruncatedEnsemble(L=L, beta=beta, excess_cap=excess_cap,
                             partial_sum=part, tail_cert=tail)


def grand_canonical(L: int, beta: float, excess_cap: int) -> TruncatedEnsemble:
    """Partition sum over paths from (1/2, 0) ending anywhere in column
    L - 1/2 (free endpoint height)."""
    if L < 2:
        raise ParameterError("span L must be at least 2")
    if beta < BETA_MIN:
        raise RefusalError(f"beta={beta} below BETA_MIN={BETA_MIN:.4f}")
    start = (1, 0)
    goal_u = 2 * L - 1
    max_len = (L - 1) + excess_cap
    step_w = math.exp(-beta)
    total = 0.0
    seen = {start}

    def rec(cur, used, w):
        nonlocal total
        cu, cy = cur
        if cu == goal_u:
            total += w
        rem = max_len - used
        for du, dy in _STEPS:
            nxt = (cu + du, cy + dy)
            if nxt in seen or abs(goal_u - nxt[0]) // 2 > rem - 1:
                continue
            seen.add(nxt)
            rec(nxt, used + 1, w * step_w)
            seen.remove(nxt)

    rec(start, 0, 1.0)
    tail = saw_tail_bound((L - 1) + excess_cap + 1, beta)
    return TruncatedEnsemble(L=L, beta=beta, excess_cap=excess_cap,
                             partial_sum=total, tail_cert=tail)


# ---------------------------------------------------------------------------
# contact statistics and regularity
# ---------------------------------------------------------------------------


def contacts(path: LatticePath, j: int, L: int) -> tuple[int, int, int]:
    """(interior vertex contacts at height j, horizontal edges at height j,
    external height-0 contacts)."""
    n_j = 0
    n_ext = 0
    for u, y in path.vertices:
        if y == j and 3 <= u <= 2 * L - 3:
            n_j += 1
        if y == 0 and (u < 1 or u > 2 * L - 1):
            n_ext += 1
    n_hat = sum(1 for (a, b) in path.edges()
                if a[1] == j and b[1] == j)
    return n_j, n_hat, n_ext


def is_regular(path: LatticePath, u: int, L: int) -> bool:
    """True when the path crosses the vertical line x=u exactly once for
    interior u in [1, L-1], or not at all for u in {0, L}.

    Vertices sit on half-integer columns, so intersections with the line are
    counted through the horizontal edges that cross it.
    """
    if not (0 <= u <= L):
        raise ParameterError("u must lie in [0, L]")
    crossings = 0
    for (u1, y1), (u2, y2) in path.edges():
        if y1 == y2 and min(u1, u2) == 2 * u - 1:
            crossings += 1
    if u in (0, L):
        return crossings == 0
    return crossings == 1


def _ratio_interval(num: float, den: float, tail_num: float,
                    tail_den: float, cap: float | None = None):
    lo = num / (den + tail_den)
    hi = (num + tail_num) / den
    if cap is not None:
        hi = min(hi, cap)
    return lo, hi


@dataclass(frozen=True)
class RegularityStats:
    """Ensemble statistics under the span-L weight, with certified intervals.

    Each entry is (lower, point, upper); the point estimate is the truncated
    ratio and the interval accounts for both tails.
    """

    L: int
    beta: float
    excess_cap: int
    partial_sum: float
    tail_cert: float
    not_regular: dict[int, tuple[float, float, float]]
    first_edge_vertical: tuple[float, float, float]
    ext_moment: tuple[float, float, float]
    a_ext: float


def regularity_stats(L: int, beta: float, excess_cap: int,
                     a_ext: float = 0.1,
                     u_list: tuple[int, ...] | None = None) -> RegularityStats:
    """Non-regularity probabilities, first-edge orientation, and the external
    contact moment E[e^{a N_ext}] in the unconstrained span-L ensemble."""
    if u_list is None:
        u_list = (0, L // 2, L)
    sums = {u: 0.0 for u in u_list}
    fv = 0.0
    ext = 0.0

    def visit(vertices, w):
        nonlocal fv, ext
        p = LatticePath(vertices=vertices)
        for u in u_list:
            if not is_regular(p, u, L):
                sums[u] += w
        if vertices[0][0] == vertices[1][0]:
            fv += w
        n_ext = sum(1 for (uu, yy) in vertices
                    if yy == 0 and (uu < 1 or uu > 2 * L - 1))
        ext += w * math.exp(a_ext * n_ext)

    total = _sum_paths(L, beta, excess_cap, visitor=visit)
    tail0 = saw_tail_bound((L - 1) + excess_cap + 1, beta)
    tail_a = saw_tail_bound((L - 1) + excess_cap + 1, beta, eps_max=a_ext)
    nr = {
        u: (_ratio_interval(sums[u], total, tail0, tail0, cap=1.0)[0],
            sums[u] / total,
            _ratio_interval(sums[u], total, tail0, tail0, cap=1.0)[1])
        for u in u_list
    }
    fvi = _ratio_interval(fv, total, tail0, tail0, cap=1.0)
    exti = _ratio_interval(ext, total, tail_a, tail0)
    return RegularityStats(
        L=L, beta=beta, excess_cap=excess_cap, partial_sum=total,
        tail_cert=tail0, not_regular=nr,
        first_edge_vertical=(fvi[0], fv / total, fvi[1]),
        ext_moment=(exti[0], ext / total, exti[1]),
        a_ext=a_ext,
    )


# ---------------------------------------------------------------------------
# minimal-horizontal identity
# ---------------------------------------------------------------------------


def _run_profile_counts(L: int, cap: int) -> dict[int, int]:
    """Exact count of minimal-horizontal paths by excess length.

    Such paths are signed vertical runs d_0..d_{L-1} (one per column, any
    sign, self-avoidance automatic) with sum d_i = 0; excess = sum |d_i|.
    Dynamic program over (height, used budget) with integer counts.
    """
    states = {(0, 0): 1}
    for _ in range(L):
        new: dict[tuple[int, int], int] = {}
        for (s, u), cnt in states.items():
            room = cap - u
            for d in range(-room, room + 1):
                s2, u2 = s + d, u + abs(d)
                if abs(s2) > cap - u2:  # can no longer return to height 0
                    continue
                key = (s2, u2)
                new[key] = new.get(key, 0) + cnt
        states = new
    out: dict[int, int] = {}
    for (s, u), cnt in states.items():
        if s == 0:
            out[u] = out.get(u, 0) + cnt
    return out


def _runs_tail_bound(L: int, cap: int, beta: float) -> float:
    """Absolute bound on the weight of minimal-horizontal paths with excess
    v > cap: counts are at most the signed compositions 2^L * C(v+L-1, L-1),
    each path weighing e^{-beta (L-1+v)}; the crude all-paths bound is used
    when it is smaller."""
    x = math.exp(-beta)
    v = cap + 1
    term = (2.0 ** L) * math.comb(v + L - 1, L - 1) * x ** v
    total = 0.0
    while True:
        ratio = x * (v + L) / (v + 1)
        if ratio < 1.0:
            total += term / (1.0 - ratio)
            break
        total += term
        v += 1
        term = (2.0 ** L) * math.comb(v + L - 1, L - 1) * x ** v
        if term == 0.0:
            break
    total *= math.exp(-beta * (L - 1))
    generic = saw_tail_bound(L - 1 + cap + 1, beta)
    return min(total, generic)


@dataclass(frozen=True)
class IdentityReport:
    """Both sides of the minimal-horizontal correspondence at one (L, beta)."""

    L: int
    beta: float
    lhs: TruncatedEnsemble     # path-side enumeration with certificate
    rhs: float                 # e^{-beta(L-1)} Z_beta^L Z_{0,L} via kernels+transfer
    rhs_err: float
    gap: float

    @property
    def agrees(self) -> bool:
        return (self.lhs.lower - self.rhs_err <= self.rhs
                <= self.lhs.upper + self.rhs_err)

    @property
    def relative_width(self) -> float:
        return self.lhs.tail_cert / self.lhs.partial_sum


def minimal_horizontal_identity(L: int, beta: float,
                                rel_target: float = 1e-7,
                                cap: int | None = None) -> IdentityReport:
    """Compare the minimal-horizontal path sum against the walk formula.

    Left side: exact enumeration of minimal-horizontal paths grouped by
    excess vertical length, truncated with a composition-count certificate.
    Right side: the closed-form reduction to the geometric-walk bridge,
    evaluated through the kernel and transfer modules.
    """
    from .transfer import log_partition

    if L < 2:
        raise ParameterError("span L must be at least 2")
    if beta < BETA_MIN:
        raise RefusalError(f"beta={beta} below BETA_MIN={BETA_MIN:.4f}")
    scale = math.exp(-beta * (L - 1))
    if cap is None:
        cap = 4
        while cap < 64:
            counts = _run_profile_counts(L, cap)
            part = sum(c * math.exp(-beta * v) for v, c in counts.items())
            tail = _runs_tail_bound(L, cap, beta)
            if tail / (scale * part) <= rel_target:
                break
            cap += 2
    else:
        counts = _run_profile_counts(L, cap)
        part = sum(c * math.exp(-beta * v) for v, c in counts.items())
        tail = _runs_tail_bound(L, cap, beta)
    lhs = TruncatedEnsemble(L=L, beta=beta, excess_cap=cap,
                            partial_sum=scale * part, tail_cert=tail)
    kernel = make_sos(beta, tail_tol=1e-15)
    log_z = log_partition(kernel, L)
    rhs = math.exp(-beta * (L - 1) + L * math.log(sos_normalizer(beta)) + log_z)
    rhs_err = rhs * (2.0 * L * kernel.truncation_defect + 1e-13)
    return IdentityReport(L=L, beta=beta, lhs=lhs, rhs=rhs, rhs_err=rhs_err,
                          gap=abs(0.5 * (lhs.lower + lhs.upper) - rhs))


# ---------------------------------------------------------------------------
# permutation excess length
# ---------------------------------------------------------------------------

_PERM_CAP = 9


def excess_length(xs, L: int, pi) -> int:
    """Extra horizontal travel from visiting marked columns in permuted
    order: -L + sum |x_{pi(i+1)} - x_{pi(i)}| with fixed ends 0 and L."""
    xs = list(xs)
    n = len(xs)
    if sorted(pi) != list(range(n)):
        raise ParameterError("pi must be a permutation of range(n)")
    if any(x == 0 for x in xs) or any(xs[i] >= xs[i + 1] for i in range(n - 1)):
        raise ParameterError("points must be strictly increasing and nonzero")
    if xs and xs[-1] >= L:
        raise ParameterError("points must lie left of L")
    order = [0] + [xs[i] for i in pi] + [L]
    return -L + sum(abs(order[i + 1] - order[i]) for i in range(n + 1))


def permutation_sum(xs, L: int, c: float) -> float:
    """Sum of e^{-c * excess} over all orders of visiting the marked columns."""
    xs = np.asarray(list(xs), dtype=float)
    n = xs.size
    if n > _PERM_CAP:
        raise RefusalError(f"permutation sum refuses n > {_PERM_CAP} (n! cost)")
    if n == 0:
        return 1.0
    perms = np.array(list(permutations(range(n))), dtype=np.intp)
    mid = xs[perms]
    aug = np.column_stack([np.zeros(len(perms)), mid,
                           np.full(len(perms), float(L))])
    ell = np.abs(np.diff(aug, axis=1)).sum(axis=1) - L
    return float(np.exp(-c * ell).sum())


def permutation_bound_delta(c: float) -> float:
    """The geometric constant in the bound sum <= (1 + delta)^n."""
    x = math.exp(-c)
    return 2.0 * x / (1.0 - x)
