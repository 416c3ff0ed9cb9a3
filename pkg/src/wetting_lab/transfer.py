"""Partition functions and pinned expectations via height-truncated transfer.

The walk bridge of length L with an optional wall at height -j and an optional
pinning potential is summed exactly on a finite height window.  Weights decay
like p(0)^L, far below linear-domain range at large L, so the recursion keeps
a running log scale (equivalently, log-sum-exp with per-step max extraction).

Conventions, fixed once for every operation here and in the oracle:
  * bridges start and end at height 0; a wall at depth j keeps all heights
    >= -j; internally states are shifted so the wall sits at state 0;
  * pinning rewards apply at interior times 1..L-1 only, never at the two
    endpoints;
  * potential levels index absolute heights (level 0 is the start height),
    regardless of the wall depth.

Window truncation is monitored, not assumed: if the top rows (and, for free
bridges, the bottom rows) ever carry a relative mass above ``defect_tol``,
the window is doubled and the sweep rerun; exhausting the doubling budget
raises TruncationError with the partial result attached.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ParameterError, TruncationError
from .kernels import WalkKernel
from .potentials import PinningPotential, make_family

DEFECT_TOL = 1e-12
_STATE_CAP = 1 << 17


def logsumexp(arr: np.ndarray) -> float:
    arr = np.asarray(arr, dtype=float)
    m = arr.max(initial=-math.inf)
    if not math.isfinite(m):
        return -math.inf
    return m + math.log(np.exp(arr - m).sum())


# ---------------------------------------------------------------------------
# table API: one recursion step at a time, log domain
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TransferTable:
    """Log-weights of walled bridges of a fixed length, indexed by end state.

    States are wall-shifted: state s is absolute height s - wall, so the wall
    is always state 0 and ``logw[s]`` is the log weight of paths from the
    start to state s.  Missing states are explicit -inf, never silent zeros.
    """

    length: int
    wall: int
    start: int          # state index of the start height
    h_max: int          # highest state; the window is [0, h_max]
    logw: np.ndarray
    defect_flag: bool
    potential: PinningPotential | None
    defect_tol: float = DEFECT_TOL

    def heights(self) -> np.ndarray:
        return np.arange(self.h_max + 1) - self.wall


def _state_eps(wall: int, n: int, pot: PinningPotential | None) -> np.ndarray:
    eps = np.zeros(n)
    if pot is not None and wall < n:
        eps[wall:] = pot.eps_array(n - wall)
    return eps


def initial_table(
    kernel: WalkKernel,
    *,
    wall: int = 0,
    pot: PinningPotential | None = None,
    h_max: int | None = None,
    defect_tol: float = DEFECT_TOL,
) -> TransferTable:
    """Length-1 table: exactly the kernel row from the start state."""
    if wall < 0:
        raise ParameterError("wall depth must be a nonnegative integer")
    if h_max is None:
        h_max = max(4 * kernel.max_step, wall + 4 * kernel.max_step, 16)
    if h_max < kernel.max_step:
        raise ParameterError("h_max must be at least the kernel max_step")
    n = h_max + 1
    start = wall
    logw = np.full(n, -math.inf)
    for k, lp in zip(kernel.offsets, kernel.log_probs):
        s = start + k
        if 0 <= s < n:
            logw[s] = lp
    return TransferTable(
        length=1, wall=wall, start=start, h_max=h_max, logw=logw,
        defect_flag=False, potential=pot, defect_tol=defect_tol,
    )


def transfer_step(table: TransferTable, kernel: WalkKernel) -> TransferTable:
    """Extend by one step; the previous endpoint becomes interior and is
    weighted by its pinning reward."""
    if table.h_max < kernel.max_step:
        raise ParameterError("h_max must be at least the kernel max_step")
    n = table.h_max + 1
    a = table.logw + _state_eps(table.wall, n, table.potential)
    out = np.full(n, -math.inf)
    stack = []
    for k, lp in zip(kernel.offsets, kernel.log_probs):
        # state z feeds state z - k with weight p(k)
        shifted = np.full(n, -math.inf)
        if k >= 0:
            shifted[: n - k] = a[k:] + lp
        else:
            shifted[-k:] = a[: n + k] + lp
        stack.append(shifted)
    big = np.vstack(stack)
    m = big.max(axis=0)
    good = np.isfinite(m)
    out[good] = m[good] + np.log(np.exp(big[:, good] - m[good]).sum(axis=0))
    # relative mass near the truncation edge
    mm = out.max()
    defect = table.defect_flag
    if math.isfinite(mm):
        w = np.exp(out - mm)
        defect = defect or (
            w[n - kernel.max_step:].sum() / w.sum() > table.defect_tol
        )
    return replace(table, length=table.length + 1, logw=out, defect_flag=defect)


# ---------------------------------------------------------------------------
# sweep engine: whole length profiles in one pass, scaled linear domain
# ---------------------------------------------------------------------------


@dataclass
class _Window:
    base: int      # absolute height of state 0
    n: int         # state count
    start: int
    end: int
    walled: bool


def _make_window(kernel: WalkKernel, L: int, wall: int | None,
                 pot: PinningPotential | None, grow: int) -> _Window:
    m = kernel.max_step
    spread = int(math.ceil(8.0 * math.sqrt(kernel.sigma2 * max(L, 1)))) + 2 * m
    # the window must cover any reachable rewarded level, not just the
    # diffusive range, or a strong high reward could be silently cut off
    if pot is not None and pot.support:
        reach = (L // 2) * m
        spread = max(spread, min(pot.support[-1], reach) + 4 * m)
    spread = max(spread, 4 * m, 16) << grow
    if wall is not None:
        n = wall + spread + 1
        return _Window(base=-wall, n=n, start=wall, end=wall, walled=True)
    n = 2 * spread + 1
    return _Window(base=-spread, n=n, start=spread, end=spread, walled=False)


def _diag_for(window: _Window, pot: PinningPotential | None,
              extra: dict[int, float] | None) -> np.ndarray | None:
    eps = np.zeros(window.n)
    have = False
    if pot is not None:
        idx0 = -window.base  # state of absolute height 0
        hi = min(window.n - idx0, pot.j_max + 1)
        if hi > 0:
            eps[idx0: idx0 + hi] += pot.eps_array(hi)
            have = True
    if extra:
        for h, e in extra.items():
            s = h - window.base
            if 0 <= s < window.n:
                eps[s] += e
                have = True
    return np.exp(eps) if have else None


def _sweep(kernel: WalkKernel, L: int, window: _Window,
           diag: np.ndarray | None, defect_tol: float):
    """Run L steps; return (logZ profile for lengths 1..L, defect flag)."""
    parr = kernel.prob_array()
    mstep = kernel.max_step
    n = window.n
    v = np.zeros(n)
    v[window.start] = 1.0
    scale = 0.0
    logz = np.full(L + 1, -math.inf)
    for t in range(1, L + 1):
        u = v if (diag is None or t == 1) else v * diag
        v = np.convolve(u, parr, mode="same")
        m = float(v.max())
        if m <= 0.0:
            return logz, False  # every path died inside the window
        v /= m
        scale += math.log(m)
        tot = float(v.sum())
        edge = float(v[n - mstep:].sum())
        if not window.walled:
            edge = max(edge, float(v[:mstep].sum()))
        if edge / tot > defect_tol:
            return logz, True
        ve = float(v[window.end])
        logz[t] = scale + math.log(ve) if ve > 0.0 else -math.inf
    return logz, False


def partition_profile(
    kernel: WalkKernel,
    L_max: int,
    *,
    wall: int | None = None,
    pot: PinningPotential | None = None,
    extra_eps: dict[int, float] | None = None,
    defect_tol: float = DEFECT_TOL,
) -> np.ndarray:
    """log Z for every length 1..L_max in one pass (entry 0 is unused -inf)."""
    if L_max < 1:
        raise ParameterError("L_max must be at least 1")
    if wall is not None and wall < 0:
        raise ParameterError("wall depth must be nonnegative")
    last = None
    for grow in range(8):
        window = _make_window(kernel, L_max, wall, pot, grow)
        if window.n > _STATE_CAP:
            break
        diag = _diag_for(window, pot, extra_eps)
        logz, defect = _sweep(kernel, L_max, window, diag, defect_tol)
        last = logz
        if not defect:
            return logz
    raise TruncationError(
        f"window doubling exhausted at L_max={L_max}", partial=last
    )


def log_partition(
    kernel: WalkKernel,
    L: int,
    wall: int | None = None,
    pot: PinningPotential | None = None,
    *,
    defect_tol: float = DEFECT_TOL,
) -> float:
    """log of the bridge partition function with optional wall and potential."""
    return float(partition_profile(
        kernel, L, wall=wall, pot=pot, defect_tol=defect_tol)[L])


def pinned_expectation(kernel: WalkKernel, L: int, j: int, eps: float) -> float:
    """E[e^{eps N}] for the walled bridge, N = interior contacts with height 0."""
    if L < 2:
        raise ParameterError("pinned expectation needs L >= 2")
    if eps == 0.0:
        return 1.0
    pot = make_family("single", j=0, amplitude=eps)
    num = log_partition(kernel, L, wall=j, pot=pot)
    den = log_partition(kernel, L, wall=j)
    return math.exp(num - den)


def zero_contact_moment(kernel: WalkKernel, L: int, b: float) -> float:
    """E[e^{b sigma N / sqrt(L)}] for the unconstrained bridge."""
    if L < 2:
        raise ParameterError("needs L >= 2")
    if b < 0:
        raise ParameterError("b must be nonnegative")
    if b == 0.0:
        return 1.0
    eps = b * kernel.sigma / math.sqrt(L)
    num = float(partition_profile(kernel, L, wall=None,
                                  extra_eps={0: eps})[L])
    den = float(partition_profile(kernel, L, wall=None)[L])
    return math.exp(num - den)


def _free_vector(kernel: WalkKernel, steps: int, half_width: int,
                 defect_tol: float):
    """Endpoint distribution (unnormalised, scaled) of a free walk from 0."""
    n = 2 * half_width + 1
    parr = kernel.prob_array()
    v = np.zeros(n)
    v[half_width] = 1.0
    scale = 0.0
    for _ in range(steps):
        v = np.convolve(v, parr, mode="same")
        m = float(v.max())
        v /= m
        scale += math.log(m)
    mstep = kernel.max_step
    edge = max(float(v[:mstep].sum()), float(v[n - mstep:].sum()))
    return v, scale, edge / float(v.sum()) > defect_tol


def midpoint_prob(kernel: WalkKernel, L: int, j: int,
                  *, defect_tol: float = DEFECT_TOL) -> float:
    """P(both heights at times floor(L/2), floor(L/2)+1 stay >= -j) under the
    unconstrained bridge measure."""
    if L < 2:
        raise ParameterError("needs L >= 2")
    if j < 0:
        raise ParameterError("j must be nonnegative")
    if j >= L * kernel.max_step:
        return 1.0
    mid = L // 2
    parr = kernel.prob_array()
    for grow in range(8):
        w = int(math.ceil(8.0 * math.sqrt(kernel.sigma2 * L)))
        w = (max(w, j + 2 * kernel.max_step, 16) + 2 * kernel.max_step) << grow
        if 2 * w + 1 > _STATE_CAP:
            break
        f, _, d1 = _free_vector(kernel, mid, w, defect_tol)
        g, _, d2 = _free_vector(kernel, L - mid - 1, w, defect_tol)
        if d1 or d2:
            continue
        heights = np.arange(2 * w + 1) - w
        mask = heights >= -j
        # both vectors carry the same dropped log scales, which cancel here
        den = float(f @ np.convolve(g, parr, mode="same"))
        num = float((f * mask) @ (np.convolve(g * mask, parr, mode="same")))
        return num / den
    raise TruncationError(f"midpoint window exhausted at L={L}, j={j}")


# ---------------------------------------------------------------------------
# free energy
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class FreeEnergyEstimate:
    value: float          # primary: max(0, log top eigenvalue), window-doubled
    eigenvalue: float
    residual: float
    eig_converged: bool
    h_max: int
    cross_raw: float      # (log Z_{2L} - log Z_L)/L, not floored
    cross: float          # floored at 0
    gap: float
    flagged: bool
    trace: tuple[str, ...]


def free_energy(
    kernel: WalkKernel,
    pot: PinningPotential,
    tol: float = 1e-4,
    *,
    L_cross: int = 4096,
    h0: int | None = None,
    h_cap: int = 1 << 13,
    eig_tol: float = 1e-10,
) -> FreeEnergyEstimate:
    """Growth rate of the walled, potential-weighted bridge ensemble.

    Primary estimator: log of the top eigenvalue of the symmetrised pinned
    operator on [0, h_max], h_max doubled until the floored value moves by
    less than ``tol``.  The floor at 0 is sound: the potential is nonnegative
    so the true rate is >= 0, and truncation approaches it from below in the
    delocalized phase.  Cross-check: two-point slope of log Z at L_cross.
    Disagreement beyond 10*tol flags the result but still returns it.
    """
    from .spectral import pinned_operator, top_eigenvalue  # deferred: cycle

    trace = []
    if pot.exceeds_log2:
        j_star = pot.log2_excess[0]
        trace.append(
            f"reward at level {j_star} exceeds log 2; stuck-at-level path "
            f"already gives rate >= {math.log(kernel.prob(0)) + pot.eps[j_star]:.6g}"
        )
    h = h0 if h0 is not None else max(64, 4 * (pot.j_max + 1), 8 * kernel.max_step)
    prev = None
    eig = None
    while True:
        op = pinned_operator(kernel, pot, h)
        eig = top_eigenvalue(op, tol=eig_tol)
        f_h = max(0.0, math.log(eig.value))
        trace.append(f"h_max={h}: lambda={eig.value:.12g} residual={eig.residual:.3g}")
        if prev is not None and abs(f_h - prev) < tol:
            break
        if 2 * h > h_cap:
            trace.append("window cap reached before eigenvalue stabilised")
            break
        prev = f_h
        h *= 2
    primary = max(0.0, math.log(eig.value))
    prof = partition_profile(kernel, 2 * L_cross, wall=0, pot=pot)
    cross_raw = float(prof[2 * L_cross] - prof[L_cross]) / L_cross
    cross = max(0.0, cross_raw)
    gap = abs(primary - cross)
    return FreeEnergyEstimate(
        value=primary,
        eigenvalue=eig.value,
        residual=eig.residual,
        eig_converged=eig.converged,
        h_max=h,
        cross_raw=cross_raw,
        cross=cross,
        gap=gap,
        flagged=gap > 10 * tol,
        trace=tuple(trace),
    )
