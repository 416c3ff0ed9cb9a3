"""Delocalization certificates, threshold bracketing, and phase scans.

The delocalization engine follows a scale-doubling induction.  For a single
pinned level j with reward kappa = b sigma^2/(j+1) and wall depth j, define
scales L_n = 2^n L_0 with L_0 = (C/2)(j+1)^2/sigma^2.  If

  * the ratio Z_pinned/Z_free stays <= 1+delta for every L <= L_1 (base case),
  * 3/4 (1+delta)^2 e^{2 kappa} <= 1+delta (scalar step inequality), and
  * the unconstrained bridge puts probability <= 3/4 on staying above the
    wall at the two middle times, for the L in each doubling window,

then the ratio bound propagates to every larger scale.  The midpoint bound
is verified on a sampled grid (dyadic by default, densifiable, exhaustive on
request), so the verdict is always labelled empirical and carries the largest
scale actually covered.  Localized verdicts come only from the spectral
engine.  Multi-level potentials are first split into single-level problems
with weights rho_j; the split needs sum rho_j <= 1, which is checked, never
assumed.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from functools import lru_cache

from .certificates import (
    Certificate,
    DELOCALIZED_EMPIRICAL,
    Evidence,
    LOCALIZED,
    UNDETERMINED,
)
from .errors import ParameterError
from .kernels import WalkKernel, parse_kernel_spec
from .potentials import PinningPotential, decouple, make_family, parse_potential_spec, rho
from .spectral import localization_certificate
from .transfer import free_energy, midpoint_prob, partition_profile

# Shipped midpoint calibration constant: smallest C (on a half-integer grid)
# with midpoint_prob <= 3/4 across the tested (sigma2, j) grid; derived by
# scripts/calibrate_midpoint_constant.py, not assumed.
SCALE_CONSTANT = 8.0
_SLACK = 1e-12


def base_scale(j: int, sigma2: float, C: float = SCALE_CONSTANT) -> int:
    """L_1 = C (j+1)^2 / sigma^2, the end of the base-case window."""
    return max(2, int(math.ceil(C * (j + 1) ** 2 / sigma2)))


@lru_cache(maxsize=16384)
def _midpoint_cached(kernel: WalkKernel, L: int, j: int) -> float:
    return midpoint_prob(kernel, L, j)


@dataclass(frozen=True)
class BaseCaseResult:
    passed: bool
    max_ratio: float
    worst_L: int
    L1: int
    covered_to: int   # < L1 when capped by the caller's budget


def base_case_check(
    kernel: WalkKernel,
    j: int,
    b: float,
    delta: float,
    *,
    C: float = SCALE_CONSTANT,
    L_cap: int | None = None,
) -> BaseCaseResult:
    """Ratio Z_pinned/Z_free <= 1+delta for every L up to L_1 (or the cap)."""
    if b < 0 or delta <= 0:
        raise ParameterError("need b >= 0 and delta > 0")
    eps = b * kernel.sigma2 / (j + 1)
    L1 = base_scale(j, kernel.sigma2, C)
    top = L1 if L_cap is None else min(L1, L_cap)
    pin = partition_profile(kernel, top, wall=j,
                            pot=make_family("single", j=0, amplitude=eps))
    free = partition_profile(kernel, top)
    best, worst = 0.0, 1
    for L in range(1, top + 1):
        r = math.exp(pin[L] - free[L])
        if r > best:
            best, worst = r, L
    return BaseCaseResult(
        passed=best <= 1.0 + delta + _SLACK,
        max_ratio=best,
        worst_L=worst,
        L1=L1,
        covered_to=top,
    )


def scalar_step_bound(delta: float, eps: float) -> float:
    """The doubling-step scalar: must be <= 1+delta for the induction."""
    return 0.75 * (1.0 + delta) ** 2 * math.exp(2.0 * eps)


def max_feasible_delta(eps: float) -> float:
    """Largest delta with scalar_step_bound(delta, eps) <= 1+delta."""
    return 4.0 / (3.0 * math.exp(2.0 * eps)) - 1.0


def _doubling_samples(L_lo: int, L_hi: int, density: int,
                      exhaustive: bool) -> list[int]:
    """Scales inside (L_lo, L_hi] to probe; always includes the endpoint."""
    if exhaustive:
        return list(range(L_lo + 1, L_hi + 1))
    out = {L_hi, L_lo + 1}
    for k in range(1, density):
        out.add(min(L_hi, max(L_lo + 1, round(L_lo * 2 ** (k / density)))))
    return sorted(out)


@dataclass(frozen=True)
class DoublingStepResult:
    passed: bool
    n: int
    scalar_value: float
    samples: tuple[int, ...]
    worst_midpoint: float
    coverage: str


def doubling_step_check(
    kernel: WalkKernel,
    j: int,
    b: float,
    delta: float,
    n: int,
    *,
    C: float = SCALE_CONSTANT,
    density: int = 3,
    exhaustive: bool = False,
    L_cap: int | None = None,
) -> DoublingStepResult:
    """One induction step: scalar inequality plus sampled midpoint bounds on
    the n-th doubling window."""
    if n < 1:
        raise ParameterError("doubling steps start at n=1")
    eps = b * kernel.sigma2 / (j + 1)
    L0 = 0.5 * C * (j + 1) ** 2 / kernel.sigma2
    L_lo = int(math.ceil(L0 * 2 ** n))
    L_hi = int(math.ceil(L0 * 2 ** (n + 1)))
    if L_cap is not None:
        L_hi = min(L_hi, L_cap)
    scalar = scalar_step_bound(delta, eps)
    ok = scalar <= 1.0 + delta + _SLACK
    samples = tuple(s for s in _doubling_samples(L_lo, L_hi, density, exhaustive)
                    if s >= 2)
    worst = 0.0
    for L in samples:
        p = _midpoint_cached(kernel, L, j)
        worst = max(worst, p)
        if p > 0.75 + _SLACK:
            ok = False
    coverage = "exhaustive" if exhaustive else f"sampled:{len(samples)}"
    return DoublingStepResult(
        passed=ok, n=n, scalar_value=scalar, samples=samples,
        worst_midpoint=worst, coverage=coverage,
    )


def _select_delta(delta_lo: float, delta_hi: float) -> float:
    # midpoint of the feasible window: deterministic and strictly inside
    return 0.5 * (delta_lo + delta_hi)


def delocalization_certificate(
    kernel: WalkKernel,
    pot: PinningPotential,
    b: float,
    delta: float | None = None,
    L_max: int = 4096,
    *,
    C: float = SCALE_CONSTANT,
    density: int = 3,
    exhaustive: bool = False,
) -> Certificate:
    """Run the full pipeline: split by level, certify each level's doubling
    chain up to L_max, then check the recombined ratio directly.

    Every recorded inequality must pass for the verdict
    ``delocalized_empirical`` (valid up to L_max); any failure, an infeasible
    delta window, or decoupling weights above 1 yield ``undetermined`` with
    the failing scale recorded.
    """
    if b <= 0:
        raise ParameterError("b must be positive")
    sigma2 = kernel.sigma2
    params = {
        "kernel": kernel.spec_string(),
        "pot": pot.spec_string(),
        "sigma2": sigma2,
        "b": b,
        "C": C,
        "L_max": L_max,
        "coverage": "exhaustive" if exhaustive else f"dyadic+{density}",
    }
    evidence: list[Evidence] = []
    notes: list[str] = []

    if pot.exceeds_log2:
        return Certificate(
            verdict=UNDETERMINED, evidence=(), params=params,
            notes=("rewards above log 2 cannot be delocalized; "
                   "run the spectral engine instead",),
        )

    dec = decouple(pot, b, sigma2)
    weight_sum = dec.rho_sum + pot.tail_bound / (b * sigma2)
    evidence.append(Evidence(
        scale=0, check="decoupling_weight_sum", measured=weight_sum,
        threshold=1.0, passed=weight_sum <= 1.0 + _SLACK,
        detail=f"retained={dec.rho_sum:.6g}, tail<={pot.tail_bound / (b * sigma2):.3g}",
    ))
    if weight_sum > 1.0 + _SLACK:
        return Certificate(
            verdict=UNDETERMINED, evidence=tuple(evidence), params=params,
            notes=("decoupling weights exceed 1 at this b; "
                   "the level split does not apply",),
        )

    levels = pot.support
    base: dict[int, BaseCaseResult] = {}
    delta_lo, delta_hi = 0.0, math.inf
    for j in levels:
        kappa = b * sigma2 / (j + 1)
        delta_hi = min(delta_hi, max_feasible_delta(kappa))
    if delta is None:
        # pre-pass with a permissive delta just to measure the base ratios
        for j in levels:
            base[j] = base_case_check(kernel, j, b, delta=1.0, C=C, L_cap=L_max)
            delta_lo = max(delta_lo, base[j].max_ratio - 1.0)
        if not levels:
            delta = 0.1
        elif delta_lo >= delta_hi - 1e-9:
            params["delta_window"] = (delta_lo, delta_hi)
            return Certificate(
                verdict=UNDETERMINED, evidence=tuple(evidence), params=params,
                notes=(f"no feasible delta: base ratios need > {delta_lo:.4g}, "
                       f"scalar step allows < {delta_hi:.4g}",),
            )
        else:
            delta = _select_delta(max(0.0, delta_lo), delta_hi)
    params["delta"] = delta

    all_pass = True
    for j in levels:
        res = base.get(j) or base_case_check(kernel, j, b, delta=delta, C=C,
                                             L_cap=L_max)
        ok = res.max_ratio <= 1.0 + delta + _SLACK
        all_pass &= ok
        detail = f"worst L={res.worst_L}"
        if res.covered_to < res.L1:
            detail += f"; base window truncated at {res.covered_to} of {res.L1}"
        evidence.append(Evidence(
            scale=res.covered_to, check=f"base_ratio[j={j}]",
            measured=res.max_ratio, threshold=1.0 + delta, passed=ok,
            detail=detail,
        ))
        if not ok:
            continue
        L0 = 0.5 * C * (j + 1) ** 2 / sigma2
        n = 1
        while L0 * 2 ** n < L_max:
            step = doubling_step_check(kernel, j, b, delta, n, C=C,
                                       density=density, exhaustive=exhaustive,
                                       L_cap=L_max)
            all_pass &= step.passed
            evidence.append(Evidence(
                scale=min(L_max, int(math.ceil(L0 * 2 ** (n + 1)))),
                check=f"doubling[j={j},n={n}]",
                measured=max(step.scalar_value / (1.0 + delta),
                             step.worst_midpoint / 0.75),
                threshold=1.0, passed=step.passed,
                detail=(f"scalar={step.scalar_value:.6g} vs {1 + delta:.6g}; "
                        f"midpoint max={step.worst_midpoint:.6g} over "
                        f"{step.coverage} {list(step.samples)}"),
            ))
            if not step.passed:
                break
            n += 1

    prof_pot = partition_profile(kernel, L_max, wall=0, pot=pot)
    prof_free = partition_profile(kernel, L_max)
    L = 2
    grid = []
    while L < L_max:
        grid.append(L)
        L *= 2
    grid.append(L_max)
    for L in grid:
        ratio = math.exp(prof_pot[L] - prof_free[L])
        ok = ratio <= 4.0 + _SLACK
        all_pass &= ok
        evidence.append(Evidence(
            scale=L, check="recombined_ratio", measured=ratio, threshold=4.0,
            passed=ok,
        ))

    if all_pass:
        return Certificate(
            verdict=DELOCALIZED_EMPIRICAL, evidence=tuple(evidence),
            params=params, valid_up_to=L_max,
            notes=("empirical: midpoint bounds sampled, nothing claimed "
                   "beyond valid_up_to",),
        )
    failing = [e for e in evidence if not e.passed]
    return Certificate(
        verdict=UNDETERMINED, evidence=tuple(evidence), params=params,
        notes=(f"first failing check: {failing[0].check} at scale "
               f"{failing[0].scale:g}",),
    )


# ---------------------------------------------------------------------------
# threshold bracketing
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ThresholdBracket:
    amp_lo: float
    amp_hi: float
    rho_lo: float
    rho_hi: float
    caveat: str
    stalled: bool
    hi_route: str
    trail: tuple[tuple[float, str], ...]  # (amplitude, verdict) in test order

    def to_dict(self) -> dict:
        return {
            "amp_lo": self.amp_lo, "amp_hi": self.amp_hi,
            "rho_lo": self.rho_lo, "rho_hi": self.rho_hi,
            "caveat": self.caveat, "stalled": self.stalled,
            "hi_route": self.hi_route,
            "trail": [list(t) for t in self.trail],
        }


def wetting_threshold(
    kernel: WalkKernel,
    make_pot,
    amp_lo: float,
    amp_hi: float,
    tol: float = 0.05,
    *,
    L_max: int = 4096,
    C: float = SCALE_CONSTANT,
    max_iter: int = 60,
) -> ThresholdBracket:
    """Bisect an amplitude family between a certified-empirical delocalized
    endpoint and a spectrally localized endpoint.

    ``make_pot(amp)`` must return the potential at amplitude ``amp``.  The
    decoupling constant is tied to the amplitude (b = rho) so the level
    weights sum to 1.  If a midpoint is neither certifiable nor localized
    the bracket stops shrinking and is returned with ``stalled`` set.
    """
    if not (0 < amp_lo < amp_hi):
        raise ParameterError("need 0 < amp_lo < amp_hi")
    trail: list[tuple[float, str]] = []

    def classify(amp: float) -> tuple[str, str]:
        loc = localization_certificate(kernel, make_pot(amp))
        if loc.verdict == LOCALIZED:
            trail.append((amp, "localized"))
            return "localized", loc.spectral["route"]
        pot = make_pot(amp)
        b = rho(pot, kernel.sigma2).upper
        dl = delocalization_certificate(kernel, pot, b=b, L_max=L_max, C=C)
        trail.append((amp, dl.verdict))
        return dl.verdict, ""

    lo_v, _ = classify(amp_lo)
    if lo_v != DELOCALIZED_EMPIRICAL:
        raise ParameterError(
            f"amp_lo={amp_lo} is not delocalized-empirical (got {lo_v})")
    hi_v, hi_route = classify(amp_hi)
    if hi_v != "localized":
        raise ParameterError(f"amp_hi={amp_hi} is not spectrally localized")

    lo, hi = amp_lo, amp_hi
    stalled = False
    for _ in range(max_iter):
        if hi - lo <= tol * lo:
            break
        mid = 0.5 * (lo + hi)
        verdict, route = classify(mid)
        if verdict == "localized":
            hi, hi_route = mid, route
        elif verdict == DELOCALIZED_EMPIRICAL:
            lo = mid
        else:
            stalled = True
            break
    return ThresholdBracket(
        amp_lo=lo,
        amp_hi=hi,
        rho_lo=rho(make_pot(lo), kernel.sigma2).value,
        rho_hi=rho(make_pot(hi), kernel.sigma2).upper,
        caveat="empirical below, rigorous above",
        stalled=stalled,
        hi_route=hi_route,
        trail=tuple(trail),
    )


def free_energy_crossing(
    kernel: WalkKernel,
    make_pot,
    amp_lo: float,
    amp_hi: float,
    tol: float = 0.05,
    *,
    floor: float = 1e-8,
    fe_tol: float = 1e-4,
    max_iter: int = 60,
) -> tuple[float, float]:
    """Amplitude bracket around the point where the free energy leaves 0."""
    if not (0 < amp_lo < amp_hi):
        raise ParameterError("need 0 < amp_lo < amp_hi")

    def positive(amp: float) -> bool:
        return free_energy(kernel, make_pot(amp), tol=fe_tol).value > floor

    if positive(amp_lo) or not positive(amp_hi):
        raise ParameterError("crossing endpoints do not separate")
    lo, hi = amp_lo, amp_hi
    for _ in range(max_iter):
        if hi - lo <= tol * lo:
            break
        mid = 0.5 * (lo + hi)
        if positive(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi


# ---------------------------------------------------------------------------
# phase scans
# ---------------------------------------------------------------------------

SCAN_COLUMNS = (
    "kernel", "sigma2", "family", "amplitude", "rho",
    "verdict_spectral", "verdict_induction", "f_hat", "f_err", "wall_time_s",
)


@dataclass(frozen=True)
class ScanPoint:
    kernel_spec: str
    family_spec: str
    amplitude: float


def _scan_one(args) -> dict:
    point, L_max, fe_cross, deterministic_timing = args
    t0 = time.perf_counter()
    row = {c: "" for c in SCAN_COLUMNS}
    row["kernel"] = point.kernel_spec
    row["family"] = point.family_spec
    row["amplitude"] = point.amplitude
    row["error"] = ""
    try:
        kernel = parse_kernel_spec(point.kernel_spec)
        pot = parse_potential_spec(point.family_spec, amplitude=point.amplitude)
        row["sigma2"] = kernel.sigma2
        rho_est = rho(pot, kernel.sigma2)
        row["rho"] = rho_est.value
        loc = localization_certificate(kernel, pot)
        row["verdict_spectral"] = loc.verdict
        b = rho_est.upper if rho_est.upper > 0 else 1.0
        dl = delocalization_certificate(kernel, pot, b=b, L_max=L_max)
        row["verdict_induction"] = dl.verdict
        fe = free_energy(kernel, pot, L_cross=fe_cross)
        row["f_hat"] = fe.value
        row["f_err"] = max(fe.gap, fe.residual)
        if loc.verdict == LOCALIZED and dl.verdict == DELOCALIZED_EMPIRICAL:
            row["error"] = "inconsistent: both engines claimed a verdict"
    except Exception as exc:  # per-point failures stay in-row
        row["verdict_spectral"] = row["verdict_induction"] = "error"
        row["f_hat"] = row["f_err"] = float("nan")
        row["error"] = f"{type(exc).__name__}: {exc}"
    row["wall_time_s"] = 0.0 if deterministic_timing else time.perf_counter() - t0
    return row


def phase_scan(
    points: list[ScanPoint],
    *,
    L_max: int = 1024,
    fe_cross: int = 1024,
    workers: int = 1,
    deterministic_timing: bool = False,
) -> list[dict]:
    """One row per grid point, in input (row-major) order regardless of
    scheduling; per-point errors are recorded in-row and the scan continues."""
    jobs = [(p, L_max, fe_cross, deterministic_timing) for p in points]
    if workers <= 1 or len(jobs) <= 1:
        return [_scan_one(j) for j in jobs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(_scan_one, jobs))
