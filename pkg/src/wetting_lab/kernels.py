"""Symmetric random-walk step kernels with small variance.

A kernel is a symmetric probability p on the integers with variance
sigma^2 in (0, 1/2].  Membership in the admissible class additionally
requires, for a constant c0 in (0, 1],

    p(1) >= c0 * sigma^2 / 2      and      sum_k |k|^3 p(k) <= sigma^2 / c0,

which forces p(0) >= 1 - sigma^2 >= 1/2 and irreducibility.  Kernels with
infinite support (the geometric / solid-on-solid family) are truncated at a
finite stencil with the discarded mass recorded before renormalisation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError

SIGMA2_MAX = 0.5
_EQ_SLACK = 1e-12


@dataclass(frozen=True)
class WalkKernel:
    """Immutable step distribution.

    ``sigma2`` is the effective (post-truncation) variance, which is what
    every downstream computation uses; ``sigma2_analytic`` keeps the
    closed-form value of the untruncated family for reporting.
    """

    offsets: tuple[int, ...]
    probs: tuple[float, ...]
    log_probs: tuple[float, ...]
    sigma2: float
    c0: float
    max_step: int
    truncation_defect: float
    sigma2_analytic: float | None = None
    family: str = "table"
    params: tuple[tuple[str, float], ...] = ()

    @property
    def sigma(self) -> float:
        return math.sqrt(self.sigma2)

    def prob(self, k: int) -> float:
        try:
            return self.probs[self.offsets.index(k)]
        except ValueError:
            return 0.0

    def prob_array(self) -> np.ndarray:
        """Stencil ordered by offset -max_step..max_step (zeros filled in)."""
        arr = np.zeros(2 * self.max_step + 1)
        for k, p in zip(self.offsets, self.probs):
            arr[k + self.max_step] = p
        return arr

    def spec_string(self) -> str:
        if self.family in ("binomial", "sos"):
            inner = ",".join(f"{k}={v:g}" for k, v in self.params)
            return f"{self.family}:{inner}"
        return "table:<explicit>"


def _finalize(
    pairs: dict[int, float],
    *,
    c0: float,
    defect: float,
    sigma2_analytic: float | None,
    family: str,
    params: tuple[tuple[str, float], ...],
) -> WalkKernel:
    # symmetrise exactly and renormalise whatever mass was kept
    ks = sorted(set(abs(k) for k in pairs))
    sym: dict[int, float] = {}
    for k in ks:
        v = pairs[k] if k in pairs else pairs[-k]
        sym[k] = v
        sym[-k] = v
    total = sym.get(0, 0.0) + 2.0 * sum(sym[k] for k in ks if k > 0)
    offsets = tuple(sorted(sym))
    probs = tuple(sym[k] / total for k in offsets)
    sigma2_eff = float(sum(k * k * p for k, p in zip(offsets, probs)))
    return WalkKernel(
        offsets=offsets,
        probs=probs,
        log_probs=tuple(math.log(p) if p > 0 else -math.inf for p in probs),
        sigma2=sigma2_eff,
        c0=c0,
        max_step=max(abs(k) for k in offsets),
        truncation_defect=defect,
        sigma2_analytic=sigma2_analytic,
        family=family,
        params=params,
    )


def make_binomial(sigma2: float, c0: float = 1.0) -> WalkKernel:
    """Nearest-neighbour lazy walk: p(+-1) = sigma2/2, p(0) = 1 - sigma2."""
    if not (0.0 < sigma2 <= SIGMA2_MAX):
        raise ParameterError(f"binomial kernel needs sigma2 in (0, 1/2], got {sigma2}")
    pairs = {0: 1.0 - sigma2, 1: sigma2 / 2.0, -1: sigma2 / 2.0}
    return _finalize(
        pairs,
        c0=c0,
        defect=0.0,
        sigma2_analytic=sigma2,
        family="binomial",
        params=(("sigma2", sigma2),),
    )


def sos_sigma2(beta: float) -> float:
    """Closed-form variance of the geometric walk p(k) ~ exp(-beta |k|)."""
    x = math.exp(-beta)
    return 2.0 * x / (1.0 - x) ** 2


def sos_normalizer(beta: float) -> float:
    """Closed-form normaliser of the untruncated geometric weights."""
    x = math.exp(-beta)
    return (1.0 + x) / (1.0 - x)


def make_sos(beta: float, tail_tol: float = 1e-12, c0: float = 1.0) -> WalkKernel:
    """Geometric (solid-on-solid) walk at inverse temperature beta.

    The infinite tail is cut at the smallest max_step whose discarded mass is
    below ``tail_tol``; the cut mass is recorded and the kept weights are
    renormalised, so the effective variance differs from the closed form by
    O(tail_tol).
    """
    if beta <= 0 or not (tail_tol > 0):
        raise ParameterError("beta and tail_tol must be positive")
    s2 = sos_sigma2(beta)
    if s2 > SIGMA2_MAX + 1e-12:
        raise ParameterError(
            f"sos kernel at beta={beta} has sigma2={s2:.4g} > 1/2; increase beta"
        )
    x = math.exp(-beta)
    z = sos_normalizer(beta)
    kmax = 1
    while 2.0 * x ** (kmax + 1) / ((1.0 - x) * z) >= tail_tol:
        kmax += 1
    defect = 2.0 * x ** (kmax + 1) / ((1.0 - x) * z)
    pairs = {k: x ** abs(k) / z for k in range(-kmax, kmax + 1)}
    return _finalize(
        pairs,
        c0=c0,
        defect=defect,
        sigma2_analytic=s2,
        family="sos",
        params=(("beta", beta), ("tail_tol", tail_tol)),
    )


def kernel_from_table(path: str, c0: float = 1.0) -> WalkKernel:
    """Load ``k p(k)`` rows for k >= 0; symmetry is implied."""
    pairs: dict[int, float] = {}
    with open(path) as fh:
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            k_s, p_s = line.split()
            k, p = int(k_s), float(p_s)
            if k < 0 or p < 0:
                raise ParameterError("table rows must be k>=0 with p(k)>=0")
            pairs[k] = p
            pairs[-k] = p
    if not pairs or pairs.get(0, 0.0) <= 0:
        raise ParameterError("table kernel needs positive mass at 0")
    kern = _finalize(
        pairs, c0=c0, defect=0.0, sigma2_analytic=None, family="table", params=()
    )
    if not (0.0 < kern.sigma2 <= SIGMA2_MAX + 1e-12):
        raise ParameterError(f"table kernel variance {kern.sigma2:.4g} outside (0, 1/2]")
    return kern


@dataclass(frozen=True)
class MembershipReport:
    """Per-condition outcome of the class-membership test (report only)."""

    p1: float
    p1_floor: float
    p1_ok: bool
    third_moment: float
    third_moment_cap: float
    third_moment_ok: bool
    p0: float
    p0_floor: float
    p0_ok: bool
    symmetric: bool
    normalized: bool

    @property
    def passed(self) -> bool:
        return (
            self.p1_ok
            and self.third_moment_ok
            and self.p0_ok
            and self.symmetric
            and self.normalized
        )


def validate_kernel(kernel: WalkKernel, c0: float | None = None) -> MembershipReport:
    """Check class membership for the given c0 without mutating the kernel."""
    c = kernel.c0 if c0 is None else c0
    s2 = kernel.sigma2
    p1 = kernel.prob(1)
    m3 = sum(abs(k) ** 3 * p for k, p in zip(kernel.offsets, kernel.probs))
    p0 = kernel.prob(0)
    total = sum(kernel.probs)
    sym = all(
        abs(kernel.prob(k) - kernel.prob(-k)) == 0.0 for k in kernel.offsets
    )
    return MembershipReport(
        p1=p1,
        p1_floor=0.5 * c * s2,
        p1_ok=p1 >= 0.5 * c * s2 - _EQ_SLACK,
        third_moment=m3,
        third_moment_cap=s2 / c,
        third_moment_ok=m3 <= s2 / c + _EQ_SLACK,
        p0=p0,
        p0_floor=1.0 - s2,
        p0_ok=p0 >= 1.0 - s2 - _EQ_SLACK,
        symmetric=sym,
        normalized=abs(total - 1.0) <= _EQ_SLACK,
    )


def parse_kernel_spec(spec: str, c0: float = 1.0) -> WalkKernel:
    """Parse ``binomial:sigma2=<x>``, ``sos:beta=<x>[,tail_tol=<y>]``, ``table:<path>``."""
    if ":" not in spec:
        raise ParameterError(f"malformed kernel spec {spec!r}")
    head, rest = spec.split(":", 1)
    if head == "table":
        return kernel_from_table(rest, c0=c0)
    kv: dict[str, float] = {}
    for item in rest.split(","):
        if not item:
            continue
        key, _, val = item.partition("=")
        if not _:
            raise ParameterError(f"malformed kernel spec field {item!r}")
        kv[key] = float(val)
    if head == "binomial":
        return make_binomial(kv.pop("sigma2"), c0=c0)
    if head == "sos":
        return make_sos(kv.pop("beta"), tail_tol=kv.pop("tail_tol", 1e-12), c0=c0)
    raise ParameterError(f"unknown kernel family {head!r}")
