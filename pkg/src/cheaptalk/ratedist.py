"""Rate-distortion layer: team function, game tuples, and the finite-n trend.

For an i.i.d. gaussian source with per-dimension variance ``sigma^2`` the
team (zero-bias) rate-distortion function is
``R(D) = max(0, log2(sigma^2 / D) / 2)``.  Any team pair ``(R_T, D_T)``
transfers to the biased game as ``(R_T, D_T + b^2, D_T)``: at a centroid
decoder the encoder's distortion always exceeds the decoder's by exactly
``b^2`` per dimension.  Conversely the game rate function is bounded by the
team function evaluated at ``min(D_d, D_e - b^2)``.

``asymptotic_experiment`` reproduces the finite-n trend behind the bound:
concentrate the bias on one coordinate, spend the rate budget on the other
``n - 1`` as scalar Lloyd-Max quantizers, and leave the biased coordinate
uninformative.  Its constant penalty is averaged over more and more
dimensions, so the per-dimension decoder distortion decreases toward the
scalar quantizer distortion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InfeasibleDistortionError
from .equilibrium import solve_scalar_biased
from .sources import iid_gaussian

__all__ = [
    "RDTuple",
    "AsymptoticRow",
    "team_rate_distortion",
    "achievable_tuple",
    "game_rate_bound",
    "asymptotic_experiment",
    "lloyd_max_quantizer",
]


@dataclass(frozen=True)
class RDTuple:
    """A rate (bits per dimension) with encoder and decoder distortions."""

    rate: float
    de: float
    dd: float

    def __post_init__(self):
        if not (math.isfinite(self.rate) and math.isfinite(self.de) and math.isfinite(self.dd)):
            raise ValueError("rate and distortions must be finite")
        if self.rate < 0.0 or self.de < 0.0 or self.dd < 0.0:
            raise ValueError("rate and distortions must be nonnegative")
        if self.de < self.dd - 1e-12:
            raise ValueError("encoder distortion cannot be below decoder distortion")


def team_rate_distortion(sigma_sq: float, d: float) -> float:
    """Team rate-distortion function ``max(0, log2(sigma^2/D)/2)``."""
    if sigma_sq <= 0.0:
        raise ValueError("variance must be positive")
    if d <= 0.0:
        raise ValueError("distortion must be positive")
    if d >= sigma_sq:
        return 0.0
    return 0.5 * math.log2(sigma_sq / d)


def achievable_tuple(rate_team: float, d_team: float, b: float) -> RDTuple:
    """Game tuple achieved from a team pair: ``(R_T, D_T + b^2, D_T)``."""
    if rate_team < 0.0 or d_team <= 0.0:
        raise ValueError("team pair must have nonnegative rate and positive distortion")
    return RDTuple(rate=float(rate_team), de=float(d_team + b * b), dd=float(d_team))


def game_rate_bound(sigma_sq: float, b: float, de: float, dd: float) -> float:
    """Upper bound on the game rate function at distortions ``(de, dd)``.

    Equals the team function at ``min(dd, de - b^2)``; zero when that
    minimum exceeds the variance.  Raises
    :class:`InfeasibleDistortionError` when the minimum is nonpositive: an
    encoder distortion below ``b^2`` cannot be met, since centroid decoders
    force ``de = dd + b^2``.
    """
    if sigma_sq <= 0.0:
        raise ValueError("variance must be positive")
    if de <= 0.0 or dd <= 0.0:
        raise ValueError("distortions must be positive")
    effective = min(dd, de - b * b)
    if effective <= 0.0:
        raise InfeasibleDistortionError(
            f"no equilibrium code reaches de={de:g} with bias {b:g} (de - b^2 <= 0)"
        )
    if effective >= sigma_sq:
        return 0.0
    return 0.5 * math.log2(sigma_sq / effective)


def lloyd_max_quantizer(sigma_sq: float, levels: int):
    """Team-optimal scalar quantizer of a centered gaussian; (quantizer, distortion)."""
    quant = solve_scalar_biased(iid_gaussian(1, mean=0.0, sigma_sq=sigma_sq), 0.0, levels)
    return quant, quant.distortion()


@dataclass(frozen=True)
class AsymptoticRow:
    """One dimension's worth of the finite-n experiment."""

    n: int
    rate_bits: float
    jd_emp: float
    jd_stderr: float
    je_emp: float
    je_stderr: float
    jd_exact: float
    gap_emp: float
    gap_stderr: float

    CSV_COLUMNS = ("n", "R", "Jd_emp", "Jd_stderr", "Je_emp", "Je_stderr", "Jd_exact")

    def csv_values(self) -> tuple:
        return (self.n, self.rate_bits, self.jd_emp, self.jd_stderr,
                self.je_emp, self.je_stderr, self.jd_exact)


def asymptotic_experiment(
    sigma_sq: float,
    b: float,
    rate_bits: int,
    n_list,
    *,
    samples: int = 400_000,
    seed: int = 42,
) -> list[AsymptoticRow]:
    """Empirical per-dimension distortions of the decoupled policy family.

    For each ``n``: quantize ``n - 1`` decoupled coordinates with a
    ``2**rate_bits``-level Lloyd-Max quantizer and leave the bias-carrying
    coordinate uninformative.  Per dimension,
    ``Jd = ((n-1) D_q + sigma^2) / n`` exactly and ``Je = Jd + b^2``.
    The simulation runs directly in the decoupled coordinates (the change
    of variables is orthonormal and preserves both the squared errors and
    the gaussian law).
    """
    if sigma_sq <= 0.0:
        raise ValueError("variance must be positive")
    if rate_bits < 0 or int(rate_bits) != rate_bits:
        raise ValueError("rate must be a nonnegative integer bit count")
    n_list = [int(n) for n in n_list]
    if any(n < 2 for n in n_list):
        raise ValueError("each n must be at least 2")
    if samples < 2:
        raise ValueError("sample budget too small")

    levels = 2 ** int(rate_bits)
    quant, d_q = lloyd_max_quantizer(sigma_sq, levels)
    inner = quant.boundaries[1:-1]
    actions = quant.actions
    sd = math.sqrt(sigma_sq)

    rows = []
    for idx, n in enumerate(n_list):
        shift = math.sqrt(n) * b  # the aligned bias sits wholly on coordinate n
        sum_jd = sum_jd2 = sum_gap = sum_gap2 = 0.0
        chunk = max(1, min(samples, (1 << 22) // n))
        done = 0
        part = 0
        while done < samples:
            m = min(chunk, samples - done)
            rng = np.random.default_rng(np.random.SeedSequence([seed, idx, part]))
            x = rng.normal(0.0, sd, size=(m, n))
            q = actions[np.searchsorted(inner, x[:, : n - 1].ravel(), side="left")]
            err = x[:, : n - 1].ravel() - q
            err_sq = (err * err).reshape(m, n - 1).sum(axis=1)
            last = x[:, n - 1]
            jd_i = (err_sq + last**2) / n
            gap_i = (shift**2 - 2.0 * shift * last) / n  # je_i - jd_i, exactly
            sum_jd += float(jd_i.sum())
            sum_jd2 += float((jd_i**2).sum())
            sum_gap += float(gap_i.sum())
            sum_gap2 += float((gap_i**2).sum())
            done += m
            part += 1
        jd_mean = sum_jd / samples
        jd_var = max(sum_jd2 / samples - jd_mean**2, 0.0)
        gap_mean = sum_gap / samples
        gap_var = max(sum_gap2 / samples - gap_mean**2, 0.0)
        jd_se = math.sqrt(jd_var / samples)
        gap_se = math.sqrt(gap_var / samples)
        je_mean = jd_mean + gap_mean
        # jd_i and gap_i are uncorrelated (E[last^3] = 0 for a centered gaussian)
        je_se = math.sqrt((jd_var + gap_var) / samples)
        rows.append(
            AsymptoticRow(
                n=n,
                rate_bits=float(rate_bits),
                jd_emp=jd_mean,
                jd_stderr=jd_se,
                je_emp=je_mean,
                je_stderr=je_se,
                jd_exact=((n - 1) * d_q + sigma_sq) / n,
                gap_emp=gap_mean,
                gap_stderr=gap_se,
            )
        )
    return rows
