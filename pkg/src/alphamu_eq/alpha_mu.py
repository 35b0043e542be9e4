"""
The alpha-mu fading distribution.

The envelope ``R`` of an alpha-mu channel has density

    f(x) = alpha * mu**mu * (x/beta)**(alpha*mu - 1) * exp(-mu * (x/beta)**alpha)
           / (beta * Gamma(mu))

so that ``mu * (R/beta)**alpha`` is Gamma(mu, 1) distributed.  Rayleigh
(alpha=2, mu=1), Nakagami-m (alpha=2, mu=m) and Weibull (mu=1) are special
cases.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy import special


@dataclass(frozen=True)
class AlphaMuParams:
    """Shape and scale of an alpha-mu envelope.

    Attributes
    ----------
    alpha : float
        Nonlinearity exponent.
    mu : float
        Clustering parameter.
    beta : float
        alpha-root mean value, ``E[R**alpha] ** (1/alpha)``.
    """

    alpha: float
    mu: float
    beta: float = 1.0

    def __post_init__(self):
        for name in ("alpha", "mu", "beta"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise ValueError(f"{name} must be a positive finite number, got {value!r}")

    @classmethod
    def with_mean_power(cls, alpha: float, mu: float, power: float) -> "AlphaMuParams":
        """Build parameters whose envelope has ``E[R**2] == power``."""
        return cls(alpha, mu, beta_for_power(alpha, mu, power))

    def moment(self, order: float) -> float:
        """Raw moment ``E[R**order]``."""
        return self.beta**order * math.exp(
            special.gammaln(self.mu + order / self.alpha)
            - special.gammaln(self.mu)
            - (order / self.alpha) * math.log(self.mu)
        )


class LinkName(str, enum.Enum):
    RXTX1 = "RX-TX1"
    RXTX2 = "RX-TX2"
    RXTX5 = "RX-TX5"


@dataclass(frozen=True)
class PresetLink:
    """A measured sub-THz RX-TX pair.

    Only (alpha, mu) were measured; ``beta`` is chosen by :meth:`params_for`
    so that ``channel_taps`` taps carry unit total mean power.
    """

    name: LinkName
    alpha: float
    mu: float
    los: bool | None

    @property
    def params(self) -> AlphaMuParams:
        return AlphaMuParams(self.alpha, self.mu, 1.0)

    def params_for(self, channel_taps: int = 1) -> AlphaMuParams:
        if channel_taps < 1:
            raise ValueError("channel_taps must be >= 1")
        return AlphaMuParams.with_mean_power(self.alpha, self.mu, 1.0 / channel_taps)

    @property
    def key(self) -> str:
        return self.name.value.replace("-", "").lower()


PRESETS: dict[str, PresetLink] = {
    p.key: p
    for p in (
        PresetLink(LinkName.RXTX1, 3.21, 7.81, True),
        # LOS/NLOS status of RX-TX2 is not reported.
        PresetLink(LinkName.RXTX2, 3.13, 3.76, None),
        PresetLink(LinkName.RXTX5, 2.64, 0.71, False),
    )
}


def get_preset(name: str) -> PresetLink:
    """Look up a preset by ``rxtx1``, ``RX-TX1`` or similar spellings."""
    key = name.replace("-", "").replace("_", "").lower()
    try:
        return PRESETS[key]
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None


def _check_x(x):
    x = np.asarray(x, dtype=float)
    if np.any(np.isnan(x)) or np.any(x < 0):
        raise ValueError("alpha-mu envelope is defined for x >= 0 only")
    return x


def pdf(params: AlphaMuParams, x):
    """Probability density of the envelope.

    At ``x == 0`` the density is 0 when ``alpha*mu > 1`` and ``+inf`` when
    ``alpha*mu < 1``; the infinite value is returned as is, not clamped.
    """
    x = _check_x(x)
    a, m, b = params.alpha, params.mu, params.beta
    z = x / b
    with np.errstate(divide="ignore", invalid="ignore"):
        log_f = (
            math.log(a)
            + m * math.log(m)
            + special.xlogy(a * m - 1.0, z)
            - m * z**a
            - math.log(b)
            - special.gammaln(m)
        )
        out = np.exp(log_f)
    return out[()] if out.ndim == 0 else out


def cdf(params: AlphaMuParams, x):
    """Cumulative distribution, ``P(mu, mu*(x/beta)**alpha)`` (regularized)."""
    x = _check_x(x)
    out = special.gammainc(params.mu, params.mu * (x / params.beta) ** params.alpha)
    return out[()] if np.ndim(out) == 0 else out


def sample(params: AlphaMuParams, rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` i.i.d. envelopes via ``beta * (G/mu)**(1/alpha)``, ``G ~ Gamma(mu, 1)``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    g = rng.gamma(params.mu, 1.0, size=n)
    return params.beta * (g / params.mu) ** (1.0 / params.alpha)


def beta_from_moment(alpha: float, moment: float) -> float:
    """Return ``moment ** (1/alpha)`` where ``moment = E[R**alpha]``."""
    if not (alpha > 0 and moment > 0):
        raise ValueError("alpha and moment must both be positive")
    return moment ** (1.0 / alpha)


def beta_for_power(alpha: float, mu: float, power: float) -> float:
    """Scale ``beta`` giving ``E[R**2] == power``."""
    if not (alpha > 0 and mu > 0 and power > 0):
        raise ValueError("alpha, mu and power must all be positive")
    log_unit = special.gammaln(mu + 2.0 / alpha) - special.gammaln(mu) - (2.0 / alpha) * math.log(mu)
    return math.sqrt(power * math.exp(-log_unit))
