"""Bias profiles, counter-based uniforms on primes, and sign realization.

Every random sign is a threshold of one uniform ``omega_p`` keyed by
``(seed, p)``.  Functions realized from the same :class:`OmegaSample` are
therefore uniformly coupled: ``P(f(p) != g(p)) = |a_f(p) - a_g(p)|``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from .errors import CoverageError, DomainError, PreconditionError, UsageError
from .sieve import is_prime, sieve_primes

KINDS = ("unbiased", "mobius", "alpha_delta", "alpha_k", "custom")
DELTA_RULES = ("constant", "exp_sqrt_log", "one_minus_exp_sqrt_log", "table")

_M64 = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB
# top double below 1.0; stands in for the endpoint 1.0 of [0, 1]
ONE_BELOW = math.nextafter(1.0, 0.0)


def _load_prime_table(path: str | Path) -> dict[int, float]:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError:
        raw = {}
        for line in text.splitlines():
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            key, val = line.split(",")[:2]
            if key.strip().lower() == "p":
                continue
            raw[key] = val
    return {int(k): float(v) for k, v in raw.items()}


@dataclass(frozen=True)
class DeltaRule:
    """Rule ``p -> delta_p`` used by ``alpha_delta`` profiles."""

    name: str = "constant"
    value: float = 1.0
    path: str | None = None
    table: Mapping[int, float] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.name not in DELTA_RULES:
            raise UsageError(f"unknown delta rule {self.name!r}")
        if self.name == "table" and self.table is None:
            if self.path is None:
                raise UsageError("table delta rule needs a path or a table")
            object.__setattr__(self, "table", _load_prime_table(self.path))

    def __call__(self, primes: np.ndarray) -> np.ndarray:
        p = np.asarray(primes, dtype=np.float64)
        if self.name == "constant":
            return np.full(p.shape, float(self.value))
        if self.name == "exp_sqrt_log":
            return np.exp(-np.sqrt(np.log(p)))
        if self.name == "one_minus_exp_sqrt_log":
            return 1.0 - np.exp(-np.sqrt(np.log(p)))
        missing = [int(q) for q in np.asarray(primes) if int(q) not in self.table]
        if missing:
            raise CoverageError(f"delta table lacks primes, first missing {missing[0]}")
        return np.array([self.table[int(q)] for q in np.asarray(primes)], dtype=np.float64)

    def to_json(self):
        if self.name == "constant":
            return {"name": "constant", "value": float(self.value)}
        if self.name == "table":
            return {"name": "table", "path": self.path}
        return {"name": self.name}

    @classmethod
    def from_json(cls, obj) -> DeltaRule:
        if obj is None:
            return cls()
        if isinstance(obj, (int, float)):
            return cls("constant", float(obj))
        if isinstance(obj, str):
            name = obj.replace("-", "_")
            if name.startswith("constant:"):
                return cls("constant", float(name.split(":", 1)[1]))
            try:
                return cls("constant", float(name))
            except ValueError:
                return cls(name)
        if isinstance(obj, dict):
            return cls(
                obj.get("name", "constant").replace("-", "_"),
                float(obj.get("value", 1.0)),
                obj.get("path"),
            )
        raise UsageError(f"cannot parse delta rule {obj!r}")

    def label(self) -> str:
        if self.name == "constant":
            return f"{self.value:g}"
        return self.name.replace("_", "-")


@dataclass(frozen=True)
class BiasProfile:
    """Rule assigning ``a_p = P(f(p) = -1)`` to each prime.

    ``custom`` profiles either take an explicit table of ``a_p`` or the
    strongly biased family ``P(f(p) = +1) = c p**-beta``.
    """

    kind: str = "unbiased"
    alpha: float | None = None
    delta_rule: DeltaRule = field(default_factory=DeltaRule)
    k: int | None = None
    c: float | None = None
    beta: float | None = None
    custom_table_path: str | None = None
    custom_table: Mapping[int, float] | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise UsageError(f"unknown profile kind {self.kind!r}")
        if self.kind in ("alpha_delta", "alpha_k"):
            if self.alpha is None or not 0.0 < self.alpha <= 1.0:
                raise DomainError(f"alpha must lie in (0, 1], got {self.alpha}")
        if self.kind == "alpha_k" and (self.k is None or int(self.k) < 1):
            raise DomainError(f"k must be a positive integer, got {self.k}")
        if self.kind == "custom":
            if self.custom_table is None and self.custom_table_path is not None:
                object.__setattr__(self, "custom_table", _load_prime_table(self.custom_table_path))
            if self.custom_table is None:
                if self.c is None or self.beta is None:
                    raise UsageError("custom profile needs (c, beta) or a table")
                if not 0.0 < self.c <= 1.0 or self.beta <= 0.0:
                    raise DomainError(f"need c in (0, 1] and beta > 0, got {self.c}, {self.beta}")

    # constructors -------------------------------------------------------
    @classmethod
    def unbiased(cls) -> BiasProfile:
        return cls("unbiased")

    @classmethod
    def mobius(cls) -> BiasProfile:
        return cls("mobius")

    @classmethod
    def alpha_delta(cls, alpha: float, delta: float | str | DeltaRule = 1.0) -> BiasProfile:
        rule = delta if isinstance(delta, DeltaRule) else DeltaRule.from_json(delta)
        return cls("alpha_delta", alpha=float(alpha), delta_rule=rule)

    @classmethod
    def alpha_k(cls, alpha: float, k: int) -> BiasProfile:
        return cls("alpha_k", alpha=float(alpha), k=int(k))

    @classmethod
    def strong(cls, c: float, beta: float) -> BiasProfile:
        return cls("custom", c=float(c), beta=float(beta))

    # evaluation ----------------------------------------------------------
    def mean_sign(self, primes) -> np.ndarray:
        """``E f(p) = 1 - 2 a_p`` for each prime."""
        return 1.0 - 2.0 * self.bias(primes)

    def bias(self, primes) -> np.ndarray:
        p = np.asarray(primes, dtype=np.int64)
        pf = p.astype(np.float64)
        if self.kind == "unbiased":
            a = np.full(p.shape, 0.5)
        elif self.kind == "mobius":
            a = np.ones(p.shape)
        elif self.kind == "alpha_delta":
            a = 0.5 + _half_band(self, p)
        elif self.kind == "alpha_k":
            ratio = self.k / pf**self.alpha
            a = np.where(ratio >= 1.0, 1.0, 0.5 + 0.5 * ratio)
        elif self.custom_table is not None:
            missing = [int(q) for q in p.ravel() if int(q) not in self.custom_table]
            if missing:
                raise CoverageError(f"custom table lacks primes, first missing {missing[0]}")
            a = np.array([self.custom_table[int(q)] for q in p.ravel()], dtype=np.float64)
            a = a.reshape(p.shape)
        else:
            a = 1.0 - self.c * pf ** (-self.beta)
        if np.any((a < 0.0) | (a > 1.0)) or not np.all(np.isfinite(a)):
            raise DomainError(f"profile {self.label()} yields a_p outside [0, 1]")
        return a

    # serialization -------------------------------------------------------
    def to_json(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.alpha is not None:
            out["alpha"] = self.alpha
        if self.kind == "alpha_delta":
            out["delta_rule"] = self.delta_rule.to_json()
        if self.k is not None:
            out["k"] = self.k
        if self.kind == "custom":
            if self.custom_table_path is not None:
                out["custom_table_path"] = self.custom_table_path
            else:
                out["c"] = self.c
                out["beta"] = self.beta
        return out

    @classmethod
    def from_json(cls, obj: dict | str) -> BiasProfile:
        if isinstance(obj, str):
            try:
                obj = json.loads(obj)
            except json.JSONDecodeError as exc:
                raise UsageError(f"unparsable profile JSON: {exc}") from None
        if not isinstance(obj, dict) or "kind" not in obj:
            raise UsageError("profile JSON must be an object with a 'kind' field")
        kind = str(obj["kind"]).lower().replace("-", "_")
        kind = {"alphadelta": "alpha_delta", "alphak": "alpha_k"}.get(kind, kind)
        return cls(
            kind=kind,
            alpha=None if obj.get("alpha") is None else float(obj["alpha"]),
            delta_rule=DeltaRule.from_json(obj.get("delta_rule")),
            k=None if obj.get("k") is None else int(obj["k"]),
            c=None if obj.get("c") is None else float(obj["c"]),
            beta=None if obj.get("beta") is None else float(obj["beta"]),
            custom_table_path=obj.get("custom_table_path"),
        )

    def label(self) -> str:
        if self.kind in ("unbiased", "mobius"):
            return self.kind
        if self.kind == "alpha_delta":
            return f"alpha-delta({self.alpha:g},{self.delta_rule.label()})"
        if self.kind == "alpha_k":
            return f"alpha-k({self.alpha:g},{self.k})"
        if self.custom_table_path is not None:
            return f"custom({Path(self.custom_table_path).name})"
        if self.custom_table is not None:
            return "custom(table)"
        return f"strong({self.c:g},{self.beta:g})"


def _half_band(profile: BiasProfile, p: np.ndarray) -> np.ndarray:
    # shared by bias() and decompose_uh() so band edges match a_p bit for bit
    return profile.delta_rule(p) / (2.0 * p.astype(np.float64) ** profile.alpha)


def bias_at(profile: BiasProfile, p: int) -> float:
    """``a_p = P(f(p) = -1)`` for a single prime."""
    if not is_prime(p):
        raise DomainError(f"{p} is not prime")
    return float(profile.bias(np.array([p]))[0])


# counter-based uniforms ------------------------------------------------------


def _mix64(z: np.ndarray) -> np.ndarray:
    z = z ^ (z >> np.uint64(30))
    z = z * np.uint64(_MIX1)
    z = z ^ (z >> np.uint64(27))
    z = z * np.uint64(_MIX2)
    return z ^ (z >> np.uint64(31))


def omega_values(seed: int, primes: np.ndarray) -> np.ndarray:
    """Uniforms in ``[0, 1)`` on a 2**-53 lattice, a pure function of ``(seed, p)``."""
    key = _mix64(np.array([(int(seed) + _GAMMA) & _M64], dtype=np.uint64))[0]
    p = np.asarray(primes, dtype=np.int64).astype(np.uint64)
    bits = _mix64(_mix64(p * np.uint64(_GAMMA)) ^ key)
    return (bits >> np.uint64(11)).astype(np.float64) * 2.0**-53


@dataclass(frozen=True)
class OmegaSample:
    seed: int | None
    p_max: int
    primes: np.ndarray
    values: np.ndarray

    def at(self, p: int) -> float:
        i = int(np.searchsorted(self.primes, p))
        if i == len(self.primes) or self.primes[i] != p:
            raise DomainError(f"{p} is not a prime covered by this sample")
        return float(self.values[i])

    def restrict(self, p_max: int) -> OmegaSample:
        if p_max > self.p_max:
            raise CoverageError(f"sample covers primes <= {self.p_max}, asked for {p_max}")
        n = int(np.searchsorted(self.primes, p_max, side="right"))
        return OmegaSample(self.seed, int(p_max), self.primes[:n], self.values[:n])


def sample_omega(seed: int, p_max: int) -> OmegaSample:
    primes = sieve_primes(p_max)
    vals = omega_values(seed, primes)
    vals.setflags(write=False)
    return OmegaSample(int(seed), int(p_max), primes, vals)


def omega_from_values(values: Mapping[int, float] | np.ndarray, primes=None, seed=None) -> OmegaSample:
    """Wrap explicit ``omega_p`` values (tests, hand-built examples)."""
    if isinstance(values, Mapping):
        primes = np.array(sorted(values), dtype=np.int64)
        vals = np.array([values[int(p)] for p in primes], dtype=np.float64)
    else:
        primes = np.asarray(primes, dtype=np.int64)
        vals = np.asarray(values, dtype=np.float64)
    if np.any((vals < 0.0) | (vals > 1.0)):
        raise DomainError("omega values must lie in [0, 1]")
    return OmegaSample(seed, int(primes[-1]) if len(primes) else 1, primes, vals)


# sign vectors ---------------------------------------------------------------


@dataclass(frozen=True)
class PrimeSignVector:
    p_max: int
    primes: np.ndarray
    values: np.ndarray  # int8 in {-1, 0, +1}
    support: str = "binary"
    profile_id: str = "custom"
    seed: int | None = None

    def at(self, p: int) -> int:
        i = int(np.searchsorted(self.primes, p))
        if i == len(self.primes) or self.primes[i] != p:
            raise DomainError(f"{p} is not a prime covered by this vector")
        return int(self.values[i])

    def upto(self, P: int) -> tuple[np.ndarray, np.ndarray]:
        if P > self.p_max:
            raise CoverageError(f"signs cover primes <= {self.p_max}, asked for {P}")
        n = int(np.searchsorted(self.primes, P, side="right"))
        return self.primes[:n], self.values[:n]


def signs_from_thresholds(omega: OmegaSample, a: np.ndarray, profile_id: str) -> PrimeSignVector:
    # indicator: +1 on (a_p, 1], -1 on [0, a_p]
    vals = np.where(omega.values <= a, -1, 1).astype(np.int8)
    return PrimeSignVector(omega.p_max, omega.primes, vals, "binary", profile_id, omega.seed)


def realize(omega: OmegaSample, profile: BiasProfile) -> PrimeSignVector:
    """``f(p) = -1`` iff ``omega_p <= a_p`` (closed on the left interval)."""
    return signs_from_thresholds(omega, profile.bias(omega.primes), profile.label())


def mobius_signs(p_max: int) -> PrimeSignVector:
    primes = sieve_primes(p_max)
    return PrimeSignVector(int(p_max), primes, np.full(len(primes), -1, np.int8), "binary", "mobius")


def decompose_uh(omega: OmegaSample, profile: BiasProfile) -> tuple[PrimeSignVector, PrimeSignVector]:
    """Split ``f = realize(omega, profile)`` into ternary ``u`` and ``h``.

    With half-width ``b = delta_p / (2 p**alpha)``: ``u = -1`` below ``1/2 - b``,
    ``u = +1`` above ``1/2 + b``; ``h = -1`` on the closed middle band.
    """
    if profile.kind != "alpha_delta":
        raise DomainError(f"u/h decomposition needs an alpha_delta profile, got {profile.kind}")
    b = _half_band(profile, omega.primes)
    lo, hi = 0.5 - b, 0.5 + b
    w = omega.values
    u = np.where(w < lo, -1, np.where(w > hi, 1, 0)).astype(np.int8)
    h = np.where((w >= lo) & (w <= hi), -1, 0).astype(np.int8)
    tag = profile.label()
    return (
        PrimeSignVector(omega.p_max, omega.primes, u, "ternary", tag + ":u", omega.seed),
        PrimeSignVector(omega.p_max, omega.primes, h, "ternary", tag + ":h", omega.seed),
    )


# interval exchange ----------------------------------------------------------


def _checked_bias_for_exchange(profile: BiasProfile, primes: np.ndarray) -> np.ndarray:
    a = profile.bias(primes)
    if np.any(a < 0.5):
        bad = int(np.asarray(primes)[np.argmax(a < 0.5)])
        raise PreconditionError(f"P(f(p)=+1) > 1/2 at p={bad}; interval exchange undefined")
    return a


def in_I(w: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Membership in ``I_p = (a_p - 1/2, 1/2]``, of length ``P(f(p)=+1)``."""
    return (w > a - 0.5) & (w <= 0.5)


def in_J(w: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Membership in ``J_p = (a_p, 1]``; ``ONE_BELOW`` is read as 1.0."""
    w_eff = np.where(w == ONE_BELOW, 1.0, w)
    return w_eff > a


def exchange(w: np.ndarray, a: np.ndarray) -> np.ndarray:
    """Apply ``psi_p`` coordinatewise: ``I_p -> J_p`` by +1/2, ``J_p -> I_p`` by -1/2."""
    w = np.asarray(w, dtype=np.float64)
    up = in_I(w, a)
    down = in_J(w, a)
    out = w.copy()
    out[up] = w[up] + 0.5
    out[down] = np.where(w[down] == ONE_BELOW, 1.0, w[down]) - 0.5
    out[out >= 1.0] = ONE_BELOW
    return out


def interval_exchange(omega: OmegaSample, profile: BiasProfile) -> OmegaSample:
    """Swap ``I_p`` and ``J_p`` by translations of +-1/2 (identity elsewhere).

    The map is an involution.  On the 2**-53 lattice produced by
    :func:`sample_omega` both translations are exact in floating point.
    """
    a = _checked_bias_for_exchange(profile, omega.primes)
    out = exchange(omega.values, a)
    out.setflags(write=False)
    return OmegaSample(omega.seed, omega.p_max, omega.primes, out)


# coupled g -------------------------------------------------------------------


def reference_profile(reference: str | BiasProfile, profile_f: BiasProfile, k: int | None = None) -> BiasProfile:
    if isinstance(reference, BiasProfile):
        return reference
    ref = reference.replace("-", "_").lower()
    if ref == "unbiased":
        return BiasProfile.unbiased()
    if ref == "mobius":
        return BiasProfile.mobius()
    if profile_f.alpha is None:
        raise DomainError(f"reference {reference!r} needs an alpha from the f profile")
    if ref == "f_alpha":
        return BiasProfile.alpha_delta(profile_f.alpha, 1.0)
    if ref == "f_alpha_k":
        kk = k if k is not None else profile_f.k
        if kk is None:
            raise DomainError("reference f_alpha_k needs k")
        return BiasProfile.alpha_k(profile_f.alpha, kk)
    raise UsageError(f"unknown reference {reference!r}")


def coupled_bias(primes, profile_f: BiasProfile, reference: str | BiasProfile, k: int | None = None) -> np.ndarray:
    """``a_g = 1/2 - (a_ref - a_f)``, i.e. ``E g(p) = 2 (a_ref - a_f)``.

    With reference ``mobius`` this is ``1/2 - P(f(p)=+1)``.
    """
    ref = reference_profile(reference, profile_f, k)
    a_f = profile_f.bias(primes)
    a_g = 0.5 - (ref.bias(primes) - a_f)
    if np.any((a_g < 0.0) | (a_g > 1.0)):
        bad = int(np.asarray(primes)[np.argmax((a_g < 0.0) | (a_g > 1.0))])
        raise PreconditionError(f"coupled g has P(g(p)=-1) outside [0, 1] at p={bad}")
    return a_g


def coupled_g_signs(
    omega: OmegaSample, profile_f: BiasProfile, reference: str | BiasProfile = "unbiased", k: int | None = None
) -> PrimeSignVector:
    a_g = coupled_bias(omega.primes, profile_f, reference, k)
    ref = reference_profile(reference, profile_f, k)
    return signs_from_thresholds(omega, a_g, f"g[{profile_f.label()}|{ref.label()}]")
