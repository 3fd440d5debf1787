"""Channels, leakage evaluators and explicit randomisation protocols.

Every protocol here is parameterised by a privacy knob ``alpha >= 0``;
``alpha = math.inf`` is accepted and denotes the noiseless limit. Closed
forms are evaluated through ``t = exp(-alpha)`` so that large ``alpha`` never
overflows.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import AlphabetTooLarge, DimensionMismatch, InvalidDistribution, NonMonotoneDetected
from .prob import TAU_MASS, JointDistribution, channel_mutual_information, entropy

OUE_MAX_ALPHABET = 20
OUE_MAX_DENSE = 12


@dataclass
class Channel:
    """Column-stochastic matrix ``Q[y, x] = P(Y=y | X=x)``."""

    Q: np.ndarray
    labels: list | None = None

    def __post_init__(self):
        Q = np.array(self.Q, dtype=float, ndmin=2)
        if Q.ndim != 2:
            raise DimensionMismatch("a channel is a b x a matrix")
        if not np.all(np.isfinite(Q)) or np.any(Q < 0):
            raise InvalidDistribution("channel has a negative or non-finite entry")
        if np.any(np.abs(Q.sum(axis=0) - 1.0) > TAU_MASS * max(1, Q.shape[0])):
            raise InvalidDistribution("channel columns must sum to one")
        self.Q = Q
        if self.labels is not None and len(self.labels) != Q.shape[0]:
            raise DimensionMismatch("one label per output is required")

    @property
    def a(self) -> int:
        return self.Q.shape[1]

    @property
    def b(self) -> int:
        return self.Q.shape[0]

    @classmethod
    def from_approximate(cls, Q, labels=None) -> "Channel":
        """Clip float noise and renormalise columns before validating."""
        Q = np.array(Q, dtype=float, ndmin=2)
        Q[Q < 0] = 0.0
        Q /= Q.sum(axis=0, keepdims=True)
        return cls(Q, labels)

    def canonical(self) -> "Channel":
        """Drop all-zero outputs and sort output rows lexicographically."""
        Q = self.Q[self.Q.sum(axis=1) > 0]
        order = np.lexsort(np.round(Q, 12).T[::-1])
        labels = None if self.labels is None else [
            self.labels[i] for i in np.flatnonzero(self.Q.sum(axis=1) > 0)[order]]
        return Channel(Q[order], labels)

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b,
                "labels": list(range(self.b)) if self.labels is None else list(self.labels),
                "Q": self.Q.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Channel":
        Q = np.asarray(d["Q"], dtype=float)
        if Q.shape != (int(d["b"]), int(d["a"])):
            raise DimensionMismatch(f"declared {d['b']}x{d['a']} but matrix is {Q.shape}")
        return cls(Q, d.get("labels"))


@dataclass
class SecretAwareChannel:
    """Tensor ``Q[y, x, s] = P(Y=y | X=x, S=s)``."""

    Q: np.ndarray

    def __post_init__(self):
        Q = np.asarray(self.Q, dtype=float)
        if Q.ndim != 3:
            raise DimensionMismatch("a secret-aware channel is a b x a x c tensor")
        if np.any(Q < 0) or np.any(np.abs(Q.sum(axis=0) - 1.0) > 1e-12 * max(1, Q.shape[0])):
            raise InvalidDistribution("every (x, s) slice must be a distribution over y")
        self.Q = Q

    @property
    def b(self) -> int:
        return self.Q.shape[0]

    @property
    def a(self) -> int:
        return self.Q.shape[1]

    @property
    def c(self) -> int:
        return self.Q.shape[2]

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b, "c": self.c,
                "labels": list(range(self.b)), "Q": self.Q.tolist()}


@dataclass
class PrivacyReport:
    kind: str
    value: float
    witnesses: list[tuple] = field(default_factory=list)

    def satisfies(self, eps: float, tol: float = 1e-9) -> bool:
        return self.value <= eps + tol

    def to_dict(self) -> dict:
        return {"metric": self.kind, "measured": _json_float(self.value),
                "witnesses": [list(map(int, w)) for w in self.witnesses]}


def _json_float(v: float):
    return "inf" if math.isinf(v) else float(v)


def _t(alpha: float) -> float:
    if alpha < 0 or math.isnan(alpha):
        raise ValueError("alpha must be non-negative")
    return 0.0 if math.isinf(alpha) else math.exp(-alpha)


# generic evaluators ---------------------------------------------------------

def output_given_secret(Q, j: JointDistribution) -> np.ndarray:
    """Matrix ``[y, s]`` of P(Y=y | S=s) for a channel or secret-aware channel."""
    if isinstance(Q, SecretAwareChannel):
        if Q.a != j.a or Q.c != j.c:
            raise DimensionMismatch("secret-aware channel does not match the joint")
        return np.einsum("yxs,sx->ys", Q.Q, j.p_x_given_s)
    Qm = np.asarray(getattr(Q, "Q", Q), dtype=float)
    if Qm.shape[1] != j.a:
        raise DimensionMismatch(f"channel input size {Qm.shape[1]} != a={j.a}")
    return Qm @ j.p_x_given_s.T


def _log_ratio(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    """``ln(num/den)`` with ``0/0 -> 0`` and ``x/0 -> +inf``."""
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(num) - np.log(den)
    out[(num == 0) & (den == 0)] = 0.0
    return out


def _report(kind: str, vals: np.ndarray, index_rows: np.ndarray) -> PrivacyReport:
    if vals.size == 0:
        return PrivacyReport(kind, 0.0, [])
    top = float(vals.max())
    if math.isinf(top):
        hit = np.isinf(vals)
    else:
        hit = vals >= top - 1e-12
    return PrivacyReport(kind, max(top, 0.0),
                         [tuple(int(v) for v in r) for r in index_rows[hit]])


def ldp_of(Q, j: JointDistribution) -> PrivacyReport:
    """Worst ``ln P(y|s)/P(y|s')`` over reachable outputs and secret pairs."""
    pys = output_given_secret(Q, j)
    py = pys @ j.p_s
    ys = np.flatnonzero(py > 0)
    c = j.c
    if c < 2:
        return PrivacyReport("LDP", 0.0, [])
    s1, s2 = np.meshgrid(np.arange(c), np.arange(c), indexing="ij")
    off = s1 != s2
    s1, s2 = s1[off], s2[off]
    num = pys[ys][:, s1]
    den = pys[ys][:, s2]
    lr = _log_ratio(num, den)
    yy = np.repeat(ys, len(s1))
    idx = np.column_stack([yy, np.tile(s1, len(ys)), np.tile(s2, len(ys))])
    return _report("LDP", lr.ravel(), idx)


def lip_of(Q, j: JointDistribution) -> PrivacyReport:
    """Worst ``|ln P(y|s)/P(y)|`` over reachable outputs and secrets."""
    pys = output_given_secret(Q, j)
    py = pys @ j.p_s
    ys = np.flatnonzero(py > 0)
    lr = np.abs(_log_ratio(pys[ys], py[ys, None]))
    yy, ss = np.meshgrid(ys, np.arange(j.c), indexing="ij")
    idx = np.column_stack([yy.ravel(), ss.ravel()])
    return _report("LIP", lr.ravel(), idx)


def utility(Q, j: JointDistribution) -> float:
    """I(X;Y) in nats for a channel (or secret-aware channel) applied to ``j``."""
    if isinstance(Q, SecretAwareChannel):
        return channel_mutual_information(blind_channel(Q, j), j.p_x)
    return channel_mutual_information(np.asarray(getattr(Q, "Q", Q)), j.p_x)


def blind_channel(Q: SecretAwareChannel, j: JointDistribution) -> np.ndarray:
    """P(y|x) = sum_s Q[y,x,s] p_{s|x}: the X-to-Y channel seen without S."""
    return np.einsum("yxs,sx->yx", Q.Q, j.p_s_given_x)


# generalised randomised response ---------------------------------------------

def grr(alpha: float, a: int) -> Channel:
    t = _t(alpha)
    off = t / (1.0 + (a - 1) * t)
    Q = np.full((a, a), off)
    np.fill_diagonal(Q, 1.0 / (1.0 + (a - 1) * t))
    return Channel(Q)


def _closed_form_lip(t: float, cond: np.ndarray, marg: np.ndarray) -> float:
    num = t + (1.0 - t) * cond
    den = t + (1.0 - t) * marg
    lr = np.abs(_log_ratio(num, np.broadcast_to(den, num.shape).copy()))
    return float(lr.max(initial=0.0))


def lip_grr(alpha: float, j: JointDistribution) -> float:
    """Closed-form LIP level of GRR with parameter ``alpha`` under prior ``j``."""
    return _closed_form_lip(_t(alpha), j.p_x_given_s, j.p_x[None, :])


# optimised unary encoding ------------------------------------------------------

def _check_oue_size(a: int, cap: int = OUE_MAX_ALPHABET):
    if a > cap:
        raise AlphabetTooLarge(f"OUE over a={a} categories exceeds the cap of {cap}")


def _subset_sums(p: np.ndarray) -> np.ndarray:
    """``out[mask] = sum of p[x] for bits x set in mask``."""
    out = np.zeros(1)
    for v in p:
        out = np.concatenate([out, out + v])
    return out


def _popcounts(a: int) -> np.ndarray:
    out = np.zeros(1, dtype=np.int64)
    for _ in range(a):
        out = np.concatenate([out, out + 1])
    return out


def oue_channel(alpha: float, a: int) -> Channel:
    """Dense OUE channel; output ``y`` is a bitmask of reported categories.

    Only for small alphabets (a <= 12); the evaluators below never build it.
    """
    _check_oue_size(a, OUE_MAX_DENSE)
    t = _t(alpha)
    flip = t / (1.0 + t)  # P(bit = 1) for a non-true category
    masks = np.arange(2 ** a)
    bits = (masks[:, None] >> np.arange(a)[None, :]) & 1  # (2^a, a)
    Q = np.empty((2 ** a, a))
    for x in range(a):
        pr = np.where(bits == 1, flip, 1.0 - flip)
        pr[:, x] = 0.5
        Q[:, x] = pr.prod(axis=1)
    return Channel(Q, [int(m) for m in masks])


def oue_lip(alpha: float, j: JointDistribution) -> float:
    """LIP level of OUE by iterating all subsets of the data alphabet."""
    _check_oue_size(j.a)
    t = _t(alpha)
    marg = _subset_sums(j.p_x)
    if t == 0.0:
        reachable = _popcounts(j.a) <= 1
    else:
        reachable = np.ones(marg.size, dtype=bool)
    best = 0.0
    den = (t + (1.0 - t) * marg)[reachable]
    for s in range(j.c):
        cond = _subset_sums(j.p_x_given_s[s])[reachable]
        num = t + (1.0 - t) * cond
        lr = np.abs(_log_ratio(num, den.copy()))
        best = max(best, float(lr.max()))
    return best


def oue_utility(alpha: float, j: JointDistribution) -> float:
    """I(X;Y) of OUE, summed over subsets grouped by their size."""
    _check_oue_size(j.a)
    a = j.a
    if math.isinf(alpha):
        return 0.5 * entropy(j.p_x)
    t = _t(alpha)
    B = _subset_sums(j.p_x)
    k = _popcounts(a)
    log_b = -alpha - math.log1p(t)  # ln P(bit=1 | not true)
    log_nb = -math.log1p(t)         # ln P(bit=0 | not true)
    log_pi1 = -math.log(2) + (k - 1) * log_b + (a - k) * log_nb
    log_pi0 = -math.log(2) + k * log_b + (a - k - 1) * log_nb
    L = np.log(t + (1.0 - t) * B)
    with np.errstate(invalid="ignore", over="ignore"):
        term1 = np.where(B > 0, B * np.exp(np.where(k > 0, log_pi1, 0.0)) * (-L), 0.0)
        term0 = np.where(B < 1, (1 - B) * np.exp(np.where(k < a, log_pi0, 0.0)) * (-alpha - L), 0.0)
    return max(float(np.sum(term1 + term0)), 0.0)


def oue_leakage_and_utility(alpha: float, j: JointDistribution) -> tuple[float, float]:
    return oue_lip(alpha, j), oue_utility(alpha, j)


# conditional reporting ---------------------------------------------------------

@dataclass
class CRLaw:
    """Conditional reporting with its induced output laws."""

    channel: SecretAwareChannel
    p_y_given_s: np.ndarray  # [y, s]
    p_y: np.ndarray


def cr_channel(alpha: float, j: JointDistribution) -> CRLaw:
    t = _t(alpha)
    c = j.c
    cond = j.p_x_given_s            # [s, x]
    total = cond.sum(axis=0)        # sum over s' of p_{y|s'}
    others = total[None, :] - cond  # [s, y]: sum over s' != s
    norm = 1.0 + (c - 1) * t
    a = j.a
    Q = np.empty((a, a, c))
    for s in range(c):
        Q[:, :, s] = (np.eye(a) + t * others[s][:, None]) / norm
    pys = ((1.0 - t) * cond + t * total[None, :]).T / norm
    py = ((1.0 - t) * j.p_x + t * total) / norm
    return CRLaw(SecretAwareChannel(Q), pys, py)


def cr_lip(alpha: float, j: JointDistribution) -> float:
    """Exact LIP level L(alpha) of conditional reporting."""
    t = _t(alpha)
    total = j.p_x_given_s.sum(axis=0)
    num = (1.0 - t) * j.p_x_given_s + t * total[None, :]
    den = (1.0 - t) * j.p_x + t * total
    lr = np.abs(_log_ratio(num, np.broadcast_to(den, num.shape).copy()))
    return float(lr.max(initial=0.0))


def cr_utility(alpha: float, j: JointDistribution) -> float:
    return utility(cr_channel(alpha, j).channel, j)


def _rr_keep_probability(alpha: float, c: int) -> float:
    t = _t(alpha)
    return 1.0 / (1.0 + (c - 1) * t)


def cr_sample(alpha: float, j: JointDistribution, sx: tuple[int, int], rng) -> int:
    """Draw one output of conditional reporting for the input pair ``(s, x)``."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    s, x = sx
    c = j.c
    if c == 1 or rng.random() < _rr_keep_probability(alpha, c):
        return int(x)
    fake = int(rng.integers(c - 1))
    fake += fake >= s
    return int(rng.choice(j.a, p=j.p_x_given_s[fake]))


def cr_sample_batch(alpha: float, j: JointDistribution, s: np.ndarray, x: np.ndarray,
                    rng) -> np.ndarray:
    """Vectorised ``cr_sample`` over arrays of inputs."""
    rng = np.random.default_rng(rng) if not isinstance(rng, np.random.Generator) else rng
    s = np.asarray(s)
    x = np.asarray(x)
    c = j.c
    y = x.copy()
    if c == 1:
        return y
    keep = rng.random(s.size) < _rr_keep_probability(alpha, c)
    fake = rng.integers(c - 1, size=s.size)
    fake += fake >= s
    cdf = np.cumsum(j.p_x_given_s, axis=1)
    u = rng.random(s.size)
    draws = np.minimum((u[:, None] > cdf[fake]).sum(axis=1), j.a - 1)
    y[~keep] = draws[~keep]
    return y


# calibration -------------------------------------------------------------------

LEAKAGE_FUNCTIONS: dict[str, Callable[[float, JointDistribution], float]] = {
    "grr": lip_grr,
    "oue": oue_lip,
    "cr": cr_lip,
}


def protocol_utility(name: str, alpha: float, j: JointDistribution) -> float:
    if name == "grr":
        return utility(grr(alpha, j.a), j)
    if name == "oue":
        return oue_utility(alpha, j)
    if name == "cr":
        return cr_utility(alpha, j)
    raise KeyError(name)


def solve_alpha(target_eps: float, leakage_fn, j: JointDistribution,
                max_iter: int = 200, tol: float = 1e-12, alpha_cap: float = 1e4) -> float:
    """Largest-utility ``alpha`` whose leakage equals ``target_eps``.

    Returns ``math.inf`` when the leakage stays below the target for every
    ``alpha`` up to ``alpha_cap``: no finite randomisation is then required.
    """
    if isinstance(leakage_fn, str):
        leakage_fn = LEAKAGE_FUNCTIONS[leakage_fn]
    if target_eps < 0:
        raise ValueError("target epsilon must be non-negative")
    f = lambda al: leakage_fn(al, j)  # noqa: E731
    lo, f_lo = 0.0, f(0.0)
    if f_lo > target_eps + tol:
        raise ValueError(f"leakage at alpha=0 is {f_lo}, above the target")
    hi = 1.0
    f_hi = f(hi)
    while f_hi <= target_eps:
        if f_hi < f_lo - tol:
            raise NonMonotoneDetected(f"leakage fell from {f_lo} to {f_hi} at alpha={hi}")
        if hi > alpha_cap:
            return math.inf
        lo, f_lo = hi, f_hi
        hi *= 2.0
        f_hi = f(hi)
    for _ in range(max_iter):
        if target_eps - f_lo <= tol:
            break
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        f_mid = f(mid)
        if f_mid < f_lo - tol or f_mid > f_hi + tol:
            raise NonMonotoneDetected(
                f"leakage not monotone on [{lo}, {hi}]: f(mid)={f_mid}")
        if f_mid <= target_eps:
            lo, f_lo = mid, f_mid
        else:
            hi, f_hi = mid, f_mid
    return lo
