"""Finite joint distributions of a secret S and data X, plus information measures.

All information quantities are in nats. A joint is stored as a ``c x a``
matrix ``p[s, x]``. When X is a tuple of attributes ``(X^1, ..., X^m)`` the
flat index of ``x`` is the C-order (row-major) mixed-radix encoding of the
attribute values, so ``p.reshape(c, *shape)`` recovers the attribute axes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, InvalidDistribution, ZeroProbabilityEvent

TAU_MASS = 1e-12


def _xlogy(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Elementwise ``x * ln(y)`` with ``0 * ln(anything) = 0``."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    out = np.zeros(np.broadcast(x, y).shape)
    mask = np.broadcast_to(x != 0, out.shape)
    xb = np.broadcast_to(x, out.shape)
    yb = np.broadcast_to(y, out.shape)
    out[mask] = xb[mask] * np.log(yb[mask])
    return out


def check_distribution(d: Sequence[float], tol: float = TAU_MASS) -> np.ndarray:
    arr = np.asarray(d, dtype=float)
    if arr.ndim != 1 or arr.size == 0:
        raise InvalidDistribution("a distribution must be a non-empty vector")
    if not np.all(np.isfinite(arr)) or np.any(arr < 0):
        raise InvalidDistribution("negative or non-finite probability")
    if abs(arr.sum() - 1.0) > tol:
        raise InvalidDistribution(f"probabilities sum to {arr.sum()!r}, not 1")
    return arr


def entropy(d: Sequence[float]) -> float:
    """Shannon entropy of a probability vector, in nats."""
    arr = check_distribution(d)
    return float(-_xlogy(arr, arr).sum())


def entropies(rows: np.ndarray) -> np.ndarray:
    """Entropy of every row of a 2-D array of distributions (no validation)."""
    rows = np.asarray(rows, dtype=float)
    return -_xlogy(rows, rows).sum(axis=-1)


def mutual_information(joint) -> float:
    """I(U;V) for a joint given as a matrix ``joint[u, v]``.

    Accepts a ``JointDistribution`` (giving I(S;X)) or any non-negative
    matrix summing to one.
    """
    if isinstance(joint, JointDistribution):
        joint = joint.p
    pj = np.asarray(joint, dtype=float)
    if pj.ndim != 2:
        raise InvalidDistribution("joint must be a matrix")
    check_distribution(pj.ravel())
    pu = pj.sum(axis=1, keepdims=True)
    pv = pj.sum(axis=0, keepdims=True)
    denom = pu * pv
    mask = pj > 0
    val = float(np.sum(pj[mask] * np.log(pj[mask] / denom[mask])))
    # clip rounding noise; I >= 0
    return max(val, 0.0)


def channel_mutual_information(Q: np.ndarray, px: np.ndarray) -> float:
    """I(X;Y) for a column-stochastic channel ``Q[y, x]`` and input law ``px``."""
    Q = np.asarray(Q, dtype=float)
    px = np.asarray(px, dtype=float)
    return mutual_information(Q * px[None, :])


def batch_channel_mi(Qs: np.ndarray, px: np.ndarray) -> np.ndarray:
    """I(X;Y) for a stack of channels ``Qs[k, y, x]`` sharing the input law ``px``."""
    Qs = np.asarray(Qs, dtype=float)
    pyx = Qs * px[None, None, :]
    py = pyx.sum(axis=2, keepdims=True)
    denom = py * px[None, None, :]
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(pyx > 0, pyx * np.log(np.where(pyx > 0, pyx / denom, 1.0)), 0.0)
    return np.maximum(terms.sum(axis=(1, 2)), 0.0)


@dataclass(frozen=True)
class JointDistribution:
    """Joint law ``p[s, x]`` of a secret S (c values) and data X (a values)."""

    p: np.ndarray
    shape: tuple[int, ...] | None = None
    _cache: dict = field(default_factory=dict, init=False, repr=False, compare=False)

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.ndim != 2:
            raise InvalidDistribution("joint must be a c x a matrix")
        if not np.all(np.isfinite(p)) or np.any(p < 0):
            raise InvalidDistribution("joint has a negative or non-finite entry")
        if abs(p.sum() - 1.0) > TAU_MASS:
            raise InvalidDistribution(f"joint sums to {p.sum()!r}, not 1")
        if np.any(p.sum(axis=1) <= 0):
            raise InvalidDistribution("some secret value has zero marginal probability")
        if np.any(p.sum(axis=0) <= 0):
            raise InvalidDistribution("some data value has zero marginal probability")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)
        if self.shape is not None:
            shape = tuple(int(k) for k in self.shape)
            if any(k < 1 for k in shape) or math.prod(shape) != p.shape[1]:
                raise DimensionMismatch(
                    f"attribute shape {shape} does not multiply to a={p.shape[1]}")
            object.__setattr__(self, "shape", shape)

    def __eq__(self, other):
        if not isinstance(other, JointDistribution):
            return NotImplemented
        return self.shape == other.shape and np.array_equal(self.p, other.p)

    __hash__ = None

    # sizes
    @property
    def c(self) -> int:
        return self.p.shape[0]

    @property
    def a(self) -> int:
        return self.p.shape[1]

    @property
    def m(self) -> int:
        return 1 if self.shape is None else len(self.shape)

    # marginals and conditionals
    @property
    def p_s(self) -> np.ndarray:
        return self.p.sum(axis=1)

    @property
    def p_x(self) -> np.ndarray:
        return self.p.sum(axis=0)

    @property
    def p_x_given_s(self) -> np.ndarray:
        """Matrix whose row ``s`` is p_{X|s}."""
        if "x|s" not in self._cache:
            self._cache["x|s"] = self.p / self.p_s[:, None]
        return self._cache["x|s"]

    @property
    def p_s_given_x(self) -> np.ndarray:
        """Matrix ``[s, x]`` whose column ``x`` is p_{S|x}."""
        if "s|x" not in self._cache:
            self._cache["s|x"] = self.p / self.p_x[None, :]
        return self._cache["s|x"]

    def with_shape(self, shape: Sequence[int] | None) -> "JointDistribution":
        return JointDistribution(self.p, None if shape is None else tuple(shape))

    def tensor(self) -> np.ndarray:
        """The joint as an array with axes ``(s, x^1, ..., x^m)``."""
        if self.shape is None:
            return self.p
        return self.p.reshape((self.c,) + self.shape)

    def attribute_marginal(self, j: int) -> np.ndarray:
        self._require_shape()
        t = self.tensor()
        axes = tuple(k for k in range(t.ndim) if k != j + 1)
        return t.sum(axis=axes)

    def attribute_conditional(self, j: int, given: dict[int, int] | None = None,
                              s: int | None = None) -> np.ndarray:
        """p_{X^j | x^J} (or p_{X^j | s, x^J} when ``s`` is given).

        ``given`` maps attribute indices in J to their observed values and must
        not contain ``j``. Raises ``ZeroProbabilityEvent`` when the
        conditioning event has probability zero.
        """
        self._require_shape()
        given = dict(given or {})
        if j in given:
            raise ValueError("attribute j cannot be conditioned on itself")
        t = self.tensor()
        index: list = [slice(None)] * t.ndim
        if s is not None:
            index[0] = s
        for k, v in given.items():
            index[k + 1] = v
        sub = t[tuple(index)]
        # remaining axes: s (if not fixed) then attributes not in `given`
        kept = ([] if s is not None else [0]) + [
            k + 1 for k in range(len(self.shape)) if k not in given]
        pos = kept.index(j + 1)
        other = tuple(i for i in range(sub.ndim) if i != pos)
        vec = sub.sum(axis=other) if other else sub
        mass = vec.sum()
        if mass <= 0:
            raise ZeroProbabilityEvent(
                f"conditioning event s={s}, x^J={given} has probability zero")
        return vec / mass

    def event_mass(self, given: dict[int, int], s: int | None = None) -> float:
        """P(S=s, X^J=x^J) (or P(X^J=x^J) when ``s`` is None)."""
        self._require_shape()
        t = self.tensor()
        index: list = [slice(None)] * t.ndim
        if s is not None:
            index[0] = s
        for k, v in given.items():
            index[k + 1] = v
        return float(t[tuple(index)].sum())

    def _require_shape(self):
        if self.shape is None:
            raise ValueError("joint distribution carries no attribute shape")

    # information quantities
    def mutual_information(self) -> float:
        return mutual_information(self.p)

    def h_x(self) -> float:
        return entropy(self.p_x)

    # serialisation
    def to_dict(self) -> dict:
        out = {"c": self.c, "a": self.a}
        if self.shape is not None:
            out["shape"] = list(self.shape)
        out["p"] = self.p.tolist()
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "JointDistribution":
        try:
            p = np.asarray(d["p"], dtype=float)
            c, a = int(d["c"]), int(d["a"])
        except (KeyError, TypeError, ValueError) as exc:
            raise InvalidDistribution(f"malformed joint distribution record: {exc}") from exc
        if p.shape != (c, a):
            raise DimensionMismatch(f"declared {c}x{a} but matrix is {p.shape}")
        return cls(p, d.get("shape"))


def conditionals(j: JointDistribution) -> dict[str, np.ndarray]:
    """Both families of single-variable conditionals of a joint."""
    return {"x_given_s": j.p_x_given_s.copy(), "s_given_x": j.p_s_given_x.copy()}


def pushforward(Q, j: JointDistribution) -> tuple[np.ndarray, np.ndarray]:
    """Joints ``p_{Y,S}[y, s]`` and ``p_{Y,X}[y, x]`` induced by channel ``Q``."""
    Qm = np.asarray(getattr(Q, "Q", Q), dtype=float)
    if Qm.ndim != 2 or Qm.shape[1] != j.a:
        raise DimensionMismatch(f"channel with input size {Qm.shape[-1]} applied to a={j.a}")
    p_ys = Qm @ j.p.T
    p_yx = Qm * j.p_x[None, :]
    return p_ys, p_yx


def _rng(seed) -> np.random.Generator:
    return seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)


def sample_jeffreys(c: int, a: int, seed=None, shape=None) -> JointDistribution:
    """Joint drawn from the symmetric Dirichlet(1/2) law on the c*a cells."""
    if c < 1 or a < 1:
        raise ValueError("c and a must be positive")
    rng = _rng(seed)
    while True:
        g = rng.gamma(0.5, 1.0, size=(c, a))
        p = g / g.sum()
        # zero marginals are possible only through float underflow; redraw
        if np.all(p.sum(axis=0) > 0) and np.all(p.sum(axis=1) > 0):
            return JointDistribution(p, shape)


def sample_uniform_normalised(c: int, a: int, seed=None, shape=None) -> JointDistribution:
    """Joint with iid Uniform[0,1] cells, normalised to total mass one."""
    if c < 1 or a < 1:
        raise ValueError("c and a must be positive")
    rng = _rng(seed)
    while True:
        u = rng.random((c, a))
        p = u / u.sum()
        if np.all(p > 0):
            return JointDistribution(p, shape)
