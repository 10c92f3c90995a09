"""Invariant laws on configuration spaces and their finite-volume counterparts.

Three model families: i.i.d. product laws, periodic-orbit laws (uniform on
the orbit of a pattern that factors through a finite quotient) and convex
mixtures.  Each model knows how to sample finite configurations on a
compatible sofic approximation, how to compute exact radius-R cylinder
marginals, and how to push a finite-model law forward through a vertex map
while identifying collided coordinates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .groups import CayleyBall, GroupSpec, PatternWindow, ball
from .sofic import (
    FiniteQuotient,
    SoficApproximation,
    SoficCompatibilityError,
    lattice_quotient,
)

DEFAULT_ENUM_BUDGET = 10**6

WEIGHT_TOL = 1e-12


class EnumerationBudgetError(RuntimeError):
    """Exact enumeration would exceed the configured budget.

    Callers that can tolerate sampling error should retry in Monte Carlo mode.
    """


@dataclass(frozen=True)
class Alphabet:
    symbols: tuple

    def __post_init__(self):
        if not self.symbols:
            raise ValueError("alphabet must be nonempty")
        if len(set(self.symbols)) != len(self.symbols):
            raise ValueError("alphabet symbols must be distinct")

    @property
    def size(self) -> int:
        return len(self.symbols)

    def index(self, symbol: str) -> int:
        return self.symbols.index(symbol)


def binary_alphabet() -> Alphabet:
    return Alphabet(symbols=("0", "1"))


@dataclass
class Configuration:
    """Symbol indices per vertex of a finite model."""

    values: np.ndarray

    @property
    def n_vertices(self) -> int:
        return len(self.values)


# ---------------------------------------------------------------------------
# Models
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class IIDProduct:
    alphabet: Alphabet
    weights: tuple

    def __post_init__(self):
        if len(self.weights) != self.alphabet.size:
            raise ValueError("one weight per symbol required")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be nonnegative")
        if abs(sum(self.weights) - 1.0) > WEIGHT_TOL:
            raise ValueError("weights must sum to 1")


@dataclass(frozen=True)
class PeriodicOrbit:
    """Uniform law on the orbit of a pattern factoring through G -> G/N.

    ``pattern[c]`` is the symbol index on coset c of the quotient.  For
    lattices the quotient is the box (Z/m_1) x ... x (Z/m_d) with coordinate 0
    least significant in the coset index.
    """

    alphabet: Alphabet
    quotient: FiniteQuotient
    pattern: tuple
    periods: Optional[tuple] = None   # set for lattice models

    def __post_init__(self):
        if len(self.pattern) != self.quotient.size:
            raise ValueError("pattern must cover every coset")
        if any(not (0 <= int(p) < self.alphabet.size) for p in self.pattern):
            raise ValueError("pattern symbols out of alphabet range")

    def translate_pattern(self, t: int) -> tuple:
        """Pattern of the t-translate: value at coset c is pattern[q^rep_c(t)]."""
        reps = self.quotient.representative_words()
        out = []
        for c in range(self.quotient.size):
            perm = list(range(self.quotient.size))
            for letter in reversed(reps[c]):
                perm = [self.quotient.perms[letter][x] for x in perm]
            out.append(self.pattern[perm[t]])
        return tuple(out)

    def orbit(self) -> list[tuple]:
        """Distinct translate patterns; uniform sampling weights them equally."""
        seen = []
        for t in range(self.quotient.size):
            p = self.translate_pattern(t)
            if p not in seen:
                seen.append(p)
        return seen


@dataclass(frozen=True)
class Mixture:
    components: tuple
    weights: tuple

    def __post_init__(self):
        if len(self.components) != len(self.weights):
            raise ValueError("one weight per component required")
        if any(w <= 0 for w in self.weights):
            raise ValueError("mixture weights must be positive")
        if abs(sum(self.weights) - 1.0) > WEIGHT_TOL:
            raise ValueError("mixture weights must sum to 1")


MeasureModel = Union[IIDProduct, PeriodicOrbit, Mixture]


def lattice_periodic(alphabet: Alphabet, periods: Sequence[int],
                     pattern: Sequence[int]) -> PeriodicOrbit:
    """Periodic model on Z^d with a diagonal period lattice."""
    d = len(periods)
    quotient = lattice_quotient(d, periods)
    return PeriodicOrbit(alphabet=alphabet, quotient=quotient,
                         pattern=tuple(int(p) for p in pattern),
                         periods=tuple(int(m) for m in periods))


def lift_configuration(moduli: Sequence[int], quotient_pattern: Sequence[int],
                       alphabet: Alphabet) -> PeriodicOrbit:
    """Pull a pattern on (Z/m)^d back through Z^d -> (Z/m)^d.

    The lift reads the quotient pattern through the projection, which is
    exactly the periodic model with the moduli as periods.
    """
    return lattice_periodic(alphabet, moduli, quotient_pattern)


def model_alphabet(model: MeasureModel) -> Alphabet:
    if isinstance(model, Mixture):
        alpha = model_alphabet(model.components[0])
        if any(model_alphabet(c) != alpha for c in model.components):
            raise ValueError("mixture components disagree on the alphabet")
        return alpha
    return model.alphabet


# ---------------------------------------------------------------------------
# Sampling
# ---------------------------------------------------------------------------


def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def sample_configuration(model: MeasureModel, sigma: SoficApproximation,
                         seed) -> Configuration:
    """One configuration of the finite-model law on sigma's vertex set."""
    rng = _as_rng(seed)
    return Configuration(values=_sample_values(model, sigma, rng))


def _sample_values(model: MeasureModel, sigma: SoficApproximation,
                   rng: np.random.Generator) -> np.ndarray:
    n = sigma.n_vertices
    if isinstance(model, IIDProduct):
        return rng.choice(model.alphabet.size, size=n, p=np.asarray(model.weights))
    if isinstance(model, Mixture):
        k = rng.choice(len(model.components), p=np.asarray(model.weights))
        return _sample_values(model.components[k], sigma, rng)
    # periodic: uniformly random translate of the fundamental pattern
    t = int(rng.integers(model.quotient.size))
    return _periodic_base_values(model, sigma, t)


def _periodic_base_values(model: PeriodicOrbit, sigma: SoficApproximation,
                          t: int) -> np.ndarray:
    """Configuration of the t-translate of the periodic pattern on sigma."""
    pattern = np.asarray(model.translate_pattern(t), dtype=np.int64)
    if sigma.provenance == "torus" and model.periods is not None:
        d = sigma.meta["d"]
        n = sigma.meta["n"]
        if len(model.periods) != d:
            raise SoficCompatibilityError("period dimension mismatch")
        if any(n % m != 0 for m in model.periods):
            raise SoficCompatibilityError(
                f"torus side {n} is not a multiple of the periods {model.periods}")
        idx = np.arange(sigma.n_vertices)
        coset = np.zeros(sigma.n_vertices, dtype=np.int64)
        stride = 1
        for coord, m in enumerate(model.periods):
            coords = (idx // n**coord) % n
            coset += (coords % m) * stride
            stride *= m
        return pattern[coset]
    if sigma.provenance == "product_with_quotient":
        quotient = sigma.meta.get("quotient")
        if quotient != model.quotient:
            raise SoficCompatibilityError(
                "sofic model was built with a different quotient than the measure")
        q = quotient.size
        # translate_pattern already resolved the coset values of the t-shift
        return np.tile(pattern, sigma.n_vertices // q)
    raise SoficCompatibilityError(
        f"periodic model incompatible with sofic approximation "
        f"of provenance {sigma.provenance!r}")


# ---------------------------------------------------------------------------
# Windows and distributions
# ---------------------------------------------------------------------------


def pullback_window(rho: Configuration, sigma: SoficApproximation, v: int,
                    radius: int) -> PatternWindow:
    """Window g -> rho(sigma^g(v)) on the Cayley ball, canonical order."""
    b = ball(sigma.group, radius)
    vals = tuple(int(rho.values[sigma.perm_of(g)[v]]) for g in b.elements)
    return PatternWindow(radius=radius, values=vals)


@dataclass
class WindowDistribution:
    """Probabilities over radius-R patterns (tuples of symbol indices)."""

    radius: int
    probs: dict
    counts: Optional[dict] = None

    def total(self) -> float:
        return float(sum(self.probs.values()))

    def tv(self, other: "WindowDistribution") -> float:
        keys = set(self.probs) | set(other.probs)
        return 0.5 * sum(abs(self.probs.get(k, 0.0) - other.probs.get(k, 0.0))
                         for k in keys)

    def restrict(self, big_ball: CayleyBall, small_ball: CayleyBall) -> "WindowDistribution":
        """Marginal on a smaller ball, summing over the outer positions."""
        take = [big_ball.index(g) for g in small_ball.elements]
        out: dict = {}
        for pat, p in self.probs.items():
            sub = tuple(pat[i] for i in take)
            out[sub] = out.get(sub, 0.0) + p
        return WindowDistribution(radius=small_ball.radius, probs=out)


def empirical_window_distribution(rho: Configuration, sigma: SoficApproximation,
                                  radius: int) -> WindowDistribution:
    """Frequencies of the vertex-rooted pullback windows (exact counts)."""
    b = ball(sigma.group, radius)
    images = sigma.ball_images(b)
    vals = rho.values[images]                       # (|B|, n)
    n = sigma.n_vertices
    base = int(vals.max()) + 1 if vals.size else 1
    counts: dict = {}
    if base ** len(b) < 2**62:
        weights = base ** np.arange(len(b), dtype=np.int64)
        codes = (vals.astype(np.int64) * weights[:, None]).sum(axis=0)
        uniq, cnt = np.unique(codes, return_counts=True)
        for code, c in zip(uniq, cnt):
            counts[_decode(int(code), base, len(b))] = int(c)
    else:
        for v in range(n):
            pat = tuple(int(x) for x in vals[:, v])
            counts[pat] = counts.get(pat, 0) + 1
    probs = {pat: c / n for pat, c in counts.items()}
    return WindowDistribution(radius=radius, probs=probs, counts=counts)


def target_marginal(model: MeasureModel, radius: int,
                    budget: int = DEFAULT_ENUM_BUDGET) -> WindowDistribution:
    """Exact radius-R cylinder marginal of the infinite-volume law."""
    group = _model_group(model)
    b = ball(group, radius)
    return _target_marginal_on(model, b, budget)


def _model_group(model: MeasureModel) -> GroupSpec:
    if isinstance(model, Mixture):
        return _model_group(model.components[0])
    if isinstance(model, PeriodicOrbit):
        return model.quotient.group
    raise ValueError(
        "an IID model has no intrinsic group; use target_marginal_on with a ball")


def target_marginal_on(model: MeasureModel, group: GroupSpec, radius: int,
                       budget: int = DEFAULT_ENUM_BUDGET) -> WindowDistribution:
    return _target_marginal_on(model, ball(group, radius), budget)


def _target_marginal_on(model: MeasureModel, b: CayleyBall,
                        budget: int) -> WindowDistribution:
    if isinstance(model, IIDProduct):
        A = model.alphabet.size
        if A ** len(b) > budget:
            raise EnumerationBudgetError(
                f"{A}^{len(b)} patterns exceed budget {budget}; "
                "use Monte Carlo estimation instead")
        probs: dict = {}
        for code in range(A ** len(b)):
            pat = _decode(code, A, len(b))
            p = 1.0
            for s in pat:
                p *= model.weights[s]
            if p > 0:
                probs[pat] = p
        return WindowDistribution(radius=b.radius, probs=probs)
    if isinstance(model, PeriodicOrbit):
        q = model.quotient.size
        # value of the t-translate at ball element g is pattern[q^g(t)]
        perms = [model.quotient.act_perm(g) for g in b.elements]
        probs = {}
        for t in range(q):
            pat = tuple(model.pattern[perm[t]] for perm in perms)
            probs[pat] = probs.get(pat, 0.0) + 1.0 / q
        return WindowDistribution(radius=b.radius, probs=probs)
    if isinstance(model, Mixture):
        probs = {}
        for comp, w in zip(model.components, model.weights):
            sub = _target_marginal_on(comp, b, budget)
            for pat, p in sub.probs.items():
                probs[pat] = probs.get(pat, 0.0) + w * p
        return WindowDistribution(radius=b.radius, probs=probs)
    raise TypeError(f"unknown model {type(model)!r}")


def _decode(code: int, base: int, length: int) -> tuple:
    out = []
    for _ in range(length):
        out.append(code % base)
        code //= base
    return tuple(out)


# ---------------------------------------------------------------------------
# Pushforward of the finite-model law through a vertex map
# ---------------------------------------------------------------------------


def pushforward_window_distribution(model: MeasureModel,
                                    sigma: SoficApproximation, v: int,
                                    radius: int,
                                    budget: int = DEFAULT_ENUM_BUDGET
                                    ) -> WindowDistribution:
    """Exact law of the radius-R window of Pi_v under the finite-model law.

    Collisions sigma^g(v) = sigma^h(v) identify the coordinates g and h, so
    the pushforward is supported on patterns constant on collision classes.
    """
    b = ball(sigma.group, radius)
    image = [int(sigma.perm_of(g)[v]) for g in b.elements]
    return _pushforward_on(model, sigma, b, image, budget)


def _pushforward_on(model: MeasureModel, sigma: SoficApproximation,
                    b: CayleyBall, image: list[int],
                    budget: int) -> WindowDistribution:
    if isinstance(model, IIDProduct):
        classes: dict[int, list[int]] = {}
        for pos, u in enumerate(image):
            classes.setdefault(u, []).append(pos)
        reps = list(classes.values())
        A = model.alphabet.size
        if A ** len(reps) > budget:
            raise EnumerationBudgetError("pushforward enumeration over budget")
        probs: dict = {}
        pat = [0] * len(b)
        for code in range(A ** len(reps)):
            assign = _decode(code, A, len(reps))
            p = 1.0
            for s in assign:
                p *= model.weights[s]
            if p == 0:
                continue
            for cls, s in zip(reps, assign):
                for pos in cls:
                    pat[pos] = s
            key = tuple(pat)
            probs[key] = probs.get(key, 0.0) + p
        return WindowDistribution(radius=b.radius, probs=probs)
    if isinstance(model, PeriodicOrbit):
        q = model.quotient.size
        probs = {}
        for t in range(q):
            rho = _periodic_base_values(model, sigma, t)
            pat = tuple(int(rho[u]) for u in image)
            probs[pat] = probs.get(pat, 0.0) + 1.0 / q
        return WindowDistribution(radius=b.radius, probs=probs)
    if isinstance(model, Mixture):
        probs = {}
        for comp, w in zip(model.components, model.weights):
            sub = _pushforward_on(comp, sigma, b, image, budget)
            for pat, p in sub.probs.items():
                probs[pat] = probs.get(pat, 0.0) + w * p
        return WindowDistribution(radius=b.radius, probs=probs)
    raise TypeError(f"unknown model {type(model)!r}")


# ---------------------------------------------------------------------------
# lw*/le diagnostics
# ---------------------------------------------------------------------------


@dataclass
class LeDiagnosticRow:
    n: int
    radius: int
    eps: float
    lw_fraction: float
    le_fraction: float
    le_halfwidth: float

    def to_json(self) -> dict:
        return {"n": self.n, "R": self.radius, "eps": self.eps,
                "lw_fraction": self.lw_fraction,
                "le_fraction": self.le_fraction,
                "le_halfwidth": self.le_halfwidth}


def le_diagnostic(target_model: MeasureModel,
                  sigmas: Sequence[SoficApproximation],
                  radius: int, eps: float, sample_count: int = 200,
                  seed: int = 0,
                  finite_model: Optional[MeasureModel] = None,
                  budget: int = DEFAULT_ENUM_BUDGET) -> list[LeDiagnosticRow]:
    """Locally-weak* and local-empirical convergence statistics per size.

    lw*: exact fraction of vertices whose pushforward marginal (of the finite
    law, collisions identified) is within eps in total variation of the
    target marginal.  le: Monte Carlo fraction of sampled configurations
    whose empirical window distribution is within eps of the target, with a
    95% binomial half-width.  ``finite_model`` defaults to the target law.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if sample_count < 1:
        raise ValueError("need at least one sample")
    if finite_model is None:
        finite_model = target_model
    rows = []
    for size_index, sigma in enumerate(sigmas):
        target = target_marginal_on(target_model, sigma.group, radius, budget)
        b = ball(sigma.group, radius)
        images = sigma.ball_images(b)
        cache: dict = {}
        good_hits = 0
        n = sigma.n_vertices
        for v in range(n):
            image = tuple(int(images[i, v]) for i in range(len(b)))
            key = _pushforward_key(finite_model, sigma, image)
            tv = cache.get(key)
            if tv is None:
                push = _pushforward_on(finite_model, sigma, b, list(image), budget)
                tv = push.tv(target)
                cache[key] = tv
            if tv < eps:
                good_hits += 1
        lw_fraction = good_hits / n
        hits = 0
        for j in range(sample_count):
            rng = np.random.default_rng(
                np.random.SeedSequence(entropy=seed, spawn_key=(size_index, j)))
            rho = sample_configuration(finite_model, sigma, rng)
            emp = empirical_window_distribution(rho, sigma, radius)
            if emp.tv(target) < eps:
                hits += 1
        f = hits / sample_count
        half = 1.96 * math.sqrt(max(f * (1 - f), 1e-12) / sample_count)
        rows.append(LeDiagnosticRow(n=n, radius=radius, eps=eps,
                                    lw_fraction=lw_fraction,
                                    le_fraction=f, le_halfwidth=half))
    return rows


def _pushforward_key(model: MeasureModel, sigma: SoficApproximation,
                     image: tuple):
    if isinstance(model, IIDProduct):
        # the pushforward depends only on the collision partition
        first = {}
        key = []
        for u in image:
            key.append(first.setdefault(u, len(first)))
        return ("iid", tuple(key))
    if isinstance(model, PeriodicOrbit):
        return ("periodic", image)
    if isinstance(model, Mixture):
        return ("mix", tuple(_pushforward_key(c, sigma, image)
                             for c in model.components))
    raise TypeError(f"unknown model {type(model)!r}")
