"""Standardized risk differences and their additive interaction.

For a coefficient vector the model gives a risk for every exposure pair
and covariate vector; averaging those risks over the cohort's empirical
covariate distribution (every subject row, uniform weight, duplicates
kept) yields marginal risks, and their contrasts yield the two exposure
effects and the interaction:

    te1 = m(1,0) - m(0,0)
    te2 = m(0,1) - m(0,0)
    int = m(1,1) - m(0,1) - te1  =  m(1,1) - m(1,0) - te2

The two interaction expressions are algebraically identical; both are
evaluated and asserted to agree, which guards term-indexing mistakes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import Cohort
from .errors import BadCovariateIndex, DimensionMismatch
from .glm import ModelSpec, expit_stable

DUAL_INT_ATOL = 1e-12


@dataclass(frozen=True)
class StandardizationSet:
    """Covariate rows of the full cohort, uniformly weighted."""

    rows: np.ndarray  # n-by-m covariate matrix, one row per subject

    def __post_init__(self):
        if self.rows.ndim != 2 or self.rows.shape[0] < 1:
            raise ValueError("standardization set needs at least one row")

    @classmethod
    def from_cohort(cls, cohort: Cohort) -> "StandardizationSet":
        return cls(rows=np.array([r.x for r in cohort.records], dtype=float))

    @property
    def n(self) -> int:
        return self.rows.shape[0]


@dataclass(frozen=True)
class EffectTriple:
    te1: float
    te2: float
    int_: float

    def __post_init__(self):
        if not (-1.0 <= self.te1 <= 1.0 and -1.0 <= self.te2 <= 1.0):
            raise ValueError("risk differences must lie in [-1, 1]")
        if not (-2.0 <= self.int_ <= 2.0):
            raise ValueError("interaction must lie in [-2, 2]")


def _linear_predictors(pi, spec: ModelSpec, z1, z2, rows):
    """Linear predictor for each covariate row at fixed (z1, z2).

    pi may be a single coefficient vector (k,) or a stack (d, k); the
    result is (n,) or (d, n) accordingly. The terms are accumulated one by
    one in model order (never via matrix multiplication) so the bits of the
    result cannot depend on how many vectors are stacked -- this is what
    makes Monte Carlo output invariant to chunking and parallelism.
    """
    pi = np.asarray(pi, dtype=float)
    if pi.shape[-1] != spec.k:
        raise DimensionMismatch(
            f"coefficient vector has length {pi.shape[-1]}, model has {spec.k} terms"
        )
    n, m = rows.shape
    cols = np.empty((spec.k, n))
    for j, t in enumerate(spec.terms):
        if t.kind == "intercept":
            cols[j] = 1.0
        elif t.kind == "z1":
            cols[j] = z1
        elif t.kind == "z2":
            cols[j] = z2
        elif t.kind == "z1z2":
            cols[j] = z1 * z2
        else:
            c = t.covariate - 1
            if c >= m:
                raise BadCovariateIndex(t.covariate, m)
            if t.kind == "x":
                cols[j] = rows[:, c]
            elif t.kind == "z1x":
                cols[j] = z1 * rows[:, c]
            else:
                cols[j] = z2 * rows[:, c]
    eta = np.zeros(pi.shape[:-1] + (n,))
    for j in range(spec.k):
        eta += pi[..., j, None] * cols[j]
    return eta


def risk(pi, spec: ModelSpec, z1, z2, x) -> float:
    """Model risk for one subject: logistic transform of the linear predictor."""
    rows = np.asarray(x, dtype=float).reshape(1, -1)
    eta = _linear_predictors(np.asarray(pi, dtype=float), spec, z1, z2, rows)
    return float(expit_stable(eta)[..., 0])


def marginal_risk(pi, spec: ModelSpec, z1, z2, std: StandardizationSet) -> float:
    """Risk standardized over the cohort's empirical covariate distribution."""
    eta = _linear_predictors(np.asarray(pi, dtype=float), spec, z1, z2, std.rows)
    return float(np.mean(expit_stable(eta), axis=-1))


def _marginal_risks_all(pi, spec: ModelSpec, std: StandardizationSet):
    """Marginal risks at the four exposure pairs; vectorized over stacked pi."""
    out = []
    for z1, z2 in ((0, 0), (1, 0), (0, 1), (1, 1)):
        eta = _linear_predictors(pi, spec, z1, z2, std.rows)
        out.append(np.mean(expit_stable(eta), axis=-1))
    return out  # m00, m10, m01, m11


def effect_triple(pi, spec: ModelSpec, std: StandardizationSet) -> EffectTriple:
    """Evaluate (te1, te2, int) at one coefficient vector."""
    m00, m10, m01, m11 = _marginal_risks_all(
        np.asarray(pi, dtype=float), spec, std)
    te1 = m10 - m00
    te2 = m01 - m00
    int_via_te1 = (m11 - m01) - te1
    int_via_te2 = (m11 - m10) - te2
    if abs(int_via_te1 - int_via_te2) > DUAL_INT_ATOL:
        raise AssertionError(
            f"interaction computed two ways disagrees: "
            f"{int_via_te1!r} vs {int_via_te2!r}"
        )
    return EffectTriple(te1=float(te1), te2=float(te2), int_=float(int_via_te1))


def effect_triples_batch(pis, spec: ModelSpec, std: StandardizationSet):
    """(te1, te2, int) arrays for a stack of coefficient vectors.

    Identical arithmetic to effect_triple, evaluated row-parallel; the
    dual-interaction identity is asserted at the same tolerance.
    """
    pis = np.asarray(pis, dtype=float)
    m00, m10, m01, m11 = _marginal_risks_all(pis, spec, std)
    te1 = m10 - m00
    te2 = m01 - m00
    int_via_te1 = (m11 - m01) - te1
    int_via_te2 = (m11 - m10) - te2
    if np.max(np.abs(int_via_te1 - int_via_te2)) > DUAL_INT_ATOL:
        raise AssertionError("interaction computed two ways disagrees")
    return te1, te2, int_via_te1
