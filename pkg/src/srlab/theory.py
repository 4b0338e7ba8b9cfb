"""Numerical certification of the permutation-restriction results.

Restricting a classifier's outputs to the set of permutations of a fixed
simplex vector v makes the per-class loss sum constant, which in turn
makes risk minimization noise-tolerant. This module checks those facts
by exact enumeration on finite instances:

- the constant-sum property of every loss over the permutation set,
- coincidence of clean- and noisy-risk argmin sets under symmetric noise,
- noisy minimizers being clean minimizers under class-conditional noise,
- the risk gap bound 2*c*delta for outputs within l2 distance epsilon of
  the permutation set, with c = eta / ((1-eta)k - 1) and delta a sampled
  modulus of continuity of the loss sum.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import reduce

import numpy as np

from .autodiff import PROB_FLOOR
from .losses import LossSpec, loss_values_all_classes
from .noise import TransitionMatrix

TIE_TOL = 1e-12
MAX_PERMUTATION_K = 8
MAX_HYPOTHESES = 2_000_000


@dataclass(frozen=True)
class PermutationFamily:
    """All k! reorderings of a base simplex vector (duplicates retained)."""

    base: np.ndarray
    members: np.ndarray  # (k!, k), lexicographic permutation order

    @property
    def k(self) -> int:
        return self.base.shape[0]

    def __len__(self) -> int:
        return self.members.shape[0]


def permutations_of(v) -> PermutationFamily:
    """Every permuted copy of v, in lexicographic permutation order.

    Ties in v produce duplicate members; the count is always k!.
    """
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError("expected a 1-D vector")
    k = v.shape[0]
    if k > MAX_PERMUTATION_K:
        raise ValueError(
            f"k={k} gives {k}! members; enumeration is capped at "
            f"k={MAX_PERMUTATION_K} - use sampled permutations instead"
        )
    members = np.array([v[list(pi)] for pi in itertools.permutations(range(k))])
    return PermutationFamily(v, members)


def loss_sum_over_classes(spec: LossSpec, u) -> float:
    """sum_i L(u, i) over all k classes."""
    return float(loss_values_all_classes(spec, u).sum())


@dataclass(frozen=True)
class SymmetryVerdict:
    constant: bool
    C: float
    max_deviation: float


def check_symmetric_condition(spec: LossSpec, v, tol: float = TIE_TOL) -> SymmetryVerdict:
    """Is sum_i L(u, i) the same constant for every permutation u of v?"""
    family = permutations_of(v)
    sums = np.array([loss_sum_over_classes(spec, u) for u in family.members])
    c = loss_sum_over_classes(spec, family.base)
    deviation = float(np.abs(sums - c).max())
    return SymmetryVerdict(constant=deviation <= tol, C=c, max_deviation=deviation)


@dataclass(frozen=True)
class FiniteInstance:
    """m feature identities with probability weights, clean labels, and a
    label-corruption transition matrix."""

    weights: np.ndarray
    labels: np.ndarray
    transition: TransitionMatrix

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if weights.ndim != 1 or labels.shape != weights.shape:
            raise ValueError("weights and labels must be equal-length vectors")
        if weights.min() < 0.0 or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("weights must be nonnegative and sum to 1")
        if labels.min() < 0 or labels.max() >= self.transition.k:
            raise ValueError(f"labels out of range for k={self.transition.k}")
        object.__setattr__(self, "weights", weights)
        object.__setattr__(self, "labels", labels)

    @classmethod
    def uniform(cls, labels, transition: TransitionMatrix) -> "FiniteInstance":
        labels = np.asarray(labels, dtype=np.int64)
        return cls(np.full(labels.shape[0], 1.0 / labels.shape[0]), labels,
                   transition)

    @property
    def m(self) -> int:
        return self.labels.shape[0]

    @property
    def k(self) -> int:
        return self.transition.k


def _check_outputs(outputs, inst: FiniteInstance) -> np.ndarray:
    outputs = np.asarray(outputs, dtype=np.float64)
    if outputs.shape != (inst.m, inst.k):
        raise ValueError(
            f"hypothesis must assign one simplex row per point: expected "
            f"{(inst.m, inst.k)}, got {outputs.shape}"
        )
    return outputs


def clean_risk(spec: LossSpec, outputs, inst: FiniteInstance) -> float:
    """sum_i weight_i * L(f(x_i), y_i)."""
    outputs = _check_outputs(outputs, inst)
    total = 0.0
    for w, row, y in zip(inst.weights, outputs, inst.labels):
        total += w * loss_values_all_classes(spec, row)[y]
    return float(total)


def noisy_risk(spec: LossSpec, outputs, inst: FiniteInstance) -> float:
    """sum_i weight_i * sum_j T(y_i, j) * L(f(x_i), j)."""
    outputs = _check_outputs(outputs, inst)
    t = inst.transition.entries
    total = 0.0
    for w, row, y in zip(inst.weights, outputs, inst.labels):
        total += w * float(t[y] @ loss_values_all_classes(spec, row))
    return float(total)


@dataclass(frozen=True)
class RiskReport:
    """Enumerated (or sampled) risks with argmin sets and bound quantities.

    ``verdict`` is None when preconditions failed (see flags). Hypothesis
    index h encodes per-point member choices: h = sum_i choice_i * M^(m-1-i)
    for M members. ``log_floor`` records the probability clamp in effect,
    which is what keeps C finite for losses with logs at one-hot vectors.
    """

    clean_risks: np.ndarray
    noisy_risks: np.ndarray
    clean_argmin: np.ndarray
    noisy_argmin: np.ndarray
    verdict: bool | None
    flags: tuple = ()
    C: float | None = None
    c: float | None = None
    delta: float | None = None
    epsilon: float | None = None
    eta: float | None = None
    log_floor: float = PROB_FLOOR

    def to_text(self) -> str:
        lines = [
            f"hypotheses: {self.clean_risks.shape[0]}",
            f"verdict: {self.verdict}",
        ]
        if self.flags:
            lines.append("flags: " + ", ".join(self.flags))
        for label, value in (("C", self.C), ("c", self.c),
                             ("delta", self.delta), ("epsilon", self.epsilon),
                             ("eta", self.eta)):
            if value is not None:
                lines.append(f"{label}: {value:.12g}")
        lines.append(f"log_floor: {self.log_floor:g}")
        lines.append(f"clean argmin set: {self.clean_argmin.tolist()}")
        lines.append(f"noisy argmin set: {self.noisy_argmin.tolist()}")
        return "\n".join(lines)

    def to_csv(self) -> str:
        clean_set = set(self.clean_argmin.tolist())
        noisy_set = set(self.noisy_argmin.tolist())
        lines = ["hypothesis,clean_risk,noisy_risk,in_clean_argmin,in_noisy_argmin"]
        for h in range(self.clean_risks.shape[0]):
            lines.append(
                f"{h},{self.clean_risks[h]:.17g},{self.noisy_risks[h]:.17g},"
                f"{int(h in clean_set)},{int(h in noisy_set)}"
            )
        return "\n".join(lines) + "\n"


def argmin_set(values: np.ndarray, tol: float = TIE_TOL) -> np.ndarray:
    """Indices within tol of the minimum (ties grouped by value)."""
    return np.flatnonzero(values <= values.min() + tol)


def _loss_table(spec: LossSpec, members: np.ndarray) -> np.ndarray:
    return np.array([loss_values_all_classes(spec, u) for u in members])


def _enumerate_risks(loss_table: np.ndarray, inst: FiniteInstance):
    """Clean and noisy risks for every assignment of members to points.

    Hypothesis index order matches itertools.product over member choices
    (first point's choice varies slowest).
    """
    n_members = loss_table.shape[0]
    if n_members ** inst.m > MAX_HYPOTHESES:
        raise ValueError(
            f"instance too large: {n_members}^{inst.m} hypotheses exceeds "
            f"{MAX_HYPOTHESES}"
        )
    t = inst.transition.entries
    clean_parts = [w * loss_table[:, y]
                   for w, y in zip(inst.weights, inst.labels)]
    noisy_parts = [w * loss_table @ t[y]
                   for w, y in zip(inst.weights, inst.labels)]
    clean = reduce(lambda acc, part: np.add.outer(acc, part).ravel(),
                   clean_parts, np.zeros(1))
    noisy = reduce(lambda acc, part: np.add.outer(acc, part).ravel(),
                   noisy_parts, np.zeros(1))
    return clean, noisy


def _symmetric_eta(transition: TransitionMatrix) -> float:
    """Noise rate of a uniform-flip matrix; raises if rows are not uniform."""
    t = transition.entries
    k = transition.k
    diag = np.diag(t)
    if np.abs(diag - diag[0]).max() > 1e-12:
        raise ValueError("transition is not symmetric: diagonal varies")
    off = t[~np.eye(k, dtype=bool)]
    if off.size and np.abs(off - off[0]).max() > 1e-12:
        raise ValueError("transition is not symmetric: off-diagonal varies")
    return float(1.0 - diag[0])


def verify_theorem1(spec: LossSpec, v, inst: FiniteInstance,
                    tie_tol: float = TIE_TOL) -> RiskReport:
    """Symmetric-noise tolerance: over all hypotheses mapping points into
    the permutation set of v, the clean and noisy argmin sets coincide
    when eta < 1 - 1/k. Exhaustive over (k!)^m hypotheses.
    """
    eta = _symmetric_eta(inst.transition)
    flags = []
    if not eta < 1.0 - 1.0 / inst.k:
        flags.append("symmetric_bound_violated")
    family = permutations_of(v)
    clean, noisy = _enumerate_risks(_loss_table(spec, family.members), inst)
    clean_set = argmin_set(clean, tie_tol)
    noisy_set = argmin_set(noisy, tie_tol)
    return RiskReport(
        clean_risks=clean, noisy_risks=noisy,
        clean_argmin=clean_set, noisy_argmin=noisy_set,
        verdict=bool(np.array_equal(clean_set, noisy_set)),
        flags=tuple(flags),
        C=loss_sum_over_classes(spec, v),
        eta=eta,
    )


def verify_theorem2(spec: LossSpec, v, inst: FiniteInstance,
                    tie_tol: float = TIE_TOL) -> RiskReport:
    """Class-conditional tolerance: every noisy-risk minimizer is a
    clean-risk minimizer, provided 0 <= L <= C/(k-1) over the permutation
    set, the clean optimum attains risk 0 (v one-hot), and each row
    satisfies eta_{y,i} < 1 - eta_y. Violated preconditions are reported
    instead of a verdict.
    """
    family = permutations_of(v)
    loss_table = _loss_table(spec, family.members)
    c_const = loss_sum_over_classes(spec, v)
    clean, noisy = _enumerate_risks(loss_table, inst)

    flags = []
    if not inst.transition.class_conditional_bound_ok():
        flags.append("noise_condition_violated")
    bound = c_const / (inst.k - 1)
    if loss_table.min() < -tie_tol or loss_table.max() > bound + 1e-9:
        flags.append("loss_range_violated")
    if clean.min() > tie_tol:
        flags.append("zero_clean_risk_unattained")

    clean_set = argmin_set(clean, tie_tol)
    noisy_set = argmin_set(noisy, tie_tol)
    verdict = None
    if not flags:
        verdict = bool(np.isin(noisy_set, clean_set).all())
    return RiskReport(
        clean_risks=clean, noisy_risks=noisy,
        clean_argmin=clean_set, noisy_argmin=noisy_set,
        verdict=verdict, flags=tuple(flags), C=c_const,
    )


def project_simplex(x: np.ndarray) -> np.ndarray:
    """Euclidean projection onto the probability simplex."""
    x = np.asarray(x, dtype=np.float64)
    u = np.sort(x)[::-1]
    css = np.cumsum(u) - 1.0
    rho = np.flatnonzero(u > css / np.arange(1, x.shape[0] + 1))[-1]
    theta = css[rho] / (rho + 1.0)
    return np.maximum(x - theta, 0.0)


def _perturbed_member(rng, members: np.ndarray, epsilon: float):
    """Random member of the permutation set and a point within epsilon of it.

    Uniform draw in the epsilon-ball, then projected back to the simplex;
    projection is nonexpansive, so the point stays within epsilon.
    """
    base = members[rng.integers(members.shape[0])]
    if epsilon == 0.0:
        return base, base
    k = base.shape[0]
    direction = rng.standard_normal(k)
    direction /= np.linalg.norm(direction)
    radius = epsilon * rng.random() ** (1.0 / k)
    return base, project_simplex(base + radius * direction)


def estimate_delta(spec: LossSpec, v, epsilon: float,
                   n_samples: int = 2000, seed: int = 0) -> float:
    """Sampled modulus of continuity of the loss sum over the epsilon-ball
    around the permutation set: max |sum_i L(u1,i) - sum_i L(u2,i)| over
    pairs (member, projected perturbation). A lower bound on the true
    modulus; nondecreasing in epsilon in expectation.
    """
    if epsilon < 0.0:
        raise ValueError(f"epsilon must be nonnegative, got {epsilon}")
    if epsilon == 0.0:
        return 0.0
    members = permutations_of(v).members
    rng = np.random.default_rng(seed)
    worst = 0.0
    for _ in range(n_samples):
        base, u2 = _perturbed_member(rng, members, epsilon)
        diff = abs(loss_sum_over_classes(spec, u2) - loss_sum_over_classes(spec, base))
        worst = max(worst, diff)
    return worst


def verify_risk_bound(spec: LossSpec, v, epsilon: float, inst: FiniteInstance,
                      seed: int = 0, n_hypotheses: int = 2000,
                      n_delta_samples: int = 2000,
                      slack: float = 1e-9) -> RiskReport:
    """Risk gap bound under symmetric noise for near-permutation outputs:

        R(f*_eta) - R(f*) <= 2 c delta,   c = eta / ((1-eta)k - 1)

    over a sampled grid of hypotheses whose outputs lie within epsilon of
    the permutation set. delta is the larger of the sampled estimate and
    the exact loss-sum deviation of the grid's own outputs (certifying the
    bound for the sampled class).
    """
    eta = _symmetric_eta(inst.transition)
    if not eta < 1.0 - 1.0 / inst.k:
        raise ValueError(f"eta={eta} violates the bound eta < 1 - 1/k")
    c = eta / ((1.0 - eta) * inst.k - 1.0)
    c_const = loss_sum_over_classes(spec, v)
    members = permutations_of(v).members
    rng = np.random.default_rng(seed)

    clean = np.empty(n_hypotheses)
    noisy = np.empty(n_hypotheses)
    grid_delta = 0.0
    t = inst.transition.entries
    for h in range(n_hypotheses):
        c_total = 0.0
        n_total = 0.0
        for w, y in zip(inst.weights, inst.labels):
            _, row = _perturbed_member(rng, members, epsilon)
            losses = loss_values_all_classes(spec, row)
            grid_delta = max(grid_delta, abs(float(losses.sum()) - c_const))
            c_total += w * losses[y]
            n_total += w * float(t[y] @ losses)
        clean[h] = c_total
        noisy[h] = n_total

    delta = max(estimate_delta(spec, v, epsilon, n_delta_samples, seed + 1),
                grid_delta)
    clean_set = argmin_set(clean)
    noisy_set = argmin_set(noisy)
    gap = float(clean[noisy_set].max() - clean.min())
    return RiskReport(
        clean_risks=clean, noisy_risks=noisy,
        clean_argmin=clean_set, noisy_argmin=noisy_set,
        verdict=bool(gap <= 2.0 * c * delta + slack),
        C=c_const, c=c, delta=delta, epsilon=float(epsilon), eta=eta,
    )
