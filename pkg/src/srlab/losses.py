"""Pointwise loss zoo, lp penalty, penalty schedule, and the full
sharpened objective wired through the autodiff graph.

Every loss maps a simplex vector u and a class index to a nonnegative
value minimized at the one-hot vertex e_y:

    ce   -log u_y
    fl   (1 - u_y)^gamma_f * (-log u_y)
    gce  (1 - u_y^q) / q
    mae  sum_i |u_i - e_y(i)| = 2 (1 - u_y)
    rce  -A (1 - u_y)                  (A < 0)
    sce  alpha * ce + beta * rce
    nce  ce(u, y) / sum_j ce(u, j)
    apl  alpha * nce + beta * mae

Logs are evaluated as log(max(u, 1e-7)) so saturated outputs stay finite.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np

from .autodiff import (
    PROB_FLOOR,
    Graph,
    as_matrix,
    evaluate,
    forward,
    input_gradient,
    softmax_tau,
    softmax_tau_jacobian,
)

LOSS_KINDS = ("ce", "fl", "gce", "mae", "rce", "sce", "nce", "apl")

SIMPLEX_TOL = 1e-9


@dataclass(frozen=True)
class LossSpec:
    """Tagged description of one pointwise loss and its parameters."""

    kind: str
    gamma_f: float = 0.3
    q: float = 0.7
    A: float = -3.0
    alpha: float = 1.0
    beta: float = 1.0

    def __post_init__(self):
        if self.kind not in LOSS_KINDS:
            raise ValueError(f"unknown loss kind {self.kind!r}; one of {LOSS_KINDS}")
        if not 0.0 < self.q <= 1.0:
            raise ValueError(f"q must be in (0, 1], got {self.q}")
        if not self.A < 0.0:
            raise ValueError(f"A must be negative, got {self.A}")
        if self.alpha < 0.0 or self.beta < 0.0:
            raise ValueError("alpha and beta must be nonnegative")
        if self.gamma_f < 0.0:
            raise ValueError(f"gamma_f must be nonnegative, got {self.gamma_f}")

    # Named parameter presets used throughout the experiments.
    @classmethod
    def sce_mnist(cls):
        return cls("sce", alpha=0.01, beta=1.0, A=-3.0)

    @classmethod
    def sce_cifar10(cls):
        return cls("sce", alpha=0.1, beta=1.0, A=-3.0)

    @classmethod
    def sce_cifar100(cls):
        return cls("sce", alpha=6.0, beta=0.1, A=-3.0)

    @classmethod
    def apl_mnist(cls):
        return cls("apl", alpha=1.0, beta=100.0)

    @classmethod
    def apl_cifar10(cls):
        return cls("apl", alpha=1.0, beta=1.0)

    @classmethod
    def apl_cifar100(cls):
        return cls("apl", alpha=10.0, beta=0.1)


@dataclass(frozen=True)
class SRConfig:
    """Sparse-regularization settings: sharpening temperature, norm
    exponent, and the geometric penalty-weight schedule
    lambda_t = lambda0 * rho^floor(t/r)."""

    tau: float = 0.1
    p: float = 0.1
    lambda0: float = 4.0
    rho: float = 2.0
    r: int = 5
    l2_normalize_logits: bool = True

    def __post_init__(self):
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if not 0.0 < self.p <= 1.0:
            raise ValueError(f"p must be in (0, 1], got {self.p}")
        if self.lambda0 < 0.0:
            raise ValueError(f"lambda0 must be nonnegative, got {self.lambda0}")
        if self.rho < 1.0:
            raise ValueError(f"rho must be >= 1, got {self.rho}")
        if int(self.r) != self.r or self.r < 1:
            raise ValueError(f"r must be a positive integer, got {self.r}")

    @classmethod
    def mnist(cls, **overrides):
        return replace(cls(tau=0.1, p=0.1, lambda0=4.0, rho=2.0, r=5), **overrides)

    @classmethod
    def cifar10(cls, **overrides):
        return replace(cls(tau=0.5, p=0.1, lambda0=1.1, rho=1.03, r=1), **overrides)

    @classmethod
    def cifar100(cls, lambda0=10.0, **overrides):
        return replace(cls(tau=0.5, p=0.01, lambda0=lambda0, rho=1.02, r=1),
                       **overrides)


def _check_simplex(u) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    if u.ndim != 1:
        raise ValueError("expected a 1-D probability vector")
    if abs(float(u.sum()) - 1.0) > SIMPLEX_TOL or float(u.min()) < -SIMPLEX_TOL:
        raise ValueError(
            f"vector is off the simplex beyond tolerance {SIMPLEX_TOL}: "
            f"sum={u.sum()!r}, min={u.min()!r}"
        )
    return np.clip(u, 0.0, 1.0)


def loss_values_all_classes(spec: LossSpec, u) -> np.ndarray:
    """Vector of L(u, i) for every class i (one simplex vector u)."""
    u = _check_simplex(u)
    kind = spec.kind
    if kind == "mae":
        return 2.0 * (1.0 - u)
    if kind == "rce":
        return -spec.A * (1.0 - u)
    ce = -np.log(np.maximum(u, PROB_FLOOR))
    if kind == "ce":
        return ce
    if kind == "fl":
        return np.power(np.maximum(1.0 - u, 0.0), spec.gamma_f) * ce
    if kind == "gce":
        return (1.0 - np.power(u, spec.q)) / spec.q
    if kind == "sce":
        return spec.alpha * ce + spec.beta * (-spec.A) * (1.0 - u)
    nce = ce / ce.sum()
    if kind == "nce":
        return nce
    # apl
    return spec.alpha * nce + spec.beta * 2.0 * (1.0 - u)


def pointwise_loss(spec: LossSpec, u, y: int) -> float:
    """L(u, y) for one sample; u must lie on the simplex within 1e-9."""
    u = np.asarray(u, dtype=np.float64)
    if int(y) != y or not 0 <= int(y) < u.shape[-1]:
        raise ValueError(f"label {y} out of range for {u.shape[-1]} classes")
    return float(loss_values_all_classes(spec, u)[int(y)])


def lp_penalty(u, p: float) -> float:
    """sum_i u_i^p with 0^p defined as 0; p in (0, 1]."""
    if not 0.0 < p <= 1.0:
        raise ValueError(f"p must be in (0, 1], got {p}")
    u = np.asarray(u, dtype=np.float64)
    if float(u.min()) < -SIMPLEX_TOL:
        raise ValueError("penalty input must be nonnegative")
    return float(np.power(np.maximum(u, 0.0), p).sum())


def lambda_at(t: int, cfg: SRConfig) -> float:
    """Penalty weight at epoch t: lambda0 * rho^floor(t/r)."""
    if t < 0:
        raise ValueError(f"epoch must be nonnegative, got {t}")
    return cfg.lambda0 * cfg.rho ** (int(t) // int(cfg.r))


# -- differentiable objective ---------------------------------------------


def _power_floor(exponent: float) -> float:
    # the clamp only exists to tame u^(e-1) as u -> 0; exponents >= 1
    # have no singularity and clamping them would bias exact identities
    # like the l1 penalty on the simplex
    return PROB_FLOOR if exponent < 1.0 else 0.0


def _loss_rows(g: Graph, u: int, y: int, spec: LossSpec) -> int:
    """Per-sample loss column (N x 1) built from graph primitives."""
    kind = spec.kind
    if kind == "ce":
        return g.scale_shift(g.log(g.pick(u, y)), -1.0)
    if kind == "fl":
        py = g.pick(u, y)
        neglog = g.scale_shift(g.log(py), -1.0)
        modulator = g.power(g.scale_shift(py, -1.0, 1.0), spec.gamma_f,
                            floor=_power_floor(spec.gamma_f))
        return g.mul(modulator, neglog)
    if kind == "gce":
        return g.scale_shift(g.power(g.pick(u, y), spec.q,
                                     floor=_power_floor(spec.q)),
                             -1.0 / spec.q, 1.0 / spec.q)
    if kind == "mae":
        return g.scale_shift(g.pick(u, y), -2.0, 2.0)
    if kind == "rce":
        return g.scale_shift(g.pick(u, y), spec.A, -spec.A)
    if kind == "sce":
        py = g.pick(u, y)
        ce = g.scale_shift(g.log(py), -1.0)
        rce = g.scale_shift(py, spec.A, -spec.A)
        return g.add(g.scale_shift(ce, spec.alpha), g.scale_shift(rce, spec.beta))
    if kind == "nce":
        neglog_all = g.scale_shift(g.log(u), -1.0)
        return g.div(g.pick(neglog_all, y), g.sum_rows(neglog_all))
    # apl = alpha * nce + beta * mae
    neglog_all = g.scale_shift(g.log(u), -1.0)
    nce = g.div(g.pick(neglog_all, y), g.sum_rows(neglog_all))
    mae = g.scale_shift(g.pick(u, y), -2.0, 2.0)
    return g.add(g.scale_shift(nce, spec.alpha), g.scale_shift(mae, spec.beta))


def attach_objective(g: Graph, logits: int, spec: LossSpec,
                     sr: SRConfig | None) -> int:
    """Append sharpening, loss and penalty on top of a logits node.

    Adds a "y" input (N x 1 class indices) and, when sr is given, a "lam"
    input (1 x 1 penalty weight). Returns the scalar batch-mean node:
    mean_i [ L(sigma_tau(z_i), y_i) + lam * ||sigma_tau(z_i)||_p^p ].
    """
    z = logits
    if sr is not None and sr.l2_normalize_logits:
        z = g.l2norm_rows(z)
    u = g.softmax_tau(z, sr.tau if sr is not None else 1.0)
    y = g.input("y", 1)
    rows = _loss_rows(g, u, y, spec)
    if sr is not None:
        lam = g.input("lam", 1, rows=1)
        penalty = g.sum_rows(g.power(u, sr.p, floor=_power_floor(sr.p)))
        rows = g.add(rows, g.mul(lam, penalty))
    return g.mean_all(rows)


def _labels_column(labels, n: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1 or y.shape[0] != n:
        raise ValueError(f"expected {n} labels, got shape {y.shape}")
    return np.ascontiguousarray(y, dtype=np.float64)[:, None]


@lru_cache(maxsize=128)
def _objective_graph(spec: LossSpec, sr: SRConfig | None, k: int) -> Graph:
    # logits enter as a batch input, so one parameter-free graph per
    # (spec, sr, k) serves every batch size and is safe to share
    g = Graph()
    z = g.input("z", k)
    attach_objective(g, z, spec, sr)
    return g


def _objective_inputs(sr, z, labels, lam):
    inputs = {"z": z, "y": _labels_column(labels, z.shape[0])}
    if sr is not None:
        inputs["lam"] = np.array([[lam]])
    return inputs


def sr_objective(spec: LossSpec, sr: SRConfig | None, logits, labels,
                 epoch: int = 0) -> float:
    """Batch mean of the sharpened loss plus the scheduled lp penalty."""
    z = as_matrix(logits)
    g = _objective_graph(spec, sr, z.shape[1])
    lam = lambda_at(epoch, sr) if sr is not None else 0.0
    return float(evaluate(g, _objective_inputs(sr, z, labels, lam))[0, 0])


def sr_objective_with_logit_grad(spec: LossSpec, sr: SRConfig | None, logits,
                                 labels, epoch: int = 0):
    """Objective value and its gradient with respect to the logits."""
    z = as_matrix(logits)
    g = _objective_graph(spec, sr, z.shape[1])
    lam = lambda_at(epoch, sr) if sr is not None else 0.0
    acts = forward(g, _objective_inputs(sr, z, labels, lam))
    return float(acts.output[0, 0]), input_gradient(g, acts, "z")


def grad_decompose_ce(z, y: int, tau: float, lam: float, p: float):
    """Split the gradient of -log sigma_tau(z)_y + lam * ||sigma_tau(z)||_p^p
    into the fitting term (pull toward class y) and the complementary term
    (suppression of every other class). Their sum is the total gradient.

    Uses the exact unclamped formulas, so it is valid away from saturated
    outputs (all sigma_i comfortably above the 1e-7 floor).
    """
    z = np.asarray(z, dtype=np.float64)
    s = softmax_tau(z, tau)
    jac = softmax_tau_jacobian(z, tau)
    y = int(y)
    sy = s[y]
    fitting = -(1.0 / sy - lam * p * sy ** (p - 1.0)) * jac[y]
    complementary = np.zeros_like(z)
    for i in range(z.shape[0]):
        if i != y:
            complementary += lam * p * s[i] ** (p - 1.0) * jac[i]
    return fitting, complementary
