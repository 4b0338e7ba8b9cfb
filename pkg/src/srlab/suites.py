"""Verification batteries behind the ``verify`` CLI verb.

Each suite returns (passed, lines); the CLI prints the lines and exits
nonzero when any asserted check fails. The checks are the same ones the
test suite pins down, packaged for interactive use with the relevant
quantities (C, c, delta) in the output.
"""

from __future__ import annotations

import numpy as np

from . import theory
from .autodiff import finite_diff_gradient
from .losses import (
    LOSS_KINDS,
    LossSpec,
    SRConfig,
    sr_objective,
    sr_objective_with_logit_grad,
)
from .noise import asymmetric_transition, symmetric_transition

SUITES = ("lemma1", "theorem1", "theorem2", "theorem3", "gradients", "all")

GRADIENT_TOL = 1e-5
SYMMETRY_TOL = 1e-12

# Pairwise flip map at k=4 used by the class-conditional battery.
PAIRWISE_FLIPS_K4 = {0: 1, 2: 3, 3: 2}


def base_vector(k: int) -> np.ndarray:
    """Distinct-entry simplex vector (normalized geometric profile)."""
    w = 0.5 ** np.arange(1, k + 1)
    return w / w.sum()


def _mark(ok: bool) -> str:
    return "[ok]  " if ok else "[FAIL]"


def _random_simplex(rng, k: int) -> np.ndarray:
    return rng.dirichlet(np.ones(k))


def suite_lemma1(seed: int = 0, n_vectors: int = 100):
    """Constant per-class loss sum over every permutation of random v."""
    rng = np.random.default_rng(seed)
    lines = []
    passed = True
    for kind in LOSS_KINDS:
        spec = LossSpec(kind)
        worst = 0.0
        for _ in range(n_vectors):
            k = int(rng.integers(3, 6))
            verdict = theory.check_symmetric_condition(
                spec, _random_simplex(rng, k), tol=SYMMETRY_TOL)
            worst = max(worst, verdict.max_deviation)
            if not verdict.constant:
                passed = False
        sample_c = theory.check_symmetric_condition(
            spec, base_vector(3), tol=SYMMETRY_TOL)
        lines.append(
            f"{_mark(worst <= SYMMETRY_TOL)} lemma1 {kind}: max deviation "
            f"{worst:.3e} over {n_vectors} random v (C at v0 = {sample_c.C:.6g})"
        )
    # negative control: two unrelated simplex points give different sums
    spec = LossSpec("ce")
    gap = abs(theory.loss_sum_over_classes(spec, [0.9, 0.05, 0.05])
              - theory.loss_sum_over_classes(spec, [0.5, 0.3, 0.2]))
    ok = gap > 1e-6
    passed = passed and ok
    lines.append(f"{_mark(ok)} lemma1 negative control: non-permutation pair "
                 f"differs by {gap:.3e} (> 1e-6 required)")
    return passed, lines


def _gradient_check(spec: LossSpec, sr: SRConfig | None, rng,
                    n_points: int, k: int = 5) -> float:
    worst = 0.0
    for _ in range(n_points):
        n = int(rng.integers(1, 4))
        logits = rng.standard_normal((n, k))
        labels = rng.integers(0, k, n)
        epoch = int(rng.integers(0, 4))
        _, grad = sr_objective_with_logit_grad(spec, sr, logits, labels, epoch)
        fd = finite_diff_gradient(
            lambda flat: sr_objective(spec, sr, flat.reshape(n, k), labels, epoch),
            logits.ravel(), 1e-5)
        denom = max(float(np.linalg.norm(fd)), 1e-12)
        worst = max(worst, float(np.linalg.norm(grad.ravel() - fd)) / denom)
    return worst


def suite_gradients(seed: int = 0, n_points: int = 100):
    """Analytic gradient of the full objective vs central differences."""
    rng = np.random.default_rng(seed)
    lines = []
    passed = True
    for kind in LOSS_KINDS:
        for sr in (None, SRConfig.cifar10()):
            worst = _gradient_check(LossSpec(kind), sr, rng, n_points)
            ok = worst < GRADIENT_TOL
            passed = passed and ok
            tag = "sr" if sr is not None else "plain"
            lines.append(
                f"{_mark(ok)} gradients {kind}/{tag}: max relative error "
                f"{worst:.3e} over {n_points} points (tol {GRADIENT_TOL:g})"
            )
    return passed, lines


def _instance(rng, k: int, m: int, transition) -> theory.FiniteInstance:
    labels = np.arange(m) % k
    weights = rng.dirichlet(np.ones(m))
    return theory.FiniteInstance(weights, labels, transition)


def suite_theorem1(seed: int = 0, k: int | None = None, eta: float | None = None,
                   loss: str | None = None, m: int | None = None):
    """Symmetric-noise argmin coincidence, exhaustive over (k!)^m."""
    rng = np.random.default_rng(seed)
    if k is not None or eta is not None or loss is not None or m is not None:
        combos = [(k or 3, m or 2, eta if eta is not None else 0.4, loss or "ce")]
    else:
        combos = [(kk, mm, ee, ll)
                  for kk in (3, 4) for mm in (2, 3)
                  for ee in (0.2, 0.4, 0.6) for ll in ("ce", "mae", "gce")]
    lines = []
    passed = True
    for kk, mm, ee, ll in combos:
        inst = _instance(rng, kk, mm, symmetric_transition(kk, ee))
        report = theory.verify_theorem1(LossSpec(ll), base_vector(kk), inst)
        ok = report.verdict is True and not report.flags
        passed = passed and ok
        lines.append(
            f"{_mark(ok)} theorem1 k={kk} m={mm} eta={ee} {ll}: argmin sets "
            f"{'equal' if report.verdict else 'DIFFER'} over "
            f"{report.clean_risks.shape[0]} hypotheses (C={report.C:.6g})"
        )
    return passed, lines


def suite_theorem2(seed: int = 0, eta: float | None = None):
    """Class-conditional tolerance with one-hot v and pairwise flips."""
    rng = np.random.default_rng(seed)
    etas = (eta,) if eta is not None else (0.2, 0.3, 0.4)
    lines = []
    passed = True
    one_hot = np.eye(4)[0]
    for ee in etas:
        transition = asymmetric_transition(PAIRWISE_FLIPS_K4, k=4, eta=ee)
        inst = _instance(rng, 4, 3, transition)
        report = theory.verify_theorem2(LossSpec("mae"), one_hot, inst)
        ok = report.verdict is True
        passed = passed and ok
        lines.append(
            f"{_mark(ok)} theorem2 mae eta={ee}: noisy argmins are clean "
            f"argmins = {report.verdict} (flags={list(report.flags)}, "
            f"C={report.C:.6g})"
        )
    return passed, lines


def suite_theorem3(seed: int = 0, eps: float | None = None,
                   n_hypotheses: int = 2000):
    """Risk gap bound 2*c*delta over sampled near-permutation outputs."""
    rng = np.random.default_rng(seed)
    eps_grid = (eps,) if eps is not None else (0.01, 0.05)
    lines = []
    passed = True
    v = (0.8, 0.1, 0.1)
    for kind in ("ce", "mae"):
        for ee in eps_grid:
            inst = _instance(rng, 3, 2, symmetric_transition(3, 0.5))
            report = theory.verify_risk_bound(
                LossSpec(kind), v, ee, inst, seed=seed,
                n_hypotheses=n_hypotheses)
            ok = report.verdict is True
            passed = passed and ok
            gap = float(report.clean_risks[report.noisy_argmin].max()
                        - report.clean_risks.min())
            lines.append(
                f"{_mark(ok)} theorem3 {kind} eps={ee}: gap {gap:.3e} <= "
                f"2*c*delta = {2 * report.c * report.delta:.3e} "
                f"(c={report.c:.6g}, delta={report.delta:.6g} sampled estimate)"
            )
    return passed, lines


def run_suite(name: str, seed: int = 0, **kwargs):
    """Dispatch a named suite; "all" chains every battery."""
    if name == "lemma1":
        return suite_lemma1(seed)
    if name == "gradients":
        return suite_gradients(seed)
    if name == "theorem1":
        return suite_theorem1(seed, k=kwargs.get("k"), eta=kwargs.get("eta"),
                              loss=kwargs.get("loss"), m=kwargs.get("m"))
    if name == "theorem2":
        return suite_theorem2(seed, eta=kwargs.get("eta"))
    if name == "theorem3":
        return suite_theorem3(seed, eps=kwargs.get("eps"),
                              n_hypotheses=kwargs.get("samples") or 2000)
    if name == "all":
        passed = True
        lines = []
        for sub in ("lemma1", "gradients", "theorem1", "theorem2", "theorem3"):
            sub_passed, sub_lines = run_suite(sub, seed)
            passed = passed and sub_passed
            lines.extend(sub_lines)
        return passed, lines
    raise ValueError(f"unknown suite {name!r}; one of {SUITES}")
