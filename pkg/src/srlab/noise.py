"""Label-corruption transition matrices and their application.

Symmetric (uniform) noise flips a label with probability eta to one of
the other k-1 classes; asymmetric noise follows class-specific flip maps
(mnist digits, cifar10 semantic pairs, cifar100 within-super-class cycle,
or a custom "source->target" map).
"""

from __future__ import annotations

import importlib.resources
from dataclasses import dataclass

import numpy as np

ROW_SUM_TOL = 1e-12

# Pairwise flip maps: source class -> target class.
MNIST_FLIPS = {2: 7, 7: 1, 5: 6, 6: 5, 3: 8}
# truck->automobile, bird->airplane, deer->horse, cat<->dog
CIFAR10_FLIPS = {9: 1, 2: 0, 4: 7, 3: 5, 5: 3}

ASYMMETRIC_PRESETS = ("mnist", "cifar10", "cifar100_superclass")


@dataclass(frozen=True)
class TransitionMatrix:
    """Row-stochastic k x k matrix; entry (y, j) is P(noisy=j | clean=y)."""

    entries: np.ndarray
    eta: float | None = None
    kind: str = "custom"

    def __post_init__(self):
        entries = np.asarray(self.entries, dtype=np.float64)
        if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
            raise ValueError(f"transition matrix must be square, got {entries.shape}")
        if entries.min() < 0.0 or entries.max() > 1.0 + ROW_SUM_TOL:
            raise ValueError("transition entries must lie in [0, 1]")
        rowsum = entries.sum(axis=1)
        if np.abs(rowsum - 1.0).max() > ROW_SUM_TOL:
            raise ValueError(
                f"rows must sum to 1 within {ROW_SUM_TOL}; worst deviation "
                f"{np.abs(rowsum - 1.0).max():.3e}"
            )
        object.__setattr__(self, "entries", entries)

    @property
    def k(self) -> int:
        return self.entries.shape[0]

    def symmetric_bound_ok(self) -> bool | None:
        """Whether eta < 1 - 1/k (the symmetric noise-tolerance bound)."""
        if self.eta is None:
            return None
        return self.eta < 1.0 - 1.0 / self.k

    def class_conditional_bound_ok(self) -> bool:
        """Per-row condition eta_{y,i} < 1 - eta_y for every off-diagonal."""
        diag = np.diag(self.entries)
        off = self.entries - np.diag(diag)
        return bool(np.all(off.max(axis=1) < diag))


def symmetric_transition(k: int, eta: float) -> TransitionMatrix:
    """Uniform flips: diagonal 1-eta, off-diagonal eta/(k-1)."""
    if k < 2:
        raise ValueError(f"need at least 2 classes, got {k}")
    if not 0.0 <= eta < 1.0:
        raise ValueError(f"eta must be in [0, 1), got {eta}")
    entries = np.full((k, k), eta / (k - 1))
    np.fill_diagonal(entries, 1.0 - eta)
    return TransitionMatrix(entries, eta=float(eta), kind="symmetric")


def _cifar100_superclass_flips() -> dict[int, int]:
    text = (importlib.resources.files("srlab") / "assets" /
            "cifar100_superclasses.txt").read_text()
    flips: dict[int, int] = {}
    for line in text.splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        members = [int(tok) for tok in line.split()]
        for i, src in enumerate(members):
            flips[src] = members[(i + 1) % len(members)]
    return flips


def parse_flip_map(text: str) -> dict[int, int]:
    """Parse "source->target" lines (one pair per line, # comments allowed)."""
    flips: dict[int, int] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "->" not in line:
            raise ValueError(f"flip map line {lineno}: expected 'source->target'")
        src_s, dst_s = line.split("->", 1)
        try:
            src, dst = int(src_s), int(dst_s)
        except ValueError:
            raise ValueError(f"flip map line {lineno}: non-integer class") from None
        if src in flips:
            raise ValueError(f"flip map line {lineno}: duplicate source {src}")
        flips[src] = dst
    return flips


def load_flip_map(path) -> dict[int, int]:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_flip_map(fh.read())


def asymmetric_transition(preset, k: int | None = None,
                          eta: float = 0.0) -> TransitionMatrix:
    """Pairwise flips: mapped classes send probability eta to their target.

    ``preset`` is one of the named presets, or a source->target dict for a
    custom map (``k`` required then). Unmapped classes keep identity rows.
    """
    if isinstance(preset, str):
        if preset == "mnist":
            flips, k = dict(MNIST_FLIPS), 10
        elif preset == "cifar10":
            flips, k = dict(CIFAR10_FLIPS), 10
        elif preset == "cifar100_superclass":
            flips, k = _cifar100_superclass_flips(), 100
        else:
            raise ValueError(
                f"unknown preset {preset!r}; one of {ASYMMETRIC_PRESETS} "
                "or a custom flip map"
            )
        name = preset
    else:
        flips = dict(preset)
        if k is None:
            raise ValueError("k is required for a custom flip map")
        name = "custom"
    if not 0.0 <= eta <= 0.5:
        raise ValueError(f"eta must be in [0, 0.5] for pairwise maps, got {eta}")
    for src, dst in flips.items():
        if not (0 <= src < k and 0 <= dst < k):
            raise ValueError(f"flip {src}->{dst} out of range for k={k}")
        if src == dst:
            raise ValueError(f"flip {src}->{dst} maps a class to itself")
    entries = np.eye(k)
    for src, dst in flips.items():
        entries[src, src] = 1.0 - eta
        entries[src, dst] = eta
    return TransitionMatrix(entries, eta=float(eta), kind=name)


def corrupt(labels, transition: TransitionMatrix, seed: int):
    """Resample each label from its transition row; returns (noisy, flipped).

    Deterministic per seed; the flip mask marks entries that changed.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min(initial=0) < 0 or labels.max(initial=0) >= transition.k:
        raise ValueError(f"labels out of range for k={transition.k}")
    rng = np.random.default_rng(seed)
    u = rng.random(labels.shape[0])
    cum = np.cumsum(transition.entries, axis=1)
    rows = cum[labels]
    noisy = (u[:, None] >= rows).sum(axis=1).astype(np.int64)
    np.clip(noisy, 0, transition.k - 1, out=noisy)
    return noisy, noisy != labels


def empirical_rate(labels, noisy_labels, k: int | None = None):
    """Observed flip fraction overall and per source class."""
    labels = np.asarray(labels, dtype=np.int64)
    noisy = np.asarray(noisy_labels, dtype=np.int64)
    if labels.shape != noisy.shape:
        raise ValueError(
            f"length mismatch: {labels.shape[0]} labels vs {noisy.shape[0]} noisy"
        )
    if k is None:
        k = int(max(labels.max(initial=0), noisy.max(initial=0))) + 1
    flipped = labels != noisy
    overall = float(flipped.mean()) if labels.size else 0.0
    per_class = np.zeros(k)
    for c in range(k):
        sel = labels == c
        if sel.any():
            per_class[c] = float(flipped[sel].mean())
    return overall, per_class
