"""Synthetic data generation for dispatch experiments.

A generator spec describes the sampling distribution of one instance:
per-step losses are clipped Gaussians around a mean trajectory, and
capacities follow a clipped occupancy random walk scaled by the lot size.
Draws consume standard normals first and apply the generator's affine map
after, so two generators sampled from the same seed share their underlying
noise.  That
common-random-numbers coupling powers the transport-distance estimator: the
mean squared pairwise distance under the coupling upper-bounds the squared
transport distance between the two scenario distributions.

Named substreams are derived from a master seed and an integer/string path,
so every consumer gets an independent, reproducible stream.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateDirectionError, DomainError, NumericalFailureError, ValidationError
from .model import PerturbationCloud, ScenarioSet

__all__ = [
    "GeneratorSpec",
    "SHIFT_KINDS",
    "ShiftFamily",
    "derive_rng",
    "sample_scenarios",
    "sample_cloud",
    "paired_clouds",
    "shifted_spec",
    "w2sq_estimate",
    "calibrate_shift",
    "shift_family",
]

SHIFT_KINDS = ("loss_mean", "loss_spread", "occupancy")


@dataclass(frozen=True)
class GeneratorSpec:
    """Sampling distribution of loss and capacity trajectories."""

    n_steps: int
    loss_mean: np.ndarray
    loss_spread: float
    beta_base: float
    occ_init: float
    walk_step: float

    def __post_init__(self):
        if not isinstance(self.n_steps, (int, np.integer)) or self.n_steps < 1:
            raise ValidationError("n_steps must be a positive integer")
        lm = np.asarray(self.loss_mean, dtype=float)
        if lm.shape != (self.n_steps,):
            raise ValidationError("loss_mean must have one entry per step")
        if np.any(lm < 0) or not np.all(np.isfinite(lm)):
            raise ValidationError("loss_mean must be non-negative and finite")
        for name in ("loss_spread", "walk_step"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise ValidationError(f"{name} must be non-negative and finite")
        if not np.isfinite(self.beta_base) or self.beta_base <= 0:
            raise ValidationError("beta_base must be positive and finite")
        if not (0.0 <= self.occ_init <= 1.0):
            raise ValidationError("occ_init must lie in [0, 1]")
        object.__setattr__(self, "loss_mean", lm)


def _path_entry(entry) -> int:
    if isinstance(entry, (int, np.integer)):
        if entry < 0:
            raise ValidationError("seed path integers must be non-negative")
        return int(entry)
    if isinstance(entry, str):
        digest = hashlib.sha256(entry.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")
    raise ValidationError(f"seed path entries must be ints or strings, got {type(entry)!r}")


def derive_rng(master_seed: int, *path) -> np.random.Generator:
    """Independent reproducible generator for a named substream.

    The path length is folded into the seed material because SeedSequence
    absorbs trailing zero entries: without it, (p..., 0) and (p...) would
    share a stream.
    """
    if not isinstance(master_seed, (int, np.integer)) or master_seed < 0:
        raise ValidationError("master_seed must be a non-negative integer")
    entries = [int(master_seed), len(path)] + [_path_entry(p) for p in path]
    return np.random.default_rng(np.random.SeedSequence(entries))


def sample_scenarios(spec: GeneratorSpec, n: int, rng: np.random.Generator) -> ScenarioSet:
    """Draw n loss/capacity trajectories.

    Noise is consumed in a spec-independent order (loss normals, then walk
    normals) so equal seeds couple the draws across different specs.
    """
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise DomainError("scenario count must be a positive integer")
    k_n = spec.n_steps
    z_loss = rng.standard_normal((n, k_n))
    z_walk = rng.standard_normal((n, k_n))
    loss = np.clip(spec.loss_mean + spec.loss_spread * z_loss, 0.0, None)
    occ = np.empty((n, k_n))
    prev = np.full(n, spec.occ_init)
    for k in range(k_n):
        prev = np.clip(prev + spec.walk_step * z_walk[:, k], 0.0, 1.0)
        occ[:, k] = prev
    return ScenarioSet(loss, spec.beta_base * occ)


def sample_cloud(scen_set: ScenarioSet, m_points: int, sigma: float,
                 rng: np.random.Generator) -> PerturbationCloud:
    """Gaussian perturbation cloud of m_points copies around each sample."""
    if not isinstance(m_points, (int, np.integer)) or m_points < 1:
        raise DomainError("cloud point count must be a positive integer")
    if not np.isfinite(sigma) or sigma < 0:
        raise DomainError("sigma must be non-negative and finite")
    n, k_n = scen_set.n_scenarios, scen_set.n_steps
    z_loss = rng.standard_normal((n, m_points, k_n))
    z_cap = rng.standard_normal((n, m_points, k_n))
    loss = np.clip(scen_set.loss[:, None, :] + sigma * z_loss, 0.0, None)
    cap = np.clip(scen_set.capacity[:, None, :] + sigma * z_cap, 0.0, None)
    return PerturbationCloud(scen_set, loss, cap, sigma)


def shifted_spec(spec: GeneratorSpec, kind: str, scale: float) -> GeneratorSpec:
    """A test distribution moved away from spec along a named family.

    loss_mean raises every step's mean loss by scale; loss_spread widens the
    loss noise multiplicatively; occupancy drains the initial occupancy and
    therefore the capacity level.
    """
    if kind not in SHIFT_KINDS:
        raise DomainError(f"shift kind must be one of {SHIFT_KINDS}")
    scale = float(scale)
    if not np.isfinite(scale) or scale < 0:
        raise DomainError("shift scale must be non-negative and finite")
    if kind == "loss_mean":
        return replace(spec, loss_mean=spec.loss_mean + scale)
    if kind == "loss_spread":
        return replace(spec, loss_spread=spec.loss_spread * (1.0 + scale))
    return replace(spec, occ_init=float(np.clip(spec.occ_init - scale, 0.0, 1.0)))


def w2sq_estimate(spec_a: GeneratorSpec, spec_b: GeneratorSpec, n: int,
                  master_seed: int, *path) -> tuple[float, float]:
    """Coupled upper estimate of the squared transport distance.

    Returns (estimate, standard_error) of the mean squared distance between
    paired trajectories (loss and capacity stacked) drawn under common random
    numbers.  The mean of any coupling upper-bounds the squared transport
    distance, so the estimate is a consistent upper proxy.
    """
    if spec_a.n_steps != spec_b.n_steps:
        raise DomainError("specs must share the horizon length")
    if not isinstance(n, (int, np.integer)) or n < 2:
        raise DomainError("need at least two coupled pairs")
    sa = sample_scenarios(spec_a, n, derive_rng(master_seed, *path, "w2"))
    sb = sample_scenarios(spec_b, n, derive_rng(master_seed, *path, "w2"))
    d = (np.sum((sa.loss - sb.loss) ** 2, axis=1)
         + np.sum((sa.capacity - sb.capacity) ** 2, axis=1))
    est = float(np.mean(d))
    stderr = float(np.std(d, ddof=1) / np.sqrt(n))
    return est, stderr


def calibrate_shift(spec: GeneratorSpec, kind: str, ambiguity: float, n: int,
                    master_seed: int, *path, slack: float = 0.9) -> tuple[float, float, float]:
    """Largest shift scale whose coupled distance stays within the budget.

    Bisects the scale so the estimated squared transport distance is at most
    slack * ambiguity, then re-checks with a fresh stream and requires the
    fresh estimate to stay within the budget up to three standard errors.
    Returns (scale, estimate, standard_error) from the confirmation stream.
    """
    if not np.isfinite(ambiguity) or ambiguity <= 0:
        raise DomainError("ambiguity must be positive and finite")
    target = slack * ambiguity

    def dist(scale: float) -> float:
        return w2sq_estimate(spec, shifted_spec(spec, kind, scale), n,
                             master_seed, *path, "calibrate")[0]

    hi = 1.0
    for _ in range(60):
        if dist(hi) >= target:
            break
        hi *= 2.0
    else:
        raise DegenerateDirectionError(
            f"shift family {kind!r} cannot reach the budget: it saturates or "
            f"does not move the distribution")
    lo = 0.0
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if dist(mid) <= target:
            lo = mid
        else:
            hi = mid
    scale = lo
    for _ in range(8):
        est, stderr = w2sq_estimate(spec, shifted_spec(spec, kind, scale), n,
                                    master_seed, *path, "confirm")
        if est <= target + 3.0 * stderr and est <= ambiguity:
            return scale, est, stderr
        scale *= 0.9
    raise NumericalFailureError(
        f"could not confirm a shift within the ambiguity budget for {kind!r}")


def paired_clouds(scen_set: ScenarioSet, m_points: int, sigmas,
                  rng: np.random.Generator) -> list[PerturbationCloud]:
    """Clouds at several radii built from one shared noise draw.

    Sharing the underlying normals across radii removes Monte Carlo jitter
    from radius sweeps: a wider cloud contains the narrower one's geometry
    scaled up, so cross-radius comparisons become deterministic in the draw.
    """
    if not isinstance(m_points, (int, np.integer)) or m_points < 1:
        raise DomainError("cloud point count must be a positive integer")
    sigmas = [float(s) for s in sigmas]
    if not sigmas:
        raise DomainError("need at least one radius")
    if any(not np.isfinite(s) or s < 0 for s in sigmas):
        raise DomainError("every radius must be non-negative and finite")
    n, k_n = scen_set.n_scenarios, scen_set.n_steps
    z_loss = rng.standard_normal((n, m_points, k_n))
    z_cap = rng.standard_normal((n, m_points, k_n))
    clouds = []
    for sigma in sigmas:
        loss = np.clip(scen_set.loss[:, None, :] + sigma * z_loss, 0.0, None)
        cap = np.clip(scen_set.capacity[:, None, :] + sigma * z_cap, 0.0, None)
        clouds.append(PerturbationCloud(scen_set, loss, cap, sigma))
    return clouds


@dataclass(frozen=True)
class ShiftFamily:
    """A bundle of test distributions certified to sit inside a drift budget.

    Each variant is the nominal generator pushed along one random direction,
    with the recorded coupled distance estimate at or below mu.
    """

    nominal: GeneratorSpec
    variants: tuple
    distances: tuple
    mu: float

    def __post_init__(self):
        object.__setattr__(self, "variants", tuple(self.variants))
        object.__setattr__(self, "distances", tuple(float(d) for d in self.distances))
        object.__setattr__(self, "mu", float(self.mu))
        if len(self.variants) < 1:
            raise ValidationError("a shift family needs at least one variant")
        if len(self.distances) != len(self.variants):
            raise ValidationError("one recorded distance per variant required")
        if not np.isfinite(self.mu) or self.mu < 0:
            raise ValidationError("mu must be non-negative and finite")
        if any(not np.isfinite(d) or d < 0 for d in self.distances):
            raise ValidationError("distances must be non-negative and finite")
        if any(d > self.mu for d in self.distances):
            raise ValidationError("every variant must sit inside the mu budget")

    @property
    def n_variants(self) -> int:
        return len(self.variants)


def _apply_direction(spec: GeneratorSpec, d_mean: np.ndarray, d_spread: float,
                     d_beta: float, scale: float) -> GeneratorSpec:
    # Mean shifts are additive (clipped at the support floor); the spread and
    # capacity levels take exponential tilts, which keep them positive at any
    # scale while matching the linear direction to first order.
    return replace(
        spec,
        loss_mean=np.clip(spec.loss_mean + scale * d_mean, 0.0, None),
        loss_spread=float(spec.loss_spread * np.exp(scale * d_spread)),
        beta_base=float(spec.beta_base * np.exp(scale * d_beta)),
    )


def shift_family(nominal: GeneratorSpec, n_prime: int, mu: float,
                 master_seed: int, *, n_pairs: int = 2000,
                 slack: float = 0.9) -> ShiftFamily:
    """n_prime random test distributions scaled into the drift budget.

    Each variant draws a unit-norm direction over (per-step loss means,
    loss spread, capacity level), starts at scale 1, and bisects the scale
    down until the coupled distance estimate fits within slack * mu.  A
    confirmation pass on a fresh stream must land at or below mu, else the
    scale shrinks further; directions that do not move the distribution at
    all are rejected.
    """
    if not isinstance(n_prime, (int, np.integer)) or n_prime < 1:
        raise DomainError("n_prime must be a positive integer")
    if not np.isfinite(mu) or mu <= 0:
        raise DomainError("mu must be positive and finite")
    if not (0.0 < slack < 1.0):
        raise DomainError("slack must lie strictly inside (0, 1)")
    k_n = nominal.n_steps
    target = slack * mu
    variants, distances = [], []
    for v in range(n_prime):
        g = derive_rng(master_seed, "shift-family", v).standard_normal(k_n + 2)
        g /= np.linalg.norm(g)
        d_mean, d_spread, d_beta = g[:k_n], float(g[k_n]), float(g[k_n + 1])

        def dist(scale: float) -> float:
            cand = _apply_direction(nominal, d_mean, d_spread, d_beta, scale)
            return w2sq_estimate(nominal, cand, n_pairs,
                                 master_seed, "shift-family", v, "probe")[0]

        d_full = dist(1.0)
        if d_full == 0.0:
            raise DegenerateDirectionError(
                f"direction {v} does not move the distribution")
        if d_full <= target:
            scale = 1.0
        else:
            lo, hi = 0.0, 1.0
            for _ in range(80):
                mid = 0.5 * (lo + hi)
                if dist(mid) <= target:
                    lo = mid
                else:
                    hi = mid
            scale = lo
        for _ in range(8):
            cand = _apply_direction(nominal, d_mean, d_spread, d_beta, scale)
            est, stderr = w2sq_estimate(nominal, cand, n_pairs,
                                        master_seed, "shift-family", v, "confirm")
            if est <= mu and est <= target + 3.0 * stderr:
                break
            scale *= 0.9
        else:
            raise NumericalFailureError(
                f"could not confirm direction {v} inside the mu budget")
        variants.append(cand)
        distances.append(est)
    return ShiftFamily(nominal, tuple(variants), tuple(distances), mu)
