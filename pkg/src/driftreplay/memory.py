"""Reactive centroid memory for experience replay under concept drift.

Each centroid keeps a running mean/variance (Welford), a reservoir replay
buffer and a FIFO window of the most recent instances routed to it. The
window drives relabeling (switch), splitting and removal of stale clusters.
"""
from __future__ import annotations

import math
from collections import Counter, deque
from dataclasses import dataclass, field

import numpy as np

VAR_FLOOR = 1e-9


class DimensionMismatchError(ValueError):
    pass


class NonFiniteFeatureError(ValueError):
    pass


class EmptyMemoryError(LookupError):
    pass


class IllegalStateError(RuntimeError):
    pass


def as_features(values) -> np.ndarray:
    """Coerce to a finite 1-D float64 vector."""
    x = np.asarray(values, dtype=np.float64)
    if x.ndim != 1 or x.size == 0:
        raise DimensionMismatchError(f"expected non-empty 1-D vector, got shape {x.shape}")
    if not np.all(np.isfinite(x)):
        raise NonFiniteFeatureError("feature vector contains non-finite values")
    return x


@dataclass(slots=True)
class LabeledInstance:
    """A feature vector with its binary label.

    subconcept_id identifies the originating class for evaluation only;
    it is never visible to any learner.
    """
    features: np.ndarray
    label: int
    subconcept_id: int = -1


@dataclass(slots=True)
class MemoryEvent:
    kind: str  # created | updated | switched | split | removed
    centroid_id: int
    label: int
    info: str = ""


@dataclass
class RsbConfig:
    c_max: int = 10
    c_min: int | None = None  # defaults to c_max // 2
    b_max: int = 100
    omega_max: int = 100
    n_s: int = 1000
    tau_s: float = 0.5
    alpha_r: float = 0.4
    beta: float = 4.0
    sigma_k: float = 2.0
    switch_fraction: float = 0.5
    per_centroid_maintenance: bool = False
    # Minimum window traffic during a period before a centroid becomes
    # removal-eligible. None means tau_r; 0 makes removal unconditional
    # on traffic (dormant clusters get reaped too).
    removal_traffic_floor: int | None = None

    def __post_init__(self):
        if self.c_min is None:
            self.c_min = max(1, self.c_max // 2)
        if self.c_min <= 0 or self.c_max <= 0 or self.c_min > self.c_max:
            raise ValueError(f"need 0 < c_min <= c_max, got {self.c_min}, {self.c_max}")
        if self.b_max <= 0 or self.omega_max <= 0 or self.n_s <= 0:
            raise ValueError("b_max, omega_max and n_s must be positive")
        if self.tau_s < 0:
            raise ValueError("tau_s must be non-negative")
        if not 0.0 <= self.alpha_r <= 1.0:
            raise ValueError("alpha_r must lie in [0, 1]")
        if self.beta <= 0 or self.sigma_k <= 0:
            raise ValueError("beta and sigma_k must be positive")
        if not 0.0 < self.switch_fraction <= 1.0:
            raise ValueError("switch_fraction must lie in (0, 1]")

    @property
    def tau_r(self) -> float:
        return self.alpha_r * self.omega_max


class SlidingWindow:
    """Bounded FIFO of recent instances; eviction is strictly oldest-first."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("window capacity must be positive")
        self.capacity = capacity
        self.entries: deque[LabeledInstance] = deque(maxlen=capacity)
        self.cumulative_updates = 0

    def push(self, instance: LabeledInstance):
        self.entries.append(instance)
        self.cumulative_updates += 1

    def __len__(self):
        return len(self.entries)

    def label_counts(self) -> Counter:
        return Counter(inst.label for inst in self.entries)

    def top_two_counts(self) -> tuple[int, int]:
        """Counts of the two most numerous labels; second is 0 if the window is pure."""
        ranked = sorted(self.label_counts().items(), key=lambda kv: (-kv[1], kv[0]))
        c1 = ranked[0][1] if ranked else 0
        c2 = ranked[1][1] if len(ranked) > 1 else 0
        return c1, c2

    def majority_label(self):
        counts = self.label_counts()
        if not counts:
            return None
        best = max(counts.values())
        return min(label for label, n in counts.items() if n == best)


class CentroidBuffer:
    """Bounded replay store filled by reservoir sampling over the centroid lifetime."""

    def __init__(self, capacity: int):
        if capacity <= 0:
            raise ValueError("buffer capacity must be positive")
        self.capacity = capacity
        self.items: list[LabeledInstance] = []
        self.seen = 0

    def add(self, instance: LabeledInstance, rng: np.random.Generator):
        self.seen += 1
        if len(self.items) < self.capacity:
            self.items.append(instance)
        else:
            j = int(rng.integers(self.seen))
            if j < self.capacity:
                self.items[j] = instance

    def reset(self, items):
        self.items = list(items)[: self.capacity]
        self.seen = len(self.items)

    def __len__(self):
        return len(self.items)


class ReactiveCentroid:
    def __init__(self, cid: int, instance: LabeledInstance, b_max: int, omega_max: int):
        x = instance.features
        self.id = cid
        self.label = instance.label
        self.mean = x.copy()
        self.m2 = np.zeros_like(x)
        self.count = 1
        self.buffer = CentroidBuffer(b_max)
        self.buffer.reset([instance])
        self.window = SlidingWindow(omega_max)
        self.window.push(instance)
        self.registered_since_maintenance = 1
        self.window_updates_since_tick = 1
        self.in_grace_period = True
        self.switched_this_pass = False

    def variance(self) -> np.ndarray:
        return self.m2 / self.count

    def update_stats(self, x: np.ndarray):
        self.count += 1
        delta = x - self.mean
        self.mean += delta / self.count
        self.m2 += delta * (x - self.mean)

    def rebuild_from(self, instances):
        """Recompute mean/m2/count from scratch over the given instances."""
        if not instances:
            raise IllegalStateError("cannot rebuild centroid from zero instances")
        X = np.stack([inst.features for inst in instances])
        self.count = len(instances)
        self.mean = X.mean(axis=0)
        self.m2 = ((X - self.mean) ** 2).sum(axis=0)


def find_nearest(centroids, x: np.ndarray) -> ReactiveCentroid:
    """Centroid with minimal Euclidean distance to x; ties go to the lowest id."""
    best = None
    best_d = math.inf
    for c in centroids:
        d = float(np.linalg.norm(x - c.mean))
        if d < best_d or (d == best_d and best is not None and c.id < best.id):
            best = c
            best_d = d
    if best is None:
        raise EmptyMemoryError("no centroids to search")
    return best


def within_bounds(c: ReactiveCentroid, x: np.ndarray, sigma_k: float) -> bool:
    """Containment test: distance to the mean against sigma_k total std.

    The radius is sigma_k * sqrt(sum of per-dimension variances) so that
    in-distribution points stay inside regardless of dimensionality
    (E[dist^2] from an isotropic cloud is the variance trace). Variances
    are floored to keep fresh single-instance centroids well defined.
    """
    var = np.maximum(c.variance(), VAR_FLOOR)
    radius = sigma_k * math.sqrt(float(var.sum()))
    return float(np.linalg.norm(x - c.mean)) <= radius


def check_switch(c: ReactiveCentroid, config: RsbConfig):
    """Window-majority label if it disagrees with the centroid and is frequent enough."""
    counts = c.window.label_counts()
    if not counts:
        return None
    majority = c.window.majority_label()
    needed = math.ceil(config.switch_fraction * config.omega_max)
    if majority != c.label and counts[majority] >= needed:
        return majority
    return None


def apply_switch(c: ReactiveCentroid, new_label: int, config: RsbConfig) -> ReactiveCentroid:
    """Relabel the centroid and rebuild it from its window.

    The buffer is purged and refilled with window instances of the new
    label; the window itself is retained.
    """
    kept = [inst for inst in c.window.entries if inst.label == new_label]
    if not kept:
        raise IllegalStateError("no window entry carries the switch target label")
    c.label = new_label
    c.rebuild_from(kept)
    c.buffer.reset(kept)
    return c


def check_split(c: ReactiveCentroid, config: RsbConfig) -> bool:
    if c.switched_this_pass:
        return False
    c1, c2 = c.window.top_two_counts()
    if c2 == 0:
        return False
    return c1 / c2 - 1.0 < config.tau_s


class _CentroidMemory:
    """Shared bookkeeping for centroid-driven memories."""

    def __init__(self, config: RsbConfig, rng: np.random.Generator | None = None):
        self.config = config
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.centroids: dict[int, list[ReactiveCentroid]] = {}
        self.stream_counter = 0
        self.dim: int | None = None
        self._next_id = 0

    def all_centroids(self):
        for label in sorted(self.centroids):
            yield from self.centroids[label]

    def class_count(self, label: int) -> int:
        return len(self.centroids.get(label, []))

    def _validate(self, instance: LabeledInstance) -> np.ndarray:
        x = as_features(instance.features)
        if self.dim is None:
            self.dim = x.size
        elif x.size != self.dim:
            raise DimensionMismatchError(f"expected dim {self.dim}, got {x.size}")
        instance.features = x
        return x

    def _create(self, instance: LabeledInstance) -> ReactiveCentroid:
        c = ReactiveCentroid(self._next_id, instance, self.config.b_max, self.config.omega_max)
        self._next_id += 1
        self.centroids.setdefault(instance.label, []).append(c)
        return c

    def _assign(self, c: ReactiveCentroid, instance: LabeledInstance):
        c.update_stats(instance.features)
        c.buffer.add(instance, self.rng)
        c.window.push(instance)
        c.registered_since_maintenance += 1
        c.window_updates_since_tick += 1


class RsbMemory(_CentroidMemory):
    """Reactive subspace memory: centroids switch, split and get removed as drift hits."""

    purity_gated = True

    def ingest(self, instance: LabeledInstance) -> list[MemoryEvent]:
        x = self._validate(instance)
        events: list[MemoryEvent] = []
        self.stream_counter += 1
        y = instance.label
        own = self.centroids.get(y, [])
        touched = None
        if len(own) < self.config.c_min:
            c = self._create(instance)
            touched = c
            events.append(MemoryEvent("created", c.id, y, "bootstrap"))
        else:
            cx = find_nearest(self.all_centroids(), x)
            if cx.label == y:
                self._assign(cx, instance)
                touched = cx
                events.append(MemoryEvent("updated", cx.id, cx.label))
            elif within_bounds(cx, x, self.config.sigma_k):
                cx.window.push(instance)
                cx.window_updates_since_tick += 1
                touched = cx
                new_label = check_switch(cx, self.config)
                if new_label is not None:
                    old = cx.label
                    self._relabel(cx, new_label)
                    events.append(MemoryEvent("switched", cx.id, new_label, f"from {old}"))
            else:
                cyx = find_nearest(own, x)
                if within_bounds(cyx, x, self.config.sigma_k) or len(own) >= self.config.c_max:
                    self._assign(cyx, instance)
                    touched = cyx
                    events.append(MemoryEvent("updated", cyx.id, cyx.label))
                else:
                    c = self._create(instance)
                    touched = c
                    events.append(MemoryEvent("created", c.id, y))
        if self.config.per_centroid_maintenance:
            if touched is not None and touched.window.cumulative_updates % self.config.n_s == 0:
                events.extend(self._maintain_one(touched))
        elif self.stream_counter % self.config.n_s == 0:
            events.extend(self.maintenance())
        return events

    def _relabel(self, c: ReactiveCentroid, new_label: int):
        self.centroids[c.label].remove(c)
        if not self.centroids[c.label]:
            del self.centroids[c.label]
        apply_switch(c, new_label, self.config)
        self.centroids.setdefault(new_label, []).append(c)

    def maintenance(self) -> list[MemoryEvent]:
        """Global tick: switches first, then splits, then stale-cluster removal."""
        events: list[MemoryEvent] = []
        cfg = self.config
        floor = cfg.removal_traffic_floor if cfg.removal_traffic_floor is not None else cfg.tau_r
        snapshot = list(self.all_centroids())
        for c in snapshot:
            c.switched_this_pass = False
        for c in snapshot:
            new_label = check_switch(c, cfg)
            if new_label is not None:
                old = c.label
                self._relabel(c, new_label)
                c.switched_this_pass = True
                events.append(MemoryEvent("switched", c.id, new_label, f"from {old}"))
            elif check_split(c, cfg):
                kept, born = apply_split(self, c)
                events.append(MemoryEvent("split", kept.id, kept.label, f"spawned {born.id}"))
                events.append(MemoryEvent("created", born.id, born.label, "split"))
        for label in sorted(self.centroids):
            group = self.centroids[label]
            survivors = []
            pending = sorted(group, key=lambda c: c.id)
            for i, c in enumerate(pending):
                removable = (
                    not c.in_grace_period
                    and c.registered_since_maintenance < cfg.tau_r
                    and c.window_updates_since_tick >= floor
                )
                remaining = len(pending) - i - 1
                if removable and len(survivors) + remaining >= 1:
                    events.append(MemoryEvent("removed", c.id, c.label))
                else:
                    survivors.append(c)
            self.centroids[label] = survivors
        self.centroids = {l: g for l, g in self.centroids.items() if g}
        for c in self.all_centroids():
            c.registered_since_maintenance = 0
            c.window_updates_since_tick = 0
            c.in_grace_period = False
            c.switched_this_pass = False
        return events

    def _maintain_one(self, c: ReactiveCentroid) -> list[MemoryEvent]:
        """Per-centroid cadence: the same checks, scoped to one window."""
        events: list[MemoryEvent] = []
        cfg = self.config
        c.switched_this_pass = False
        new_label = check_switch(c, cfg)
        if new_label is not None:
            old = c.label
            self._relabel(c, new_label)
            c.switched_this_pass = True
            events.append(MemoryEvent("switched", c.id, new_label, f"from {old}"))
        elif check_split(c, cfg):
            kept, born = apply_split(self, c)
            events.append(MemoryEvent("split", kept.id, kept.label, f"spawned {born.id}"))
            events.append(MemoryEvent("created", born.id, born.label, "split"))
        if (
            not c.in_grace_period
            and c.registered_since_maintenance < cfg.tau_r
            and self.class_count(c.label) > 1
        ):
            self.centroids[c.label].remove(c)
            events.append(MemoryEvent("removed", c.id, c.label))
        else:
            c.registered_since_maintenance = 0
            c.window_updates_since_tick = 0
            c.in_grace_period = False
        return events


def apply_split(memory: _CentroidMemory, c: ReactiveCentroid):
    """Split an impure centroid into two single-label ones.

    The original keeps the window-majority label; a fresh centroid takes
    the runner-up label and is seeded (stats, buffer, window) from its
    window entries. The split may transiently push a class past c_max.
    """
    ranked = sorted(c.window.label_counts().items(), key=lambda kv: (-kv[1], kv[0]))
    if len(ranked) < 2:
        raise IllegalStateError("split requires at least two labels in the window")
    major, minor = ranked[0][0], ranked[1][0]
    major_entries = [inst for inst in c.window.entries if inst.label == major]
    minor_entries = [inst for inst in c.window.entries if inst.label == minor]

    if c.label != major:
        memory.centroids[c.label].remove(c)
        if not memory.centroids[c.label]:
            del memory.centroids[c.label]
        c.label = major
        memory.centroids.setdefault(major, []).append(c)
    c.rebuild_from(major_entries)
    c.buffer.reset(major_entries)
    fresh = SlidingWindow(memory.config.omega_max)
    for inst in major_entries:
        fresh.push(inst)
    c.window = fresh

    born = ReactiveCentroid(memory._next_id, minor_entries[0], memory.config.b_max, memory.config.omega_max)
    memory._next_id += 1
    for inst in minor_entries[1:]:
        born.window.push(inst)
    born.rebuild_from(minor_entries)
    born.buffer.reset(minor_entries)
    born.registered_since_maintenance = len(minor_entries)
    born.window_updates_since_tick = len(minor_entries)
    memory.centroids.setdefault(minor, []).append(born)
    return c, born
