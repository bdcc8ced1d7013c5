"""Reference replay memories: threshold class buffers and non-reactive centroids."""
from __future__ import annotations

import numpy as np

from .memory import (
    LabeledInstance,
    MemoryEvent,
    RsbConfig,
    _CentroidMemory,
    find_nearest,
    within_bounds,
)


class ClassBuffer:
    """One bounded buffer per label with threshold-gated random replacement."""

    purity_gated = False

    def __init__(self, b_max: int, tau: float, rng: np.random.Generator | None = None,
                 replay_per_label: int = 10):
        if b_max <= 0:
            raise ValueError("b_max must be positive")
        if not 0.0 <= tau <= 1.0:
            raise ValueError("tau must lie in [0, 1]")
        self.b_max = b_max
        self.tau = tau
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.replay_per_label = replay_per_label
        self.buffers: dict[int, list[LabeledInstance]] = {}

    def ingest(self, instance: LabeledInstance) -> bool:
        return cb_ingest(self, instance, self.rng)


def cb_ingest(buffer: ClassBuffer, instance: LabeledInstance, rng: np.random.Generator) -> bool:
    """Store if there is room; otherwise replace a random victim when r < tau."""
    group = buffer.buffers.setdefault(instance.label, [])
    if len(group) < buffer.b_max:
        group.append(instance)
        return True
    if float(rng.random()) < buffer.tau:
        group[int(rng.integers(len(group)))] = instance
        return True
    return False


def cb_sample(buffer: ClassBuffer, k: int, rng: np.random.Generator) -> list[LabeledInstance]:
    """k uniform draws with replacement per non-empty label."""
    if k <= 0:
        raise ValueError("k must be positive")
    out: list[LabeledInstance] = []
    for label in sorted(buffer.buffers):
        group = buffer.buffers[label]
        if not group:
            continue
        idx = rng.integers(len(group), size=k)
        out.extend(group[int(i)] for i in idx)
    return out


class StaticCentroidMemory(_CentroidMemory):
    """Centroid memory without reactivity: labels never change, nothing is removed.

    Shares the bootstrap, containment rule and reservoir buffers with the
    reactive memory so that comparisons isolate the reactivity alone.
    """

    purity_gated = False

    def ingest(self, instance: LabeledInstance) -> MemoryEvent:
        return sb_ingest(self, instance)


def sb_ingest(memory: StaticCentroidMemory, instance: LabeledInstance) -> MemoryEvent:
    memory._validate(instance)
    memory.stream_counter += 1
    y = instance.label
    own = memory.centroids.get(y, [])
    if len(own) < memory.config.c_min:
        c = memory._create(instance)
        return MemoryEvent("created", c.id, y, "bootstrap")
    c = find_nearest(own, instance.features)
    if within_bounds(c, instance.features, memory.config.sigma_k) or len(own) >= memory.config.c_max:
        memory._assign(c, instance)
        return MemoryEvent("updated", c.id, c.label)
    c = memory._create(instance)
    return MemoryEvent("created", c.id, y)
