"""Benchmark stream construction: schedules, synthetic subconcepts, file ingestion.

A stream presents binary-labeled batches of "subconcepts" (original
classes). Stationary schedules introduce one subconcept per batch with
interleaved 0/1 labels; drifting schedules additionally flip the label of
previously seen subconcepts in two-batch episodes.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .memory import LabeledInstance

WARMUP_FRACTION = 0.1

# Default drifting layout: episode start batch -> drifting subconcept.
DEFAULT_DRIFT_EPISODES = ((4, 0), (9, 2), (14, 4), (19, 6), (24, 8))
DEFAULT_DRIFT_BATCHES = 30


class ScheduleError(ValueError):
    pass


class FeatureFileError(ValueError):
    pass


def base_label(subconcept_id: int) -> int:
    """Interleaved assignment: subconcept 0 is liked (1), 1 is disliked (0), ..."""
    return (subconcept_id + 1) % 2


class SubconceptDataset:
    """Per-subconcept train/test feature partitions."""

    def __init__(self, dim: int, parts: dict[int, tuple[np.ndarray, np.ndarray]]):
        if not parts:
            raise ValueError("dataset needs at least one subconcept")
        self.dim = dim
        self.parts = {}
        for sid, (train, test) in sorted(parts.items()):
            train = np.asarray(train, dtype=np.float64)
            test = np.asarray(test, dtype=np.float64)
            if train.size == 0 or test.size == 0:
                raise ValueError(f"subconcept {sid} must be non-empty in both partitions")
            if train.shape[1] != dim or test.shape[1] != dim:
                raise ValueError(f"subconcept {sid} has inconsistent dimensionality")
            self.parts[sid] = (train, test)

    @property
    def subconcept_ids(self):
        return sorted(self.parts)

    def train(self, sid: int) -> np.ndarray:
        return self.parts[sid][0]

    def test(self, sid: int) -> np.ndarray:
        return self.parts[sid][1]


@dataclass(frozen=True)
class ScheduleEntry:
    batch_index: int
    subconcept_id: int
    label: int
    kind: str  # intro | drift | revisit
    slice_start: float = 0.0
    slice_end: float = 1.0


class StreamSchedule:
    def __init__(self, entries, n_subconcepts: int, warmup_subconcepts=(0, 1),
                 warmup_fraction: float = WARMUP_FRACTION):
        self.entries = list(entries)
        self.n_subconcepts = n_subconcepts
        self.warmup_subconcepts = tuple(warmup_subconcepts)
        self.warmup_fraction = warmup_fraction
        self._flips: dict[int, list[int]] = {}
        current = {}
        for e in self.entries:
            prev = current.get(e.subconcept_id, base_label(e.subconcept_id))
            if e.label != prev:
                if e.kind != "drift":
                    raise ScheduleError(
                        f"batch {e.batch_index}: label change outside a drift entry")
                self._flips.setdefault(e.subconcept_id, []).append(e.batch_index)
            current[e.subconcept_id] = e.label

    def __len__(self):
        return 0 if not self.entries else self.entries[-1].batch_index + 1

    def entry(self, t: int) -> ScheduleEntry:
        for e in self.entries:
            if e.batch_index == t:
                return e
        raise IndexError(f"no schedule entry for batch {t}")

    def label_at(self, subconcept_id: int, t: int) -> int:
        label = base_label(subconcept_id)
        for fb in self._flips.get(subconcept_id, []):
            if t >= fb:
                label = 1 - label
        return label

    def seen_subconcepts(self, t: int):
        seen = set(self.warmup_subconcepts)
        for e in self.entries:
            if e.batch_index <= t:
                seen.add(e.subconcept_id)
        return sorted(seen)

    def current_label_map(self, t: int) -> dict[int, int]:
        return {sid: self.label_at(sid, t) for sid in self.seen_subconcepts(t)}


def build_stationary_schedule(n_subconcepts: int) -> StreamSchedule:
    """One intro batch per subconcept with interleaved labels, no drift."""
    if n_subconcepts < 2:
        raise ScheduleError("need at least 2 subconcepts")
    entries = []
    for k in range(n_subconcepts):
        start = WARMUP_FRACTION if k in (0, 1) else 0.0
        entries.append(ScheduleEntry(k, k, base_label(k), "intro", start, 1.0))
    return StreamSchedule(entries, n_subconcepts)


def build_drift_schedule(n_subconcepts: int = 10, n_batches: int = DEFAULT_DRIFT_BATCHES,
                         drift_episodes=None) -> StreamSchedule:
    """Intros, two-batch drift episodes and round-robin revisits.

    Each episode permanently flips one previously introduced subconcept's
    label and re-presents its training data in two halves. Once every
    subconcept is introduced, filler batches revisit the non-drifting
    subconcepts with their current labels.
    """
    if n_subconcepts < 2:
        raise ScheduleError("need at least 2 subconcepts")
    if drift_episodes is None:
        drift_episodes = [(s, c) for s, c in DEFAULT_DRIFT_EPISODES if c < n_subconcepts]
    episode_at = {}
    for start, sid in drift_episodes:
        if start in episode_at or (start + 1) in episode_at or (start - 1) in episode_at:
            raise ScheduleError("drift episodes overlap")
        episode_at[start] = sid
    drifting = {sid for _, sid in drift_episodes}
    cycle = [k for k in range(n_subconcepts) if k not in drifting] or list(range(n_subconcepts))

    entries = []
    introduced = set()
    flips: dict[int, int] = {}
    next_intro = 0
    cycle_pos = 0
    t = 0
    while t < n_batches:
        if t in episode_at:
            sid = episode_at[t]
            if sid not in introduced:
                raise ScheduleError(f"batch {t}: drift references unseen subconcept {sid}")
            flipped = 1 - (base_label(sid) if sid not in flips else 1 - base_label(sid))
            flips[sid] = t
            entries.append(ScheduleEntry(t, sid, flipped, "drift", 0.0, 0.5))
            if t + 1 < n_batches:
                entries.append(ScheduleEntry(t + 1, sid, flipped, "drift", 0.5, 1.0))
            t += 2
        elif next_intro < n_subconcepts:
            sid = next_intro
            start = WARMUP_FRACTION if sid in (0, 1) else 0.0
            entries.append(ScheduleEntry(t, sid, base_label(sid), "intro", start, 1.0))
            introduced.add(sid)
            next_intro += 1
            t += 1
        else:
            sid = cycle[cycle_pos % len(cycle)]
            cycle_pos += 1
            label = base_label(sid) if sid not in flips else 1 - base_label(sid)
            entries.append(ScheduleEntry(t, sid, label, "revisit", 0.0, 1.0))
            t += 1
    return StreamSchedule(entries, n_subconcepts)


@dataclass
class GaussianStreamSpec:
    n_subconcepts: int = 10
    dim: int = 16
    std: float = 1.0
    separation: float = 8.0  # minimum pairwise mean distance, in units of std
    train_per: int = 1000
    test_per: int = 200
    seed: int = 0
    means: np.ndarray | None = None

    def __post_init__(self):
        if self.n_subconcepts < 2 or self.dim <= 0:
            raise ValueError("need >= 2 subconcepts and positive dim")
        if self.std <= 0 or self.separation <= 0:
            raise ValueError("std and separation must be positive")
        if self.train_per <= 0 or self.test_per <= 0:
            raise ValueError("train_per and test_per must be positive")


def generate_gaussian(spec: GaussianStreamSpec) -> SubconceptDataset:
    """Seeded isotropic Gaussian subconcepts with a guaranteed mean separation."""
    rng = np.random.default_rng(spec.seed)
    if spec.means is not None:
        means = np.asarray(spec.means, dtype=np.float64)
    else:
        means = rng.normal(size=(spec.n_subconcepts, spec.dim))
        dmin = min(
            float(np.linalg.norm(means[i] - means[j]))
            for i in range(spec.n_subconcepts)
            for j in range(i + 1, spec.n_subconcepts)
        )
        means = means * (spec.separation * spec.std / dmin)
    parts = {}
    for sid in range(spec.n_subconcepts):
        train = rng.normal(means[sid], spec.std, size=(spec.train_per, spec.dim))
        test = rng.normal(means[sid], spec.std, size=(spec.test_per, spec.dim))
        parts[sid] = (train, test)
    return SubconceptDataset(spec.dim, parts)


def save_features(dataset: SubconceptDataset, path):
    """Headered delimited text: `dim=<d> subconcepts=<k>` then one row per instance."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"dim={dataset.dim} subconcepts={len(dataset.parts)}\n")
        for sid in dataset.subconcept_ids:
            train, test = dataset.parts[sid]
            for split, block in (("train", train), ("test", test)):
                for row in block:
                    vals = ",".join(repr(float(v)) for v in row)
                    fh.write(f"{sid},{split},{vals}\n")


def load_features(path) -> SubconceptDataset:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        try:
            fields = dict(part.split("=") for part in header.split())
            dim = int(fields["dim"])
            n_sub = int(fields["subconcepts"])
        except (ValueError, KeyError) as exc:
            raise FeatureFileError(f"line 1: malformed header {header!r}") from exc
        rows: dict[int, dict[str, list]] = {}
        for lineno, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            pieces = line.split(",")
            if len(pieces) != dim + 2:
                raise FeatureFileError(
                    f"line {lineno}: expected {dim + 2} fields, got {len(pieces)}")
            try:
                sid = int(pieces[0])
                split = pieces[1]
                vals = [float(v) for v in pieces[2:]]
            except ValueError as exc:
                raise FeatureFileError(f"line {lineno}: unparsable row") from exc
            if split not in ("train", "test"):
                raise FeatureFileError(f"line {lineno}: unknown split {split!r}")
            if sid < 0 or sid >= n_sub:
                raise FeatureFileError(f"line {lineno}: unknown subconcept {sid}")
            rows.setdefault(sid, {"train": [], "test": []})[split].append(vals)
    parts = {}
    for sid, blocks in rows.items():
        if not blocks["train"] or not blocks["test"]:
            raise FeatureFileError(f"subconcept {sid} missing a train or test partition")
        parts[sid] = (np.array(blocks["train"]), np.array(blocks["test"]))
    return SubconceptDataset(dim, parts)


def save_schedule(schedule: StreamSchedule, path):
    with open(path, "w", encoding="utf-8") as fh:
        for e in schedule.entries:
            fh.write(f"{e.batch_index},{e.subconcept_id},{e.label},{e.kind},"
                     f"{e.slice_start},{e.slice_end}\n")


def load_schedule(path, n_subconcepts: int) -> StreamSchedule:
    entries = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            pieces = line.split(",")
            if len(pieces) != 6:
                raise ScheduleError(f"line {lineno}: expected 6 fields")
            try:
                entries.append(ScheduleEntry(int(pieces[0]), int(pieces[1]), int(pieces[2]),
                                             pieces[3], float(pieces[4]), float(pieces[5])))
            except ValueError as exc:
                raise ScheduleError(f"line {lineno}: unparsable entry") from exc
    return StreamSchedule(entries, n_subconcepts)


def _slice_rows(block: np.ndarray, start: float, end: float) -> np.ndarray:
    n = len(block)
    return block[math.floor(start * n):math.floor(end * n)]


def warmup_instances(schedule: StreamSchedule, dataset: SubconceptDataset):
    """The initialization sample: the first fraction of the warmup subconcepts."""
    out = []
    for sid in schedule.warmup_subconcepts:
        block = _slice_rows(dataset.train(sid), 0.0, schedule.warmup_fraction)
        out.extend(LabeledInstance(row.copy(), base_label(sid), sid) for row in block)
    return out


class EvalPool:
    """Holdout test data of every subconcept seen so far, under current labels."""

    def __init__(self, groups):
        self.groups = groups  # list of (sid, X_test, label)

    def __len__(self):
        return sum(len(X) for _, X, _ in self.groups)


def eval_pool(schedule: StreamSchedule, dataset: SubconceptDataset, t: int) -> EvalPool:
    return EvalPool([
        (sid, dataset.test(sid), schedule.label_at(sid, t))
        for sid in schedule.seen_subconcepts(t)
    ])


def next_batch(schedule: StreamSchedule, dataset: SubconceptDataset, t: int,
               rng: np.random.Generator):
    """Training instances for batch t (shuffled) plus the cumulative eval pool."""
    if t < 0 or t >= len(schedule):
        raise IndexError(f"batch index {t} out of range")
    e = schedule.entry(t)
    block = _slice_rows(dataset.train(e.subconcept_id), e.slice_start, e.slice_end)
    order = rng.permutation(len(block))
    instances = [LabeledInstance(block[i].copy(), e.label, e.subconcept_id) for i in order]
    return instances, eval_pool(schedule, dataset, t)
