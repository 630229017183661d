"""Training and evaluation loops over size-bucketed batches."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dataset import desk_category_for, load_records
from .networks import Network, NetworkSpec, build_network
from .ops import softmax_cross_entropy, sgd_step


@dataclass
class TrainConfig:
    kind: str  # "ipn" | "mpn" | "bn"
    train_manifest: str
    test_manifest: str | None = None
    lr: float = 0.01
    momentum: float = 0.9
    batch_size: int = 16
    iterations: int = 2000
    eval_every: int = 200
    seed: int = 0
    class_count: int = 5

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")


@dataclass
class Metrics:
    per_class: np.ndarray  # accuracy per factor class
    average: float
    confusion: np.ndarray  # rows: true class, cols: predicted
    trace: list[tuple[int, float]] = field(default_factory=list)


class _Bucket:
    """All records of one patch size; every batch is drawn from one bucket so
    the tensors stack densely."""

    def __init__(self, patches, labels, category):
        self.x = np.concatenate(patches, axis=0).astype(np.float32)
        self.y = np.asarray(labels, dtype=np.int64)
        self.category = category
        self._order = None
        self._pos = 0

    def next_batch(self, size, rng):
        n = len(self.y)
        idx = np.empty(size, dtype=np.int64)
        got = 0
        while got < size:
            if self._order is None or self._pos >= n:
                self._order = rng.permutation(n)
                self._pos = 0
            take = min(size - got, n - self._pos)
            idx[got : got + take] = self._order[self._pos : self._pos + take]
            self._pos += take
            got += take
        return self.x[idx], self.y[idx]


def _bucketize(records, kind):
    buckets = {}
    for patch, label, entry in records:
        p = patch.shape[2]
        if patch.shape != (1, 1, p, p):
            raise ValueError(f"record patch has unexpected shape {patch.shape}")
        key = (p, desk_category_for(entry.base_size) if kind == "bn" else None)
        buckets.setdefault(key, ([], []))
        buckets[key][0].append(patch)
        buckets[key][1].append(label)
    out = []
    for (p, cat) in sorted(buckets, key=lambda k: (k[0], k[1] or "")):
        patches, labels = buckets[(p, cat)]
        out.append(_Bucket(patches, labels, cat))
    return out


def _normalize(x):
    return (x - 128.0) / 64.0


def train(cfg: TrainConfig, spec: NetworkSpec | None = None):
    """SGD over round-robin size buckets; returns (network, trace).

    trace is [(iteration, holdout accuracy)], populated every eval_every
    iterations when a test manifest is configured.
    """
    if spec is None:
        spec = NetworkSpec(kind=cfg.kind, class_count=cfg.class_count)
    if spec.kind != cfg.kind:
        raise ValueError("config kind and network spec disagree")
    net = build_network(spec, seed=cfg.seed)
    buckets = _bucketize(load_records(cfg.train_manifest), cfg.kind)
    test_records = load_records(cfg.test_manifest) if cfg.test_manifest else None
    rng = np.random.default_rng(cfg.seed + 0x5EED)
    velocity: dict = {}
    trace: list[tuple[int, float]] = []
    for it in range(1, cfg.iterations + 1):
        bucket = buckets[(it - 1) % len(buckets)]
        xb, yb = bucket.next_batch(cfg.batch_size, rng)
        logits = net.forward(_normalize(xb), category=bucket.category)
        _, dlogits = softmax_cross_entropy(logits, yb)
        net.zero_grads()
        net.backward(dlogits.astype(np.float32))
        sgd_step(net.params(), net.grads(), velocity, cfg.lr, cfg.momentum)
        if test_records is not None and it % cfg.eval_every == 0:
            trace.append((it, evaluate(net, test_records).average))
    return net, trace


def evaluate(net: Network, records, batch_size: int = 128) -> Metrics:
    """Argmax-logit classification; per-class accuracy plus unweighted mean."""
    if not records:
        raise ValueError("no records to evaluate")
    k = net.spec.class_count
    confusion = np.zeros((k, k), dtype=np.int64)
    groups = {}
    for patch, label, entry in records:
        key = (patch.shape[2], desk_category_for(entry.base_size) if net.spec.kind == "bn" else None)
        groups.setdefault(key, ([], []))
        groups[key][0].append(patch)
        groups[key][1].append(label)
    for (p, cat) in sorted(groups, key=lambda g: (g[0], g[1] or "")):
        patches, labels = groups[(p, cat)]
        x = np.concatenate(patches, axis=0).astype(np.float32)
        y = np.asarray(labels, dtype=np.int64)
        for start in range(0, len(y), batch_size):
            xb = _normalize(x[start : start + batch_size])
            logits = net.forward(xb, category=cat)
            pred = logits.argmax(axis=1)
            for t, pr in zip(y[start : start + batch_size], pred):
                confusion[t, pr] += 1
    totals = confusion.sum(axis=1)
    per_class = np.where(totals > 0, np.diag(confusion) / np.maximum(totals, 1), 0.0)
    present = totals > 0
    average = float(per_class[present].mean()) if present.any() else 0.0
    return Metrics(per_class=per_class, average=average, confusion=confusion)


def train_accuracy(net: Network, records) -> float:
    return evaluate(net, records).average
