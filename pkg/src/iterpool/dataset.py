"""Synthetic double-compression + resampling dataset.

Each record walks the evidence chain: synthesized base image -> JPEG(qf1)
-> resample(factor) [-> rotate] -> JPEG(90) -> center patch. Every record is
a pure function of its seed, so regeneration is bitwise reproducible and
generation order never matters.
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, replace

import numpy as np

from .imageops import resample, rotate, synth_base_image
from .jpegsim import jpeg_sim
from .tensor import load_tns, save_tns

FACTORS = (0.6, 0.8, 1.0, 1.2, 1.4)

# desk-scale routing: base sizes {64,128,256} stand in for full-size images,
# with routing thresholds scaled down by 8. Patch sides are mode-independent
# here: scaling the full-size small patches by 8 as well would leave 8x8
# patches (a single JPEG block), too little evidence for any method, so both
# modes use the same 16/32/64 sides. The full-size, mode-dependent sizing
# lives in networks.patch_size_for.
DESK_SCALE = 8
_DESK_PATCH = {"ipn": (16, 32, 64), "bn": (16, 32, 64)}


class RecordDiscarded(ValueError):
    """Patch does not fit inside the post-resampling image."""


def desk_patch_size_for(d: int, mode: str) -> int:
    sizes = _DESK_PATCH.get(mode.lower())
    if sizes is None:
        raise ValueError(f"unknown mode {mode!r}")
    if d < sizes[0]:
        raise ValueError(f"image dimension {d} below minimum patch size {sizes[0]}")
    if d < 1024 // DESK_SCALE:
        return sizes[0]
    if d <= 2000 // DESK_SCALE:
        return sizes[1]
    return sizes[2]


def desk_category_for(d: int) -> str:
    if d < 1024 // DESK_SCALE:
        return "I"
    if d <= 2000 // DESK_SCALE:
        return "II"
    return "III"


@dataclass(frozen=True)
class DatasetConfig:
    base_sizes: tuple[int, ...] = (64, 128, 256)
    factors: tuple[float, ...] = FACTORS
    qf1_choices: tuple[int, ...] = (50, 60, 70, 80, 90, 100)
    qf2: int = 90
    rotation_range_deg: tuple[float, float] | None = None  # e.g. (-20, 20), 0 excluded
    train_per_class: int = 10
    test_per_class: int = 2
    master_seed: int = 0

    def validate(self) -> None:
        if tuple(self.factors) != FACTORS:
            raise ValueError(f"factors must be exactly {FACTORS}")
        if self.qf2 != 90:
            raise ValueError("second compression is fixed at quality 90")
        if min(self.base_sizes) < 64:
            raise ValueError("base sizes must be >= 64")
        if self.train_per_class < 1 or self.test_per_class < 1:
            raise ValueError("per-class counts must be positive")


@dataclass(frozen=True)
class RecordMeta:
    base_size: int
    qf1: int
    factor: float
    rotation_deg: float  # 0.0 when rotation disabled
    seed: int


@dataclass
class Record:
    patch: np.ndarray  # (1, 1, p, p) float32
    label: int  # index into FACTORS
    rotation_label: int | None  # 0 = clockwise, 1 = anti-clockwise, None = off
    meta: RecordMeta


def record_seed(master_seed: int, split: str, base_size: int, factor_idx: int, i: int) -> int:
    key = f"{master_seed}/{split}/{base_size}/{factor_idx}/{i}".encode()
    return int.from_bytes(hashlib.blake2s(key, digest_size=8).digest(), "little")


def make_record(
    cfg: DatasetConfig,
    base_size: int,
    factor: float,
    seed: int,
    mode: str,
    patch_size: int | None = None,
) -> Record:
    if factor not in cfg.factors:
        raise ValueError(f"factor {factor} not in configured factors")
    p = patch_size if patch_size is not None else desk_patch_size_for(base_size, mode)
    rng = np.random.default_rng(seed)
    qf1 = int(rng.choice(cfg.qf1_choices))
    rotation_deg = 0.0
    rotation_label = None
    if cfg.rotation_range_deg is not None:
        lo, hi = cfg.rotation_range_deg
        rotation_label = int(rng.integers(0, 2))  # 0 cw (negative), 1 acw (positive)
        mag = float(rng.uniform(1e-3, hi if rotation_label else -lo))
        rotation_deg = mag if rotation_label else -mag
    img = synth_base_image(base_size, int(rng.integers(0, 2**63 - 1)))
    img = jpeg_sim(img, qf1)
    img = resample(img, factor)
    if rotation_deg != 0.0:
        img = rotate(img, rotation_deg)
    img = jpeg_sim(img, cfg.qf2)
    h, w = img.shape
    if h < p or w < p:
        raise RecordDiscarded(f"patch {p} does not fit in {h}x{w} resampled image")
    top, left = (h - p) // 2, (w - p) // 2
    patch = img[top : top + p, left : left + p].reshape(1, 1, p, p)
    return Record(
        patch=np.ascontiguousarray(patch, dtype=np.float32),
        label=cfg.factors.index(factor),
        rotation_label=rotation_label,
        meta=RecordMeta(base_size, qf1, factor, rotation_deg, seed),
    )


MANIFEST_HEADER = "path,label,base_size,qf1,factor,rotation_deg,seed"


@dataclass(frozen=True)
class ManifestEntry:
    path: str
    label: int
    base_size: int
    qf1: int
    factor: float
    rotation_deg: float
    seed: int


def _manifest_line(e: ManifestEntry) -> str:
    return (
        f"{e.path},{e.label},{e.base_size},{e.qf1},{e.factor:g},"
        f"{e.rotation_deg:.6g},{e.seed}"
    )


def write_manifest(path, entries: list[ManifestEntry]) -> None:
    with open(path, "w") as fh:
        fh.write(MANIFEST_HEADER + "\n")
        for e in entries:
            fh.write(_manifest_line(e) + "\n")


def read_manifest(path) -> list[ManifestEntry]:
    entries = []
    with open(path) as fh:
        header = fh.readline().strip()
        if header != MANIFEST_HEADER:
            raise ValueError(f"unexpected manifest header: {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            fields = line.split(",")
            entries.append(
                ManifestEntry(
                    path=fields[0],
                    label=int(fields[1]),
                    base_size=int(fields[2]),
                    qf1=int(fields[3]),
                    factor=float(fields[4]),
                    rotation_deg=float(fields[5]),
                    seed=int(fields[6]),
                )
            )
    if not entries:
        raise ValueError(f"empty manifest {path}")
    return entries


def build_split(cfg: DatasetConfig, mode: str, split: str, out_dir) -> list[ManifestEntry]:
    per = cfg.train_per_class if split == "train" else cfg.test_per_class
    os.makedirs(out_dir, exist_ok=True)
    entries = []
    for base_size in cfg.base_sizes:
        for fi, factor in enumerate(cfg.factors):
            for i in range(per):
                seed = record_seed(cfg.master_seed, split, base_size, fi, i)
                rec = make_record(cfg, base_size, factor, seed, mode)
                name = f"{split}_s{base_size}_f{fi}_{i:05d}.tns"
                save_tns(os.path.join(out_dir, name), rec.patch)
                entries.append(
                    ManifestEntry(
                        path=name,
                        label=rec.label,
                        base_size=base_size,
                        qf1=rec.meta.qf1,
                        factor=factor,
                        rotation_deg=rec.meta.rotation_deg,
                        seed=seed,
                    )
                )
    return entries


def build_dataset(cfg: DatasetConfig, mode: str, out_dir) -> dict[str, str]:
    """Generate both splits; returns {"train": manifest_path, "test": ...}."""
    cfg.validate()
    manifests = {}
    for split in ("train", "test"):
        entries = build_split(cfg, mode, split, out_dir)
        mpath = os.path.join(out_dir, f"{split}_manifest.csv")
        write_manifest(mpath, entries)
        manifests[split] = mpath
    return manifests


def load_records(manifest_path) -> list[tuple[np.ndarray, int, ManifestEntry]]:
    """Load every patch referenced by a manifest into memory."""
    entries = read_manifest(manifest_path)
    base = os.path.dirname(os.path.abspath(manifest_path))
    out = []
    for e in entries:
        patch = load_tns(os.path.join(base, e.path))
        out.append((patch, e.label, e))
    return out
