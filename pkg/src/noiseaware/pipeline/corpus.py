"""Synthetic corpora, split allocation and the on-disk manifest.

The manifest is a CSV with one row per image file. A clean casting and its
noisy variant always land in the same split, so no test image has a training
twin. Every row records the SHA-256 of its file, and of its clean counterpart
when it has one, so later stages can check they are scoring the right pair.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
import zlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..casting import DefectLabel, generate_toy_casting
from ..imagecore import PGM_MAXVAL, load_pgm, quantize, save_pgm
from ..noisegen import NoiseKind, add_noise, params_from_dict, params_to_dict, rng_from_seed
from .config import PipelineConfig

SPLITS = ("train", "val", "test")
FIELDS = (
    "index", "path", "clean_path", "noise_kind", "noise_params", "noise_seed",
    "split", "defect_label", "sha256", "clean_sha256",
)


class IntegrityError(OSError):
    """A file on disk does not match the hash recorded in the manifest."""


def derive_seed(seed: int, *tags) -> int:
    """Independent 64-bit child seed for a named sub-task."""
    key = [zlib.crc32(str(t).encode()) for t in tags]
    state = np.random.SeedSequence(int(seed), spawn_key=key).generate_state(2, np.uint64)
    return int(state[0])


def largest_remainder(n: int, ratios) -> list[int]:
    """Integer counts summing to ``n``, proportional to ``ratios``.

    Each part gets ``floor(n * r)``; leftover items go to the largest
    fractional remainders, earlier parts first on ties.
    """
    quotas = [n * r for r in ratios]
    counts = [int(np.floor(q)) for q in quotas]
    order = sorted(range(len(quotas)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


def assign_splits(n: int, ratios, seed: int, names=SPLITS) -> list[str]:
    """Seeded shuffle, then consecutive blocks sized by :func:`largest_remainder`."""
    counts = largest_remainder(n, ratios)
    labels = np.repeat(np.arange(len(counts)), counts)
    out = np.empty(n, dtype=np.int64)
    out[rng_from_seed(seed).permutation(n)] = labels
    return [names[i] for i in out]


def balanced_kinds(n: int, kinds, seed: int) -> list[NoiseKind]:
    """``n`` kinds cycled evenly over ``kinds`` and shuffled."""
    seq = [kinds[i % len(kinds)] for i in range(n)]
    return [seq[i] for i in rng_from_seed(seed).permutation(n)]


@dataclass(frozen=True)
class Sample:
    """One in-memory clean / noisy pair of the synthetic casting corpus."""

    index: int
    clean: np.ndarray
    noisy: np.ndarray
    kind: NoiseKind
    params: object
    noise_seed: int
    split: str
    label: DefectLabel


def noisy_castings(cfg: PipelineConfig, n: int, seed: int, ratios=None, kinds=None) -> list[Sample]:
    """Toy castings with one seeded noisy variant each, both 8-bit quantized.

    Quantizing keeps in-memory samples identical to a PGM round trip. Noise
    kinds are balanced over ``kinds``; parameters come from the noise grid,
    with periodic tones kept outside the spike exclusion disk.
    """
    kinds = tuple(kinds or cfg.kinds)
    ratios = ratios or cfg.split
    names = SPLITS[: len(ratios)]
    clean = generate_toy_casting(n, cfg.defect_rate, derive_seed(seed, "castings"), cfg.geometry)
    splits = assign_splits(n, ratios, derive_seed(seed, "split"), names)
    kind_seq = balanced_kinds(n, kinds, derive_seed(seed, "kinds"))
    prng = rng_from_seed(derive_seed(seed, "params"))
    out = []
    for i, ((img, label), kind) in enumerate(zip(clean, kind_seq)):
        params = cfg.grid.sample(kind, prng, cfg.detect.exclusion_radius)
        nseed = derive_seed(seed, "noise", i)
        img = to_8bit(img)
        noisy = to_8bit(add_noise(img, kind, params, nseed))
        out.append(Sample(i, img, noisy, kind, params, nseed, splits[i], label))
    return out


def to_8bit(img) -> np.ndarray:
    return quantize(img) / float(PGM_MAXVAL)


def sha256(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(frozen=True)
class ManifestEntry:
    index: int
    path: str
    clean_path: str | None
    noise_kind: NoiseKind | None
    noise_params: dict | None
    noise_seed: int | None
    split: str
    defect_label: DefectLabel | None
    sha256: str
    clean_sha256: str | None

    def to_row(self) -> dict:
        return {
            "index": self.index,
            "path": self.path,
            "clean_path": self.clean_path or "",
            "noise_kind": self.noise_kind.label if self.noise_kind is not None else "none",
            "noise_params": json.dumps(self.noise_params, sort_keys=True) if self.noise_params else "",
            "noise_seed": "" if self.noise_seed is None else self.noise_seed,
            "split": self.split,
            "defect_label": "" if self.defect_label is None else self.defect_label.name.lower(),
            "sha256": self.sha256,
            "clean_sha256": self.clean_sha256 or "",
        }

    @classmethod
    def from_row(cls, row: dict) -> "ManifestEntry":
        kind = None if row["noise_kind"] == "none" else NoiseKind.parse(row["noise_kind"])
        params = json.loads(row["noise_params"]) if row["noise_params"] else None
        if kind is not None:
            params_from_dict(kind, params)  # validates
        label = DefectLabel[row["defect_label"].upper()] if row["defect_label"] else None
        if row["split"] not in SPLITS:
            raise ValueError(f"unknown split {row['split']!r}")
        return cls(
            int(row["index"]), row["path"], row["clean_path"] or None, kind, params,
            int(row["noise_seed"]) if row["noise_seed"] else None, row["split"], label,
            row["sha256"], row["clean_sha256"] or None,
        )


@dataclass
class Manifest:
    """Entries plus the provenance needed to regenerate them."""

    root: Path
    entries: list[ManifestEntry]
    seed: int
    config_hash: str

    def __post_init__(self):
        paths = [e.path for e in self.entries]
        if len(set(paths)) != len(paths):
            raise ValueError("manifest paths are not unique")
        if [e.index for e in self.entries] != list(range(len(self.entries))):
            raise ValueError("manifest indices must run 0..n-1 in order")

    def select(self, split: str | None = None, noisy: bool | None = None) -> list[ManifestEntry]:
        out = self.entries
        if split is not None:
            out = [e for e in out if e.split == split]
        if noisy is not None:
            out = [e for e in out if (e.noise_kind is not None) == noisy]
        return out

    def load(self, entry: ManifestEntry, clean: bool = False) -> np.ndarray:
        """Read an entry's image (or its clean counterpart), checking the hash."""
        rel, digest = (entry.clean_path, entry.clean_sha256) if clean else (entry.path, entry.sha256)
        if rel is None:
            raise ValueError(f"entry {entry.index} has no clean counterpart")
        data = (self.root / rel).read_bytes()
        if sha256(data) != digest:
            raise IntegrityError(f"{rel}: content hash does not match the manifest")
        return load_pgm(data)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, FIELDS, lineterminator="\n")
        writer.writeheader()
        for e in self.entries:
            writer.writerow(e.to_row())
        return buf.getvalue()

    def write(self) -> Path:
        self.root.mkdir(parents=True, exist_ok=True)
        (self.root / "manifest.csv").write_text(self.to_csv())
        meta = {"seed": self.seed, "config_hash": self.config_hash, "entries": len(self.entries)}
        (self.root / "manifest.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
        return self.root / "manifest.csv"

    @classmethod
    def read(cls, root) -> "Manifest":
        root = Path(root)
        if root.is_file():
            root = root.parent
        meta = json.loads((root / "manifest.json").read_text())
        with open(root / "manifest.csv", newline="") as fh:
            rows = list(csv.DictReader(fh))
        entries = [ManifestEntry.from_row(r) for r in rows]
        return cls(root, entries, int(meta["seed"]), meta["config_hash"])


def synthesize(cfg: PipelineConfig, root) -> Manifest:
    """Write the casting corpus under ``root`` and return its manifest.

    Layout: ``clean/NNNNN.pgm`` and ``noisy/NNNNN.pgm`` with a shared
    ``NNNNN`` per casting, plus ``manifest.csv`` and ``manifest.json``.
    """
    root = Path(root)
    samples = noisy_castings(cfg, cfg.n_images, cfg.seed)
    (root / "clean").mkdir(parents=True, exist_ok=True)
    (root / "noisy").mkdir(parents=True, exist_ok=True)
    entries = []
    for s in samples:
        clean_rel, noisy_rel = f"clean/{s.index:05d}.pgm", f"noisy/{s.index:05d}.pgm"
        clean_bytes, noisy_bytes = save_pgm(s.clean), save_pgm(s.noisy)
        (root / clean_rel).write_bytes(clean_bytes)
        (root / noisy_rel).write_bytes(noisy_bytes)
        c_hash = sha256(clean_bytes)
        entries.append(ManifestEntry(
            2 * s.index, clean_rel, None, None, None, None, s.split, s.label, c_hash, None))
        entries.append(ManifestEntry(
            2 * s.index + 1, noisy_rel, clean_rel, s.kind, params_to_dict(s.params), s.noise_seed,
            s.split, s.label, sha256(noisy_bytes), c_hash))
    manifest = Manifest(root, entries, cfg.seed, cfg.digest())
    manifest.write()
    return manifest
