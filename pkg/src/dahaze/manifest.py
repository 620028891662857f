"""Dataset manifest construction: depth shuffling, ×n replication, splits.

A manifest is an ordered list of records, each pairing a clear image
with a (possibly shuffled) depth map plus the scalar parameters for its
synthesis.  Everything downstream — batch synthesis, verification,
re-runs — consumes the manifest, so producing it deterministically from
a single seed is what makes whole datasets reproducible.

Scaling works by global shuffling: replica k re-shuffles the depth
maps with the child seed ``sub_seed(seed, k)`` and pairs every clear
image with the depth that lands on it, so an ×n manifest holds exactly
n train records per clear image.  The held-out test split uses child
stream n (one stream for selecting the split, shuffling it, and
drawing its parameters).

Alignment convention: ``clear_catalog[i]`` and ``depth_catalog[i]``
describe the same scene.  Catalogs scanned from directories are sorted
by stem, so aligned files are expected to share their stem.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, field
from pathlib import Path, PurePosixPath

from .asm import DEFAULT_A_SET, DEFAULT_BETA_SET, sample_params
from .errors import InvariantViolation, IOFailure, UsageError
from .rng import Xoshiro256StarStar, sub_seed

MANIFEST_VERSION = 1
_HEADER_PREFIX = "#dahaze-manifest v1 seed="

CLEAR_SUFFIXES = (".png",)
DEPTH_SUFFIXES = (".dahz", ".png")


@dataclass(frozen=True)
class PairRecord:
    """One synthesis job: clear image, depth map, parameters, split."""

    pair_id: str
    clear_path: str
    depth_path: str
    beta: float
    A: float
    split: str

    def __post_init__(self):
        if self.split not in ("train", "test"):
            raise InvariantViolation(
                f"split must be 'train' or 'test', got {self.split!r}"
            )


@dataclass
class DatasetManifest:
    """Ordered records plus the generation parameters that made them.

    ``a_set``, ``beta_set``, ``strict``, and ``fixed_points`` are
    in-memory metadata: they inform :func:`verify_manifest` but are not
    part of the serialized format, whose header carries only the seed
    and scale factor.
    """

    records: list[PairRecord]
    seed: int
    scale_factor: int
    corpus_size: int
    a_set: tuple[float, ...] | None = None
    beta_set: tuple[float, ...] | None = None
    strict: bool = False
    fixed_points: int = field(default=0, compare=False)


def _shuffled_perm(rng: Xoshiro256StarStar, size: int, strict: bool) -> list[int]:
    """Return a permutation of range(size); with strict, a derangement.

    The base permutation is a Fisher-Yates shuffle.  Strict mode then
    eliminates fixed points (positions where the shuffle left the
    aligned depth in place) with one pass of swaps: fixed points are
    paired up and swapped with each other, and a lone leftover is
    swapped with its right neighbor.  Swapping two fixed points i, j
    gives perm[i] = j and perm[j] = i, neither fixed; swapping a lone
    fixed point f with neighbor g (not fixed, so perm[g] != g, and
    perm[g] != f because f already holds f) gives perm[f] != f and
    perm[g] = f != g.  No new fixed points can appear.
    """
    if strict and size < 2:
        raise UsageError(
            "strict pairing needs at least 2 items (no derangement of 1 exists)"
        )
    perm = list(range(size))
    rng.shuffle(perm)
    if strict:
        fixed = [i for i in range(size) if perm[i] == i]
        for a, b in zip(fixed[0::2], fixed[1::2]):
            perm[a], perm[b] = perm[b], perm[a]
        if len(fixed) % 2 == 1:
            f = fixed[-1]
            g = (f + 1) % size
            perm[f], perm[g] = perm[g], perm[f]
    return perm


def shuffle_pairing(
    clear_ids: list[str],
    depth_ids: list[str],
    seed: int,
    strict: bool = False,
) -> list[tuple[str, str]]:
    """Pair each clear id with a shuffled depth id.

    ``clear_ids[i]`` and ``depth_ids[i]`` are taken to be aligned; in
    strict mode the result is guaranteed to pair no image with its own
    aligned depth.  Same inputs and seed give the same pairing on every
    platform.
    """
    if len(clear_ids) != len(depth_ids):
        raise UsageError(
            f"catalog size mismatch: {len(clear_ids)} clear vs {len(depth_ids)} depth"
        )
    rng = Xoshiro256StarStar(seed)
    perm = _shuffled_perm(rng, len(clear_ids), strict)
    return [(clear_ids[i], depth_ids[perm[i]]) for i in range(len(clear_ids))]


def _check_catalog(catalog, label: str) -> None:
    if len(catalog) == 0:
        raise UsageError(f"{label} catalog is empty")
    ids = [entry_id for entry_id, _path in catalog]
    if len(set(ids)) != len(ids):
        dupes = sorted({i for i in ids if ids.count(i) > 1})
        raise InvariantViolation(f"duplicate ids in {label} catalog: {dupes}")


def build_manifest(
    clear_catalog: list[tuple[str, str]],
    depth_catalog: list[tuple[str, str]],
    n: int,
    seed: int,
    *,
    test_count: int = 0,
    strict: bool = False,
    aligned: bool = False,
    a_set=DEFAULT_A_SET,
    beta_set=DEFAULT_BETA_SET,
) -> DatasetManifest:
    """Build an ×n manifest from aligned clear/depth catalogs.

    Catalog entries are ``(id, path)`` with paths relative to wherever
    the manifest will live.  Replica k (k = 0..n-1) shuffles with child
    seed ``sub_seed(seed, k)`` and then draws each record's (A, beta)
    from the same child stream, in record order.  ``aligned=True``
    skips shuffling (classic depth-aligned synthesis) but still draws
    parameters identically.

    When ``test_count > 0``, that many clear images are held out into a
    single-replica test split chosen, shuffled, and parameterized by
    child stream n.
    """
    if n < 1:
        raise UsageError(f"scale factor n must be >= 1, got {n}")
    if test_count < 0:
        raise UsageError(f"test_count must be >= 0, got {test_count}")
    _check_catalog(clear_catalog, "clear")
    _check_catalog(depth_catalog, "depth")
    if len(clear_catalog) != len(depth_catalog):
        raise UsageError(
            f"catalog size mismatch: {len(clear_catalog)} clear vs "
            f"{len(depth_catalog)} depth"
        )
    size = len(clear_catalog)
    if test_count >= size:
        raise UsageError(
            f"test_count {test_count} must leave at least one train image "
            f"(corpus size {size})"
        )

    test_rng = Xoshiro256StarStar(sub_seed(seed, n))
    indices = list(range(size))
    if test_count:
        test_rng.shuffle(indices)
        test_idx = sorted(indices[:test_count])
        train_idx = sorted(indices[test_count:])
    else:
        test_idx = []
        train_idx = indices

    records: list[PairRecord] = []
    fixed_points = 0

    def emit(split: str, idx: list[int], perm: list[int], k: int, rng) -> None:
        nonlocal fixed_points
        for pos, i in enumerate(idx):
            j = idx[perm[pos]]
            params = sample_params(rng, a_set, beta_set)
            if i == j:
                fixed_points += 1
            clear_id, clear_path = clear_catalog[i]
            _depth_id, depth_path = depth_catalog[j]
            records.append(
                PairRecord(
                    pair_id=f"{clear_id}-{k:02d}",
                    clear_path=clear_path,
                    depth_path=depth_path,
                    beta=params.beta,
                    A=params.A,
                    split=split,
                )
            )

    seen_perms: dict[tuple[int, ...], int] = {}
    for k in range(n):
        rng_k = Xoshiro256StarStar(sub_seed(seed, k))
        if aligned:
            perm = list(range(len(train_idx)))
        else:
            perm = _shuffled_perm(rng_k, len(train_idx), strict)
            key = tuple(perm)
            if key in seen_perms:
                warnings.warn(
                    f"replica {k} drew the same depth pairing as replica "
                    f"{seen_perms[key]}; the corpus is too small for "
                    f"{n} distinct shuffles",
                    RuntimeWarning,
                    stacklevel=2,
                )
            else:
                seen_perms[key] = k
        emit("train", train_idx, perm, k, rng_k)

    if test_idx:
        if aligned:
            perm = list(range(len(test_idx)))
        else:
            perm = _shuffled_perm(test_rng, len(test_idx), strict)
        emit("test", test_idx, perm, 0, test_rng)

    return DatasetManifest(
        records=records,
        seed=seed,
        scale_factor=n,
        corpus_size=size,
        a_set=tuple(a_set),
        beta_set=tuple(beta_set),
        strict=strict and not aligned,
        fixed_points=fixed_points,
    )


def verify_manifest(manifest: DatasetManifest) -> list[str]:
    """Return all invariant violations found in a manifest.

    Checks duplicate pair ids, the ×n counting contract on the train
    split, strict-mode fixed points (by the shared-stem alignment
    convention), and — when the manifest carries its parameter sets —
    out-of-set values.  An empty list means the manifest is valid.
    """
    violations: list[str] = []

    seen: set[str] = set()
    for r in manifest.records:
        if r.pair_id in seen:
            violations.append(f"duplicate pair_id: {r.pair_id}")
        seen.add(r.pair_id)

    train_counts: dict[str, int] = {}
    for r in manifest.records:
        if r.split == "train":
            train_counts[r.clear_path] = train_counts.get(r.clear_path, 0) + 1
    for clear_path, count in sorted(train_counts.items()):
        if count != manifest.scale_factor:
            violations.append(
                f"clear image {clear_path} appears {count} times in train "
                f"records, expected {manifest.scale_factor}"
            )

    if manifest.strict:
        for r in manifest.records:
            if Path(r.clear_path).stem == Path(r.depth_path).stem:
                violations.append(
                    f"strict manifest pairs {r.pair_id} with its aligned depth"
                )

    if manifest.a_set is not None:
        for r in manifest.records:
            if r.A not in manifest.a_set:
                violations.append(f"record {r.pair_id}: A={r.A!r} outside the A set")
    if manifest.beta_set is not None:
        for r in manifest.records:
            if r.beta not in manifest.beta_set:
                violations.append(
                    f"record {r.pair_id}: beta={r.beta!r} outside the beta set"
                )

    return violations


def write_manifest(manifest: DatasetManifest, path) -> None:
    """Serialize a manifest in the versioned tab-separated text format.

    First line: ``#dahaze-manifest v1 seed=<u64> n=<int>``.  Then one
    record per line: pair_id, clear_path, depth_path, beta, A, split —
    floats in shortest round-trip decimal form, lines ending with a
    single newline, UTF-8 throughout.  Byte-identical for identical
    manifests.
    """
    p = Path(path)
    lines = [f"#dahaze-manifest v1 seed={manifest.seed} n={manifest.scale_factor}"]
    for r in manifest.records:
        lines.append(
            "\t".join(
                (r.pair_id, r.clear_path, r.depth_path, repr(r.beta), repr(r.A), r.split)
            )
        )
    try:
        p.write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
    except OSError as exc:
        raise IOFailure(f"cannot write manifest: {p}: {exc}") from None


def read_manifest(path) -> DatasetManifest:
    """Parse a manifest file written by :func:`write_manifest`.

    The parameter sets and strict flag are not serialized, so the
    returned manifest carries none (verification of those aspects
    requires the original build arguments).
    """
    p = Path(path)
    if not p.is_file():
        raise IOFailure(f"manifest not found: {p}")
    try:
        text = p.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise IOFailure(f"cannot read manifest: {p}: {exc}") from None
    lines = text.split("\n")
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise IOFailure(f"bad manifest header (expected '{_HEADER_PREFIX}...'): {p}")
    header = lines[0][len(_HEADER_PREFIX):]
    try:
        seed_part, n_part = header.split(" n=")
        seed = int(seed_part)
        n = int(n_part)
    except ValueError:
        raise IOFailure(f"malformed manifest header: {p}") from None
    if seed < 0 or n < 1:
        raise IOFailure(f"malformed manifest header values: {p}")

    records = []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 6:
            raise IOFailure(f"{p}:{lineno}: expected 6 tab-separated fields")
        pair_id, clear_path, depth_path, beta_s, a_s, split = fields
        try:
            beta = float(beta_s)
            a = float(a_s)
        except ValueError:
            raise IOFailure(f"{p}:{lineno}: malformed numeric field") from None
        if split not in ("train", "test"):
            raise IOFailure(f"{p}:{lineno}: bad split {split!r}")
        records.append(
            PairRecord(
                pair_id=pair_id,
                clear_path=clear_path,
                depth_path=depth_path,
                beta=beta,
                A=a,
                split=split,
            )
        )
    corpus_size = len({r.clear_path for r in records})
    return DatasetManifest(
        records=records,
        seed=seed,
        scale_factor=n,
        corpus_size=corpus_size,
    )


def scan_catalog(directory, suffixes, base=None) -> list[tuple[str, str]]:
    """Scan a directory into a stem-sorted ``(id, relative path)`` catalog.

    Files are matched by suffix, ids are file stems, and paths are
    POSIX-style, relative to ``base`` (default: the directory itself),
    so the resulting catalog can go straight into a manifest.  Sorting
    by stem keeps independently scanned clear and depth catalogs
    aligned when their files share stems.
    """
    d = Path(directory)
    if not d.is_dir():
        raise IOFailure(f"catalog directory not found: {d}")
    base = Path(base) if base is not None else d
    files = [
        f for f in d.iterdir() if f.is_file() and f.suffix.lower() in suffixes
    ]
    entries = []
    for f in sorted(files, key=lambda f: (f.stem, f.name)):
        rel = PurePosixPath(os.path.relpath(str(f), str(base)).replace(os.sep, "/"))
        entries.append((f.stem, str(rel)))
    return entries
