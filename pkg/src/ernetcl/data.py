"""Conversation datasets: file format, batching, synthetic generation and
feature dumps.

Dataset file: one conversation per line, ``<id>\\t<json>`` where the JSON
body is ``{"id": ..., "utterances": [{"speaker": ..., "label": ...,
"features": [...]}, ...]}``. A bare JSON body without the id column is
accepted too. Instead of ``features`` an utterance may carry
``"features_ref": [byte_offset, count]`` pointing into a little-endian
float32 sidecar ``<path>.bin``.

Label map sidecar ``<path>.labels``: ``<index>\\t<name>`` lines plus an
optional ``neutral\\t<index>`` line.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import curriculum
from .errors import ConfigError, FormatError, LabelError, ParseError
from .model import PAD_LABEL, ModelParams, encode
from .tensor import no_grad


@dataclass
class Utterance:
    speaker: str
    label: int
    features: np.ndarray


@dataclass
class Conversation:
    id: str
    utterances: list[Utterance]

    def __len__(self) -> int:
        return len(self.utterances)

    @property
    def speakers(self) -> list[str]:
        return [u.speaker for u in self.utterances]

    @property
    def labels(self) -> list[int]:
        return [u.label for u in self.utterances]

    @cached_property
    def difficulty(self) -> float:
        return curriculum.difficulty(self)


@dataclass
class Dataset:
    conversations: list[Conversation]
    label_names: list[str]
    neutral_index: int | None = None

    def __post_init__(self):
        if self.neutral_index is not None and not 0 <= self.neutral_index < len(self.label_names):
            raise LabelError(f"neutral index {self.neutral_index} outside [0, {len(self.label_names)})")

    def __len__(self) -> int:
        return len(self.conversations)

    @property
    def num_classes(self) -> int:
        return len(self.label_names)

    @property
    def feature_dim(self) -> int:
        return self.conversations[0].utterances[0].features.shape[0] if self.conversations else 0

    @property
    def num_utterances(self) -> int:
        return sum(len(c) for c in self.conversations)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        return Dataset([self.conversations[i] for i in indices], list(self.label_names), self.neutral_index)


@dataclass
class Batch:
    features: np.ndarray  # [B, L, d]
    labels: np.ndarray  # [B, L], PAD_LABEL on padding
    valid_mask: np.ndarray  # [B, L] bool
    conv_ids: list[str]
    conv_difficulties: np.ndarray  # [B]
    lengths: np.ndarray = field(default=None)  # [B]

    def __post_init__(self):
        if self.lengths is None:
            self.lengths = self.valid_mask.sum(axis=1)

    @property
    def size(self) -> int:
        return len(self.conv_ids)


# ---------------------------------------------------------------------------
# label map


def load_label_map(path: str | Path) -> tuple[list[str], int | None]:
    names: dict[int, str] = {}
    neutral = None
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), 1):
        if not raw.strip():
            continue
        parts = raw.split("\t")
        if len(parts) != 2:
            raise ParseError(f"{path}: expected '<index>\\t<name>'", lineno)
        key, value = parts
        try:
            if key == "neutral":
                neutral = int(value)
            else:
                names[int(key)] = value
        except ValueError as exc:
            raise ParseError(f"{path}: bad index in {raw!r}", lineno) from exc
    if sorted(names) != list(range(len(names))):
        raise FormatError(f"{path}: class indices must be 0..K-1, got {sorted(names)}")
    label_names = [names[i] for i in range(len(names))]
    if neutral is not None and not 0 <= neutral < len(label_names):
        raise LabelError(f"{path}: neutral index {neutral} outside [0, {len(label_names)})")
    return label_names, neutral


def save_label_map(path: str | Path, label_names: Sequence[str], neutral_index: int | None = None) -> None:
    lines = [f"{i}\t{name}" for i, name in enumerate(label_names)]
    if neutral_index is not None:
        lines.append(f"neutral\t{neutral_index}")
    Path(path).write_text("\n".join(lines) + "\n")


# ---------------------------------------------------------------------------
# dataset files


def _sidecar(path: Path, suffix: str) -> Path:
    return path.with_name(path.name + suffix)


def load_dataset(
    path: str | Path,
    labels_path: str | Path | None = None,
    num_classes: int | None = None,
) -> Dataset:
    """Read a dataset file.

    The label map comes from ``labels_path`` or, failing that, the
    ``<path>.labels`` sidecar. Without either, classes are numbered
    ``0..max_label`` (or ``0..num_classes-1`` when given).
    """
    path = Path(path)
    if labels_path is None and _sidecar(path, ".labels").exists():
        labels_path = _sidecar(path, ".labels")
    label_names, neutral = (load_label_map(labels_path) if labels_path is not None else (None, None))
    if label_names is not None and num_classes is not None and len(label_names) != num_classes:
        raise ConfigError(f"label map has {len(label_names)} classes, expected {num_classes}")
    limit = len(label_names) if label_names is not None else num_classes

    blob = None
    convs: list[Conversation] = []
    dim = None
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip():
                continue
            head = None
            if not line.lstrip().startswith("{"):
                if "\t" not in line:
                    raise ParseError(f"{path}: expected '<id>\\t<json>'", lineno)
                head, line = line.split("\t", 1)
            try:
                body = json.loads(line)
                conv_id = str(body["id"])
                raw_utts = body["utterances"]
            except (json.JSONDecodeError, KeyError, TypeError) as exc:
                raise ParseError(f"{path}: malformed conversation record ({exc})", lineno) from exc
            if head is not None and head != conv_id:
                raise ParseError(f"{path}: id column {head!r} disagrees with body id {conv_id!r}", lineno)
            if not raw_utts:
                raise FormatError(f"{path}: conversation {conv_id!r} has no utterances")
            utts = []
            for u in raw_utts:
                try:
                    speaker, label = str(u["speaker"]), u["label"]
                    if "features" in u:
                        feats = np.asarray(u["features"], dtype=np.float64)
                    else:
                        if blob is None:
                            blob = np.fromfile(_sidecar(path, ".bin"), dtype="<u1")
                        offset, count = u["features_ref"]
                        feats = np.frombuffer(blob[offset:offset + 4 * count].tobytes(), dtype="<f4").astype(np.float64)
                        if feats.size != count:
                            raise FormatError(f"{path}: conversation {conv_id!r} feature ref past end of sidecar")
                except (KeyError, TypeError, ValueError) as exc:
                    if isinstance(exc, FormatError):
                        raise
                    raise ParseError(f"{path}: malformed utterance in {conv_id!r} ({exc})", lineno) from exc
                if not isinstance(label, int) or isinstance(label, bool):
                    raise ParseError(f"{path}: non-integer label {label!r} in {conv_id!r}", lineno)
                if label < 0 or (limit is not None and label >= limit):
                    raise LabelError(f"{path}: conversation {conv_id!r} has label {label} outside [0, {limit})")
                if feats.ndim != 1 or feats.size == 0:
                    raise FormatError(f"{path}: conversation {conv_id!r} has a malformed feature vector")
                if dim is None:
                    dim = feats.size
                elif feats.size != dim:
                    raise FormatError(
                        f"{path}: conversation {conv_id!r} has {feats.size}-dim features, expected {dim}"
                    )
                utts.append(Utterance(speaker, label, feats))
            convs.append(Conversation(conv_id, utts))

    if label_names is None:
        k = num_classes if num_classes is not None else 1 + max((u.label for c in convs for u in c.utterances), default=-1)
        label_names = [str(i) for i in range(k)]
    ds = Dataset(convs, label_names, neutral)
    for c in ds.conversations:
        c.difficulty  # noqa: B018 - warm the cache at load time
    return ds


def save_dataset(ds: Dataset, path: str | Path, write_labels: bool = True) -> None:
    path = Path(path)
    with open(path, "w", encoding="utf-8") as fh:
        for c in ds.conversations:
            body = {
                "id": c.id,
                "utterances": [
                    {"speaker": u.speaker, "label": int(u.label), "features": [float(v) for v in u.features]}
                    for u in c.utterances
                ],
            }
            fh.write(f"{c.id}\t{json.dumps(body)}\n")
    if write_labels:
        save_label_map(_sidecar(path, ".labels"), ds.label_names, ds.neutral_index)


# ---------------------------------------------------------------------------
# batching


def make_batches(
    ds: Dataset,
    batch_size: int,
    rng: np.random.Generator | None = None,
    shuffle: bool = False,
) -> list[Batch]:
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    order = np.arange(len(ds))
    if shuffle:
        if rng is None:
            raise ValueError("shuffling needs an rng")
        order = rng.permutation(len(ds))
    d = ds.feature_dim
    batches = []
    for start in range(0, len(ds), batch_size):
        convs = [ds.conversations[i] for i in order[start:start + batch_size]]
        lengths = np.array([len(c) for c in convs])
        L = int(lengths.max())
        feats = np.zeros((len(convs), L, d))
        labels = np.full((len(convs), L), PAD_LABEL, dtype=np.int64)
        for i, c in enumerate(convs):
            feats[i, : len(c)] = np.stack([u.features for u in c.utterances])
            labels[i, : len(c)] = c.labels
        mask = np.arange(L)[None, :] < lengths[:, None]
        batches.append(
            Batch(feats, labels, mask, [c.id for c in convs], np.array([c.difficulty for c in convs]), lengths)
        )
    return batches


# ---------------------------------------------------------------------------
# synthetic data


@dataclass
class SynthSpec:
    num_conversations: int = 50
    speakers_per_conv: int = 2
    len_range: tuple[int, int] = (4, 10)
    num_classes: int = 4
    feature_dim: int = 16
    class_separation: float = 10.0
    shift_prob: float = 0.3
    id_prefix: str = "conv"

    def check(self) -> None:
        lo, hi = self.len_range
        if min(self.num_conversations, self.speakers_per_conv, lo, self.num_classes, self.feature_dim) < 1 or hi < lo:
            raise ConfigError(f"invalid synthetic spec {self}")
        if not 0.0 <= self.shift_prob <= 1.0:
            raise ConfigError(f"shift_prob must lie in [0, 1], got {self.shift_prob}")
        if self.class_separation < 0:
            raise ConfigError("class_separation must be >= 0")

    @classmethod
    def from_text(cls, text: str) -> "SynthSpec":
        """``key = value`` lines; ``len_range`` is written ``lo,hi``."""
        spec = cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"spec line {lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            if not hasattr(spec, key):
                raise ConfigError(f"unknown synthetic spec key {key!r}")
            try:
                if key == "len_range":
                    lo, hi = (int(v) for v in value.split(","))
                    spec.len_range = (lo, hi)
                elif key == "id_prefix":
                    spec.id_prefix = value
                elif key in ("class_separation", "shift_prob"):
                    setattr(spec, key, float(value))
                else:
                    setattr(spec, key, int(value))
            except ValueError as exc:
                raise ConfigError(f"spec line {lineno}: cannot read {value!r} for {key}") from exc
        spec.check()
        return spec


def class_means(num_classes: int, dim: int, separation: float, rng: np.random.Generator) -> np.ndarray:
    """``[K, d]`` means; pairwise distances equal ``separation`` when K <= d."""
    if num_classes <= dim:
        q, _ = np.linalg.qr(rng.standard_normal((dim, num_classes)))
        dirs = q.T
    else:
        dirs = rng.standard_normal((num_classes, dim))
        dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
    return dirs * (separation / np.sqrt(2.0))


def synthesize(spec: SynthSpec, rng: np.random.Generator, means: np.ndarray | None = None) -> Dataset:
    """Per-speaker Markov label chains that switch label with probability
    ``shift_prob``; features are the class mean plus unit Gaussian noise."""
    spec.check()
    k, d = spec.num_classes, spec.feature_dim
    if means is None:
        means = class_means(k, d, spec.class_separation, rng)
    lo, hi = spec.len_range
    convs = []
    for i in range(spec.num_conversations):
        n = int(rng.integers(lo, hi + 1))
        current: dict[str, int] = {}
        utts = []
        for _ in range(n):
            spk = f"s{int(rng.integers(spec.speakers_per_conv))}"
            if spk not in current:
                current[spk] = int(rng.integers(k))
            elif k > 1 and rng.random() < spec.shift_prob:
                current[spk] = (current[spk] + int(rng.integers(1, k))) % k
            lab = current[spk]
            utts.append(Utterance(spk, lab, means[lab] + rng.standard_normal(d)))
        convs.append(Conversation(f"{spec.id_prefix}{i:05d}", utts))
    return Dataset(convs, [f"class{j}" for j in range(k)])


def merge(datasets: Sequence[Dataset]) -> Dataset:
    first = datasets[0]
    convs = [c for ds in datasets for c in ds.conversations]
    ids = [c.id for c in convs]
    if len(set(ids)) != len(ids):
        raise FormatError("merged datasets share conversation ids")
    return Dataset(convs, list(first.label_names), first.neutral_index)


# ---------------------------------------------------------------------------
# feature dumps


def dump_features(params: ModelParams, ds: Dataset, path: str | Path, batch_size: int = 32) -> int:
    """Write one ``<conv_id>\\t<utt_index>\\t<label>\\t<v1,...,vd>`` line per
    utterance using eval-mode encoder outputs. Returns the record count."""
    n = 0
    try:
        fh = open(path, "w", encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write feature dump {path}: {exc.strerror}") from exc
    with fh, no_grad():
        for batch in make_batches(ds, batch_size):
            h = encode(batch.features, batch.lengths, params).data
            for b, conv_id in enumerate(batch.conv_ids):
                for j in range(int(batch.lengths[b])):
                    vec = ",".join(repr(float(v)) for v in h[b, j])
                    fh.write(f"{conv_id}\t{j}\t{int(batch.labels[b, j])}\t{vec}\n")
                    n += 1
    return n


def read_feature_dump(path: str | Path) -> list[tuple[str, int, int, np.ndarray]]:
    records = []
    for lineno, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        parts = raw.split("\t")
        if len(parts) != 4:
            raise ParseError(f"{path}: expected 4 tab-separated fields", lineno)
        try:
            vec = np.array([float(v) for v in parts[3].split(",")])
            records.append((parts[0], int(parts[1]), int(parts[2]), vec))
        except ValueError as exc:
            raise ParseError(f"{path}: {exc}", lineno) from exc
    return records
