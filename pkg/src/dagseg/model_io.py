"""Single-file model container.

Layout (integers little-endian)::

    offset  size  field
    0       8     magic b"DAGLSTM\\x00"
    8       4     format version (uint32)
    12      8     header length H (uint64)
    20      8     body length B (uint64)
    28      H     header, UTF-8 JSON
    28+H    B     tensors, row-major float64, in header order
    28+H+B  32    SHA-256 of bytes 8 .. 28+H+B

The header holds the variant, the config snapshot, both vocabularies with
their flags and the tensor table (name, shape, trainable).
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from pathlib import Path
from typing import Iterable

import numpy as np

from dagseg.config import TrainConfig
from dagseg.corpus import Vocabulary
from dagseg.errors import ConfigError, DataError, InputError
from dagseg.model import Segmenter, VariantMismatchError
from dagseg.numeric import ParamStore

MAGIC = b"DAGLSTM\x00"
FORMAT_VERSION = 1
_PREFIX = struct.Struct("<8sIQQ")
_DIGEST = 32


class ModelFormatError(InputError):
    pass


class BadMagicError(ModelFormatError):
    pass


class VersionMismatchError(ModelFormatError):
    pass


class TruncatedModelError(ModelFormatError):
    pass


class ChecksumError(ModelFormatError):
    pass


def encode_model(model: Segmenter) -> bytes:
    tensors = []
    chunks = []
    for p in model.store:
        tensors.append({"name": p.name, "shape": list(p.value.shape), "trainable": p.trainable})
        chunks.append(np.ascontiguousarray(p.value, dtype="<f8").tobytes())
    header = {
        "variant": model.variant,
        "config": model.config.to_dict(),
        "vocab": model.vocab.to_records(),
        "bigram_vocab": model.bigram_vocab.to_records() if model.bigram_vocab else None,
        "tensors": tensors,
    }
    head = json.dumps(header, ensure_ascii=False, sort_keys=True).encode("utf-8")
    body = b"".join(chunks)
    prefix = _PREFIX.pack(MAGIC, FORMAT_VERSION, len(head), len(body))
    digest = hashlib.sha256(prefix[8:] + head + body).digest()
    return prefix + head + body + digest


def decode_model(data: bytes) -> Segmenter:
    if data[: len(MAGIC)] != MAGIC[: len(data)]:
        raise BadMagicError("not a model file (bad magic bytes)")
    if len(data) < _PREFIX.size:
        raise TruncatedModelError("model file truncated inside the fixed prefix")
    _, version, head_len, body_len = _PREFIX.unpack_from(data)
    if version != FORMAT_VERSION:
        raise VersionMismatchError(
            f"model format version {version}, this build reads version {FORMAT_VERSION}"
        )
    end = _PREFIX.size + head_len + body_len
    if len(data) < end + _DIGEST:
        raise TruncatedModelError(f"model file has {len(data)} bytes, expected {end + _DIGEST}")
    if len(data) > end + _DIGEST:
        raise ModelFormatError("trailing bytes after the checksum")
    if hashlib.sha256(data[8:end]).digest() != data[end:]:
        raise ChecksumError("model checksum mismatch")
    try:
        header = json.loads(data[_PREFIX.size : _PREFIX.size + head_len].decode("utf-8"))
        config = TrainConfig.from_dict(header["config"])
        vocab = Vocabulary.from_records(header["vocab"])
        bigrams = header["bigram_vocab"]
        bigram_vocab = Vocabulary.from_records(bigrams) if bigrams is not None else None
        tensors = header["tensors"]
    except (ValueError, KeyError, TypeError, ConfigError, DataError) as exc:
        raise ModelFormatError(f"bad model header: {exc}") from None
    if header["variant"] != config.variant:
        raise ModelFormatError("header variant disagrees with config")
    store = ParamStore()
    offset = _PREFIX.size + head_len
    for t in tensors:
        shape = tuple(t["shape"])
        p = store.add(t["name"], shape, bool(t["trainable"]))
        nbytes = 8 * p.value.size
        if offset + nbytes > end:
            raise ModelFormatError("tensor table exceeds body length")
        p.value[...] = np.frombuffer(data, dtype="<f8", count=p.value.size, offset=offset).reshape(
            shape
        )
        offset += nbytes
    if offset != end:
        raise ModelFormatError("body length does not match tensor table")
    model = Segmenter(config, vocab, bigram_vocab, store)
    expected = model.param_shapes()
    actual = {p.name: p.value.shape for p in store}
    if expected != actual:
        raise ModelFormatError("tensor table does not match the model variant")
    return model


def save(model: Segmenter, path: str | Path) -> None:
    """Write atomically: a sibling temp file is renamed over ``path``."""
    path = Path(path)
    data = encode_model(model)
    tmp = path.with_name(path.name + ".tmp")
    try:
        tmp.write_bytes(data)
        os.replace(tmp, path)
    except OSError as exc:
        raise InputError(f"cannot write {path}: {exc.strerror}") from exc


def load(path: str | Path, variant: str | None = None) -> Segmenter:
    """Read a model; ``variant`` (a name or ``"dag"``) rejects other variants."""
    try:
        data = Path(path).read_bytes()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    model = decode_model(data)
    if variant is not None:
        if variant == "dag":
            model.require_dag("DAG decoding")
        elif variant != model.variant:
            raise VariantMismatchError(f"expected a {variant} model, file holds {model.variant}")
    return model


def inject_external_vocab(model: Segmenter, words: Iterable[str]) -> Segmenter:
    """Add words to a DAG model's lattice vocabulary without retraining.

    New words get their own lattice edges but the ``<OOV>`` embedding.
    """
    return model.with_external_vocab(words)
