"""Bit-exact binary checkpoints.

Container layout (all integers little-endian):

* 8-byte magic ``LATSEQCK``
* uint32 format version (currently 1)
* uint64 metadata length + UTF-8 JSON (model config, vocab token lists and
  fingerprints, optimizer step)
* uint32 tensor count, then per tensor: uint16 name length, name bytes,
  uint8 rank, uint32 per dimension, row-major float64 values

Optimizer accumulators travel as ordinary tensors under ``opt.n.`` and
``opt.m.`` name prefixes.  No compression: the files must round-trip bitwise.
"""

import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import FingerprintError, FormatError, VersionError
from .model import ModelConfig, Seq2SeqModel
from .vocab import RESERVED, Vocab

__all__ = ["Checkpoint", "save_checkpoint", "load_checkpoint", "model_from_checkpoint"]

MAGIC = b"LATSEQCK"
VERSION = 1


@dataclass
class Checkpoint:
    config: dict
    tensors: dict
    src_tokens: list
    tgt_tokens: list
    src_fingerprint: str
    tgt_fingerprint: str
    opt_state: dict | None = None  # {"step": int, "n": {...}, "m": {...}}

    @classmethod
    def from_model(cls, model, opt=None):
        src, tgt = model.src_vocab, model.tgt_vocab
        opt_state = None
        if opt is not None:
            opt_state = {"step": opt.step, "n": opt.n, "m": opt.m}
        return cls(
            config=model.config.as_dict(),
            tensors=model.parameters(),
            src_tokens=src.tokens[len(RESERVED):],
            tgt_tokens=tgt.tokens[len(RESERVED):],
            src_fingerprint=src.fingerprint(),
            tgt_fingerprint=tgt.fingerprint(),
            opt_state=opt_state,
        )


def save_checkpoint(path, ckpt):
    meta = {
        "config": ckpt.config,
        "src_tokens": ckpt.src_tokens,
        "tgt_tokens": ckpt.tgt_tokens,
        "src_fingerprint": ckpt.src_fingerprint,
        "tgt_fingerprint": ckpt.tgt_fingerprint,
        "opt_step": None if ckpt.opt_state is None else ckpt.opt_state["step"],
    }
    tensors = dict(ckpt.tensors)
    if ckpt.opt_state is not None:
        for name, t in ckpt.opt_state["n"].items():
            tensors["opt.n." + name] = t
        for name, t in ckpt.opt_state["m"].items():
            tensors["opt.m." + name] = t

    meta_bytes = json.dumps(meta, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(MAGIC)
        f.write(struct.pack("<I", VERSION))
        f.write(struct.pack("<Q", len(meta_bytes)))
        f.write(meta_bytes)
        f.write(struct.pack("<I", len(tensors)))
        for name in sorted(tensors):
            # note: ascontiguousarray would promote 0-d tensors to 1-d
            t = np.asarray(tensors[name], dtype="<f8", order="C")
            name_bytes = name.encode("utf-8")
            f.write(struct.pack("<H", len(name_bytes)))
            f.write(name_bytes)
            f.write(struct.pack("<B", t.ndim))
            for dim in t.shape:
                f.write(struct.pack("<I", dim))
            f.write(t.tobytes())


class _Reader:
    def __init__(self, data):
        self.data = data
        self.pos = 0

    def take(self, count, what):
        if self.pos + count > len(self.data):
            raise FormatError("truncated while reading %s" % what, offset=self.pos)
        chunk = self.data[self.pos : self.pos + count]
        self.pos += count
        return chunk

    def unpack(self, fmt, what):
        (value,) = struct.unpack(fmt, self.take(struct.calcsize(fmt), what))
        return value


def load_checkpoint(path, src_vocab=None, tgt_vocab=None):
    """Read a checkpoint; verifies vocab fingerprints when vocabs are supplied."""
    with open(path, "rb") as f:
        data = f.read()
    r = _Reader(data)
    if r.take(len(MAGIC), "magic") != MAGIC:
        raise FormatError("bad magic; not a latseq checkpoint", offset=0)
    version = r.unpack("<I", "version")
    if version != VERSION:
        raise VersionError("checkpoint version %d, this build reads %d" % (version, VERSION))
    meta_len = r.unpack("<Q", "metadata length")
    try:
        meta = json.loads(r.take(meta_len, "metadata").decode("utf-8"))
    except (ValueError, UnicodeDecodeError) as exc:
        raise FormatError("unreadable metadata: %s" % exc, offset=r.pos)

    count = r.unpack("<I", "tensor count")
    tensors = {}
    for _ in range(count):
        name_len = r.unpack("<H", "tensor name length")
        name = r.take(name_len, "tensor name").decode("utf-8")
        rank = r.unpack("<B", "tensor rank")
        shape = tuple(r.unpack("<I", "dimension") for _ in range(rank))
        size = int(np.prod(shape)) if shape else 1
        raw = r.take(size * 8, "tensor %s data" % name)
        tensors[name] = np.frombuffer(raw, dtype="<f8").reshape(shape).copy()
    if r.pos != len(data):
        raise FormatError("%d trailing bytes" % (len(data) - r.pos), offset=r.pos)

    opt_state = None
    if meta.get("opt_step") is not None:
        opt_state = {"step": meta["opt_step"], "n": {}, "m": {}}
        for name in list(tensors):
            if name.startswith("opt.n."):
                opt_state["n"][name[len("opt.n."):]] = tensors.pop(name)
            elif name.startswith("opt.m."):
                opt_state["m"][name[len("opt.m."):]] = tensors.pop(name)

    ckpt = Checkpoint(
        config=meta["config"],
        tensors=tensors,
        src_tokens=meta["src_tokens"],
        tgt_tokens=meta["tgt_tokens"],
        src_fingerprint=meta["src_fingerprint"],
        tgt_fingerprint=meta["tgt_fingerprint"],
        opt_state=opt_state,
    )
    if src_vocab is not None and src_vocab.fingerprint() != ckpt.src_fingerprint:
        raise FingerprintError("source vocabulary does not match the checkpoint")
    if tgt_vocab is not None and tgt_vocab.fingerprint() != ckpt.tgt_fingerprint:
        raise FingerprintError("target vocabulary does not match the checkpoint")
    return ckpt


def model_from_checkpoint(ckpt):
    """Rebuild the model and both vocabularies a checkpoint was saved from."""
    src_vocab = Vocab(ckpt.src_tokens)
    tgt_vocab = Vocab(ckpt.tgt_tokens)
    config = ModelConfig.from_dict(ckpt.config)
    model = Seq2SeqModel(config, src_vocab, tgt_vocab, tensors=ckpt.tensors)
    return model, src_vocab, tgt_vocab
