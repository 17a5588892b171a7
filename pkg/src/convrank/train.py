"""Siamese pairwise training (Adam, global-norm clipping, dropout) and the
binary checkpoint format."""

from __future__ import annotations

import hashlib
import logging
import struct
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .model import DropoutConfig, LegConfig, LegParameters, SiameseRanker

log = logging.getLogger(__name__)


class ConfigurationError(ValueError):
    pass


@dataclass
class TrainConfig:
    epochs: int = 10
    learning_rate: float = 0.001
    clip_norm: float = 1.0
    dropout_rate: float = 0.15
    batch_size: int = 32
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigurationError(f"bad epochs/batch_size in {self}")
        if not 0 <= self.dropout_rate < 1:
            raise ConfigurationError(f"dropout_rate must lie in [0, 1), got {self.dropout_rate}")


@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


def adam_step(params, grads, state, lr):
    """One bias-corrected Adam update. ``params``/``grads`` map name -> array;
    returns the new parameter arrays and mutates ``state``."""
    state.t += 1
    b1, b2, t = state.beta1, state.beta2, state.t
    updated = {}
    for name, theta in params.items():
        g = grads[name]
        if g.shape != theta.shape:
            raise ad.DimensionError(f"adam_step: gradient {g.shape} vs parameter {theta.shape} for {name!r}")
        m = state.m.get(name)
        v = state.v.get(name)
        if m is None:
            m = np.zeros_like(theta)
            v = np.zeros_like(theta)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        state.m[name] = m.astype(theta.dtype)
        state.v[name] = v.astype(theta.dtype)
        m_hat = m / (1 - b1 ** t)
        v_hat = v / (1 - b2 ** t)
        updated[name] = (theta - lr * m_hat / (np.sqrt(v_hat) + state.eps)).astype(theta.dtype)
    return updated, state


WINNER_INDEX = {"A": 0, "B": 1}


def siamese_loss(text_a, text_b, winner, model, dropout_cfg=None):
    """Cross-entropy of softmax([C_a, C_b]) against the gold winner."""
    if winner not in WINNER_INDEX:
        raise ValueError(f"winner must be 'A' or 'B', got {winner!r}")
    c_a = ad.index(model.logits(text_a, dropout_cfg), (0, slice(0, 1)))
    c_b = ad.index(model.logits(text_b, dropout_cfg), (0, slice(0, 1)))
    return ad.cross_entropy(ad.softmax(ad.concat([c_a, c_b])), WINNER_INDEX[winner])


@dataclass
class EpochLog:
    epoch: int
    mean_loss: float
    train_accuracy: float


@dataclass
class TrainResult:
    model: SiameseRanker
    log: list
    max_post_clip_norm: float = 0.0


def _rngs(seed):
    init_ss, shuffle_ss, dropout_ss = np.random.SeedSequence(seed).spawn(3)
    return (np.random.Generator(np.random.Philox(init_ss)),
            np.random.Generator(np.random.Philox(shuffle_ss)),
            np.random.Generator(np.random.Philox(dropout_ss)))


def init_rng(seed):
    return _rngs(seed)[0]


def new_model(table, seed, hidden=128, heads=100, max_len=60):
    """Fresh ranker whose initial weights come from the ``seed`` init stream."""
    config = LegConfig(dim=table.dim, hidden=hidden, heads=heads, max_len=max_len)
    return SiameseRanker(table, LegParameters.initialize(config, init_rng(seed)))


def training_accuracy(model, examples):
    """Inference-mode accuracy; ties (C_a == C_b) predict A."""
    c = model.convincingness([t for a, b, _ in examples for t in (a, b)])
    hits = sum((("A" if c[a] >= c[b] else "B") == w) for a, b, w in examples)
    return hits / len(examples)


def train(examples, config, model, on_step=None):
    """Train ``model`` in place on (text_a, text_b, winner) triples.

    ``on_step`` is called after each update with the clipped gradients; tests
    use it to watch the dummy column and clip norms.
    """
    examples = list(examples)
    if not examples:
        raise ConfigurationError("empty training set")
    _, shuffle_rng, dropout_rng = _rngs(config.seed)
    params = model.params
    names = params.names()
    state = AdamState()
    drop = DropoutConfig(rate=config.dropout_rate, rng=dropout_rng, training=True)
    history = []
    max_norm = 0.0
    for epoch in range(1, config.epochs + 1):
        order = shuffle_rng.permutation(len(examples))
        total = 0.0
        for start in range(0, len(order), config.batch_size):
            batch = [examples[i] for i in order[start:start + config.batch_size]]
            params.zero_grad()
            losses = [siamese_loss(a, b, w, model, drop) for a, b, w in batch]
            loss = ad.scale(ad.add_n(losses), 1.0 / len(batch))
            ad.backward(loss)
            total += float(loss.value[0]) * len(batch)
            raw = params.gradients()
            clipped = ad.global_norm_clip([raw[n] for n in names], config.clip_norm)
            max_norm = max(max_norm, ad.global_norm(clipped))
            grads = dict(zip(names, clipped))
            updated, state = adam_step(params.arrays(), grads, state, config.learning_rate)
            for n in names:
                params[n].value = updated[n]
            if on_step is not None:
                on_step(grads)
        entry = EpochLog(epoch, total / len(examples), training_accuracy(model, examples))
        log.info("epoch %d loss %.4f acc %.4f", entry.epoch, entry.mean_loss, entry.train_accuracy)
        history.append(entry)
    params.zero_grad()
    return TrainResult(model, history, max_norm)


def write_loss_log(history, path):
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("epoch\tmean_loss\ttrain_accuracy\n")
        for e in history:
            fh.write(f"{e.epoch}\t{e.mean_loss:.6f}\t{e.train_accuracy:.6f}\n")


# -- checkpoint ---------------------------------------------------------------

MAGIC = b"EVCK"
VERSION = 1


class CheckpointError(ValueError):
    pass


def _checksum(data):
    return hashlib.blake2b(data, digest_size=8).digest()


def _hash_chunks(value):
    # 64-bit hash as four 16-bit chunks: exact in float32
    return np.array([(value >> (16 * i)) & 0xFFFF for i in range(4)], dtype=np.float32)


def _hash_from_chunks(arr):
    return sum(int(v) << (16 * i) for i, v in enumerate(arr))


def checkpoint_tensors(model, train_config=None):
    cfg = model.config
    tensors = {name: arr.astype(np.float32) for name, arr in model.params.arrays().items()}
    tensors["meta.architecture"] = np.array([cfg.dim, cfg.hidden, cfg.heads, cfg.max_len], dtype=np.float32)
    tensors["meta.vocab_hash"] = _hash_chunks(model.table.fingerprint())
    if train_config is not None:
        tc = train_config
        tensors["meta.train_config"] = np.array(
            [tc.epochs, tc.learning_rate, tc.clip_norm, tc.dropout_rate, tc.batch_size], dtype=np.float32)
    return tensors


def write_tensors(tensors, path):
    parts = [MAGIC, struct.pack("<II", VERSION, len(tensors))]
    for name, arr in tensors.items():
        raw = name.encode("utf-8")
        arr = np.ascontiguousarray(arr, dtype="<f4")
        parts.append(struct.pack("<I", len(raw)) + raw)
        parts.append(struct.pack("<I", arr.ndim) + struct.pack(f"<{arr.ndim}Q", *arr.shape))
        parts.append(arr.tobytes())
    body = b"".join(parts)
    with open(path, "wb") as fh:
        fh.write(body + _checksum(body))


def read_tensors(path):
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < 20 or data[:4] != MAGIC:
        raise CheckpointError(f"{path}: not a checkpoint (bad magic)")
    body, stored = data[:-8], data[-8:]
    version, count = struct.unpack_from("<II", data, 4)
    if version != VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {version}")
    if _checksum(body) != stored:
        raise CheckpointError(f"{path}: checksum mismatch (corrupt or truncated)")
    pos = 12
    tensors = {}
    try:
        for _ in range(count):
            (n,) = struct.unpack_from("<I", body, pos)
            pos += 4
            name = body[pos:pos + n].decode("utf-8")
            pos += n
            (rank,) = struct.unpack_from("<I", body, pos)
            pos += 4
            dims = struct.unpack_from(f"<{rank}Q", body, pos)
            pos += 8 * rank
            size = int(np.prod(dims)) if rank else 1
            if pos + 4 * size > len(body):
                raise CheckpointError(f"{path}: truncated payload for {name!r}")
            tensors[name] = np.frombuffer(body, dtype="<f4", count=size, offset=pos).reshape(dims).astype(np.float32)
            pos += 4 * size
    except struct.error as exc:
        raise CheckpointError(f"{path}: truncated header ({exc})") from None
    if pos != len(body):
        raise CheckpointError(f"{path}: {len(body) - pos} trailing bytes")
    return tensors


def save_checkpoint(model, path, train_config=None):
    write_tensors(checkpoint_tensors(model, train_config), path)


def load_checkpoint(path, table, config=None):
    """Rebuild a ranker from ``path``; ``config`` (if given) must match the file."""
    tensors = read_tensors(path)
    try:
        arch = tensors.pop("meta.architecture")
        vocab_hash = _hash_from_chunks(tensors.pop("meta.vocab_hash"))
    except KeyError as exc:
        raise CheckpointError(f"{path}: missing metadata tensor {exc}") from None
    tensors.pop("meta.train_config", None)
    stored = LegConfig(*(int(v) for v in arch))
    if vocab_hash != table.fingerprint():
        log.warning("%s: embedding table differs from the one used in training", path)
    return SiameseRanker(table, LegParameters(config or stored, tensors))


def config_dict(config):
    return asdict(config)
