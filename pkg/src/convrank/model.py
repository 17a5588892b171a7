"""Leg network (frozen embeddings -> BiLSTM -> multi-head attention -> [C, D])
and its Siamese use for pairwise training and pointwise scoring."""

from __future__ import annotations

import hashlib
import unicodedata
from dataclasses import dataclass

import numpy as np

from . import autodiff as ad

REF_TOKEN = "[REF]"
GATES = ("i", "f", "o", "c")


class EmptyInputError(ValueError):
    pass


def _is_punct(ch):
    return unicodedata.category(ch).startswith("P")


def tokenize(text):
    """Lowercase, split on whitespace, strip edge punctuation; ``[REF]`` survives."""
    tokens = []
    for raw in text.split():
        if raw.upper().strip(".,;:!?\"'()") == REF_TOKEN:
            tokens.append(REF_TOKEN)
            continue
        start, end = 0, len(raw)
        while start < end and _is_punct(raw[start]):
            start += 1
        while end > start and _is_punct(raw[end - 1]):
            end -= 1
        if start < end:
            tokens.append(raw[start:end].lower())
    return tokens


@dataclass
class EmbeddingTable:
    vocabulary: dict
    matrix: np.ndarray

    trainable = False

    @property
    def dim(self):
        return self.matrix.shape[1]

    def __len__(self):
        return self.matrix.shape[0]

    def lookup(self, tokens):
        """Rows for the given tokens; out-of-vocabulary tokens get zeros."""
        out = np.zeros((len(tokens), self.dim), dtype=self.matrix.dtype)
        for t, tok in enumerate(tokens):
            row = self.vocabulary.get(tok)
            if row is not None:
                out[t] = self.matrix[row]
        return out

    def fingerprint(self):
        """64-bit digest of vocabulary order and matrix bytes."""
        h = hashlib.blake2b(digest_size=8)
        for tok in sorted(self.vocabulary, key=self.vocabulary.__getitem__):
            h.update(tok.encode("utf-8") + b"\0")
        h.update(np.ascontiguousarray(self.matrix, dtype="<f4").tobytes())
        return int.from_bytes(h.digest(), "little")


def load_embeddings(path):
    """Read the ``V d`` header text format (one ``token v1 .. vd`` per line)."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().split()
        if len(header) != 2:
            raise ValueError(f"{path}:1: expected header 'V d'")
        n_words, dim = int(header[0]), int(header[1])
        vocab, rows = {}, []
        for lineno, line in enumerate(fh, start=2):
            parts = line.rstrip("\n").rstrip(" ").split(" ")
            if not parts or parts == [""]:
                continue
            if len(parts) != dim + 1:
                raise ValueError(f"{path}:{lineno}: expected {dim} values, got {len(parts) - 1}")
            if parts[0] in vocab:
                raise ValueError(f"{path}:{lineno}: duplicate token {parts[0]!r}")
            vocab[parts[0]] = len(rows)
            rows.append([float(v) for v in parts[1:]])
    if len(rows) != n_words:
        raise ValueError(f"{path}: header promises {n_words} rows, found {len(rows)}")
    matrix = np.array(rows, dtype=np.float32).reshape(n_words, dim)
    if not np.all(np.isfinite(matrix)):
        raise ValueError(f"{path}: non-finite embedding values")
    return EmbeddingTable(vocab, matrix)


def save_embeddings(table, path):
    inverse = sorted(table.vocabulary, key=table.vocabulary.__getitem__)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"{len(table)} {table.dim}\n")
        for tok in inverse:
            vals = " ".join(repr(float(v)) for v in table.matrix[table.vocabulary[tok]])
            fh.write(f"{tok} {vals}\n")


def embed(text, table, max_len=60):
    """Token vectors for ``text`` as a [T x d] array, truncated to ``max_len``."""
    tokens = tokenize(text)[:max_len]
    if not tokens:
        raise EmptyInputError(f"no tokens in {text!r}")
    return table.lookup(tokens)


# -- parameters -------------------------------------------------------------

@dataclass(frozen=True)
class LegConfig:
    dim: int
    hidden: int = 128
    heads: int = 100
    max_len: int = 60


def parameter_shapes(config):
    d, h, k = config.dim, config.hidden, config.heads
    shapes = {}
    for direction in ("fwd", "bwd"):
        for g in GATES:
            shapes[f"{direction}.W_{g}"] = (d, h)
            shapes[f"{direction}.U_{g}"] = (h, h)
            shapes[f"{direction}.b_{g}"] = (h,)
    shapes["attn.Q"] = (k, 2 * h)
    shapes["out.W"] = (k * 2 * h, 2)
    shapes["out.b"] = (2,)
    return shapes


class LegParameters:
    """Named weights of one leg; the Siamese pair shares a single instance."""

    def __init__(self, config, tensors):
        self.config = config
        expected = parameter_shapes(config)
        if set(tensors) != set(expected):
            missing = sorted(set(expected) - set(tensors))
            extra = sorted(set(tensors) - set(expected))
            raise ValueError(f"parameter names mismatch: missing {missing}, unexpected {extra}")
        self.nodes = {}
        for name, shape in expected.items():
            arr = np.asarray(tensors[name])
            if arr.shape != shape:
                raise ad.DimensionError(f"tensor {name!r}: expected shape {shape}, got {arr.shape}")
            self.nodes[name] = ad.parameter(arr, name=name, dtype=arr.dtype if arr.dtype == np.float64 else None)

    @classmethod
    def initialize(cls, config, rng, init_scale=0.05):
        """Uniform(-s, s) weights and zero biases.

        The D column of the output layer starts at zero and never receives a
        gradient, so D stays a constant shared by every input.
        """
        tensors = {}
        for name, shape in parameter_shapes(config).items():
            if len(shape) == 1:
                tensors[name] = np.zeros(shape, dtype=np.float32)
            else:
                tensors[name] = rng.uniform(-init_scale, init_scale, size=shape).astype(np.float32)
        tensors["out.W"][:, 1] = 0.0
        return cls(config, tensors)

    def __getitem__(self, name):
        return self.nodes[name]

    def names(self):
        return list(self.nodes)

    def arrays(self):
        return {name: node.value for name, node in self.nodes.items()}

    def astype(self, dtype):
        return LegParameters(self.config, {n: v.astype(dtype) for n, v in self.arrays().items()})

    def zero_grad(self):
        for node in self.nodes.values():
            node.grad = None

    def gradients(self):
        return {n: (node.grad if node.grad is not None else np.zeros_like(node.value))
                for n, node in self.nodes.items()}


# -- network pieces -----------------------------------------------------------

def _lstm_direction(x, params, prefix, reverse):
    """Run one LSTM over x [T x d]; returns hidden states in input order."""
    T = x.shape[0]
    H = params[f"{prefix}.U_i"].shape[0]
    dtype = x.value.dtype
    proj = {g: ad.add_bias(ad.matmul(x, params[f"{prefix}.W_{g}"]), params[f"{prefix}.b_{g}"])
            for g in GATES}
    h = ad.constant(np.zeros((1, H), dtype=dtype))
    c = ad.constant(np.zeros((1, H), dtype=dtype))
    states = [None] * T
    steps = range(T - 1, -1, -1) if reverse else range(T)
    for t in steps:
        pre = {g: ad.add(ad.index(proj[g], (slice(t, t + 1), slice(None))),
                         ad.matmul(h, params[f"{prefix}.U_{g}"]))
               for g in GATES}
        i = ad.sigmoid(pre["i"])
        f = ad.sigmoid(pre["f"])
        o = ad.sigmoid(pre["o"])
        cand = ad.tanh(pre["c"])
        c = ad.add(ad.mul(f, c), ad.mul(i, cand))
        h = ad.mul(o, ad.tanh(c))
        states[t] = h
    return ad.concat(states, axis=0)


def bilstm(seq, params):
    """[T x d] -> [T x 2H]: forward and backward hidden states side by side."""
    if seq.shape[0] < 1:
        raise EmptyInputError("bilstm needs at least one position")
    fwd = _lstm_direction(seq, params, "fwd", reverse=False)
    bwd = _lstm_direction(seq, params, "bwd", reverse=True)
    return ad.concat([fwd, bwd], axis=1)


def attend(states, queries):
    """Dot-product attention, one softmax per query row; heads concatenated.

    states [T x 2H], queries [K x 2H] -> [1 x K*2H].
    """
    weights = ad.softmax(ad.matmul(queries, ad.transpose(states)))
    contexts = ad.matmul(weights, states)
    return ad.reshape(contexts, (1, contexts.value.size))


@dataclass
class DropoutConfig:
    rate: float = 0.0
    rng: object = None
    training: bool = False


def leg_logits(x, params, dropout_cfg=None):
    """[1 x 2] node holding [C, D] for an embedded sequence x [T x d]."""
    if dropout_cfg is not None and dropout_cfg.training:
        x = ad.dropout(x, dropout_cfg.rate, dropout_cfg.rng, training=True)
    pooled = attend(bilstm(x, params), params["attn.Q"])
    return ad.add_bias(ad.matmul(pooled, params["out.W"]), params["out.b"])


@dataclass(frozen=True)
class LegOutput:
    C: float
    D: float


def _softmax2(u, v):
    u, v = float(u), float(v)
    m = max(u, v)
    eu, ev = np.exp(u - m), np.exp(v - m)
    return float(eu / (eu + ev))


class SiameseRanker:
    """Frozen embeddings plus one shared set of leg parameters."""

    def __init__(self, table, params):
        if params.config.dim != table.dim:
            raise ad.DimensionError(
                f"embedding dim {table.dim} does not match leg input dim {params.config.dim}")
        self.table = table
        self.params = params

    @classmethod
    def initialize(cls, table, hidden=128, heads=100, max_len=60, seed=0):
        config = LegConfig(dim=table.dim, hidden=hidden, heads=heads, max_len=max_len)
        rng = np.random.Generator(np.random.Philox(seed))
        return cls(table, LegParameters.initialize(config, rng))

    @property
    def config(self):
        return self.params.config

    def embed_node(self, text):
        matrix = embed(text, self.table, self.config.max_len)
        dtype = self.params["out.W"].value.dtype
        return ad.constant(matrix.astype(dtype, copy=False))

    def logits(self, text, dropout_cfg=None):
        return leg_logits(self.embed_node(text), self.params, dropout_cfg)

    def leg_forward(self, text, dropout_cfg=None):
        c, d = self.logits(text, dropout_cfg).value[0]
        return LegOutput(float(c), float(d))

    def pairwise_probability(self, a, b):
        """P(a is more convincing than b) = softmax([C_a, C_b])[0]."""
        return _softmax2(self.leg_forward(a).C, self.leg_forward(b).C)

    def pointwise_score(self, a):
        """softmax([C_a, D_a])[0]; higher means more convincing."""
        out = self.leg_forward(a)
        return _softmax2(out.C, out.D)

    def convincingness(self, texts):
        """Inference-mode C for each distinct text."""
        cache = {}
        for text in texts:
            if text not in cache:
                cache[text] = self.leg_forward(text).C
        return cache

    def pair_probability_from(self, c_a, c_b):
        return _softmax2(c_a, c_b)


def pairwise_probability(a, b, model):
    return model.pairwise_probability(a, b)


def pointwise_score(a, model):
    return model.pointwise_score(a)
