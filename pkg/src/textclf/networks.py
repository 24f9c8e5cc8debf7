"""Recurrent, interpretable, hierarchical, and convolutional classifiers.

One bidirectional gated-recurrent encoder feeds three aggregators (extreme
states, attention, element-wise max).  The interpretable variant forces the
contextual MLP's final width to the class count and classifies by softmax of
the max-aggregated scores alone; hierarchical variants repeat the machinery
at sentence level.  A convolutional baseline shares the embedding table.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import tensor as tc
from .corpus import DataError, Document
from .embeddings import Vocabulary
from .tensor import Tensor

FAMILIES = ("GRU", "ATT", "MAX", "MAXi", "MAXh", "ATTh", "CNN")
_AGGREGATOR = {"GRU": "concat", "ATT": "attention", "MAX": "max",
               "MAXi": "max", "MAXh": "max", "ATTh": "attention"}
MIN_CNN_LEN = 5


@dataclass
class ModelConfig:
    """Architecture hyperparameters; family picks the forward path."""

    family: str
    n_classes: int
    embedding_dim: int = 60
    rnn_layers: int = 1
    rnn_width: int = 32
    g_layers: int = 1
    g_width: int = 64
    attention_width: int = 32
    sent_rnn_layers: int = 1
    sent_rnn_width: int = 32
    sent_attention_width: int = 32
    cnn_proj_width: int = 32
    cnn_filters: int = 32
    embedding_trainable: bool = True

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.n_classes < 2:
            raise ValueError("need at least 2 classes")
        if self.family == "GRU":
            self.g_layers = 0   # extreme-state aggregation uses no contextual MLP
        if self.family == "MAXi" and self.g_layers < 1:
            raise ValueError("interpretable model needs the class-wide MLP layer")
        for name in ("embedding_dim", "rnn_layers", "rnn_width", "attention_width",
                     "sent_rnn_layers", "sent_rnn_width", "sent_attention_width",
                     "cnn_proj_width", "cnn_filters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be positive")
        if self.g_layers < 0:
            raise ValueError("g_layers must be nonnegative")

    @property
    def aggregator(self) -> str:
        return _AGGREGATOR.get(self.family, "none")

    @property
    def hierarchical(self) -> bool:
        return self.family in ("MAXh", "ATTh")

    @property
    def interpretable(self) -> bool:
        return self.family == "MAXi"

    @property
    def u_width(self) -> int:
        """Width of the per-token representation after the contextual MLP."""
        if self.family == "MAXi":
            return self.n_classes
        if self.g_layers == 0:
            return 2 * self.rnn_width
        return self.g_width

    def to_dict(self) -> dict:
        return {k: getattr(self, k) for k in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, obj: dict) -> "ModelConfig":
        return cls(**{k: obj[k] for k in cls.__dataclass_fields__ if k in obj})


@dataclass
class ModelParams:
    """Named parameter tensors in a stable creation order."""

    tensors: dict[str, Tensor] = field(default_factory=dict)

    def add(self, name: str, data: np.ndarray, trainable: bool = True) -> Tensor:
        t = Tensor(data, requires_grad=trainable)
        self.tensors[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __contains__(self, name: str) -> bool:
        return name in self.tensors

    def trainable(self) -> list[Tensor]:
        return [t for t in self.tensors.values() if t.requires_grad]

    def n_params(self) -> int:
        return sum(t.size for t in self.tensors.values() if t.requires_grad)

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    def snapshot(self) -> dict[str, np.ndarray]:
        return {k: t.data.copy() for k, t in self.tensors.items()}

    def restore(self, snap: dict[str, np.ndarray]) -> None:
        for k, arr in snap.items():
            self.tensors[k].data[...] = arr


def _xavier(rng: np.random.Generator, shape: tuple[int, int]) -> np.ndarray:
    limit = math.sqrt(6.0 / (shape[0] + shape[1]))
    return rng.uniform(-limit, limit, size=shape)


def init_params(config: ModelConfig, vocab: Vocabulary, seed: int,
                pretrained: dict[str, np.ndarray] | None = None) -> ModelParams:
    """Xavier-uniform matrices, zero biases, Gaussian attention contexts."""
    rng = np.random.default_rng(seed)
    params = ModelParams()
    emb = _xavier(rng, (vocab.size, config.embedding_dim))
    if pretrained is not None:
        for i, tok in enumerate(vocab.tokens):
            vec = pretrained.get(tok)
            if vec is None:
                continue
            if vec.shape != (config.embedding_dim,):
                raise DataError("pretrained vector dimension mismatch")
            emb[i] = vec
    params.add("emb", emb, trainable=config.embedding_trainable)

    def add_gru_stack(prefix: str, in_dim: int, width: int, layers: int) -> None:
        for direction in ("f", "r"):
            for l in range(layers):
                d_in = in_dim if l == 0 else width
                base = f"{prefix}{direction}{l}"
                for gate in ("z", "r", "h"):
                    params.add(f"{base}.W{gate}", _xavier(rng, (d_in, width)))
                    params.add(f"{base}.U{gate}", _xavier(rng, (width, width)))
                    params.add(f"{base}.b{gate}", np.zeros(width))

    def add_attention(prefix: str, in_dim: int, width: int) -> None:
        params.add(f"{prefix}.W", _xavier(rng, (in_dim, width)))
        params.add(f"{prefix}.b", np.zeros(width))
        params.add(f"{prefix}.c", rng.normal(0.0, 0.1, size=width))

    if config.family == "CNN":
        params.add("proj.W", _xavier(rng, (config.embedding_dim,
                                           config.cnn_proj_width)))
        params.add("proj.b", np.zeros(config.cnn_proj_width))
        for width in (3, 4, 5):
            params.add(f"conv{width}.F",
                       _xavier(rng, (width * config.cnn_proj_width,
                                     config.cnn_filters)))
            params.add(f"conv{width}.b", np.zeros(config.cnn_filters))
        params.add("cls.W", _xavier(rng, (3 * config.cnn_filters,
                                          config.n_classes)))
        params.add("cls.b", np.zeros(config.n_classes))
        return params

    add_gru_stack("w", config.embedding_dim, config.rnn_width, config.rnn_layers)
    enc_out = 2 * config.rnn_width
    for l in range(config.g_layers):
        d_in = enc_out if l == 0 else config.g_width
        d_out = config.g_width
        if config.interpretable and l == config.g_layers - 1:
            d_out = config.n_classes
        params.add(f"g{l}.W", _xavier(rng, (d_in, d_out)))
        params.add(f"g{l}.b", np.zeros(d_out))
    if config.aggregator == "attention":
        add_attention("att", config.u_width, config.attention_width)
    if config.hierarchical:
        add_gru_stack("s", config.u_width, config.sent_rnn_width,
                      config.sent_rnn_layers)
        if config.aggregator == "attention":
            add_attention("satt", 2 * config.sent_rnn_width,
                          config.sent_attention_width)
        cls_in = 2 * config.sent_rnn_width
    elif config.aggregator == "concat":
        cls_in = 2 * config.rnn_width
    else:
        cls_in = config.u_width
    if not config.interpretable:
        params.add("cls.W", _xavier(rng, (cls_in, config.n_classes)))
        params.add("cls.b", np.zeros(config.n_classes))
    return params


# ---- recurrent machinery ----

def gru_step(x: Tensor, h_prev: Tensor, w: dict[str, Tensor]) -> Tensor:
    """One gated update h = (1-z)*h_prev + z*tanh(Wh x + Uh (r*h_prev) + bh)."""
    az = tc.affine(x, w["Wz"], w["bz"]) + tc.matmul(h_prev, w["Uz"])
    ar = tc.affine(x, w["Wr"], w["br"]) + tc.matmul(h_prev, w["Ur"])
    z = tc.sigmoid(az)
    r = tc.sigmoid(ar)
    ah = tc.affine(x, w["Wh"], w["bh"]) + tc.matmul(r * h_prev, w["Uh"])
    hh = tc.tanh(ah)
    one = Tensor(np.ones_like(z.data))
    return (one - z) * h_prev + z * hh


def _gru_step_fused(pz: Tensor, pr: Tensor, ph: Tensor, t: int, h_prev: Tensor,
                    uz: Tensor, ur: Tensor, uh: Tensor) -> Tensor:
    """Fused step over precomputed input projections p* = X @ W* + b*."""
    hp = h_prev.data
    az = pz.data[t] + hp @ uz.data
    ar = pr.data[t] + hp @ ur.data
    z = 1.0 / (1.0 + np.exp(-az))
    r = 1.0 / (1.0 + np.exp(-ar))
    rh = r * hp
    ah = ph.data[t] + rh @ uh.data
    hh = np.tanh(ah)
    out_data = (1.0 - z) * hp + z * hh

    def backward(g):
        dz = g * (hh - hp)
        dah = (g * z) * (1.0 - hh * hh)
        drh = uh.data @ dah
        daz = dz * z * (1.0 - z)
        dar = (drh * hp) * r * (1.0 - r)
        if ph.requires_grad:
            if ph.grad is None:
                ph.grad = np.zeros_like(ph.data)
            ph.grad[t] += dah
        if pz.requires_grad:
            if pz.grad is None:
                pz.grad = np.zeros_like(pz.data)
            pz.grad[t] += daz
        if pr.requires_grad:
            if pr.grad is None:
                pr.grad = np.zeros_like(pr.data)
            pr.grad[t] += dar
        if uh.requires_grad:
            uh.accumulate(np.outer(rh, dah))
        if uz.requires_grad:
            uz.accumulate(np.outer(hp, daz))
        if ur.requires_grad:
            ur.accumulate(np.outer(hp, dar))
        if h_prev.requires_grad:
            dh = g * (1.0 - z) + drh * r + uz.data @ daz + ur.data @ dar
            h_prev.accumulate(dh)
    return tc.fused_op(out_data, (pz, pr, ph, h_prev, uz, ur, uh), backward)


def _run_direction(x_mat: Tensor, prefix: str, layers: int, width: int,
                   params: ModelParams, reverse: bool) -> list[Tensor]:
    """Stacked recurrence in one direction; returns per-position final states."""
    n = x_mat.data.shape[0]
    states_mat = x_mat
    states: list[Tensor] = []
    for l in range(layers):
        base = f"{prefix}{l}"
        pz = tc.affine(states_mat, params[f"{base}.Wz"], params[f"{base}.bz"])
        pr = tc.affine(states_mat, params[f"{base}.Wr"], params[f"{base}.br"])
        ph = tc.affine(states_mat, params[f"{base}.Wh"], params[f"{base}.bh"])
        uz, ur, uh = (params[f"{base}.Uz"], params[f"{base}.Ur"],
                      params[f"{base}.Uh"])
        h = Tensor(np.zeros(width))
        states = [h] * n
        order = range(n - 1, -1, -1) if reverse else range(n)
        for t in order:
            h = _gru_step_fused(pz, pr, ph, t, h, uz, ur, uh)
            states[t] = h
        states_mat = tc.stack_rows(states)
    return states


def encode_bidirectional(x_mat: Tensor, prefix: str, layers: int, width: int,
                         params: ModelParams) -> tuple[Tensor, Tensor, Tensor]:
    """Run both directions from zero states; h_t is the concatenation.

    Returns (H of shape (T, 2*width), last forward state, first-position
    reverse state).
    """
    fwd = _run_direction(x_mat, prefix + "f", layers, width, params,
                         reverse=False)
    rev = _run_direction(x_mat, prefix + "r", layers, width, params,
                         reverse=True)
    h_mat = tc.concat_cols(tc.stack_rows(fwd), tc.stack_rows(rev))
    return h_mat, fwd[-1], rev[0]


def apply_g(config: ModelConfig, params: ModelParams, h_mat: Tensor) -> Tensor:
    """Contextual MLP: ReLU hidden layers, sigmoidal output layer."""
    out = h_mat
    for l in range(config.g_layers):
        out = tc.affine(out, params[f"g{l}.W"], params[f"g{l}.b"])
        out = tc.sigmoid(out) if l == config.g_layers - 1 else tc.relu(out)
    return out


# ---- aggregators ----

def aggregate_max(u_mat: Tensor) -> tuple[Tensor, np.ndarray]:
    """phi_j = max_t u_{j,t}; ties and gradients go to the earliest step."""
    return tc.max_over_time(u_mat)


def aggregate_attention(u_mat: Tensor, w: Tensor, b: Tensor,
                        c: Tensor) -> tuple[Tensor, Tensor]:
    """Convex combination of u_t weighted by similarity with context c."""
    ct = tc.tanh(tc.affine(u_mat, w, b))
    scores = tc.matmul(ct, c)
    a = tc.softmax(scores)
    phi = tc.matmul(a, u_mat)
    return phi, a


def conv1d(x_mat: Tensor, filt: Tensor, bias: Tensor, width: int) -> Tensor:
    """Valid 1-D convolution over time via stacked windows."""
    n, m = x_mat.data.shape
    if n < width:
        raise ValueError("sequence shorter than filter width")
    idx = np.arange(n - width + 1)[:, None] + np.arange(width)[None, :]
    win = x_mat.data[idx].reshape(n - width + 1, width * m)
    out = win @ filt.data + bias.data

    def backward(g):
        if filt.requires_grad:
            filt.accumulate(win.T @ g)
        if bias.requires_grad:
            bias.accumulate(g.sum(axis=0))
        if x_mat.requires_grad:
            dwin = (g @ filt.data.T).reshape(-1, width, m)
            if x_mat.grad is None:
                x_mat.grad = np.zeros_like(x_mat.data)
            np.add.at(x_mat.grad, idx, dwin)
    return tc.fused_op(out, (x_mat, filt, bias), backward)


# ---- forward paths ----

@dataclass
class Prediction:
    """Class distribution plus the aggregate representation behind it."""

    probs: np.ndarray
    phi: np.ndarray
    probs_t: Tensor
    importance: np.ndarray | None = None     # (K, T) for the interpretable model
    max_positions: np.ndarray | None = None  # argmax step per feature

    @property
    def argmax(self) -> int:
        return int(np.argmax(self.probs))


def _classify(params: ModelParams, phi: Tensor) -> Tensor:
    return tc.softmax(tc.affine(phi, params["cls.W"], params["cls.b"]))


def forward_flat(config: ModelConfig, params: ModelParams,
                 ids: np.ndarray) -> Prediction:
    """Embed, encode, contextualize, aggregate, classify."""
    if len(ids) < 1:
        raise DataError("empty document")
    emb = tc.embedding_lookup(params["emb"], ids)
    h_mat, h_last_f, h_first_r = encode_bidirectional(
        emb, "w", config.rnn_layers, config.rnn_width, params)
    max_positions = None
    if config.aggregator == "concat":
        phi = tc.concat([h_last_f, h_first_r])
    else:
        u_mat = apply_g(config, params, h_mat)
        if config.aggregator == "max":
            phi, max_positions = aggregate_max(u_mat)
        else:
            phi, _ = aggregate_attention(u_mat, params["att.W"],
                                         params["att.b"], params["att.c"])
    probs = _classify(params, phi)
    return Prediction(probs=probs.data, phi=phi.data, probs_t=probs,
                      max_positions=max_positions)


def forward_interpretable(config: ModelConfig, params: ModelParams,
                          ids: np.ndarray) -> Prediction:
    """Softmax directly over max-aggregated class scores; u is the evidence."""
    if len(ids) < 1:
        raise DataError("empty document")
    emb = tc.embedding_lookup(params["emb"], ids)
    h_mat, _, _ = encode_bidirectional(emb, "w", config.rnn_layers,
                                       config.rnn_width, params)
    u_mat = apply_g(config, params, h_mat)          # (T, K), sigmoid outputs
    phi, max_positions = aggregate_max(u_mat)
    probs = tc.softmax(phi)
    return Prediction(probs=probs.data, phi=phi.data, probs_t=probs,
                      importance=u_mat.data.T.copy(),
                      max_positions=max_positions)


def forward_hierarchical(config: ModelConfig, params: ModelParams,
                         sentence_ids: list[np.ndarray]) -> Prediction:
    """Word-level aggregate per sentence, sentence dynamics, then aggregate."""
    if not sentence_ids:
        raise DataError("document has no sentences")
    phis: list[Tensor] = []
    for ids in sentence_ids:
        if len(ids) < 1:
            raise DataError("empty sentence range")
        emb = tc.embedding_lookup(params["emb"], ids)
        h_mat, _, _ = encode_bidirectional(emb, "w", config.rnn_layers,
                                           config.rnn_width, params)
        u_mat = apply_g(config, params, h_mat)
        if config.aggregator == "max":
            phi_s, _ = aggregate_max(u_mat)
        else:
            phi_s, _ = aggregate_attention(u_mat, params["att.W"],
                                           params["att.b"], params["att.c"])
        phis.append(phi_s)
    sent_mat = tc.stack_rows(phis)
    h_bar, _, _ = encode_bidirectional(sent_mat, "s", config.sent_rnn_layers,
                                       config.sent_rnn_width, params)
    if config.aggregator == "max":
        phi_doc, _ = aggregate_max(h_bar)
    else:
        phi_doc, _ = aggregate_attention(h_bar, params["satt.W"],
                                         params["satt.b"], params["satt.c"])
    probs = _classify(params, phi_doc)
    return Prediction(probs=probs.data, phi=phi_doc.data, probs_t=probs)


def forward_cnn(config: ModelConfig, params: ModelParams,
                ids: np.ndarray) -> Prediction:
    """Token projection, parallel convolutions (3/4/5), max pool, classify."""
    if len(ids) < 1:
        raise DataError("empty document")
    emb = tc.embedding_lookup(params["emb"], ids)
    if len(ids) < MIN_CNN_LEN:
        pad = Tensor(np.zeros((MIN_CNN_LEN - len(ids), config.embedding_dim)))
        emb = tc.concat_rows(emb, pad)
    proj = tc.affine(emb, params["proj.W"], params["proj.b"])
    pooled = []
    for width in (3, 4, 5):
        conv = tc.relu(conv1d(proj, params[f"conv{width}.F"],
                              params[f"conv{width}.b"], width))
        top, _ = tc.max_over_time(conv)
        pooled.append(top)
    phi = tc.concat(pooled)
    probs = _classify(params, phi)
    return Prediction(probs=probs.data, phi=phi.data, probs_t=probs)


def document_input(config: ModelConfig, vocab: Vocabulary, doc: Document):
    """Map a document to the id structure its forward path expects."""
    if config.hierarchical:
        if not doc.sentences:
            raise DataError("hierarchical model needs sentence ranges")
        return [vocab.ids(doc.tokens[s:e]) for s, e in doc.sentences]
    return vocab.ids(doc.tokens)


def forward(config: ModelConfig, params: ModelParams, doc_input_ids) -> Prediction:
    if config.family == "CNN":
        return forward_cnn(config, params, doc_input_ids)
    if config.hierarchical:
        return forward_hierarchical(config, params, doc_input_ids)
    if config.interpretable:
        return forward_interpretable(config, params, doc_input_ids)
    return forward_flat(config, params, doc_input_ids)


@dataclass
class Model:
    """Config, parameters, vocabulary, and class names, ready to predict."""

    config: ModelConfig
    params: ModelParams
    vocab: Vocabulary
    class_names: list[str]

    def predict(self, doc: Document) -> Prediction:
        return forward(self.config, self.params,
                       document_input(self.config, self.vocab, doc))
