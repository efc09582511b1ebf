"""The dual translation model.

One two-layer bidirectional GRU encoder is shared by both languages
and reads fixed cross-lingual embeddings, so the same composition
machinery serves either input language; each language owns a two-layer
GRU decoder with multiplicative ("general") global attention, its own
trainable input embeddings, and its own output projection. Decoder
initial states come from a learned map of the masked mean annotation.

Between-layer dropout is applied to first-layer outputs on both sides.
All trainable parameters are initialized uniformly in [-0.1, 0.1];
fixed encoder embeddings are never updated.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .data import SOS, Batch, Vocabulary
from .errors import ContractError, FormatError
from .tensor import Parameter, Tensor

CHECKPOINT_MAGIC = b"MONOMT-CKPT-1\n"


@dataclass
class ModelConfig:
    """Architecture hyperparameters. The published preset is emb 300 /
    hidden 600 / 2 layers / dropout 0.3; tests shrink freely."""

    emb_dim: int = 300
    hidden_dim: int = 600
    layers: int = 2
    dropout: float = 0.3
    dtype: str = "float32"

    def __post_init__(self):
        if self.layers < 1:
            raise ContractError(f"layers must be >= 1, got {self.layers}")
        if not 0.0 <= self.dropout < 1.0:
            raise ContractError(f"dropout must be in [0, 1), got {self.dropout}")

    @property
    def np_dtype(self):
        return np.dtype(self.dtype).type

    def to_dict(self) -> dict:
        return {"emb_dim": self.emb_dim, "hidden_dim": self.hidden_dim,
                "layers": self.layers, "dropout": self.dropout, "dtype": self.dtype}


class GRUParams:
    """Per-gate weights of one GRU cell. Input-to-hidden matrices are
    stored (in_dim, hidden); hidden-to-hidden (hidden, hidden); biases
    as (1, hidden) rows."""

    GATES = ("z", "r", "h")

    def __init__(self, prefix: str, in_dim: int, hidden: int, init, register):
        for gate in self.GATES:
            setattr(self, f"w_{gate}", register(Parameter(init((in_dim, hidden)), f"{prefix}.w_{gate}")))
            setattr(self, f"u_{gate}", register(Parameter(init((hidden, hidden)), f"{prefix}.u_{gate}")))
            setattr(self, f"b_{gate}", register(Parameter(init((1, hidden)), f"{prefix}.b_{gate}")))


def gru_cell(x: Tensor, h: Tensor, params: GRUParams) -> Tensor:
    """One GRU step:
    z = σ(x·W_z + h·U_z + b_z), r = σ(x·W_r + h·U_r + b_r),
    h̃ = tanh(x·W_h + (r⊙h)·U_h + b_h), h' = z⊙h̃ + (1−z)⊙h.
    """
    z = T.sigmoid(T.add(T.add(T.matmul(x, params.w_z), T.matmul(h, params.u_z)), params.b_z))
    r = T.sigmoid(T.add(T.add(T.matmul(x, params.w_r), T.matmul(h, params.u_r)), params.b_r))
    cand = T.tanh(T.add(T.add(T.matmul(x, params.w_h), T.matmul(T.mul(r, h), params.u_h)),
                        params.b_h))
    return T.gate_mix(z, cand, h)


class SharedEncoder:
    """Recurrent parameters shared by both languages; per-language
    fixed embedding tables (trainable=False)."""

    def __init__(self, config: ModelConfig, embeddings: dict[str, np.ndarray], init, register):
        self.config = config
        self.embeddings: dict[str, Parameter] = {}
        for lang, matrix in embeddings.items():
            matrix = np.asarray(matrix, dtype=config.np_dtype)
            if matrix.ndim != 2 or matrix.shape[1] != config.emb_dim:
                raise ContractError(
                    f"encoder embedding for {lang!r} has shape {matrix.shape}, "
                    f"expected (*, {config.emb_dim})")
            self.embeddings[lang] = register(
                Parameter(matrix, f"encoder.emb.{lang}", trainable=False))
        self.cells: list[dict[str, GRUParams]] = []
        for layer in range(config.layers):
            in_dim = config.emb_dim if layer == 0 else 2 * config.hidden_dim
            self.cells.append({
                direction: GRUParams(f"encoder.layer{layer}.{direction}",
                                     in_dim, config.hidden_dim, init, register)
                for direction in ("fwd", "bwd")})


class AttentionDecoder:
    """One language's decoder: trainable embeddings, stacked GRU
    layers, general-alignment attention, and the output projection.
    Shares nothing with the other language's decoder."""

    def __init__(self, lang: str, vocab_size: int, config: ModelConfig, init, register):
        self.lang = lang
        self.config = config
        hidden = config.hidden_dim
        self.emb = register(Parameter(init((vocab_size, config.emb_dim)), f"decoder.{lang}.emb"))
        self.cells = [
            GRUParams(f"decoder.{lang}.layer{layer}",
                      config.emb_dim if layer == 0 else hidden, hidden, init, register)
            for layer in range(config.layers)]
        self.w_score = register(Parameter(init((hidden, 2 * hidden)), f"decoder.{lang}.attn.w_score"))
        self.w_comb = register(Parameter(init((3 * hidden, hidden)), f"decoder.{lang}.attn.w_comb"))
        self.w_out = register(Parameter(init((hidden, vocab_size)), f"decoder.{lang}.out.w"))
        self.b_out = register(Parameter(init((1, vocab_size)), f"decoder.{lang}.out.b"))
        self.init_w = [register(Parameter(init((2 * hidden, hidden)), f"decoder.{lang}.init{layer}.w"))
                       for layer in range(config.layers)]
        self.init_b = [register(Parameter(init((1, hidden)), f"decoder.{lang}.init{layer}.b"))
                       for layer in range(config.layers)]


class TranslationModel:
    """Shared encoder plus one decoder per language, handling both
    translation directions with the single encoder."""

    def __init__(self, config: ModelConfig, vocabs: tuple[Vocabulary, Vocabulary],
                 encoder_embeddings: tuple[np.ndarray, np.ndarray], seed: int = 0):
        self.config = config
        self.vocabs = {v.lang: v for v in vocabs}
        self.langs = (vocabs[0].lang, vocabs[1].lang)
        if len(self.vocabs) != 2:
            raise ContractError(f"need two distinct language tags, got {self.langs}")
        for vocab, matrix in zip(vocabs, encoder_embeddings):
            rows = np.asarray(matrix).shape[0]
            if rows != len(vocab):
                raise ContractError(
                    f"embedding rows {rows} != vocabulary size {len(vocab)} "
                    f"for {vocab.lang!r}")
        self._params: dict[str, Parameter] = {}
        rng = np.random.default_rng(seed)
        dtype = config.np_dtype

        def init(shape):
            return rng.uniform(-0.1, 0.1, size=shape).astype(dtype)

        def register(p: Parameter) -> Parameter:
            self._params[p.name] = p
            return p

        self.encoder = SharedEncoder(
            config, dict(zip(self.langs, encoder_embeddings)), init, register)
        self.decoders = {
            v.lang: AttentionDecoder(v.lang, len(v), config, init, register)
            for v in vocabs}
        self.training = False

    # -- bookkeeping --------------------------------------------------

    def parameters(self) -> dict[str, Parameter]:
        return self._params

    def trainable_parameters(self) -> list[Parameter]:
        return [p for p in self._params.values() if p.trainable]

    def zero_grad(self):
        for p in self._params.values():
            p.grad = None

    def train(self, mode: bool = True):
        self.training = mode
        return self

    def eval(self):
        return self.train(False)

    def other_lang(self, lang: str) -> str:
        if lang == self.langs[0]:
            return self.langs[1]
        if lang == self.langs[1]:
            return self.langs[0]
        raise ContractError(f"unknown language tag {lang!r}")

    def _dropout_rng(self, rng):
        if self.training and self.config.dropout > 0.0 and rng is None:
            raise ContractError("training-mode forward needs an rng for dropout")
        return rng

    # -- forward passes -----------------------------------------------

    def encode(self, batch: Batch, rng: np.random.Generator | None = None) -> Tensor:
        """Run the shared encoder over a batch; returns (b, T, 2·hidden)
        annotations. Positions beyond a row's length hold carried-over
        states that attention must mask out."""
        if batch.lang not in self.encoder.embeddings:
            raise ContractError(f"unknown language tag {batch.lang!r}")
        rng = self._dropout_rng(rng)
        cfg = self.config
        b, width = batch.ids.shape
        keep = batch.mask.astype(cfg.np_dtype)
        keep_cols = [np.ascontiguousarray(keep[:, t:t + 1]) for t in range(width)]
        emb = self.encoder.embeddings[batch.lang]
        inputs = [T.gather_rows(emb, batch.ids[:, t]) for t in range(width)]
        outputs: list[Tensor] = []
        for layer in range(cfg.layers):
            per_direction = {}
            for direction, order in (("fwd", range(width)), ("bwd", range(width - 1, -1, -1))):
                cell = self.encoder.cells[layer][direction]
                h = Tensor(np.zeros((b, cfg.hidden_dim), dtype=cfg.np_dtype))
                states: list[Tensor | None] = [None] * width
                for t in order:
                    h = T.mask_mix(gru_cell(inputs[t], h, cell), h, keep_cols[t])
                    states[t] = h
                per_direction[direction] = states
            outputs = [T.concat_cols([per_direction["fwd"][t], per_direction["bwd"][t]])
                       for t in range(width)]
            if layer < cfg.layers - 1 and self.training and cfg.dropout > 0.0:
                outputs = [T.dropout(o, cfg.dropout, rng) for o in outputs]
            inputs = outputs
        return T.seq_stack(outputs)

    def init_decoder_state(self, annotations: Tensor, batch: Batch,
                           decoder: AttentionDecoder) -> list[Tensor]:
        """tanh of a learned linear map of the mean over valid
        annotations, one state per decoder layer."""
        weights = batch.mask.astype(self.config.np_dtype) / batch.lengths[:, None]
        mean = T.seq_mix(Tensor(weights), annotations)
        return [T.tanh(T.add(T.matmul(mean, decoder.init_w[i]), decoder.init_b[i]))
                for i in range(self.config.layers)]

    def attend(self, h_dec: Tensor, annotations: Tensor, mask: np.ndarray,
               decoder: AttentionDecoder) -> tuple[Tensor, Tensor]:
        """General-alignment global attention: score every annotation
        with h_decᵀ·W·annotation, softmax over valid positions, and
        blend the context with the decoder state."""
        query = T.matmul(h_dec, decoder.w_score)
        weights = T.masked_softmax_rows(T.seq_scores(query, annotations), mask)
        context = T.seq_mix(weights, annotations)
        blended = T.tanh(T.matmul(T.concat_cols([context, h_dec]), decoder.w_comb))
        return blended, weights

    def decode_step(self, prev_ids: np.ndarray, state: list[Tensor], annotations: Tensor,
                    mask: np.ndarray, decoder: AttentionDecoder,
                    rng: np.random.Generator | None = None
                    ) -> tuple[Tensor, list[Tensor], Tensor]:
        """One decoder step from gold or generated previous tokens.
        Returns (vocabulary logits, new state, attention weights)."""
        rng = self._dropout_rng(rng)
        x = T.gather_rows(decoder.emb, prev_ids)
        new_state = []
        for layer, cell in enumerate(decoder.cells):
            h = gru_cell(x, state[layer], cell)
            new_state.append(h)
            x = h
            if layer < self.config.layers - 1 and self.training and self.config.dropout > 0.0:
                x = T.dropout(x, self.config.dropout, rng)
        blended, weights = self.attend(new_state[-1], annotations, mask, decoder)
        logits = T.add(T.matmul(blended, decoder.w_out), decoder.b_out)
        return logits, new_state, weights

    def forward_teacher_forced(self, src: Batch, tgt: Batch,
                               rng: np.random.Generator | None = None) -> Tensor:
        """Masked mean cross-entropy of ``tgt`` given ``src`` under
        teacher forcing (gold previous tokens, SOS-prefixed)."""
        if src.size != tgt.size:
            raise ContractError(f"row-count mismatch: src {src.size} vs tgt {tgt.size}")
        decoder = self.decoders[tgt.lang]
        annotations = self.encode(src, rng)
        state = self.init_decoder_state(annotations, src, decoder)
        prev = np.full(src.size, SOS, dtype=np.int64)
        steps = []
        for t in range(tgt.ids.shape[1]):
            logits, state, _ = self.decode_step(prev, state, annotations, src.mask,
                                                decoder, rng)
            steps.append(logits)
            prev = tgt.ids[:, t]
        flat_logits = T.concat_rows(steps)
        targets = tgt.ids.T.reshape(-1)
        mask = tgt.mask.T.reshape(-1)
        return T.cross_entropy_from_logits(flat_logits, targets, mask)


# ---------------------------------------------------------------------------
# checkpointing: a flat container of named float32 arrays plus the
# config and both vocabularies. Plain bytes, no archive timestamps, so
# same-seed runs write identical files.


def save_checkpoint(model: TranslationModel, path, uses_bpe: bool = False):
    params = model.parameters()
    manifest = [{"name": name, "shape": list(p.data.shape)} for name, p in params.items()]
    header = {
        "config": model.config.to_dict(),
        "langs": list(model.langs),
        "vocab": {lang: model.vocabs[lang].tokens() for lang in model.langs},
        "uses_bpe": uses_bpe,
        "params": manifest,
    }
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write((json.dumps(header, ensure_ascii=False, sort_keys=True) + "\n").encode("utf-8"))
        for m in manifest:
            f.write(np.ascontiguousarray(params[m["name"]].data, dtype="<f4").tobytes())


def load_checkpoint(path) -> tuple[TranslationModel, dict]:
    """Rebuild the model recorded at ``path``; every parameter name and
    shape is validated against a freshly constructed skeleton."""
    with open(path, "rb") as f:
        magic = f.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise FormatError(f"{path}: not a checkpoint file")
        header = json.loads(f.readline().decode("utf-8"))
        config = ModelConfig(**header["config"])
        vocabs = tuple(Vocabulary(header["vocab"][lang], lang) for lang in header["langs"])
        placeholders = tuple(
            np.zeros((len(v), config.emb_dim), dtype=config.np_dtype) for v in vocabs)
        model = TranslationModel(config, vocabs, placeholders, seed=0)
        params = model.parameters()
        recorded = {m["name"]: tuple(m["shape"]) for m in header["params"]}
        if set(recorded) != set(params):
            unexpected = sorted(set(recorded) - set(params))
            absent = sorted(set(params) - set(recorded))
            raise FormatError(
                f"parameter names do not match model: unexpected {unexpected[:4]}, "
                f"missing {absent[:4]}")
        for m in header["params"]:
            p = params[m["name"]]
            shape = tuple(m["shape"])
            if p.data.shape != shape:
                raise FormatError(
                    f"parameter {m['name']} has shape {shape}, expected {p.data.shape}")
            raw = f.read(int(np.prod(shape)) * 4)
            if len(raw) != int(np.prod(shape)) * 4:
                raise FormatError(f"checkpoint truncated at parameter {m['name']}")
            p.data = np.frombuffer(raw, dtype="<f4").reshape(shape).astype(
                config.np_dtype).copy()
    return model, {"uses_bpe": header["uses_bpe"]}
