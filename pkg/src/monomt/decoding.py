"""Greedy and beam-search decoding over a frozen model.

Decoding is a pure function of (parameters, input, beam, max_len): no
dropout, no graph building, no randomness. PAD and SOS are structural
symbols and are never emitted; UNK and EOS are. Finished hypotheses
retire to a pool and compete by raw (unnormalized) log probability
(no length or coverage penalty), with exact ties resolved toward the
lexicographically smaller id sequence. Hypotheses that reach the
length cap without EOS join the pool with their raw score.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import tensor as T
from .data import EOS, PAD, SOS, Batch, pad_batch
from .model import TranslationModel
from .tensor import Tensor, log_softmax_rows


@dataclass
class Hypothesis:
    """A partial or finished decode: ids include the trailing EOS once
    finished; logprob is the sum of per-step log-softmax terms."""

    ids: list[int]
    logprob: float
    state: list[np.ndarray] | None
    finished: bool

    def sort_key(self):
        return (-self.logprob, self.ids)


def default_max_len(source_len: int) -> int:
    """Generous inference cap: 2 × source length + 10."""
    return 2 * source_len + 10


def training_max_len(source_len: int) -> int:
    """Tighter cap used for on-the-fly pseudo-sources: 1.5·len + 5."""
    return int(1.5 * source_len) + 5


def _blocked_logprobs(logits: np.ndarray) -> np.ndarray:
    logp = log_softmax_rows(logits).astype(np.float64)
    logp[:, PAD] = -np.inf
    logp[:, SOS] = -np.inf
    return logp


def greedy_translate_batch(model: TranslationModel, batch: Batch, tgt_lang: str,
                           max_lens: np.ndarray) -> list[list[int]]:
    """Batched greedy decoding; row i stops at EOS or after
    ``max_lens[i]`` tokens. Returns emitted ids without EOS."""
    was_training = model.training
    model.eval()
    try:
        with T.no_grad():
            decoder = model.decoders[tgt_lang]
            annotations = model.encode(batch)
            state = model.init_decoder_state(annotations, batch, decoder)
            b = batch.size
            outputs: list[list[int]] = [[] for _ in range(b)]
            alive = np.ones(b, dtype=bool)
            prev = np.full(b, SOS, dtype=np.int64)
            for _ in range(int(np.max(max_lens))):
                logits, state, _ = model.decode_step(prev, state, annotations,
                                                     batch.mask, decoder)
                choice = np.argmax(_blocked_logprobs(logits.data), axis=1)
                for i in range(b):
                    if not alive[i]:
                        choice[i] = EOS
                        continue
                    if choice[i] == EOS:
                        alive[i] = False
                        continue
                    outputs[i].append(int(choice[i]))
                    if len(outputs[i]) >= max_lens[i]:
                        alive[i] = False
                if not alive.any():
                    break
                prev = choice
            return outputs
    finally:
        model.train(was_training)


def greedy_decode(model: TranslationModel, sentence: list[str], src_lang: str,
                  tgt_lang: str, max_len: int | None = None) -> list[str]:
    """Argmax decoding of one sentence; ties go to the lower token id
    (argmax semantics)."""
    if max_len is None:
        max_len = default_max_len(len(sentence))
    if max_len < 1:
        raise ValueError(f"max_len must be >= 1, got {max_len}")
    batch = pad_batch([model.vocabs[src_lang].encode(sentence)], src_lang)
    ids = greedy_translate_batch(model, batch, tgt_lang, np.array([max_len]))[0]
    return model.vocabs[tgt_lang].decode(ids)


def beam_search_best(model: TranslationModel, sentence: list[str], src_lang: str,
                     tgt_lang: str, beam: int = 12,
                     max_len: int | None = None) -> Hypothesis:
    """Standard beam search; returns the pool's best raw-score
    hypothesis (see module docstring for the tie rule)."""
    if beam < 1:
        raise ValueError(f"beam width must be >= 1, got {beam}")
    if max_len is None:
        max_len = default_max_len(len(sentence))
    was_training = model.training
    model.eval()
    try:
        with T.no_grad():
            decoder = model.decoders[tgt_lang]
            batch = pad_batch([model.vocabs[src_lang].encode(sentence)], src_lang)
            annotations = model.encode(batch)
            init = model.init_decoder_state(annotations, batch, decoder)
            live = [Hypothesis([], 0.0, [s.data for s in init], False)]
            pool: list[Hypothesis] = []
            ann_data, mask = annotations.data, batch.mask
            for _ in range(max_len):
                n = len(live)
                prev = np.array([h.ids[-1] if h.ids else SOS for h in live], dtype=np.int64)
                state = [Tensor(np.concatenate([h.state[layer] for h in live], axis=0))
                         for layer in range(model.config.layers)]
                logits, new_state, _ = model.decode_step(
                    prev, state, Tensor(np.repeat(ann_data, n, axis=0)),
                    np.repeat(mask, n, axis=0), decoder)
                totals = np.array([h.logprob for h in live])[:, None] \
                    + _blocked_logprobs(logits.data)
                # top-`beam` candidates across all live hypotheses and
                # tokens; an EOS candidate that makes the cut retires,
                # everything below the cut is pruned
                flat = totals.ravel()
                vocab = totals.shape[1]
                order = np.lexsort((np.arange(flat.size) // vocab,
                                    np.arange(flat.size) % vocab, -flat))
                nxt = []
                rows = [layer.data for layer in new_state]
                for idx in order[:beam]:
                    if not np.isfinite(flat[idx]):
                        break
                    hyp_i, tok = divmod(int(idx), vocab)
                    if tok == EOS:
                        pool.append(Hypothesis(
                            live[hyp_i].ids + [EOS], float(flat[idx]), None, True))
                    else:
                        nxt.append(Hypothesis(
                            live[hyp_i].ids + [tok], float(flat[idx]),
                            [r[hyp_i:hyp_i + 1] for r in rows], False))
                live = nxt
                if not live:
                    break
            pool.extend(live)  # length-capped, unfinished
            return min(pool, key=Hypothesis.sort_key)
    finally:
        model.train(was_training)


def beam_search(model: TranslationModel, sentence: list[str], src_lang: str,
                tgt_lang: str, beam: int = 12, max_len: int | None = None) -> list[str]:
    best = beam_search_best(model, sentence, src_lang, tgt_lang, beam, max_len)
    ids = best.ids[:-1] if best.finished else best.ids
    return model.vocabs[tgt_lang].decode(ids)


def translate_corpus(model: TranslationModel, sentences: list[list[str]], src_lang: str,
                     tgt_lang: str, beam: int = 0, batch_size: int = 16) -> list[list[str]]:
    """Translate many sentences; beam=0 selects (batched) greedy
    decoding, beam>=1 runs beam search sentence by sentence."""
    if not sentences:
        return []
    if beam >= 1:
        return [beam_search(model, s, src_lang, tgt_lang, beam) for s in sentences]
    vocab_src, vocab_tgt = model.vocabs[src_lang], model.vocabs[tgt_lang]
    out: list[list[str]] = []
    for start in range(0, len(sentences), batch_size):
        chunk = sentences[start:start + batch_size]
        batch = pad_batch([vocab_src.encode(s) for s in chunk], src_lang)
        caps = np.array([default_max_len(len(s)) for s in chunk])
        for ids in greedy_translate_batch(model, batch, tgt_lang, caps):
            out.append(vocab_tgt.decode(ids))
    return out
