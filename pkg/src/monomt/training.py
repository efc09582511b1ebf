"""Training loop: objective rotation, on-the-fly backtranslation, Adam.

Each iteration rotates through a fixed objective list: one denoising
mini-batch per language, one backtranslation mini-batch per direction,
and, when a parallel corpus is present, one supervised mini-batch per
direction. Every objective step is exactly one backward pass, one
global-norm clip at 5.0, and one Adam update of the touched trainable
parameters; losses are never mixed across objectives. The
backtranslation translation phase runs in inference mode (no dropout,
no graph) with greedy decoding capped at 1.5·source length + 5, and
regenerates its pseudo-sources from the current parameters every call.

Given one seed the whole run is reproducible bit for bit on a
platform: batch order, noise, dropout, and checkpoint bytes.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field

import numpy as np

from . import tensor as T
from .data import UNK, Batch, endless_batches, pad_batch
from .decoding import greedy_translate_batch, training_max_len
from .errors import ConfigError, NumericError
from .model import TranslationModel, save_checkpoint
from .noise import corrupt_batch_ids
from .tensor import Parameter

GRAD_CLIP_NORM = 5.0

MODES = ("unsupervised", "semi", "supervised")


class Adam:
    """Adam with bias correction; the published setup states only the
    learning rate, β/ε take the optimizer's own published defaults.
    One ``update`` call = one step of the shared counter; parameters
    without a populated gradient (untouched this objective) and
    non-trainable parameters are skipped."""

    def __init__(self, alpha: float = 0.0002, beta1: float = 0.9,
                 beta2: float = 0.999, eps: float = 1e-8):
        self.alpha = alpha
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def update(self, params: list[Parameter]):
        self.t += 1
        correction1 = 1.0 - self.beta1 ** self.t
        correction2 = 1.0 - self.beta2 ** self.t
        for p in params:
            if not p.trainable or p.grad is None:
                continue
            g = p.grad
            m = self.m.get(p.name)
            if m is None:
                m = self.m[p.name] = np.zeros_like(p.data)
            v = self.v.get(p.name)
            if v is None:
                v = self.v[p.name] = np.zeros_like(p.data)
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            m_hat = m / correction1
            v_hat = v / correction2
            p.data = p.data - self.alpha * m_hat / (np.sqrt(v_hat) + self.eps)


def clip_global_norm(params: list[Parameter], max_norm: float = GRAD_CLIP_NORM) -> float:
    """Scale all populated gradients so their joint L2 norm is at most
    ``max_norm``; returns the pre-clip norm."""
    grads = [p.grad for p in params if p.trainable and p.grad is not None]
    total = math.sqrt(sum(float((g.astype(np.float64) ** 2).sum()) for g in grads))
    if total > max_norm and total > 0.0:
        scale = max_norm / total
        for g in grads:
            g *= g.dtype.type(scale)
    return total


def _optimize(model: TranslationModel, loss, adam: Adam) -> float:
    value = float(loss.data)
    T.backward(loss)
    params = model.trainable_parameters()
    clip_global_norm(params)
    adam.update(params)
    model.zero_grad()
    return value


def denoising_step(model: TranslationModel, batch: Batch, adam: Adam,
                   noise_rng: np.random.Generator,
                   dropout_rng: np.random.Generator) -> float:
    """Reconstruct the uncorrupted batch from its corrupted self
    through the shared encoder and the batch language's decoder."""
    corrupted = Batch(corrupt_batch_ids(batch.ids, batch.lengths, noise_rng),
                      batch.lengths, batch.mask, batch.lang)
    model.train(True)
    loss = model.forward_teacher_forced(corrupted, batch, rng=dropout_rng)
    return _optimize(model, loss, adam)


def backtranslation_step(model: TranslationModel, batch: Batch, adam: Adam,
                         dropout_rng: np.random.Generator) -> tuple[float, int]:
    """Greedy-translate the batch with the current parameters, then
    train to recover the originals from the pseudo-translations. The
    pseudo-sources are not noise-corrupted. Rows whose translation
    came out empty are replaced by a single UNK and counted."""
    other = model.other_lang(batch.lang)
    caps = np.array([training_max_len(int(n) - 1) for n in batch.lengths])
    pseudo = greedy_translate_batch(model, batch, other, caps)
    empties = sum(1 for row in pseudo if not row)
    pseudo = [row if row else [UNK] for row in pseudo]
    model.train(True)
    loss = model.forward_teacher_forced(pad_batch(pseudo, other), batch, rng=dropout_rng)
    return _optimize(model, loss, adam), empties


def supervised_step(model: TranslationModel, src: Batch, tgt: Batch, adam: Adam,
                    dropout_rng: np.random.Generator) -> float:
    """Plain translation training on an aligned batch, no corruption."""
    model.train(True)
    loss = model.forward_teacher_forced(src, tgt, rng=dropout_rng)
    return _optimize(model, loss, adam)


# ---------------------------------------------------------------------------
# the outer loop


@dataclass
class TrainSettings:
    iterations: int
    mode: str = "unsupervised"
    batch_size: int = 50
    report_every: int = 100
    checkpoint_every: int = 0      # 0: write only the final checkpoint
    out_dir: str | None = None     # None: keep everything in memory
    seed: int = 0
    uses_bpe: bool = False
    backtranslation: bool = True  # False reproduces the denoise-only ablation arm

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be >= 0, got {self.iterations}")


@dataclass
class TrainResult:
    schedule: list[str]
    history: list[tuple[int, str, float]] = field(default_factory=list)
    empty_pseudo_rows: int = 0
    checkpoints: list[str] = field(default_factory=list)
    metrics_path: str | None = None

    def final_mean(self, tag: str, window: int = 50) -> float:
        tail = [loss for _, t, loss in self.history if t == tag][-window:]
        return sum(tail) / len(tail) if tail else math.nan


def _plan(mode: str, langs: tuple[str, str],
          backtranslation: bool = True) -> list[tuple[str, str, object]]:
    """(tag, kind, payload) entries executed per iteration, in order."""
    l1, l2 = langs
    entries: list[tuple[str, str, object]] = []
    if mode != "supervised":
        entries += [
            (f"denoise_{l1}", "denoise", l1),
            (f"denoise_{l2}", "denoise", l2),
        ]
        if backtranslation:
            entries += [
                (f"backtranslate_{l1}_{l2}", "backtranslate", l1),
                (f"backtranslate_{l2}_{l1}", "backtranslate", l2),
            ]
    if mode in ("semi", "supervised"):
        entries += [
            (f"supervised_{l1}_{l2}", "supervised", (l1, l2)),
            (f"supervised_{l2}_{l1}", "supervised", (l2, l1)),
        ]
    return entries


def schedule_for(mode: str, langs: tuple[str, str],
                 backtranslation: bool = True) -> list[str]:
    """Objective tags executed per iteration, in rotation order."""
    return [tag for tag, _, _ in _plan(mode, langs, backtranslation)]


def _pair_stream(pairs, batch_size, rng, langs):
    while True:
        order = rng.permutation(len(pairs))
        for start in range(0, len(pairs), batch_size):
            rows = [pairs[i] for i in order[start:start + batch_size]]
            yield (pad_batch([r[0] for r in rows], langs[0]),
                   pad_batch([r[1] for r in rows], langs[1]))


def train(model: TranslationModel, mono: dict[str, list[list[int]]],
          parallel: list[tuple[list[int], list[int]]] | None,
          settings: TrainSettings, adam: Adam | None = None) -> TrainResult:
    """Run the rotation schedule for ``settings.iterations``.

    ``mono`` maps each language tag to its encoded monolingual corpus;
    ``parallel`` holds encoded aligned (l1, l2) pairs for the semi and
    supervised modes. Missing corpora for a scheduled objective fail
    before any compute."""
    l1, l2 = model.langs
    mode = settings.mode
    if mode in ("unsupervised", "semi"):
        for lang in model.langs:
            if not mono.get(lang):
                raise ConfigError(f"{mode} training needs a monolingual corpus for {lang!r}")
    if mode in ("semi", "supervised") and not parallel:
        raise ConfigError(f"{mode} training needs a parallel corpus")
    if adam is None:
        adam = Adam()

    seeds = np.random.SeedSequence(settings.seed).spawn(6)
    noise_rng = np.random.default_rng(seeds[0])
    dropout_rng = np.random.default_rng(seeds[1])
    streams = {}
    if mode != "supervised":
        streams["denoise"] = {
            l1: endless_batches(mono[l1], settings.batch_size, np.random.default_rng(seeds[2]), l1),
            l2: endless_batches(mono[l2], settings.batch_size, np.random.default_rng(seeds[3]), l2)}
        streams["backtranslate"] = {
            l1: endless_batches(mono[l1], settings.batch_size, np.random.default_rng(seeds[4]), l1),
            l2: endless_batches(mono[l2], settings.batch_size, np.random.default_rng(seeds[5]), l2)}
    if mode in ("semi", "supervised"):
        pair_rng = np.random.default_rng(np.random.SeedSequence(settings.seed + 1))
        streams["supervised"] = _pair_stream(parallel, settings.batch_size, pair_rng,
                                             (l1, l2))

    result = TrainResult(schedule=schedule_for(mode, model.langs, settings.backtranslation))
    metrics = None
    if settings.out_dir is not None:
        os.makedirs(settings.out_dir, exist_ok=True)
        result.metrics_path = os.path.join(settings.out_dir, "metrics.log")
        metrics = open(result.metrics_path, "w", encoding="utf-8")
    window: dict[str, list[float]] = {tag: [] for tag in result.schedule}
    plan = _plan(mode, model.langs, settings.backtranslation)
    try:
        for iteration in range(1, settings.iterations + 1):
            for tag, kind, payload in plan:
                if kind == "denoise":
                    batch = next(streams["denoise"][payload])
                    loss = denoising_step(model, batch, adam, noise_rng, dropout_rng)
                elif kind == "backtranslate":
                    batch = next(streams["backtranslate"][payload])
                    loss, empties = backtranslation_step(model, batch, adam, dropout_rng)
                    result.empty_pseudo_rows += empties
                else:
                    src, tgt = next(streams["supervised"])
                    if payload == (l2, l1):
                        src, tgt = tgt, src
                    loss = supervised_step(model, src, tgt, adam, dropout_rng)
                if math.isnan(loss):
                    raise NumericError(f"loss became NaN at iteration {iteration} ({tag})")
                result.history.append((iteration, tag, loss))
                window[tag].append(loss)
            if metrics and iteration % settings.report_every == 0:
                for tag in result.schedule:
                    mean = sum(window[tag]) / len(window[tag])
                    metrics.write(f"{iteration}\t{tag}\t{mean:.6f}\n")
                    window[tag].clear()
                metrics.flush()
            if settings.out_dir and settings.checkpoint_every \
                    and iteration % settings.checkpoint_every == 0:
                path = os.path.join(settings.out_dir, f"ckpt-{iteration:07d}.bin")
                save_checkpoint(model, path, uses_bpe=settings.uses_bpe)
                result.checkpoints.append(path)
        if settings.out_dir:
            path = os.path.join(settings.out_dir, "model.bin")
            save_checkpoint(model, path, uses_bpe=settings.uses_bpe)
            result.checkpoints.append(path)
            if metrics and result.empty_pseudo_rows:
                metrics.write(f"final\tempty_pseudo_rows\t{result.empty_pseudo_rows}\n")
    finally:
        if metrics:
            metrics.close()
    model.eval()
    return result
