"""Adam training with octave-tolerant loss and F1-based early stopping.

Each step draws beat-aligned slices from the training split, minimizes
the octave-tolerant cross-entropy, and periodically sweeps the onset
threshold on the validation split, keeping the parameters and threshold
with the best octave-invariant note F1.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from ..align import AlignmentMap, align
from ..core import Melody, TICKS_PER_BEAT, legato_offsets
from ..errors import InputError, ShapeError
from ..evaluate import octave_invariant_f1
from .config import LabelerConfig
from .decode import decode
from .labels import DenseLabelSequence, class_to_pitch
from .loss import _loss_and_grad
from .model import backward, forward_cached, forward_windowed, init_params

DEFAULT_THRESHOLDS = tuple(round(0.05 * k, 2) for k in range(1, 20))


@dataclass(frozen=True)
class TrainExample:
    """One segment ready for training: features, labels, alignment."""

    seg_id: str
    features: np.ndarray
    labels: DenseLabelSequence
    amap: AlignmentMap
    split: str

    def __post_init__(self) -> None:
        n_ticks = self.labels.num_ticks
        if self.features.ndim != 2 or self.features.shape[0] != n_ticks:
            raise ShapeError(
                f"{self.seg_id}: features shape {self.features.shape} "
                f"against {n_ticks} label ticks"
            )
        if self.amap.num_beats != self.labels.num_beats:
            raise ShapeError(
                f"{self.seg_id}: alignment covers {self.amap.num_beats} beats, "
                f"labels cover {self.labels.num_beats}"
            )


@dataclass(frozen=True)
class TrainSettings:
    batch_size: int = 8
    lr: float = 1e-4
    max_steps: int = 15000
    eval_every: int = 250
    patience: int = 10
    seed: int = 0
    max_slice_beats: int = 96
    max_slice_seconds: float = 24.0
    thresholds: tuple = DEFAULT_THRESHOLDS

    def __post_init__(self) -> None:
        if self.batch_size < 1 or self.max_steps < 0:
            raise InputError("batch_size must be >= 1 and max_steps >= 0")
        if self.eval_every < 1 or self.patience < 1:
            raise InputError("eval_every and patience must be >= 1")
        if not self.thresholds or any(not 0.0 < t < 1.0 for t in self.thresholds):
            raise InputError("thresholds must be a non-empty subset of (0, 1)")


@dataclass
class TrainResult:
    params: dict
    tau: float
    valid_f1: float
    best_step: int
    steps_run: int
    history: list = field(default_factory=list)


def reference_melody(labels: DenseLabelSequence, amap: AlignmentMap) -> Melody:
    """Performance-form melody implied by dense labels under an alignment."""
    onsets = [
        (align(amap, tick / TICKS_PER_BEAT), class_to_pitch(cls))
        for tick, cls in labels.onset_events()
    ]
    return Melody(tuple(legato_offsets(onsets, align(amap, amap.num_beats))))


def _sample_slice(
    rng: np.random.Generator, ex: TrainExample, settings: TrainSettings
) -> tuple[int, int]:
    total = ex.amap.num_beats
    start = int(rng.integers(0, total))
    length = min(settings.max_slice_beats, total - start)
    times = ex.amap.beat_to_time_s
    while length > 1 and times[start + length] - times[start] > settings.max_slice_seconds:
        length -= 1
    return start * TICKS_PER_BEAT, (start + length) * TICKS_PER_BEAT


def _adam_step(params, grads, m, v, t, lr):
    b1, b2, eps = 0.9, 0.999, 1e-8
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for name, g in grads.items():
        g32 = g.astype(np.float32, copy=False)
        m[name] = b1 * m[name] + (1.0 - b1) * g32
        v[name] = b2 * v[name] + (1.0 - b2) * g32 * g32
        params[name] = params[name] - lr * (m[name] / c1) / (
            np.sqrt(v[name] / c2) + eps
        )


def validation_f1(
    cfg: LabelerConfig,
    params: dict,
    examples: Sequence[TrainExample],
    thresholds: Sequence[float],
) -> np.ndarray:
    """Macro-mean octave-invariant note F1 per threshold."""
    sums = np.zeros(len(thresholds))
    for ex in examples:
        logits = forward_windowed(cfg, params, ex.features)
        ref = reference_melody(ex.labels, ex.amap)
        for k, tau in enumerate(thresholds):
            est = decode(logits, tau, ex.amap)
            sums[k] += octave_invariant_f1(est, ref).f1
    return sums / len(examples)


def train(
    cfg: LabelerConfig,
    examples: Sequence[TrainExample],
    settings: TrainSettings = TrainSettings(),
    log: Callable[[str], None] | None = None,
) -> TrainResult:
    train_ex = [e for e in examples if e.split == "train"]
    valid_ex = [e for e in examples if e.split == "valid"]
    if not train_ex or not valid_ex:
        raise InputError(
            f"need train and valid examples, got {len(train_ex)} train "
            f"and {len(valid_ex)} valid"
        )
    vocab_name = cfg.vocab
    for ex in train_ex + valid_ex:
        if ex.labels.vocab.name != vocab_name:
            raise InputError(f"{ex.seg_id}: labels use vocab {ex.labels.vocab.name}")
        if ex.features.shape[1] != cfg.input_dim:
            raise ShapeError(f"{ex.seg_id}: feature dim {ex.features.shape[1]}")

    rng = np.random.default_rng(settings.seed)
    params = init_params(cfg)
    m = {k: np.zeros_like(p) for k, p in params.items()}
    v = {k: np.zeros_like(p) for k, p in params.items()}

    best: TrainResult | None = None
    history: list[dict] = []
    stale_evals = 0
    step = 0

    for step in range(1, settings.max_steps + 1):
        picks = rng.integers(0, len(train_ex), size=settings.batch_size)
        slices = [(train_ex[int(i)], *_sample_slice(rng, train_ex[int(i)], settings))
                  for i in picks]
        max_len = max(hi - lo for _, lo, hi in slices)
        batch = np.zeros((len(slices), max_len, cfg.input_dim), dtype=np.float32)
        mask = np.zeros((len(slices), max_len), dtype=bool)
        for row, (ex, lo, hi) in enumerate(slices):
            batch[row, : hi - lo] = ex.features[lo:hi]
            mask[row, : hi - lo] = True

        logits, cache = forward_cached(cfg, params, batch, mask, rng=rng, train=True)
        dlogits = np.zeros_like(logits)
        loss_total = 0.0
        for row, (ex, lo, hi) in enumerate(slices):
            loss, _sigma, dl = _loss_and_grad(
                logits[row, : hi - lo], ex.labels.classes[lo:hi], ex.labels.vocab
            )
            loss_total += loss
            dlogits[row, : hi - lo] = dl / len(slices)
        grads = backward(cfg, params, cache, dlogits)
        _adam_step(params, grads, m, v, step, settings.lr)

        if step % settings.eval_every == 0:
            f1s = validation_f1(cfg, params, valid_ex, settings.thresholds)
            k = int(np.argmax(f1s))
            entry = {
                "step": step,
                "loss": loss_total / len(slices),
                "f1": float(f1s[k]),
                "tau": float(settings.thresholds[k]),
            }
            history.append(entry)
            if log is not None:
                log(
                    f"step {entry['step']}: loss {entry['loss']:.4f} "
                    f"valid F1 {entry['f1']:.4f} at tau {entry['tau']:.2f}"
                )
            if best is None or entry["f1"] > best.valid_f1:
                best = TrainResult(
                    params={k2: p.copy() for k2, p in params.items()},
                    tau=entry["tau"],
                    valid_f1=entry["f1"],
                    best_step=step,
                    steps_run=step,
                )
                stale_evals = 0
            else:
                stale_evals += 1
                if stale_evals >= settings.patience:
                    break

    if best is None:
        f1s = validation_f1(cfg, params, valid_ex, settings.thresholds)
        k = int(np.argmax(f1s))
        best = TrainResult(
            params={k2: p.copy() for k2, p in params.items()},
            tau=float(settings.thresholds[k]),
            valid_f1=float(f1s[k]),
            best_step=step,
            steps_run=step,
        )
    best.steps_run = step
    best.history = history
    return best
