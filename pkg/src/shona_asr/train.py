"""End-to-end training, warm starting, and evaluation.

One epoch loop trains the acoustic model (CTC) and the language model
(teacher forcing) with independent optimizers, monitors validation PER
from greedy decoding, and early-stops with patience, restoring the best
epoch's parameters. The whole run is a pure function of (config, manifest).
"""

from __future__ import annotations

import dataclasses
import logging
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .acoustic import AcousticConfig, PosteriorGrid, acoustic_forward, build_acoustic_model
from .audio import AudioBuffer, load_wav
from .augment import AugmentPolicy, augment_audio, spec_augment
from .checkpoint import Checkpoint, load_checkpoint, params_hash
from .ctc import ctc_greedy_decode, ctc_loss, min_frames
from .decoder import Transcript, beam_decode
from .errors import DataError
from .features import extract_features
from .lexicon import Lexicon, build_lexicon
from .lm import LmConfig, TokenVocab, build_lm, corpus_loss, sentence_loss, word_tokens
from .manifest import CorpusManifest, split_corpus
from .metrics import MetricsReport, align, normalize_text, per, report, wer
from .optim import OptimizerState, optimizer_step
from .phones import PhoneInventory, default_inventory

log = logging.getLogger(__name__)


@dataclass
class OptimizerConfig:
    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    def make(self, frozen_prefixes: tuple[str, ...] = ()) -> OptimizerState:
        return OptimizerState(kind=self.kind, learning_rate=self.learning_rate,
                              beta1=self.beta1, beta2=self.beta2, eps=self.eps,
                              frozen_prefixes=frozen_prefixes)


@dataclass
class DecodeConfig:
    lm_weight: float = 1.0
    word_bonus: float = 0.0
    beam_width: int = 16


@dataclass
class TrainConfig:
    seed: int = 0
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    epochs_max: int = 100
    patience: int = 10
    batch_size: int = 4
    granularity: str = "phone"  # LM token granularity: "phone" | "word"
    target_train_per: float | None = None  # optional convergence shortcut
    lexicon_words: list[str] | None = None  # default: all manifest words
    warm_start_path: str | None = None
    freeze: tuple[str, ...] = ()
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    lm_optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    augment: AugmentPolicy = field(default_factory=AugmentPolicy)
    acoustic: AcousticConfig = field(default_factory=AcousticConfig)
    lm: LmConfig = field(default_factory=LmConfig)
    decode: DecodeConfig = field(default_factory=DecodeConfig)

    def __post_init__(self):
        if self.patience < 1:
            raise ValueError("patience must be >= 1")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9:
            raise ValueError(f"split ratios must sum to 1, got {self.split_ratios}")

    def to_dict(self) -> dict:
        return _config_to_dict(self)

    @classmethod
    def from_dict(cls, obj: dict) -> "TrainConfig":
        return _config_from_dict(cls, obj, path="config")


def _config_to_dict(cfg) -> dict:
    out = {}
    for f in dataclasses.fields(cfg):
        value = getattr(cfg, f.name)
        if dataclasses.is_dataclass(value):
            out[f.name] = _config_to_dict(value)
        elif isinstance(value, tuple):
            out[f.name] = list(value)
        else:
            out[f.name] = value
    return out


def _config_from_dict(cls, obj, path: str):
    if not isinstance(obj, dict):
        raise DataError(f"{path}: expected an object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = set(obj) - set(fields)
    if unknown:
        raise DataError(f"{path}: unknown keys {sorted(unknown)}")
    tuple_fields = ("split_ratios", "freeze", "gain_db_range",
                    "words_per_sentence", "syllables_per_word")
    kwargs = {}
    for name, value in obj.items():
        nested = {
            "optimizer": OptimizerConfig, "lm_optimizer": OptimizerConfig,
            "augment": AugmentPolicy, "acoustic": AcousticConfig,
            "lm": LmConfig, "decode": DecodeConfig,
        }.get(name)
        if nested is not None:
            kwargs[name] = _config_from_dict(nested, value, f"{path}.{name}")
        elif isinstance(value, list) and name in tuple_fields:
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise DataError(f"{path}: {exc}") from exc


# ---------------------------------------------------------------------------
# warm start
# ---------------------------------------------------------------------------

@dataclass
class WarmStart:
    acoustic: ad.Parameters
    lm: ad.Parameters
    reinitialized: list[str]
    frozen: tuple[str, ...]


def _split_ckpt_tensors(ckpt: Checkpoint) -> tuple[dict, dict]:
    acoustic, lm = {}, {}
    for name, arr in ckpt.tensors.items():
        if name.startswith("acoustic."):
            acoustic[name[len("acoustic."):]] = arr
        elif name.startswith("lm."):
            lm[name[len("lm."):]] = arr
    return acoustic, lm


def warm_start(ckpt: Checkpoint, n_phones: int, vocab: TokenVocab,
               acoustic_cfg: AcousticConfig, lm_cfg: LmConfig,
               freeze: tuple[str, ...] = (), seed: int = 0) -> WarmStart:
    """Initialize new models from a checkpoint.

    Tensors whose name and shape match are copied. Output layers may
    legitimately differ (new phone set or vocab) and stay freshly
    initialized; any other shape mismatch is an error. Names in freeze
    (full "acoustic."/"lm." prefixes) are excluded from optimizer updates.
    """
    new_acoustic = build_acoustic_model(acoustic_cfg, n_phones, seed)
    new_lm = build_lm(vocab, lm_cfg, seed + 1)
    old_acoustic, old_lm = _split_ckpt_tensors(ckpt)
    reinitialized = []
    for prefix, new_params, old_tensors in (("acoustic.", new_acoustic, old_acoustic),
                                            ("lm.", new_lm, old_lm)):
        for name, tensor in new_params.items():
            if name not in old_tensors:
                reinitialized.append(prefix + name)
                continue
            old = old_tensors[name]
            if old.shape == tensor.data.shape:
                tensor.data = np.array(old, dtype=np.float64)
            elif name.startswith("out.") or name.startswith("embed."):
                reinitialized.append(prefix + name)
            else:
                raise DataError(f"incompatible hidden-layer shape for {prefix}{name}: "
                                f"checkpoint {old.shape} vs model {tensor.data.shape}")
    return WarmStart(new_acoustic, new_lm, reinitialized, tuple(freeze))


# ---------------------------------------------------------------------------
# training
# ---------------------------------------------------------------------------

class EarlyStopper:
    """Patience counter over a to-be-minimized validation metric.

    An epoch improves only when strictly below the best seen; training
    stops once `patience` consecutive epochs fail to improve.
    """

    def __init__(self, patience: int):
        self.patience = patience
        self.best_value = float("inf")
        self.best_epoch = 0
        self.stale = 0

    def update(self, value: float, epoch: int) -> bool:
        if value < self.best_value:
            self.best_value = value
            self.best_epoch = epoch
            self.stale = 0
            return True
        self.stale += 1
        return False

    @property
    def should_stop(self) -> bool:
        return self.stale >= self.patience


@dataclass
class Utterance:
    utt_id: str
    audio: AudioBuffer
    words: list[str]
    phones: list[int]


@dataclass
class TrainResult:
    checkpoint: Checkpoint
    epoch_log: list[dict]
    best_epoch: int
    stopped_early: bool
    best_hash: str


def _prepare_utterances(manifest: CorpusManifest, lexicon: Lexicon) -> tuple[list[Utterance], int]:
    """Load audio and derive phone targets; drop utterances g2p cannot cover."""
    out = []
    skipped = 0
    for rec in manifest:
        words = normalize_text(rec.text)
        if not words or any(w not in lexicon for w in words):
            log.warning("skipping %s: transcript not covered by the lexicon", rec.utt_id)
            skipped += 1
            continue
        phones = [p for w in words for p in lexicon.pronunciations[w]]
        out.append(Utterance(rec.utt_id, load_wav(rec.audio), words, phones))
    return out, skipped


def _collect_tensors(acoustic_params: ad.Parameters, lm_params: ad.Parameters) -> dict[str, np.ndarray]:
    tensors = {}
    for name, t in acoustic_params.items():
        tensors["acoustic." + name] = t.data.astype(np.float32)
    for name, t in lm_params.items():
        tensors["lm." + name] = t.data.astype(np.float32)
    return tensors


def _greedy_per(utts: list[Utterance], feats_cache: dict[str, np.ndarray],
                acoustic_params: ad.Parameters, cfg: AcousticConfig) -> float:
    pairs = []
    for utt in utts:
        grid = acoustic_forward(acoustic_params, feats_cache[utt.utt_id], cfg).data
        pairs.append((utt.phones, ctc_greedy_decode(grid)))
    total_ref = sum(len(r) for r, _ in pairs)
    return sum(align(r, h).cost for r, h in pairs) / total_ref


def _lm_sentences(utts: list[Utterance], lexicon: Lexicon, granularity: str) -> list[list[str]]:
    return [[tok for w in utt.words
             for tok in word_tokens(w, lexicon.phone_symbols(w), granularity)]
            for utt in utts]


def train(cfg: TrainConfig, manifest: CorpusManifest) -> TrainResult:
    """Joint training run; returns the checkpoint of the best epoch."""
    inventory = default_inventory()
    train_m, val_m, _ = split_corpus(manifest, cfg.split_ratios, cfg.seed)

    words = cfg.lexicon_words
    if words is None:
        words = sorted({w for rec in manifest for w in normalize_text(rec.text)})
    lexicon = build_lexicon(words, inventory)
    for word, reason in lexicon.skipped:
        log.warning("lexicon drops %r: %s", word, reason)

    if cfg.granularity == "word":
        vocab = TokenVocab.build(lexicon.words(), "word")
    else:
        vocab = TokenVocab.build(inventory.symbols(), "phone")

    seed_seq = np.random.SeedSequence(cfg.seed)
    seeds = [int(s.generate_state(1)[0]) for s in seed_seq.spawn(2)]
    if cfg.warm_start_path is not None:
        ws = warm_start(load_checkpoint(cfg.warm_start_path), len(inventory), vocab,
                        cfg.acoustic, cfg.lm, cfg.freeze, seeds[0])
        acoustic_params, lm_params = ws.acoustic, ws.lm
        if ws.reinitialized:
            log.info("warm start reinitialized: %s", ", ".join(ws.reinitialized))
    else:
        acoustic_params = build_acoustic_model(cfg.acoustic, len(inventory), seeds[0])
        lm_params = build_lm(vocab, cfg.lm, seeds[1])

    ac_frozen = tuple(p[len("acoustic."):] for p in cfg.freeze if p.startswith("acoustic."))
    lm_frozen = tuple(p[len("lm."):] for p in cfg.freeze if p.startswith("lm."))
    ac_opt = cfg.optimizer.make(ac_frozen)
    lm_opt = cfg.lm_optimizer.make(lm_frozen)

    train_utts, n_skipped = _prepare_utterances(train_m, lexicon)
    val_utts, _ = _prepare_utterances(val_m, lexicon)
    if not train_utts or not val_utts:
        raise DataError("no usable training or validation utterances")
    if n_skipped > len(train_m) / 2:
        raise DataError(f"{n_skipped} of {len(train_m)} training utterances unusable; aborting")

    base_feats = {u.utt_id: extract_features(u.audio).values
                  for u in train_utts + val_utts}
    identity_augment = cfg.augment.is_identity()
    lm_train_sents = _lm_sentences(train_utts, lexicon, vocab.granularity)
    lm_val_sents = _lm_sentences(val_utts, lexicon, vocab.granularity)

    stopper = EarlyStopper(cfg.patience)
    best = {"acoustic": None, "lm": None, "hash": ""}
    epoch_log: list[dict] = []
    stopped_early = False

    for epoch in range(1, cfg.epochs_max + 1):
        # -- acoustic pass ---------------------------------------------------
        epoch_ctc, n_scored, n_failed, pending = 0.0, 0, 0, 0
        for i, utt in enumerate(train_utts):
            if identity_augment:
                feats = base_feats[utt.utt_id]
            else:
                rng = np.random.default_rng(
                    np.random.SeedSequence(cfg.seed, spawn_key=(cfg.augment.seed, epoch, i)))
                audio = augment_audio(utt.audio, cfg.augment, rng)
                feats = spec_augment(extract_features(audio), cfg.augment, rng).values
            if feats.shape[0] < 4 or (feats.shape[0] // 2) // 2 < min_frames(utt.phones):
                n_failed += 1
                continue
            grid = acoustic_forward(acoustic_params, feats, cfg.acoustic)
            loss = ctc_loss(grid, utt.phones)
            epoch_ctc += float(loss.data)
            n_scored += 1
            ad.backward(loss)
            pending += 1
            if pending >= cfg.batch_size:
                optimizer_step(ac_opt, acoustic_params)
                pending = 0
        if pending:
            optimizer_step(ac_opt, acoustic_params)
        if n_failed > len(train_utts) / 2:
            raise DataError(f"epoch {epoch}: {n_failed}/{len(train_utts)} utterances failed")

        # -- language model pass ---------------------------------------------
        lm_total, lm_tokens = 0.0, 0
        for sent in lm_train_sents:
            indices = [vocab.index(t) for t in sent]
            loss = sentence_loss(lm_params, indices, vocab)
            lm_total += float(loss.data) * (len(indices) + 1)
            lm_tokens += len(indices) + 1
            lm_params.zero_grad()
            ad.backward(loss)
            optimizer_step(lm_opt, lm_params)

        # -- validation --------------------------------------------------------
        val_ctc, n_val = 0.0, 0
        val_pairs = []
        for utt in val_utts:
            feats = base_feats[utt.utt_id]
            grid = acoustic_forward(acoustic_params, feats, cfg.acoustic)
            if (feats.shape[0] // 2) // 2 >= min_frames(utt.phones):
                val_ctc += float(ctc_loss(grid, utt.phones).data)
                n_val += 1
            val_pairs.append((utt.phones, ctc_greedy_decode(grid.data)))
        val_per = (sum(align(r, h).cost for r, h in val_pairs)
                   / sum(len(r) for r, _ in val_pairs))
        val_lm = corpus_loss(lm_params, lm_val_sents, vocab)

        entry = {
            "epoch": epoch,
            "train_ctc": epoch_ctc / max(n_scored, 1),
            "train_lm_ce": lm_total / max(lm_tokens, 1),
            "val_ctc": val_ctc / max(n_val, 1),
            "val_lm_ce": val_lm,
            "val_per": val_per,
            "skipped": n_failed,
        }

        if stopper.update(val_per, epoch):
            best.update(acoustic=acoustic_params.copy_values(), lm=lm_params.copy_values())
            best["hash"] = params_hash(_collect_tensors(acoustic_params, lm_params))

        if cfg.target_train_per is not None:
            train_per = _greedy_per(train_utts, base_feats, acoustic_params, cfg.acoustic)
            entry["train_per"] = train_per
            if train_per <= cfg.target_train_per:
                stopper.best_value = val_per
                stopper.best_epoch = epoch
                best.update(acoustic=acoustic_params.copy_values(), lm=lm_params.copy_values())
                best["hash"] = params_hash(_collect_tensors(acoustic_params, lm_params))
                epoch_log.append(entry)
                log.info("epoch %d: train PER %.4f reached target, stopping", epoch, train_per)
                break

        epoch_log.append(entry)
        log.info("epoch %d: train_ctc=%.4f val_ctc=%.4f val_per=%.4f lm_ce=%.4f",
                 epoch, entry["train_ctc"], entry["val_ctc"], val_per, entry["train_lm_ce"])

        if stopper.should_stop:
            stopped_early = True
            log.info("early stopping at epoch %d (best epoch %d)", epoch, stopper.best_epoch)
            break

    if best["acoustic"] is not None:
        acoustic_params.load_values(best["acoustic"])
        lm_params.load_values(best["lm"])

    config_snapshot = cfg.to_dict()
    config_snapshot["lexicon_words"] = lexicon.words()
    ckpt = Checkpoint(
        config=config_snapshot,
        inventory_lines=inventory.to_lines(),
        vocab=list(vocab.tokens),
        tensors=_collect_tensors(acoustic_params, lm_params),
        best_metric=stopper.best_value if stopper.best_value != float("inf") else None,
        epoch=stopper.best_epoch,
    )
    return TrainResult(ckpt, epoch_log, stopper.best_epoch, stopped_early, best["hash"])


# ---------------------------------------------------------------------------
# evaluation
# ---------------------------------------------------------------------------

@dataclass
class EvalResult:
    report: MetricsReport
    greedy_per: float
    greedy_wer: float
    transcripts: dict[str, str]

    def to_dict(self) -> dict:
        out = self.report.to_dict()
        out["greedy_per"] = self.greedy_per
        out["greedy_wer"] = self.greedy_wer
        return out


def restore_models(ckpt: Checkpoint) -> tuple[TrainConfig, PhoneInventory, TokenVocab,
                                              ad.Parameters, ad.Parameters, Lexicon]:
    """Rebuild configs, inventory, vocab, parameters and lexicon from a checkpoint."""
    config = dict(ckpt.config)
    lexicon_words = config.pop("lexicon_words", None)
    cfg = TrainConfig.from_dict(config)
    inventory = PhoneInventory.from_lines(ckpt.inventory_lines)
    vocab = TokenVocab(list(ckpt.vocab), cfg.granularity)
    acoustic_params = build_acoustic_model(cfg.acoustic, len(inventory), 0)
    lm_params = build_lm(vocab, cfg.lm, 0)
    old_acoustic, old_lm = _split_ckpt_tensors(ckpt)
    acoustic_params.load_values({k: np.array(v, dtype=np.float64) for k, v in old_acoustic.items()})
    lm_params.load_values({k: np.array(v, dtype=np.float64) for k, v in old_lm.items()})
    if not lexicon_words:
        raise DataError("checkpoint config carries no lexicon_words; cannot decode")
    lexicon = build_lexicon(lexicon_words, inventory)
    return cfg, inventory, vocab, acoustic_params, lm_params, lexicon


def evaluate(ckpt: Checkpoint, split: CorpusManifest,
             lm_weight: float | None = None, beam_width: int | None = None,
             word_bonus: float | None = None) -> EvalResult:
    """Decode a split and score it; also reports no-LM greedy baselines.

    greedy_per comes from raw best-path CTC decoding; greedy_wer from a
    width-1, zero-LM-weight constrained search.
    """
    if len(split) == 0:
        raise DataError("evaluation split is empty")
    cfg, inventory, vocab, acoustic_params, lm_params, lexicon = restore_models(ckpt)
    lam = cfg.decode.lm_weight if lm_weight is None else lm_weight
    beam = cfg.decode.beam_width if beam_width is None else beam_width
    bonus = cfg.decode.word_bonus if word_bonus is None else word_bonus

    utts, n_skipped = _prepare_utterances(split, lexicon)
    if not utts:
        raise DataError("no evaluable utterances in the split")
    if n_skipped:
        log.warning("evaluation skipped %d utterances", n_skipped)

    word_pairs, phone_pairs, greedy_phone_pairs, greedy_word_pairs = [], [], [], []
    transcripts = {}
    for utt in utts:
        feats = extract_features(utt.audio)
        grid = PosteriorGrid(acoustic_forward(acoustic_params, feats, cfg.acoustic).data)
        hyp = beam_decode(grid, lexicon, lm_params, vocab,
                          lm_weight=lam, word_bonus=bonus, beam_width=beam)
        greedy_words = beam_decode(grid, lexicon, None, None,
                                   lm_weight=0.0, word_bonus=0.0, beam_width=1)
        greedy_phones = ctc_greedy_decode(grid.probs)
        hyp_phones = [p for w in hyp.words for p in lexicon.pronunciations[w]]
        word_pairs.append((utt.words, hyp.words))
        phone_pairs.append((utt.phones, hyp_phones))
        greedy_phone_pairs.append((utt.phones, greedy_phones))
        greedy_word_pairs.append((utt.words, greedy_words.words))
        transcripts[utt.utt_id] = hyp.text()

    rep = report(word_pairs, phone_pairs)
    return EvalResult(
        report=rep,
        greedy_per=per(greedy_phone_pairs),
        greedy_wer=wer(greedy_word_pairs),
        transcripts=transcripts,
    )
