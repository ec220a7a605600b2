"""Per-timestep attack detection from observable episode signals with a recurrent classifier."""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

import numpy as np
import pandas as pd
from scipy import stats

from ..exceptions import ConfigurationError
from ..nn.gru import gru_backward, gru_forward, gru_predict, init_gru
from ..nn.losses import bce_with_logits
from ..nn.optim import AdamState, adam_step
from ..rl.buffer import RolloutBuffer
from ..rl.policy import encode_actions
from ..rl.rollout import SlotPolicy, collect_rollouts
from ..envs.factory import make_env
from ..schemas.defense import DetectionSignal, DetectorConfig
from ..schemas.env import EnvConfig
from ..utils.audit import principal
from ..utils.csv_writer import write_frame
from ..utils.running_stats import RunningMeanStd
from ..utils.seeding import episode_seeds, rng_for

logger = logging.getLogger(__name__)

DETECTOR_PREFIX = "detector/"
CURVE_COLUMNS = ["t", "accuracy", "auc"]


@dataclass
class EpisodeDataset:
    """Signals (E, T, F), validity mask (E, T) and one label per episode (E,)."""

    x: np.ndarray
    mask: np.ndarray
    labels: np.ndarray

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def concat(self, other: "EpisodeDataset") -> "EpisodeDataset":
        return EpisodeDataset(
            np.concatenate([self.x, other.x]),
            np.concatenate([self.mask, other.mask]),
            np.concatenate([self.labels, other.labels]),
        )

    def save(self, path: str | Path) -> Path:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("wb") as fh:
            np.savez(fh, x=self.x, mask=self.mask, labels=self.labels)
        return path

    @classmethod
    def load(cls, path: str | Path) -> "EpisodeDataset":
        with np.load(path) as data:
            return cls(data["x"], data["mask"].astype(bool), data["labels"])


def episode_signal(buffer: RolloutBuffer, signal: DetectionSignal, action_space) -> np.ndarray:
    """(K, T, F) signal of every column; only observable quantities, never parameters."""
    if signal == DetectionSignal.OBS:
        x = buffer.observations.reshape(buffer.horizon, buffer.n_columns, -1)
    elif signal == DetectionSignal.STATE:
        x = buffer.states
    elif signal == DetectionSignal.ACTION:
        x = encode_actions(buffer.actions, action_space)
    else:
        raise ConfigurationError(f"Unknown detection signal '{signal}'")
    x = x * buffer.mask[..., None]
    return np.transpose(x, (1, 0, 2)).astype(np.float64)


def collect_dataset(
    env_config: EnvConfig,
    victims: SlotPolicy,
    adversary: Optional[SlotPolicy],
    adversary_slot: int,
    episodes: int,
    signal: DetectionSignal,
    label: int,
    seed: int,
    part: int,
) -> EpisodeDataset:
    """Episodes under attack (`adversary` given) or benign play, labelled `label`."""
    envs = [make_env(env_config, adversary_slot=adversary_slot) for _ in range(episodes)]
    with principal("environment"):
        buffer = collect_rollouts(
            envs,
            episode_seeds(seed, "dataset", episodes, part),
            victims,
            rng_for(seed, "dataset", part),
            adversary=adversary,
            adversary_slot=adversary_slot,
            adversary_present=[adversary is not None] * episodes,
        )
    x = episode_signal(buffer, signal, envs[0].spec.action_space)
    return EpisodeDataset(x, buffer.mask.T.copy(), np.full(episodes, float(label)))


class GruDetector:
    """Recurrent encoder over a signal prefix with a logistic head at every timestep."""

    def __init__(self, input_dim: int, config: DetectorConfig, rng: np.random.Generator):
        self.config = config
        self.params = init_gru(input_dim, config.hidden_dim, rng, prefix=DETECTOR_PREFIX, owner="detector")
        self.optimizer = AdamState.for_params(self.params, config.lr)
        self.normalizer = RunningMeanStd()

    def _inputs(self, data: EpisodeDataset) -> np.ndarray:
        return self.normalizer.normalize(data.x) * data.mask[..., None]

    def fit(self, data: EpisodeDataset, rng: np.random.Generator) -> list:
        """Masked BCE over every valid timestep; returns the per-epoch mean loss."""
        self.normalizer.update(data.x[data.mask])
        x = self._inputs(data)
        targets = np.repeat(data.labels[:, None], x.shape[1], axis=1)
        weights = data.mask.astype(np.float64)
        losses = []
        for epoch in range(self.config.epochs):
            order = rng.permutation(len(data))
            epoch_loss = []
            for start in range(0, len(data), self.config.batch_size):
                idx = order[start:start + self.config.batch_size]
                logits, _ = gru_forward(self.params, x[idx], DETECTOR_PREFIX)
                loss, d_logits = bce_with_logits(logits, targets[idx], weights[idx])
                grads = gru_backward(self.params, x[idx], d_logits, DETECTOR_PREFIX)
                self.params, self.optimizer = adam_step(self.params, grads, self.optimizer)
                epoch_loss.append(loss)
            losses.append(float(np.mean(epoch_loss)))
            logger.debug("detector epoch=%d loss=%.4f", epoch, losses[-1])
        return losses

    def predict(self, data: EpisodeDataset) -> np.ndarray:
        """(E, T) attack probabilities."""
        return gru_predict(self.params, self._inputs(data), DETECTOR_PREFIX)


def timestep_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    positives = scores[labels == 1]
    negatives = scores[labels == 0]
    if positives.size == 0 or negatives.size == 0:
        return float("nan")
    u = stats.mannwhitneyu(positives, negatives, alternative="two-sided").statistic
    return float(u / (positives.size * negatives.size))


def accuracy_curve(probs: np.ndarray, data: EpisodeDataset) -> pd.DataFrame:
    """Accuracy and AUC at each timestep over the episodes still running."""
    rows = []
    for t in range(probs.shape[1]):
        alive = data.mask[:, t]
        if not alive.any():
            break
        p, y = probs[alive, t], data.labels[alive]
        rows.append({"t": t, "accuracy": float(np.mean((p >= 0.5) == (y == 1))), "auc": timestep_auc(p, y)})
    return pd.DataFrame(rows, columns=CURVE_COLUMNS)


def permute_labels(data: EpisodeDataset, rng: np.random.Generator) -> EpisodeDataset:
    return EpisodeDataset(data.x, data.mask, rng.permutation(data.labels))


def shuffle_control(
    train_set: EpisodeDataset, heldout: EpisodeDataset, seed: int
) -> Tuple[EpisodeDataset, EpisodeDataset]:
    """Permute the labels of both sets; class counts are kept and no label carries signal.

    Scoring against the permuted held-out labels gives the permutation null of the AUC.
    """
    return (
        permute_labels(train_set, rng_for(seed, "detector", 1)),
        permute_labels(heldout, rng_for(seed, "detector", 3)),
    )


@dataclass
class DetectionResult:
    detector: GruDetector
    losses: list
    heldout_curve: pd.DataFrame
    train_curve: pd.DataFrame
    paths: dict


def train_detector(
    env_config: EnvConfig,
    victims: SlotPolicy,
    baseline_adversary: SlotPolicy,
    ami_adversary: SlotPolicy,
    adversary_slot: int,
    config: DetectorConfig,
    seed: int,
    out_dir: Optional[Path] = None,
) -> DetectionResult:
    """Train on benign vs baseline-attack episodes and evaluate on held-out AMI episodes."""
    if config.benign_episodes != config.attacked_episodes:
        logger.warning(
            "Detector training classes are imbalanced: %d benign vs %d attacked episodes",
            config.benign_episodes, config.attacked_episodes,
        )
    args = (env_config, victims)
    signal = config.signal
    train_set = collect_dataset(
        *args, None, adversary_slot, config.benign_episodes, signal, 0, seed, 0
    ).concat(collect_dataset(*args, baseline_adversary, adversary_slot, config.attacked_episodes, signal, 1, seed, 1))
    heldout = collect_dataset(
        *args, None, adversary_slot, config.heldout_episodes, signal, 0, seed, 2
    ).concat(collect_dataset(*args, ami_adversary, adversary_slot, config.heldout_episodes, signal, 1, seed, 3))

    fit_set, eval_set = train_set, heldout
    if config.shuffle_labels:
        fit_set, eval_set = shuffle_control(train_set, heldout, seed)

    detector = GruDetector(train_set.x.shape[2], config, rng_for(seed, "detector", 0))
    losses = detector.fit(fit_set, rng_for(seed, "detector", 2))
    train_curve = accuracy_curve(detector.predict(fit_set), fit_set)
    heldout_curve = accuracy_curve(detector.predict(eval_set), eval_set)
    logger.info(
        "detector signal=%s final-step heldout accuracy=%.3f auc=%.3f",
        signal.value, heldout_curve["accuracy"].iloc[-1], heldout_curve["auc"].iloc[-1],
    )

    paths = {}
    if out_dir is not None:
        out_dir = Path(out_dir)
        paths["train_dataset"] = str(train_set.save(out_dir / f"detect_{signal.value}_train.npz"))
        paths["heldout_dataset"] = str(heldout.save(out_dir / f"detect_{signal.value}_heldout.npz"))
        paths["accuracy"] = str(write_frame(out_dir / f"detect_{signal.value}_accuracy.csv", heldout_curve))
        paths["train_accuracy"] = str(write_frame(out_dir / f"detect_{signal.value}_train_accuracy.csv", train_curve))
    return DetectionResult(detector, losses, heldout_curve, train_curve, paths)
