"""Two-stage training schedules.

The opposite-task strategy spends the first N iterations on the task opposite
to the target (outpainting before an inpainting target, and vice versa), then
fine-tunes on the target for K iterations. The baseline strategy trains the
target task throughout; both switch from the reconstruction-only loss bundle
to the full fine-tuning bundle at the same boundary.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

from .errors import ConfigError
from .losses import LossBundle, Stage
from .masks import TaskKind

__all__ = [
    "Strategy",
    "Schedule",
    "task_for_iteration",
    "loss_bundle_for_iteration",
    "epoch_schedule_adapter",
]


class Strategy(Enum):
    OPPOSITE = "opposite"  # pretrain on the opposite task
    BASELINE = "baseline"  # pretrain on the target task itself


@dataclass(frozen=True)
class Schedule:
    target_task: TaskKind
    strategy: Strategy
    n_pretrain: int
    k_finetune: int
    pretrain_loss: LossBundle
    finetune_loss: LossBundle

    def __post_init__(self):
        if self.n_pretrain < 0 or self.k_finetune < 0:
            raise ConfigError(
                f"iteration counts must be non-negative: N={self.n_pretrain} K={self.k_finetune}"
            )
        if self.n_pretrain + self.k_finetune == 0:
            raise ConfigError("schedule has zero total iterations")
        if self.pretrain_loss.stage is not Stage.PRETRAIN:
            raise ConfigError("pretrain_loss must carry stage=PRETRAIN")
        if self.finetune_loss.stage is not Stage.FINETUNE:
            raise ConfigError("finetune_loss must carry stage=FINETUNE")

    @property
    def total_iterations(self) -> int:
        return self.n_pretrain + self.k_finetune

    @property
    def pretrain_task(self) -> TaskKind:
        if self.strategy is Strategy.OPPOSITE:
            return self.target_task.opposite
        return self.target_task


def _check_range(s: Schedule, i: int) -> None:
    if not 0 <= i < s.total_iterations:
        raise ValueError(
            f"iteration {i} outside [0, {s.total_iterations}) for this schedule"
        )


def task_for_iteration(s: Schedule, i: int) -> TaskKind:
    """Task trained at iteration i: stage-A task before the boundary at N,
    the target task from N on."""
    _check_range(s, i)
    return s.pretrain_task if i < s.n_pretrain else s.target_task


def loss_bundle_for_iteration(s: Schedule, i: int) -> LossBundle:
    """Reconstruction-only bundle before the boundary, full bundle after."""
    _check_range(s, i)
    return s.pretrain_loss if i < s.n_pretrain else s.finetune_loss


def epoch_schedule_adapter(
    total_epochs: int,
    split: float,
    iters_per_epoch: int,
    target_task: TaskKind,
    strategy: Strategy = Strategy.OPPOSITE,
    pretrain_loss: LossBundle | None = None,
    finetune_loss: LossBundle | None = None,
) -> Schedule:
    """Convert an epoch-based plan into iteration counts.

    The first floor(split * total_epochs) epochs form stage A (on the inverse
    mask family under the opposite strategy), the remaining epochs fine-tune.
    A split that would starve either stage of a whole epoch is refused.
    """
    if not 0.0 < split < 1.0:
        raise ConfigError(f"split must be in (0, 1), got {split}")
    if total_epochs < 1 or iters_per_epoch < 1:
        raise ConfigError(
            f"need positive epochs/iterations, got {total_epochs} x {iters_per_epoch}"
        )
    stage_a_epochs = int(split * total_epochs)
    stage_b_floor = int((1.0 - split) * total_epochs)
    if stage_a_epochs < 1 or stage_b_floor < 1:
        raise ConfigError(
            f"split {split} leaves a zero-length stage over {total_epochs} epochs"
        )
    n = stage_a_epochs * iters_per_epoch
    k = (total_epochs - stage_a_epochs) * iters_per_epoch
    return Schedule(
        target_task=target_task,
        strategy=strategy,
        n_pretrain=n,
        k_finetune=k,
        pretrain_loss=pretrain_loss or LossBundle(stage=Stage.PRETRAIN),
        finetune_loss=finetune_loss
        or LossBundle(stage=Stage.FINETUNE, adv_weight=0.001, mrf_weight=0.05),
    )
