from evalign.distill.gradcheck import PARAM_GROUPS, grad_check
from evalign.distill.loss import LossWeights, masked_distill_loss
from evalign.distill.synthetic import (
    PairedSample,
    SceneSpec,
    Shape,
    render_sample,
    synth_paired_dataset,
)
from evalign.distill.train import (
    LOSS_CSV_COLUMNS,
    TrainConfig,
    TrainState,
    make_state,
    prepare_sample,
    rows_to_csv,
    run_distillation,
    train_step,
)

__all__ = [
    "LOSS_CSV_COLUMNS",
    "LossWeights",
    "PARAM_GROUPS",
    "PairedSample",
    "SceneSpec",
    "Shape",
    "TrainConfig",
    "TrainState",
    "grad_check",
    "make_state",
    "masked_distill_loss",
    "prepare_sample",
    "render_sample",
    "rows_to_csv",
    "run_distillation",
    "synth_paired_dataset",
    "train_step",
]
