from evalign.model.backbone import (
    LatentFeatures,
    TransformerCore,
    inject_lora,
    lora_modules,
)
from evalign.model.config import PRESETS, StudentConfig, paper_config, toy_config
from evalign.model.embedder import VoxelEmbedder
from evalign.model.lora import LoRALinear, lora_merge, merged_linear
from evalign.model.params import (
    count_backbone,
    count_depth_head,
    count_embedder,
    count_lora,
    count_params,
    count_seg_head,
)
from evalign.model.student import StudentModel, Teacher

__all__ = [
    "PRESETS",
    "LatentFeatures",
    "LoRALinear",
    "StudentConfig",
    "StudentModel",
    "Teacher",
    "TransformerCore",
    "VoxelEmbedder",
    "count_backbone",
    "count_depth_head",
    "count_embedder",
    "count_lora",
    "count_params",
    "count_seg_head",
    "inject_lora",
    "lora_merge",
    "lora_modules",
    "merged_linear",
    "paper_config",
    "toy_config",
]
