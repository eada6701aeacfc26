# Copyright 2026 The TargetDrop Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#     http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

"""TargetDrop: attention-guided targeted structured dropout.

Feature maps are float64 numpy arrays laid out (H, W, C); batches are
(N, H, W, C).
"""

from ._targetdrop import (
    AttentionParams,
    DropMask,
    ImageDataset,
    TinyCNN,
    apply_and_normalize,
    apply_mask,
    attention_map,
    build_mask,
    class_activation_map,
    compute_cam,
    cutout_mask,
    dropblock_mask,
    dropout_mask,
    evaluate,
    init_attention,
    learning_rate,
    make_toy_dataset,
    mask_stats,
    param_overhead,
    run_gradcheck,
    run_gradcheck_suite,
    select_target_channels,
    spatialdropout_mask,
    target_count,
    targetdrop_backward,
    targetdrop_forward,
    train,
)

__all__ = [
    "AttentionParams",
    "DropMask",
    "ImageDataset",
    "TinyCNN",
    "apply_and_normalize",
    "apply_mask",
    "attention_map",
    "build_mask",
    "class_activation_map",
    "compute_cam",
    "cutout_mask",
    "dropblock_mask",
    "dropout_mask",
    "evaluate",
    "init_attention",
    "learning_rate",
    "make_toy_dataset",
    "mask_stats",
    "param_overhead",
    "run_gradcheck",
    "run_gradcheck_suite",
    "select_target_channels",
    "spatialdropout_mask",
    "target_count",
    "targetdrop_backward",
    "targetdrop_forward",
    "train",
]
