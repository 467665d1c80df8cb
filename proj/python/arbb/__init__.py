# Copyright 2026 The ARBB Authors. All Rights Reserved.
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
# ==============================================================================

from ._arbb import (
    BudgetError,
    ConfigError,
    Error,
    FormatError,
    MetricError,
    Model,
    ShapeError,
    acc_norm,
    bit_depth_reduce,
    derive_seed,
    jpeg,
    load_cifar10,
    merge_reports,
    packed_gemm,
    robustness_score,
    run,
    synth_dataset,
)

__all__ = [
    "BudgetError",
    "ConfigError",
    "Error",
    "FormatError",
    "MetricError",
    "Model",
    "ShapeError",
    "acc_norm",
    "bit_depth_reduce",
    "derive_seed",
    "jpeg",
    "load_cifar10",
    "merge_reports",
    "packed_gemm",
    "robustness_score",
    "run",
    "synth_dataset",
]
