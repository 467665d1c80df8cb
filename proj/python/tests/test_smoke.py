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

import json
from pathlib import Path

import numpy as np
import pytest

import arbb


def test_metrics():
    assert arbb.acc_norm(0.45, 0.90) == pytest.approx(0.5)
    assert round(arbb.robustness_score([37.66, 2.83, 9.45, 11.35, 21.38]), 2) == 16.53
    with pytest.raises(arbb.MetricError):
        arbb.acc_norm(0.1, 0.0)
    with pytest.raises(ValueError):
        arbb.robustness_score([])


def test_synth_is_deterministic():
    x, y = arbb.synth_dataset(num_classes=3, per_class=4, seed=2)
    x2, y2 = arbb.synth_dataset(num_classes=3, per_class=4, seed=2)
    assert x.shape == (12, 3, 16, 16)
    assert x.dtype == np.float32
    assert np.array_equal(x, x2) and y == y2
    assert x.min() >= 0.0 and x.max() <= 1.0


def test_packed_gemm_matches_numpy():
    rng = np.random.default_rng(0)
    a = rng.choice([-1.0, 1.0], size=(5, 200)).astype(np.float32)
    w = rng.choice([-1.0, 1.0], size=(7, 200)).astype(np.float32)
    assert np.array_equal(arbb.packed_gemm(a, w), a @ w.T)


def test_transforms():
    x = np.full((1, 3, 8, 8), 0.3, dtype=np.float32)
    assert np.allclose(arbb.jpeg(x, 90), x, atol=1 / 255 + 1e-6)
    r = arbb.bit_depth_reduce(x, 1)
    assert set(np.unique(r)) <= {0.0, 1.0}
    with pytest.raises(arbb.ConfigError):
        arbb.jpeg(x, 0)


def test_train_and_attack(tmp_path):
    config = {
        "seed": 1,
        "dataset": {"source": "synthetic", "train_per_class": 10, "test_per_class": 3,
                    "synthetic": {"num_classes": 3}},
        "model": {"name": "bnn", "scheme": "bnn"},
        "train": {"epochs": 1, "batch_size": 10, "milestones": []},
        "attacks": [{"method": "fgsm"}],
    }
    path = tmp_path / "config.json"
    path.write_text(json.dumps(config))
    assert arbb.run("train", path, out=tmp_path) == 0
    assert arbb.run("attack", path, out=tmp_path) == 0
    report = json.loads((tmp_path / "report_bnn.json").read_text())
    assert report["model"] == "bnn"

    model = arbb.Model.load(tmp_path / "bnn.ckpt")
    assert model.scheme == "BNN" and model.num_classes == 3
    x, y = arbb.synth_dataset(num_classes=3, per_class=2, seed=5)
    assert model.logits(x).shape == (6, 3)
    own = model.predict(x)
    r = model.attack(x, own, "pgd", epsilon=0.0)
    assert r["acc"] == 1.0 and r["acc_norm"] == 1.0
    with pytest.raises(arbb.ConfigError):
        model.attack(x, y, "lbfgs")


def test_configs_match_schema():
    jsonschema = pytest.importorskip("jsonschema")
    root = Path(__file__).resolve().parents[2]
    schema = json.loads((root / "docs" / "config.schema.json").read_text())
    jsonschema.Draft202012Validator.check_schema(schema)
    for path in sorted((root / "configs").glob("*.json")):
        jsonschema.validate(json.loads(path.read_text()), schema)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"seed": 1, "sed": 2}, schema)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({"attacks": [{"method": "pgd", "eps": 0.1}]}, schema)
