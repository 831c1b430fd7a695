# Copyright 2026 The BFT Authors.
#
# Licensed under the Apache License, Version 2.0 (the "License");
# you may not use this file except in compliance with the License.
# You may obtain a copy of the License at
#
#      http://www.apache.org/licenses/LICENSE-2.0
#
# Unless required by applicable law or agreed to in writing, software
# distributed under the License is distributed on an "AS IS" BASIS,
# WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
# See the License for the specific language governing permissions and
# limitations under the License.

import importlib.util
import json
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parents[2]
DATA = ROOT / "tests" / "data"

spec = importlib.util.spec_from_file_location("bft_export", ROOT / "tools" / "trainer" / "bft_export.py")
bft_export = importlib.util.module_from_spec(spec)
spec.loader.exec_module(bft_export)


@pytest.mark.parametrize("name,seed,head", [("eegnet_cls", 1, "classifier"), ("eegnet_reg", 2, "regressor")])
def test_checked_in_fixtures_regenerate(tmp_path, name, seed, head):
    out = tmp_path / f"{name}.bftw"
    fixtures = bft_export.export_random(seed, out, tmp_path, 12, head)
    assert out.read_bytes() == (DATA / f"{name}.bftw").read_bytes()
    assert fixtures.read_text() == (DATA / f"{name}.fixtures.json").read_text()


def test_container_round_trip(tmp_path):
    man, tensors = bft_export.read_container(DATA / "eegnet_cls.bftw")
    out = tmp_path / "copy.bftw"
    names = {np.dtype(dt): name for name, (dt, _) in bft_export.DTYPES.items()}
    bft_export.write_container(out, man, [(k, names[v.dtype], v) for k, v in tensors.items()])
    assert out.read_bytes() == (DATA / "eegnet_cls.bftw").read_bytes()
    man2, tensors2 = bft_export.read_container(out)
    assert man2 == man
    assert tensors2.keys() == tensors.keys()
    for k in tensors:
        np.testing.assert_array_equal(tensors2[k], tensors[k])


def test_forward_matches_fixtures():
    man, tensors = bft_export.read_container(DATA / "eegnet_cls.bftw")
    doc = json.loads((DATA / "eegnet_cls.fixtures.json").read_text())
    for fx in doc["fixtures"][:3]:
        trial = np.asarray(fx["input"]).reshape(doc["channels"], doc["samples"])
        feature, logits = bft_export.forward(man, tensors, trial)
        np.testing.assert_allclose(feature, fx["feature"], rtol=0, atol=1e-12)
        np.testing.assert_allclose(logits, fx["logits"], rtol=0, atol=1e-12)


def test_train_has_no_backend(tmp_path):
    assert bft_export.main(["train", "--spec", "s.json", "--out", str(tmp_path / "m"), "--fixtures", str(tmp_path)]) == 2
