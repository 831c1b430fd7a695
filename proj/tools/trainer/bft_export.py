#!/usr/bin/env python3
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
"""Model export side of the offline trainer.

Writes EEGNet-shaped networks in the BFTW weight container and emits golden
(input, feature, logits) fixtures computed by an independent numpy forward
pass. Only the export half lives here:

  bft_export.py export-random --seed 1 --out model.bftw --fixtures DIR
  bft_export.py train --spec spec.json --out model.bftw --fixtures DIR

`train` exits with status 2 (no training backend in this repository).
"""

import argparse
import json
import struct
import sys
from pathlib import Path

import numpy as np

MAGIC = b"BFTW"
VERSION = 1
DTYPES = {"f32": ("<f4", 4), "f64": ("<f8", 8), "i8": ("<i1", 1), "i32": ("<i4", 4)}


def write_container(path, manifest, tensors):
    """tensors: list of (name, dtype, ndarray) in payload order."""
    entries, chunks, offset = [], [], 0
    for name, dtype, arr in tensors:
        raw = np.ascontiguousarray(arr, dtype=DTYPES[dtype][0]).tobytes()
        entries.append({"name": name, "dtype": dtype, "shape": list(arr.shape), "offset": offset, "nbytes": len(raw)})
        chunks.append(raw)
        offset += len(raw)
    man = dict(manifest)
    man["tensors"] = entries
    text = json.dumps(man, sort_keys=True, separators=(",", ":")).encode("utf-8")
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as f:
        f.write(MAGIC + struct.pack("<IQ", VERSION, len(text)) + text + b"".join(chunks))


def read_container(path):
    data = Path(path).read_bytes()
    if data[:4] != MAGIC:
        raise ValueError("bad magic")
    version, mlen = struct.unpack("<IQ", data[4:16])
    if version != VERSION:
        raise ValueError(f"unsupported version {version}")
    man = json.loads(data[16:16 + mlen])
    payload = data[16 + mlen:]
    tensors = {}
    for e in man.pop("tensors"):
        dt, size = DTYPES[e["dtype"]]
        n = int(np.prod(e["shape"])) if e["shape"] else 1
        tensors[e["name"]] = np.frombuffer(payload, dtype=dt, count=n, offset=e["offset"]).reshape(e["shape"])
    return man, tensors


# Forward pass. Activations are (maps, rows, cols).

def conv_temporal(x, w, bias=None):
    out_maps, in_maps, _, k = w.shape
    pad_l = (k - 1) // 2
    pad_r = k - 1 - pad_l
    xp = np.pad(x, ((0, 0), (0, 0), (pad_l, pad_r)))
    t = x.shape[2]
    y = np.zeros((out_maps, x.shape[1], t))
    for o in range(out_maps):
        for i in range(in_maps):
            for j in range(k):
                y[o] += w[o, i, 0, j] * xp[i, :, j:j + t]
        if bias is not None:
            y[o] += bias[o]
    return y


def depthwise(x, w, bias=None):
    out_maps, _, kh, _ = w.shape
    mult = out_maps // x.shape[0]
    rows = x.shape[1] - kh + 1
    y = np.zeros((out_maps, rows, x.shape[2]))
    for o in range(out_maps):
        src = x[o // mult]
        for r in range(rows):
            y[o, r] = w[o, 0, :, 0] @ src[r:r + kh]
        if bias is not None:
            y[o] += bias[o]
    return y


def separable(x, wd, wp, bias=None):
    per_map = np.concatenate([conv_temporal(x[i:i + 1], wd[i:i + 1]) for i in range(x.shape[0])])
    y = np.einsum("oi,irc->orc", wp[:, :, 0, 0], per_map)
    if bias is not None:
        y += bias[:, None, None]
    return y


def batch_norm(x, gamma, beta, mean, var, eps):
    scale = gamma / np.sqrt(var + eps)
    return x * scale[:, None, None] + (beta - mean * scale)[:, None, None]


def elu(x, alpha=1.0):
    return np.where(x < 0, alpha * np.expm1(np.minimum(x, 0)), x)


def avg_pool(x, p):
    cols = x.shape[2] // p
    return x[:, :, :cols * p].reshape(x.shape[0], x.shape[1], cols, p).mean(axis=3)


def forward(man, tensors, trial):
    """Returns (feature, outputs) for one channels × samples trial."""
    x = np.asarray(trial, dtype=np.float64)[None]
    feature = None
    for i, layer in enumerate(man["layers"]):
        t = lambda n: tensors.get(f"layers.{i}.{n}")  # noqa: E731
        f64 = lambda n: None if t(n) is None else t(n).astype(np.float64)  # noqa: E731
        kind = layer["kind"]
        if kind == "conv2d_temporal":
            x = conv_temporal(x, f64("weight"), f64("bias"))
        elif kind == "depthwise_conv":
            x = depthwise(x, f64("weight"), f64("bias"))
        elif kind == "separable_conv":
            x = separable(x, f64("weight"), f64("pointwise"), f64("bias"))
        elif kind == "batch_norm":
            x = batch_norm(x, f64("gamma"), f64("beta"), f64("running_mean"), f64("running_var"), layer["eps"])
        elif kind == "elu":
            x = elu(x, layer.get("alpha", 1.0))
        elif kind == "avg_pool":
            x = avg_pool(x, layer["pool"])
        elif kind == "flatten":
            x = x.reshape(-1)
            feature = x.copy()
        elif kind == "dense":
            x = f64("weight") @ x + (f64("bias") if f64("bias") is not None else 0.0)
        else:
            raise ValueError(f"unknown layer kind {kind}")
    return feature, x


def random_eegnet(rng, channels, samples, rate_hz, outputs, head, f1=4, depth=2, k1=17, k2=8, pool1=4, pool2=4):
    """Random-init EEGNet with non-trivial batch-norm statistics."""
    f2 = f1 * depth
    layers, tensors = [], []

    def add(name, arr):
        tensors.append((f"layers.{len(layers)}.{name}", "f32", arr))

    def bn(maps):
        add("beta", rng.normal(0, 0.1, maps))
        add("gamma", rng.uniform(0.5, 1.5, maps))
        add("running_mean", rng.normal(0, 0.2, maps))
        add("running_var", rng.uniform(0.5, 2.0, maps))
        layers.append({"kind": "batch_norm", "maps": maps, "eps": 1e-5, "momentum": 0.1})

    add("weight", rng.normal(0, 1 / np.sqrt(k1), (f1, 1, 1, k1)))
    layers.append({"kind": "conv2d_temporal", "in_maps": 1, "out_maps": f1, "kernel": k1, "bias": False})
    bn(f1)
    add("weight", rng.normal(0, 1 / np.sqrt(channels), (f1 * depth, 1, channels, 1)))
    layers.append({"kind": "depthwise_conv", "in_maps": f1, "out_maps": f1 * depth, "kernel": channels, "bias": False})
    bn(f1 * depth)
    layers.append({"kind": "elu", "alpha": 1.0})
    layers.append({"kind": "avg_pool", "pool": pool1})
    add("pointwise", rng.normal(0, 1 / np.sqrt(f1 * depth), (f2, f1 * depth, 1, 1)))
    add("weight", rng.normal(0, 1 / np.sqrt(k2), (f1 * depth, 1, 1, k2)))
    layers.append({"kind": "separable_conv", "in_maps": f1 * depth, "out_maps": f2, "kernel": k2, "bias": False})
    bn(f2)
    layers.append({"kind": "elu", "alpha": 1.0})
    layers.append({"kind": "avg_pool", "pool": pool2})
    layers.append({"kind": "flatten"})
    d = f2 * (samples // pool1 // pool2)
    add("bias", rng.normal(0, 0.1, outputs))
    add("weight", rng.normal(0, 1 / np.sqrt(d), (outputs, d)))
    layers.append({"kind": "dense", "in_features": d, "out_features": outputs, "bias": True})
    manifest = {
        "format": "bft-model",
        "kind": "backbone",
        "head": {"kind": head, "outputs": outputs},
        "input": {"channels": channels, "samples": samples, "rate_hz": rate_hz},
        "layers": layers,
        "metadata": {"ea": False, "fitter": "random-init", "architecture": {"F1": f1, "D": depth, "F2": f2,
                                                                           "kernel1": k1, "kernel2": k2,
                                                                           "pool1": pool1, "pool2": pool2}},
    }
    return manifest, tensors


def export_random(seed, out, fixtures_dir, count, head):
    rng = np.random.default_rng(seed)
    channels, samples, rate = 4, 128, 128.0
    outputs = 3 if head == "classifier" else 1
    manifest, tensors = random_eegnet(rng, channels, samples, rate, outputs, head)
    write_container(out, manifest, tensors)
    # Reload so the fixtures see exactly the stored (f32) weights.
    man, stored = read_container(out)
    fixtures = []
    for _ in range(count):
        trial = rng.normal(0, 1, (channels, samples))
        feature, logits = forward(man, stored, trial)
        fixtures.append({"input": trial.reshape(-1).tolist(), "feature": feature.tolist(), "logits": logits.tolist()})
    doc = {"model": Path(out).name, "channels": channels, "samples": samples, "head": head, "tolerance": 1e-4,
           "fixtures": fixtures}
    fixtures_dir = Path(fixtures_dir)
    fixtures_dir.mkdir(parents=True, exist_ok=True)
    name = Path(out).stem + ".fixtures.json"
    (fixtures_dir / name).write_text(json.dumps(doc, separators=(",", ":")) + "\n")
    return fixtures_dir / name


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="cmd", required=True)
    er = sub.add_parser("export-random", help="random-init EEGNet plus golden fixtures")
    er.add_argument("--seed", type=int, default=0)
    er.add_argument("--out", required=True)
    er.add_argument("--fixtures", required=True)
    er.add_argument("--count", type=int, default=12)
    er.add_argument("--head", choices=["classifier", "regressor"], default="classifier")
    tr = sub.add_parser("train", help="train and export (no backend here)")
    tr.add_argument("--spec", required=True)
    tr.add_argument("--out", required=True)
    tr.add_argument("--fixtures", required=True)
    args = parser.parse_args(argv)
    if args.cmd == "train":
        print("error: no training backend in this repository; use `bft fit-backbone` or export-random",
              file=sys.stderr)
        return 2
    path = export_random(args.seed, args.out, args.fixtures, args.count, args.head)
    print(f"wrote {args.out} and {path}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
