# Copyright 2026 The VKIE Authors.
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

"""Python front end for the vkie extraction library."""

import json
import os

import torch  # noqa: F401  loads libtorch for the extension

from . import _vkie
from ._vkie import ConfigError, Error, LoadError, RequestError, ShapeError, decode_bio2

__all__ = [
    "ConfigError",
    "Error",
    "Extractor",
    "LoadError",
    "RequestError",
    "ShapeError",
    "decode_bio2",
    "experiment_config",
    "generate_corpus",
    "load_experiment",
    "train",
]


def _dump(config):
    if config is None:
        return ""
    if isinstance(config, (str, os.PathLike)) and os.path.exists(config):
        return json.dumps(load_experiment(config))
    return config if isinstance(config, str) else json.dumps(config)


def experiment_config(config=None):
    """Experiment config as a dict, defaults filled in."""
    return json.loads(_vkie.experiment_config(_dump(config)))


def load_experiment(path):
    return json.loads(_vkie.load_experiment(os.fspath(path)))


def generate_corpus(config, out_dir):
    """Generate a corpus from a config dict or file; returns (train, dev, test) sizes."""
    return _vkie.generate_corpus(_dump(config), os.fspath(out_dir))


def train(config, kind, out_dir, corpus_dir=None, er_checkpoints=()):
    """Train one model kind ("uni", "pip_btc", "pip_er", "pip_el") over the configured seeds."""
    return json.loads(
        _vkie.train(
            _dump(config),
            kind,
            os.fspath(out_dir),
            os.fspath(corpus_dir) if corpus_dir else "",
            [os.fspath(p) for p in er_checkpoints],
        )
    )


class Extractor:
    """Loaded model that turns a frame image plus OCR boxes into an extraction record."""

    def __init__(self, impl):
        self._impl = impl

    @classmethod
    def load_uni(cls, checkpoint):
        return cls(_vkie.Extractor.load_uni(os.fspath(checkpoint)))

    @classmethod
    def load_pip(cls, btc, er, el):
        return cls(_vkie.Extractor.load_pip(os.fspath(btc), os.fspath(er), os.fspath(el)))

    @property
    def model(self):
        return self._impl.model

    @property
    def config_hash(self):
        return self._impl.config_hash

    def extract(self, image, boxes, frame_id=""):
        """image: PNG path or PNG bytes. boxes: list of {"text", "bbox"|"quad"} or its JSON."""
        boxes_json = boxes if isinstance(boxes, str) else json.dumps(boxes)
        if isinstance(image, (bytes, bytearray)):
            out = self._impl.extract_png(bytes(image), boxes_json, frame_id)
        else:
            out = self._impl.extract_file(os.fspath(image), boxes_json, frame_id)
        return json.loads(out)
