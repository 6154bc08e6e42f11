# Copyright 2026 The coopsgd Authors
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

"""Python access to the cooperative SGD simulator."""

import json

from ._core import (
    ConfigError,
    InvalidDimension,
    ValidationError,
    best_easgd_alpha,
    easgd_matrix,
    fully_connected,
    generalized_elastic,
    power_deviation_norm,
    preset_names,
    ring,
    simulate_quadratic,
    spectral_gap,
    stationarity_bound,
    uniform_zeta,
    zeta_threshold,
)
from . import _core


def run_experiment(spec, write_files=False):
    """Run an experiment spec (dict) and return its summary as a dict."""
    return json.loads(_core.run_experiment_json(json.dumps(spec), write_files))


def validate_spec(spec):
    """Return the canonical form of a spec, raising ValueError if invalid."""
    return json.loads(_core.validate_spec_json(json.dumps(spec)))


__all__ = [
    "ConfigError",
    "InvalidDimension",
    "ValidationError",
    "best_easgd_alpha",
    "easgd_matrix",
    "fully_connected",
    "generalized_elastic",
    "power_deviation_norm",
    "preset_names",
    "ring",
    "run_experiment",
    "simulate_quadratic",
    "spectral_gap",
    "stationarity_bound",
    "uniform_zeta",
    "validate_spec",
    "zeta_threshold",
]
