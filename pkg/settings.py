"""Numeric defaults for the EWA toolkit.

Loads ewa_defaults.json once. Falls back to the built-in table when the file
is missing so the library still works from a bare checkout.
"""

import os
import sys
import json
import copy

_defaults = None

_FALLBACK = {
    "version": "fallback",
    "sampler": {
        "max_restarts": 8,
        "divergence_threshold": 1e10,
        "step_shrink": 2.0,
        "block_size": 1024,
        "thin": 100,
    },
    "lasso": {
        "max_sweeps": 10000,
        "tol": 1e-8,
        "gauss_grid_size": 50,
        "gauss_grid_decades": 4,
    },
    "noise_check": {
        "draws": 100000,
        "bins": 20,
        "ks_constant": 1.63,
        "family_sigma": 3.0,
    },
    "bench": {
        "example1_reps": 50,
        "example2_reps": 25,
        "workers": 1,
    },
}


def load_defaults():
    """Return the defaults dict, reading ewa_defaults.json on first call."""
    global _defaults
    if _defaults is not None:
        return _defaults

    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "ewa_defaults.json")
    if os.path.exists(path):
        with open(path, "r") as f:
            loaded = json.load(f)
        # Sections missing from the file keep their built-in values
        merged = copy.deepcopy(_FALLBACK)
        for section, values in loaded.items():
            if isinstance(values, dict) and section in merged:
                merged[section].update(values)
            else:
                merged[section] = values
        _defaults = merged
    else:
        print("[Defaults] ewa_defaults.json not found, using built-in values", file=sys.stderr)
        _defaults = copy.deepcopy(_FALLBACK)
    return _defaults


def section(name):
    """Shortcut for one section of the defaults, e.g. section("sampler")."""
    return load_defaults()[name]
