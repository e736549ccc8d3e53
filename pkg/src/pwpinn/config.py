"""Strict JSON configuration for the experiment harness.

Top-level keys: problem, grid, network, track, online, optimizer, extraction,
seed. Unknown keys anywhere are rejected with the offending path, malformed
JSON with the parser's line/column.
"""

import json

from .errors import ConfigurationError
from .reference import GridSpec
from .training import OptimizerSettings, TrainConfig

_TOP_KEYS = {"problem", "grid", "network", "track", "online", "optimizer",
             "extraction", "seed"}
_SECTION_KEYS = {
    "grid": {"x_lo", "x_hi", "nx", "horizon", "nt", "lambda_segments",
             "samples", "solution_csv"},
    "samples": {"interior", "boundary", "initial"},
    "network": {"hidden_layers", "hidden_width", "fourier_k"},
    "track": {"knots", "lambda0_init", "tv_scale", "tv_scale_final",
              "ushape_delta"},
    "online": {"eta", "w0", "batches", "epochs", "interior_misfit",
               "fixed_weights"},
    "optimizer": {"steps", "step_size", "decay_every", "decay_factor",
                  "revive_every", "revive_value", "pretrain_steps",
                  "pretrain_lbfgs_iters", "track_lr_scale", "lbfgs_iters"},
    "extraction": {"threshold", "dead_band", "refit", "refit_steps",
                   "refit_lbfgs_iters"},
}


def _check_keys(section, mapping, path):
    if not isinstance(mapping, dict):
        raise ConfigurationError(f"config section '{path}' must be an object")
    unknown = set(mapping) - _SECTION_KEYS[section]
    if unknown:
        raise ConfigurationError(
            f"unknown config key(s) {sorted(unknown)} under '{path}'")


def parse_config(raw):
    """Dict -> (TrainConfig, extras). extras: solution_csv, pretrain_steps."""
    if not isinstance(raw, dict):
        raise ConfigurationError("config root must be a JSON object")
    unknown = set(raw) - _TOP_KEYS
    if unknown:
        raise ConfigurationError(f"unknown top-level config key(s) {sorted(unknown)}")

    grid_raw = dict(raw.get("grid", {}))
    _check_keys("grid", grid_raw, "grid")
    samples = dict(grid_raw.pop("samples", {}))
    _check_keys("samples", samples, "grid.samples")
    solution_csv = grid_raw.pop("solution_csv", None)
    if "lambda_segments" in grid_raw:
        grid_raw["lambda_segments"] = [tuple(s) for s in grid_raw["lambda_segments"]]
    try:
        grid = GridSpec(**grid_raw)
    except TypeError as err:
        raise ConfigurationError(f"bad grid section: {err}") from None

    network = dict(raw.get("network", {}))
    _check_keys("network", network, "network")
    track = dict(raw.get("track", {}))
    _check_keys("track", track, "track")
    online = dict(raw.get("online", {}))
    _check_keys("online", online, "online")
    optimizer = dict(raw.get("optimizer", {}))
    _check_keys("optimizer", optimizer, "optimizer")
    extraction = dict(raw.get("extraction", {}))
    _check_keys("extraction", extraction, "extraction")

    try:
        settings = OptimizerSettings(**optimizer)
    except TypeError as err:
        raise ConfigurationError(f"bad optimizer section: {err}") from None

    kwargs = dict(
        problem=raw.get("problem", "advection_diffusion_1d"),
        grid=grid,
        hidden_layers=network.get("hidden_layers", 4),
        hidden_width=network.get("hidden_width", 20),
        fourier_k=(tuple(network["fourier_k"])
                   if isinstance(network.get("fourier_k"), list)
                   else network.get("fourier_k", (8, 4))),
        n_knots=track.get("knots", 100),
        lambda0_init=track.get("lambda0_init", 0.1),
        tv_scale=track.get("tv_scale"),
        tv_scale_final=track.get("tv_scale_final"),
        ushape_delta=track.get("ushape_delta", False),
        eta=online.get("eta", 1e-4),
        w0=tuple(online.get("w0", (1 / 3, 1 / 3, 1 / 3))),
        n_batches=online.get("batches", 3),
        epochs=online.get("epochs", 3),
        include_interior_misfit=online.get("interior_misfit", True),
        fixed_weights=(tuple(online["fixed_weights"])
                       if online.get("fixed_weights") else None),
        n_interior=samples.get("interior", 1200),
        n_boundary=samples.get("boundary", 120),
        n_initial=samples.get("initial", 120),
        optimizer=settings,
        extraction_threshold=extraction.get("threshold"),
        dead_band=extraction.get("dead_band"),
        refit=extraction.get("refit", True),
        refit_steps=extraction.get("refit_steps", 200),
        refit_lbfgs_iters=extraction.get("refit_lbfgs_iters", 1500),
        seed=raw.get("seed", 0),
    )
    config = TrainConfig(**kwargs)
    extras = {"solution_csv": solution_csv}
    return config, extras


def load_config(path):
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except FileNotFoundError:
        raise ConfigurationError(f"config file not found: {path}") from None
    except json.JSONDecodeError as err:
        raise ConfigurationError(
            f"{path}:{err.lineno}:{err.colno}: malformed JSON ({err.msg})") from None
    return parse_config(raw)
