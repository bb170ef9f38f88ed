"""YAML run configuration.

Every subcommand reads one YAML mapping. Recognised keys (all optional unless
a subcommand needs them)::

    kernel: additive-cosine        # or {name: ..., fourier: [{p, q, amplitude, sine}, ...]}
    alpha: 1.5                     # or alphas: [0.5, 1.0, 1.5]
    eps_list: [0.25, 0.125, 0.0625, 0.03125]
    domain: [-1, 1]
    grid: {ratio: 16}              # h = min(eps_list) / ratio; or {n_interior: 1023}
    rhs: poly3                     # poly3 | bump
    torus_points: 128
    seed: 20240601
    quadrature: {near_order: 16, far_order: 6, ...}
    solve: {eps: 0.125}            # null selects the homogenised problem
    cell: {oracle: true, horizon: 40.0, dt: 0.01}
    mc: {eps: 0.125, grid_ratio: 4, paths: 100000, nodes: 5}
    getoor: {n_cells: [256, 512, 1024, 2048]}
"""

import yaml


class ConfigError(ValueError):
    pass


def load_config(path):
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = yaml.safe_load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must hold a mapping at top level")
    return data


def alphas(cfg):
    if "alphas" in cfg:
        vals = cfg["alphas"]
    elif "alpha" in cfg:
        vals = [cfg["alpha"]]
    else:
        raise ConfigError("config needs 'alpha' or 'alphas'")
    try:
        return [float(a) for a in vals]
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad alpha values {vals!r}") from exc


def section(cfg, name):
    sec = cfg.get(name) or {}
    if not isinstance(sec, dict):
        raise ConfigError(f"'{name}' must be a mapping")
    return sec
