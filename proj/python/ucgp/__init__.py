"""Curved-grid mesh patch attacks on infrared encoders (Python bindings)."""

import json as _json

from . import _ucgp
from ._ucgp import CleanReference, ToyEncoder, UcgpError, build_reference, load_reference, loss_topology

__all__ = [
    "CleanReference", "ToyEncoder", "UcgpError", "build_reference", "genome_dim", "load_reference",
    "loss_topology", "paste", "render", "to_svg", "topology_valid", "minimize",
    "synth", "stats", "optimize", "evaluate", "export",
]


def _cfg(cfg):
    # configs may be passed as dicts; the core wants JSON text
    if cfg is None:
        return ""
    return cfg if isinstance(cfg, str) else _json.dumps(cfg)


def _wrap(fn):
    def call(*args, cgm=None, **kw):
        return fn(*args, cgm=_cfg(cgm), **kw)
    call.__doc__ = fn.__doc__
    call.__name__ = fn.__name__
    return call


genome_dim = _wrap(_ucgp.genome_dim)
render = _wrap(_ucgp.render)
to_svg = _wrap(_ucgp.to_svg)
topology_valid = _wrap(_ucgp.topology_valid)


def paste(image, genome, roi, cgm=None, paste=None):
    return _ucgp.paste(image, genome, tuple(roi), cgm=_cfg(cgm), paste=_cfg(paste))


def minimize(f, lower, upper, population=20, generations=100, seed=0, query_budget=0):
    best, fitness, evals, history = _ucgp.minimize(f, list(lower), list(upper), population, generations, seed,
                                                   query_budget)
    return {"x": best, "fun": fitness, "evaluations": evals, "history": [_json.loads(h) for h in history]}


def synth(config, seed=None, out=None):
    return _ucgp.cmd_synth(str(config), seed=seed, out=out)


def stats(config, seed=None, out=None):
    return _ucgp.cmd_stats(str(config), seed=seed, out=out)


def optimize(config, seed=None, out=None):
    return _json.loads(_ucgp.cmd_optimize(str(config), seed=seed, out=out))


def evaluate(config, patch, seed=None, out=None):
    return _json.loads(_ucgp.cmd_evaluate(str(config), str(patch), seed=seed, out=out))


def export(config, patch, size_mm=200.0, out=None):
    return _ucgp.cmd_export(str(config), str(patch), size_mm=size_mm, out=out)
