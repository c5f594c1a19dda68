"""Python access to the brwsim branching random walk library."""

import json

from ._brwsim import (
    ParseError,
    ValidationError,
    __version__,
    laplace as _laplace,
    martingale_means as _martingale_means,
    run as _run,
    selftest,
    sigma2 as _sigma2,
)

__all__ = [
    "ParseError",
    "ValidationError",
    "__version__",
    "law",
    "laplace",
    "martingale_means",
    "run",
    "selftest",
    "sigma2",
]


def law(family, normalize=True, **params):
    """Law specification as a dict, e.g. law("BinaryGaussian", mean=0.0, sd=1.0)."""
    return {"family": family, "params": params, "normalize": normalize}


def _as_json(spec):
    return spec if isinstance(spec, str) else json.dumps(spec)


def laplace(spec, t=1.0):
    return _laplace(_as_json(spec), t)


def sigma2(spec):
    return _sigma2(_as_json(spec))


def martingale_means(spec, generations, replicas, seed, workers=1):
    return _martingale_means(_as_json(spec), generations, replicas, seed, workers)


def run(command, config):
    """Run simulate, renewal, conditioned, spine, criterion or dichotomy.

    `config` is a configuration dict (or JSON text) in the same format as the
    command line --config file. Returns the run manifest as a dict.
    """
    return json.loads(_run(command, _as_json(config)))
