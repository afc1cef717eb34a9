"""Bayesian phase estimation with blocks of GHZ states."""

import json as _json

from ._ghzbayes import *  # noqa: F401,F403
from ._ghzbayes import run as _run


def run(command, **params):
    """Run a CLI command in-process and return its JSON document as a dict.

    Keyword names use underscores (``delta_phi=0.7``); values are converted
    with ``str``.
    """
    text = _run(command, {k: str(v) for k, v in params.items()})
    return _json.loads(text)
