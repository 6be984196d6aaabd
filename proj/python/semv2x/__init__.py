"""Semantic V2X collision-prediction simulator (C++ core)."""

import json as _json

from ._core import *  # noqa: F401,F403
from ._core import run_e2e as _run_e2e


def e2e_report(yaml: str = "", post: str = "", gap: int = 8) -> dict:
    """Run the end-to-end experiment and return the parsed report."""
    return _json.loads(_run_e2e(yaml, post, gap))
