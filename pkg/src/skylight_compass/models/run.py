from typing import Any

from pydantic import BaseModel

from .. import __version__


class RunManifest(BaseModel):
    """Written next to the outputs of every subcommand, `flags` replays the run.

    Carries no timestamp so that reruns produce identical bytes.
    """

    subcommand: str
    flags: dict[str, Any]
    config: dict[str, Any] = {}
    seeds: list[int] = []
    inputs: dict[str, str] = {}
    outputs: dict[str, str] = {}
    version: str = __version__
