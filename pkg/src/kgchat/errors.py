"""Pipeline-level errors, tagged with the stage that failed."""

from __future__ import annotations

STAGES = ("qu", "linking", "selection", "execution")


class PipelineError(Exception):
    """A turn failed at a named pipeline stage; the turn is still recorded."""

    def __init__(self, stage: str, message: str):
        if stage not in STAGES:
            raise ValueError(f"unknown pipeline stage: {stage!r}")
        super().__init__(message)
        self.stage = stage
        self.message = message
