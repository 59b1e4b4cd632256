from pydantic import BaseModel, ConfigDict


class Base(BaseModel):
    """Immutable value type, validated on construction."""

    model_config = ConfigDict(frozen=True, extra="forbid")
