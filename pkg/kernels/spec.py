from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class KernelKind(str, Enum):
    WL = "wl"
    SP = "sp"
    GL3 = "gl3"


class KernelSpec(BaseModel):
    model_config = ConfigDict(frozen=True)

    kind: KernelKind
    h: Optional[int] = Field(default=None, ge=0)
    normalize: bool = True
    # graphlet kernel only: count connected graphlets (triangle, path) alone
    graphlet_connected_only: bool = False

    @model_validator(mode="after")
    def _height_only_for_wl(self):
        if self.kind == KernelKind.WL and self.h is None:
            raise ValueError("the WL kernel needs an iteration count h")
        if self.kind != KernelKind.WL and self.h is not None:
            raise ValueError(f"h is only meaningful for the WL kernel, not {self.kind.value}")
        return self

    def describe(self) -> str:
        text = self.kind.value
        if self.h is not None:
            text += f"(h={self.h})"
        if self.kind == KernelKind.GL3 and self.graphlet_connected_only:
            text += "[connected]"
        return text + (" normalized" if self.normalize else " raw")
