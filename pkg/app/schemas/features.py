from pydantic import Field

from app.autodiff import Tensor

from .base import ArrayBaseModel

__all__ = ["PooledFeatures", "ProjectedKeys"]


class PooledFeatures(ArrayBaseModel):
    global_features: Tensor = Field(description="B x C average over the whole map")
    stripe_features: list[Tensor] = Field(description="N_l tensors of B x C, one per horizontal stripe")


class ProjectedKeys(ArrayBaseModel):
    v_global: Tensor = Field(description="B x d unit keys")
    v_stripes: Tensor = Field(description="B x N_l x d unit keys")
    v_local: Tensor = Field(description="B x d unit keys of the projected stripe concatenation")

    def detached(self, row: int) -> tuple:
        return (
            self.v_global.data[row].copy(),
            self.v_stripes.data[row].copy(),
            self.v_local.data[row].copy(),
        )
