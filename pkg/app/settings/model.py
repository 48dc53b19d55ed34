from pydantic import BaseModel, ConfigDict, Field, model_validator


__all__ = ["ModelSettings"]


class ModelSettings(BaseModel):
    """Geometry of the encoder and the projections.

    The encoder maps each (patch_height x patch_width) image patch to one cell
    of the C x H x W feature map; every projection outputs `key_dim` values.
    """
    model_config = ConfigDict(extra="forbid")

    hidden_channels: int = Field(64, gt=0)
    feature_channels: int = Field(64, gt=0)
    feature_height: int = Field(8, gt=0)
    feature_width: int = Field(4, gt=0)
    n_stripes: int = Field(8, gt=0)
    key_dim: int = Field(64, gt=0)
    share_projection: bool = False
    bn_momentum: float = Field(0.9, ge=0.0, lt=1.0)
    bn_eps: float = Field(1e-5, gt=0.0)
    init_seed: int = 0

    @model_validator(mode="after")
    def check_stripes(self):
        if self.feature_height % self.n_stripes:
            raise ValueError(
                f"feature_height={self.feature_height} is not divisible by n_stripes={self.n_stripes}"
            )
        return self

    @property
    def stripe_height(self) -> int:
        return self.feature_height // self.n_stripes
