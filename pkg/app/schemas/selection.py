from pydantic import BaseModel, model_validator

__all__ = ["SampleSelection"]


class SampleSelection(BaseModel):
    anchor: int
    positives: list[int]
    negatives: list[int]

    @model_validator(mode="after")
    def check_sets(self):
        if not self.positives or self.positives[0] != self.anchor:
            raise ValueError("positives must start with the anchor")
        if self.anchor in self.negatives:
            raise ValueError("the anchor cannot be a negative")
        if set(self.positives) & set(self.negatives):
            raise ValueError("positives and negatives must be disjoint")
        return self
