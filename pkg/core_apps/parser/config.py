from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field, model_validator

# Smaller schedule the experiments run with by default; the field defaults
# below are the full-scale values.
DESK_OVERRIDES = {"train_steps": 5000, "batch_size": 64, "warmup_steps": 500}


class ParserConfig(BaseModel):
    """Hyperparameters of the seq2seq parser."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    encoder_layers: int = Field(2, gt=0)
    encoder_heads: int = Field(2, gt=0)
    encoder_ff_dim: int = Field(256, gt=0)
    model_dim: int = Field(256, gt=0)
    decoder_layers: int = Field(1, gt=0)
    decoder_heads: int = Field(2, gt=0)
    decoder_ff_dim: int = Field(256, gt=0)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    batch_size: int = Field(512, gt=0)
    train_steps: int = Field(50_000, gt=0)
    learning_rate: float = Field(3e-4, gt=0.0)
    warmup_steps: int = Field(10_000, ge=0)
    max_query_tokens: int = Field(64, gt=0)
    log_every: int = Field(500, gt=0)

    @model_validator(mode="after")
    def check_shapes(self) -> ParserConfig:
        if self.warmup_steps > self.train_steps:
            raise ValueError(f"warmup_steps ({self.warmup_steps}) exceeds train_steps ({self.train_steps})")
        for heads in (self.encoder_heads, self.decoder_heads):
            if self.model_dim % heads:
                raise ValueError(f"model_dim {self.model_dim} is not divisible by {heads} attention heads")
        return self

    @property
    def max_action_len(self) -> int:
        return 2 * self.max_query_tokens + 64

    def desk_scale(self, **overrides) -> ParserConfig:
        return self.model_validate({**self.model_dump(), **DESK_OVERRIDES, **overrides})


class ClassifierConfig(BaseModel):
    """Changed/unchanged selection classifier on top of a V1 parser's encoder."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    train_steps: int = Field(1000, ge=0)
    batch_size: int = Field(32, gt=0)
    learning_rate: float = Field(1e-4, gt=0.0)
    hidden_dim: int = Field(512, gt=0)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    threshold: float = Field(0.5, gt=0.0, lt=1.0)
