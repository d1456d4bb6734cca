"""
Transformer encoder-decoder over query tokens emitting OPEN/CLOSE/COPY actions.

The encoder and decoder body are shared; each named output head owns the
final pre-softmax projection over the fixed actions plus its own copy query.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass

import torch
from torch import nn

from .config import ParserConfig
from .exceptions import DuplicateHead, UnknownHead
from .vocab import ActionVocabulary, Vocabulary

MAIN_HEAD = "main"


@dataclass
class EncodedBatch:
    source_ids: torch.Tensor  # [B, S]
    source_pad: torch.Tensor  # [B, S] True at padding
    input_ids: torch.Tensor  # [B, T]
    copy_positions: torch.Tensor  # [B, T] query index fed back for COPY inputs, 0 elsewhere
    input_is_copy: torch.Tensor  # [B, T]
    target_pad: torch.Tensor  # [B, T]
    targets: torch.Tensor | None = None  # [B, T], ignore index at masked positions


class OutputHead(nn.Module):
    def __init__(self, model_dim: int, n_actions: int):
        super().__init__()
        self.vocab = nn.Linear(model_dim, n_actions)
        self.copy_query = nn.Linear(model_dim, model_dim)
        self.scale = 1.0 / math.sqrt(model_dim)

    def forward(self, states: torch.Tensor, memory: torch.Tensor, source_pad: torch.Tensor) -> torch.Tensor:
        vocab_logits = self.vocab(states)
        copy_scores = torch.einsum("btd,bsd->bts", self.copy_query(states), memory) * self.scale
        copy_scores = copy_scores.masked_fill(source_pad[:, None, :], float("-inf"))
        return torch.cat([vocab_logits, copy_scores], dim=-1)


class ParserModel(nn.Module):
    def __init__(
        self,
        config: ParserConfig,
        token_vocab: Vocabulary,
        action_vocab: ActionVocabulary,
        heads=(MAIN_HEAD,),
    ):
        super().__init__()
        self.config = config
        self.token_vocab = token_vocab
        self.action_vocab = action_vocab
        dim = config.model_dim

        self.token_embedding = nn.Embedding(len(token_vocab), dim, padding_idx=0)
        self.source_positions = nn.Embedding(config.max_query_tokens, dim)
        encoder_layer = nn.TransformerEncoderLayer(
            dim, config.encoder_heads, config.encoder_ff_dim, config.dropout, batch_first=True
        )
        self.encoder = nn.TransformerEncoder(encoder_layer, config.encoder_layers, enable_nested_tensor=False)

        # fixed actions, then the COPY marker and the start symbol
        self.action_embedding = nn.Embedding(len(action_vocab) + 2, dim)
        self.target_positions = nn.Embedding(config.max_action_len, dim)
        self.copy_input = nn.Linear(dim, dim)
        decoder_layer = nn.TransformerDecoderLayer(
            dim, config.decoder_heads, config.decoder_ff_dim, config.dropout, batch_first=True
        )
        self.decoder = nn.TransformerDecoder(decoder_layer, config.decoder_layers)

        self.heads = nn.ModuleDict({name: OutputHead(dim, len(action_vocab)) for name in heads})

    @property
    def head_names(self) -> list[str]:
        return list(self.heads.keys())

    def require_head(self, name: str) -> OutputHead:
        if name not in self.heads:
            raise UnknownHead(f"head {name!r} not in {self.head_names}")
        return self.heads[name]

    def encode(self, source_ids: torch.Tensor, source_pad: torch.Tensor) -> torch.Tensor:
        positions = torch.arange(source_ids.size(1), device=source_ids.device)
        embedded = self.token_embedding(source_ids) + self.source_positions(positions)[None]
        return self.encoder(embedded, src_key_padding_mask=source_pad)

    def decode(self, batch: EncodedBatch, memory: torch.Tensor) -> torch.Tensor:
        length = batch.input_ids.size(1)
        positions = torch.arange(length, device=memory.device)
        embedded = self.action_embedding(batch.input_ids) + self.target_positions(positions)[None]
        copied = memory.gather(1, batch.copy_positions[..., None].expand(-1, -1, memory.size(-1)))
        embedded = embedded + self.copy_input(copied) * batch.input_is_copy[..., None].to(embedded.dtype)
        causal = torch.triu(torch.ones(length, length, dtype=torch.bool, device=memory.device), diagonal=1)
        return self.decoder(
            embedded,
            memory,
            tgt_mask=causal,
            tgt_key_padding_mask=batch.target_pad,
            memory_key_padding_mask=batch.source_pad,
        )

    def forward(self, batch: EncodedBatch, head: str = MAIN_HEAD) -> torch.Tensor:
        output = self.require_head(head)
        memory = self.encode(batch.source_ids, batch.source_pad)
        states = self.decode(batch, memory)
        return output(states, memory, batch.source_pad)

    def add_head(self, name: str, clone_of: str | None = None) -> ParserModel:
        """Attach a fresh head, or a parameter copy of ``clone_of``; the shared body is untouched."""
        if name in self.heads:
            raise DuplicateHead(f"head {name!r} already exists")
        if clone_of is not None:
            head = copy.deepcopy(self.require_head(clone_of))
        else:
            head = OutputHead(self.config.model_dim, len(self.action_vocab))
        self.heads[name] = head.to(next(self.parameters()).device)
        return self

    def clone(self) -> ParserModel:
        return copy.deepcopy(self)


def build_parser(
    config: ParserConfig,
    token_vocab: Vocabulary,
    action_vocab: ActionVocabulary,
    heads=(MAIN_HEAD,),
    seed: int = 0,
) -> ParserModel:
    """Freshly initialised parser; initialisation depends only on ``seed``."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = ParserModel(config, token_vocab, action_vocab, heads=heads)
    return model.eval()
