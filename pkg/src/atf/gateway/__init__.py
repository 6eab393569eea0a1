from .backends import (
    BackendConfig,
    ChatBackend,
    Fixture,
    FixtureChatBackend,
    HttpChatBackend,
    MockChatBackend,
    mock_overlap_score,
)
from .cache import ResponseCache
from .embeddings import EmbeddingBackend, FixtureEmbedder, HashingEmbedder, cosine
from .prompts import PromptRequest, build_request, cache_key, render, template_digest, template_text
from .service import (
    CANONICAL_ENTITY_TYPES,
    ColumnDescription,
    EntityDistribution,
    ModelGateway,
    match_headers,
)

__all__ = [
    "BackendConfig",
    "CANONICAL_ENTITY_TYPES",
    "ChatBackend",
    "ColumnDescription",
    "EmbeddingBackend",
    "EntityDistribution",
    "Fixture",
    "FixtureChatBackend",
    "FixtureEmbedder",
    "HashingEmbedder",
    "HttpChatBackend",
    "MockChatBackend",
    "ModelGateway",
    "PromptRequest",
    "ResponseCache",
    "build_request",
    "cache_key",
    "cosine",
    "match_headers",
    "mock_overlap_score",
    "render",
    "template_digest",
    "template_text",
]
