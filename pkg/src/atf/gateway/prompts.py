"""Versioned prompt templates and cache-key construction.

Templates live as text assets next to this module; their digest participates
in every cache key so edits invalidate recorded responses loudly instead of
silently replaying stale ones.
"""

from __future__ import annotations

import hashlib
import re
from dataclasses import dataclass, field
from importlib import resources

TEMPLATE_NAMES = (
    "entity_type",
    "essential_columns",
    "column_descriptions",
    "column_scoring",
)

_PLACEHOLDER = re.compile(r"\{(question|columns|entity_hint|columns_with_examples|"
                          r"columns_with_descriptions)\}")


def _load(name: str) -> str:
    ref = resources.files(__package__).joinpath(f"templates/{name}.txt")
    return ref.read_text(encoding="utf-8")


_TEMPLATES: dict[str, str] = {name: _load(name) for name in TEMPLATE_NAMES}
_DIGESTS: dict[str, str] = {
    name: hashlib.sha256(text.encode("utf-8")).hexdigest()[:16]
    for name, text in _TEMPLATES.items()
}


def template_text(name: str) -> str:
    return _TEMPLATES[name]


def template_digest(name: str) -> str:
    return _DIGESTS[name]


def render(name: str, **fields: str) -> str:
    """Substitute known placeholders; literal braces elsewhere stay intact."""
    def sub(match: re.Match) -> str:
        key = match.group(1)
        return str(fields.get(key, match.group(0)))

    return _PLACEHOLDER.sub(sub, _TEMPLATES[name])


@dataclass(frozen=True)
class PromptRequest:
    """A fully rendered prompt plus enough structure for mock backends."""

    template: str
    prompt: str
    key: str
    fields: dict = field(default_factory=dict)


def cache_key(template: str, prompt: str, model: str, temperature: float,
              salt: str = "") -> str:
    material = "\x1f".join([
        template,
        template_digest(template),
        model,
        f"{temperature:.3f}",
        salt,
        prompt,
    ])
    return hashlib.sha256(material.encode("utf-8")).hexdigest()


def build_request(template: str, model: str, temperature: float,
                  salt: str = "", **fields: str) -> PromptRequest:
    prompt = render(template, **fields)
    key = cache_key(template, prompt, model, temperature, salt)
    return PromptRequest(template=template, prompt=prompt, key=key, fields=dict(fields))
