"""Story prompts and narration: remote chat model or deterministic stub.

Prompt assembly is a pure function of the game and history, so bundles
are byte-stable and pinned by golden fixtures. Narration either sends a
bundle to any chat-completion-compatible endpoint (with retries and a
child-friendliness deny-list) or fills a local story template; the stub
hints at every rule through table-manners conflict instead of quoting
the rule sentences.
"""

from __future__ import annotations

import json
import os
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import httpx

from .board import TileGame
from .rules import (
    Composite,
    CountLimit,
    ExcludeWhere,
    ExclusiveWhere,
    MatchProperty,
    NotAdjacent,
    RuleNode,
    render_rule,
    rule_children,
)

OPENING = "opening"
CONTINUATION = "continuation"

_ENV_PREFIX = "TILETALES_NARRATOR_"


class NarratorUnavailable(RuntimeError):
    """The remote narrator could not be reached or kept failing."""


class ProtocolError(RuntimeError):
    """The endpoint answered, but not in chat-completion shape."""


class NarrativeSequenceError(ValueError):
    """Continuation requested before any opening story exists."""


@dataclass(frozen=True)
class PromptBundle:
    """One narration request: chat messages plus the context they cite.

    The structured fields (names, rules, story) let the stub narrator
    and the tests work without re-parsing prompt prose.
    """

    purpose: str
    system_instruction: str
    messages: tuple[tuple[str, str], ...]
    theme: str
    tile_names: tuple[str, ...]
    rules: tuple[RuleNode, ...]
    placed_names: tuple[str, ...] = ()
    prior_story: str = ""

    def to_text(self) -> str:
        """Canonical byte form, used for golden-fixture comparison."""
        parts = [f"=== system ===\n{self.system_instruction}\n"]
        for role, content in self.messages:
            parts.append(f"=== {role} ===\n{content}\n")
        return "".join(parts)


@dataclass(frozen=True)
class NarratorConfig:
    """Where and how to narrate; the default requires no network at all."""

    mode: str = "stub"
    endpoint: str = "https://api.openai.com/v1/chat/completions"
    model: str = "gpt-3.5-turbo"
    api_key: str = ""
    temperature: float = 0.7
    max_tokens: int = 600
    timeout: float = 30.0
    retries: int = 2
    backoff: float = 0.5
    deny_list: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if self.mode not in ("remote", "stub"):
            raise ValueError("mode must be 'remote' or 'stub'")
        if self.retries < 0:
            raise ValueError("retries must be non-negative")

    @classmethod
    def from_env(cls, env: Mapping[str, str] | None = None, **overrides) -> NarratorConfig:
        """Build a config from TILETALES_NARRATOR_* environment variables."""
        env = os.environ if env is None else env
        fields = {}
        for key in ("mode", "endpoint", "model", "api_key"):
            value = env.get(_ENV_PREFIX + key.upper())
            if value:
                fields[key] = value
        fields.update(overrides)
        return cls(**fields)

    @classmethod
    def from_file(cls, path: str | Path, **overrides) -> NarratorConfig:
        """Load a JSON config file; unknown keys are rejected."""
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(doc, dict):
            raise ValueError("narrator config file must hold a JSON object")
        if "deny_list" in doc:
            doc["deny_list"] = tuple(doc["deny_list"])
        doc.update(overrides)
        return cls(**doc)


# ---------------------------------------------------------------------------
# prompt assembly
# ---------------------------------------------------------------------------

_SYSTEM = (
    "You are a gentle storyteller. You write warm, simple stories for "
    "young children, and you never explain the rules of the world "
    "directly; the story itself shows them."
)


def _rule_lines(rules: Sequence[RuleNode]) -> str:
    if not rules:
        return "This gathering has no special customs yet."
    return "\n".join(f"- {render_rule(rule)}" for rule in rules)


def build_opening_prompt(game: TileGame) -> PromptBundle:
    """The first story request: introduce everyone, hint at every rule.

    Deterministic for a given game; the text carries each tile name, each
    rule sentence, the explain-without-stating instruction, and the
    closing choose-five request.
    """
    names = tuple(t.name for t in game.tiles.tiles)
    rules = tuple(rule_children(game.rule))
    theme = game.title or game.tiles.name
    content = (
        f"Write the beginning of a story for young children about {theme}.\n"
        f"The characters are: {', '.join(names)}.\n"
        "Mention every character by name as the gathering comes together.\n"
        "\n"
        "The gathering follows these customs:\n"
        f"{_rule_lines(rules)}\n"
        "\n"
        "Let the story hint at these customs without mentioning them "
        "explicitly, through what the characters do and feel.\n"
        "Finish by warmly asking the reader to choose five of the "
        "characters to seat at the table."
    )
    return PromptBundle(
        purpose=OPENING,
        system_instruction=_SYSTEM,
        messages=(("user", content),),
        theme=theme,
        tile_names=names,
        rules=rules,
    )


def build_continuation_prompt(
    prior_story: str, game: TileGame, placed_tile_ids: Iterable[int]
) -> PromptBundle:
    """The follow-up request after a solved board and a fresh rule.

    Raises NarrativeSequenceError when there is no opening story to
    continue from.
    """
    if not prior_story.strip():
        raise NarrativeSequenceError("no opening story to continue; narrate an opening first")
    placed = tuple(game.tiles.tile(tid).name for tid in placed_tile_ids)
    rules = tuple(rule_children(game.rule))
    theme = game.title or game.tiles.name
    # No seating paragraph when the rules changed mid-round (empty board).
    seated = f"The reader chose to seat these five: {', '.join(placed)}.\n\n" if placed else ""
    content = (
        "Here is the story so far:\n"
        f"{prior_story}\n"
        "\n"
        f"{seated}"
        "From now on the gathering follows these customs:\n"
        f"{_rule_lines(rules)}\n"
        "\n"
        "Continue the story for young children. Let it hint at the new "
        "customs without mentioning them explicitly, and finish by asking "
        "the reader to choose five characters once more."
    )
    return PromptBundle(
        purpose=CONTINUATION,
        system_instruction=_SYSTEM,
        messages=(("user", content),),
        theme=theme,
        tile_names=(),
        rules=rules,
        placed_names=placed,
        prior_story=prior_story,
    )


# ---------------------------------------------------------------------------
# stub narrator
# ---------------------------------------------------------------------------


def _conflict_sentence(rule: RuleNode) -> str:
    # Narrative paraphrases; none may reproduce render_rule output.
    if isinstance(rule, ExcludeWhere):
        return (
            f"Word went around that the friends whose {rule.property} is "
            f"{rule.value} were far too busy to join the table this time."
        )
    if isinstance(rule, ExclusiveWhere):
        return (
            f"Tonight the table was set just for friends whose "
            f"{rule.property} is {rule.value}, and everyone else cheered them on."
        )
    if isinstance(rule, MatchProperty):
        return (
            f"The guests felt most at ease beside others who shared their "
            f"{rule.property}, and kept shuffling until it was so."
        )
    if isinstance(rule, NotAdjacent):
        return (
            f"Friends whose {rule.property} is {rule.value} started squabbling "
            f"whenever they sat right beside friends whose {rule.property2} is "
            f"{rule.value2}, so everyone left a little room."
        )
    if isinstance(rule, CountLimit):
        return (
            f"There were only {rule.number} comfy chairs for friends whose "
            f"{rule.property} is {rule.value}, and not a single one more."
        )
    if isinstance(rule, Composite):  # defensive: bundles carry leaves
        return " ".join(_conflict_sentence(child) for child in rule.children)
    raise ValueError(f"not a rule node: {rule!r}")


def stub_story(bundle: PromptBundle) -> str:
    """A deterministic local story shaped by the bundle's context."""
    conflicts = " ".join(_conflict_sentence(rule) for rule in bundle.rules)
    if not conflicts:
        conflicts = "For once there were no special customs, and the evening felt easy."
    if bundle.purpose == OPENING:
        roll_call = ", ".join(bundle.tile_names)
        return (
            f"Once upon a time, a great gathering was called for {bundle.theme}. "
            f"One by one the friends arrived: {roll_call}. "
            f"The long table stood ready under the lanterns. {conflicts} "
            "Now, dear reader, look at all the friends and choose five of "
            "them to seat at the table."
        )
    if bundle.placed_names:
        settled = (
            f"And so it was settled: {', '.join(bundle.placed_names)} took "
            "their places at the table, and the evening carried on."
        )
    else:
        settled = "The friends were still milling about when word of a change went around."
    return (
        f"{settled} But as the plates were cleared, things "
        f"changed at {bundle.theme}. {conflicts} "
        "Look at the friends once more, dear reader, and choose five of "
        "them to seat at the table."
    )


# ---------------------------------------------------------------------------
# remote narrator
# ---------------------------------------------------------------------------


def _chat_payload(bundle: PromptBundle, config: NarratorConfig) -> dict:
    messages = [{"role": "system", "content": bundle.system_instruction}]
    messages += [{"role": role, "content": content} for role, content in bundle.messages]
    return {
        "model": config.model,
        "messages": messages,
        "temperature": config.temperature,
        "max_tokens": config.max_tokens,
    }


def _extract_story(response: httpx.Response) -> str:
    try:
        data = response.json()
    except json.JSONDecodeError as exc:
        raise ProtocolError(f"endpoint reply is not JSON: {exc}") from None
    try:
        story = data["choices"][0]["message"]["content"]
    except (KeyError, IndexError, TypeError):
        raise ProtocolError("endpoint reply lacks choices[0].message.content") from None
    if not isinstance(story, str):
        raise ProtocolError("story content is not text")
    return story


def _request_story(
    bundle: PromptBundle,
    config: NarratorConfig,
    client: httpx.Client,
    sleep: Callable[[float], None],
) -> str:
    headers = {}
    if config.api_key:
        headers["Authorization"] = f"Bearer {config.api_key}"
    last_error: Exception | None = None
    for attempt in range(config.retries + 1):
        if attempt:
            sleep(config.backoff * (2 ** (attempt - 1)))
        try:
            response = client.post(
                config.endpoint,
                json=_chat_payload(bundle, config),
                headers=headers,
                timeout=config.timeout,
            )
        except httpx.HTTPError as exc:
            last_error = exc
            continue
        if response.status_code == 429 or response.status_code >= 500:
            last_error = NarratorUnavailable(f"endpoint answered {response.status_code}")
            continue
        if response.status_code != 200:
            raise NarratorUnavailable(f"endpoint rejected the request: {response.status_code}")
        return _extract_story(response)
    raise NarratorUnavailable(f"narrator unreachable after {config.retries + 1} attempts: {last_error}")


def _hits_deny_list(story: str, deny_list: tuple[str, ...]) -> bool:
    lowered = story.lower()
    return any(term.lower() in lowered for term in deny_list)


def narrate(
    bundle: PromptBundle,
    config: NarratorConfig,
    *,
    client: httpx.Client | None = None,
    sleep: Callable[[float], None] = time.sleep,
) -> str:
    """Turn a prompt bundle into story text.

    Stub mode never touches the network. Remote mode retries transient
    failures with exponential backoff; a deny-list hit triggers one
    re-request, and a second hit falls back to the stub story.
    """
    if config.mode == "stub":
        return stub_story(bundle)
    owned = client is None
    client = client or httpx.Client()
    try:
        story = _request_story(bundle, config, client, sleep)
        if config.deny_list and _hits_deny_list(story, config.deny_list):
            story = _request_story(bundle, config, client, sleep)
            if _hits_deny_list(story, config.deny_list):
                return stub_story(bundle)
        return story
    finally:
        if owned:
            client.close()
