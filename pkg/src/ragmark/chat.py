"""Chat-completion clients: remote HTTP, deterministic stub, and replay.

The stub answers from the prompt text alone with fixed rules, so the
whole pipeline runs offline and reproducibly. The replay provider
serves recorded responses keyed by a hash of the canonical request;
the recorder wraps any provider and writes that transcript.
"""

from __future__ import annotations

import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass
from pathlib import Path

from ragmark.errors import InvalidConfig, ProviderError, ReplayMiss

log = logging.getLogger(__name__)

_RETRY_DELAYS = (0.5, 1.0, 2.0)
_SENTENCE_SPLIT = re.compile(r"(?<=[.!?])\s+")
_WORD = re.compile(r"[^\W_]+")


@dataclass(frozen=True)
class ChatConfig:
    kind: str = "stub"  # "remote" | "stub" | "replay"
    model_id: str = "stub-chat"
    base_url: str = ""
    api_key_env: str = "RAGMARK_API_KEY"
    temperature: float = 0.0
    timeout: float = 60.0
    max_in_flight: int = 4
    replay_path: str | None = None
    record_path: str | None = None

    def __post_init__(self) -> None:
        if self.kind not in ("remote", "stub", "replay"):
            raise InvalidConfig(f"unknown chat kind {self.kind!r}")
        if self.kind == "remote" and not self.base_url:
            raise InvalidConfig("remote chat needs a non-empty base_url")
        if self.kind == "replay" and not self.replay_path:
            raise InvalidConfig("replay chat needs replay_path")
        if self.kind == "replay" and self.record_path:
            raise InvalidConfig("recording a replay run is circular")


class ChatProvider:
    model_id: str = "chat"
    temperature: float = 0.0

    def complete(self, messages: list[dict]) -> str:
        raise NotImplementedError


def request_key(model_id: str, temperature: float, messages: list[dict]) -> str:
    """Stable hash of a completion request, used by record/replay."""
    canonical = json.dumps(
        {"messages": messages, "model": model_id, "temperature": temperature},
        sort_keys=True,
        separators=(",", ":"),
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class RemoteChatProvider(ChatProvider):
    """POST {base_url}/v1/chat/completions with retry on 429/5xx."""

    def __init__(self, config: ChatConfig, session=None) -> None:
        if config.kind != "remote":
            raise InvalidConfig("RemoteChatProvider needs a remote config")
        self.config = config
        self.model_id = config.model_id
        self.temperature = config.temperature
        if session is None:
            import requests

            session = requests.Session()
        self.session = session

    def complete(self, messages: list[dict]) -> str:
        import os

        key = os.environ.get(self.config.api_key_env, "")
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        url = self.config.base_url.rstrip("/") + "/v1/chat/completions"
        payload = {
            "model": self.model_id,
            "messages": messages,
            "temperature": self.temperature,
        }
        last_status = None
        last_body = ""
        for attempt, delay in enumerate((*_RETRY_DELAYS, None)):
            resp = self.session.post(
                url, json=payload, headers=headers, timeout=self.config.timeout
            )
            if resp.status_code == 200:
                data = resp.json()
                try:
                    return data["choices"][0]["message"]["content"]
                except (KeyError, IndexError, TypeError) as exc:
                    raise ProviderError(
                        f"malformed chat response: {exc}"
                    ) from exc
            last_status = resp.status_code
            last_body = resp.text[:200]
            retryable = resp.status_code == 429 or resp.status_code >= 500
            if not retryable or delay is None:
                break
            log.warning(
                "chat request got HTTP %s, retry %d in %.1fs",
                resp.status_code, attempt + 1, delay,
            )
            time.sleep(delay)
        raise ProviderError(f"chat endpoint returned HTTP {last_status}: {last_body}")


def _distinctive_words(text: str, count: int = 3) -> list[str]:
    """Longest unique words, longest first, ties alphabetical."""
    words = {w.lower() for w in _WORD.findall(text)}
    return sorted(words, key=lambda w: (-len(w), w))[:count]


def _sentences(text: str) -> list[str]:
    parts = [s.strip() for s in _SENTENCE_SPLIT.split(text.strip())]
    return [s for s in parts if s]


def _squash(text: str) -> str:
    return " ".join(text.split())


class DeterministicStubChat(ChatProvider):
    """Offline rule-based completions for tests and the bundled demo.

    Question generation: picks the three longest unique words of the
    fenced passage, asks about them, and answers with the first
    sentence containing the longest one. Context answering: returns
    the context sentence sharing the most distinctive words with the
    question. Everything is a pure function of the prompt.
    """

    def __init__(self, model_id: str = "stub-chat", temperature: float = 0.0) -> None:
        self.model_id = model_id
        self.temperature = temperature

    def complete(self, messages: list[dict]) -> str:
        content = ""
        for msg in reversed(messages):
            if msg.get("role") == "user":
                content = msg.get("content", "")
                break
        if "```" in content and "QUESTION:" in content:
            return self._make_qa(content)
        if "Question:" in content and "Context:" in content:
            return self._answer(content)
        return "OK."

    def _make_qa(self, content: str) -> str:
        fence_start = content.find("```")
        fence_end = content.find("```", fence_start + 3)
        passage = content[fence_start + 3:fence_end].strip()
        terms = _distinctive_words(passage)
        if not terms:
            return "QUESTION: \nANSWER: "
        if len(terms) == 1:
            topic = terms[0]
        else:
            topic = ", ".join(terms[:-1]) + " and " + terms[-1]
        question = f"What does the passage say about {topic}?"
        answer = ""
        for sentence in _sentences(passage):
            if terms[0] in sentence.lower():
                answer = _squash(sentence)
                break
        if not answer:
            answer = _squash(" ".join(passage.split()[:12]))
        return f"QUESTION: {question}\nANSWER: {answer}"

    def _answer(self, content: str) -> str:
        ctx_start = content.find("Context:")
        q_start = content.find("Question:", ctx_start)
        context = content[ctx_start + len("Context:"):q_start]
        question_line = content[q_start + len("Question:"):].split("\n", 1)[0]
        # drop source markers so they never leak into answers
        context = re.sub(r"\[source \d+: [^\]]*\]", " ", context)
        terms = _distinctive_words(question_line, count=5)
        best = ""
        best_score = -1
        for sentence in _sentences(context):
            lowered = sentence.lower()
            score = sum(1 for t in terms if t in lowered)
            if score > best_score:
                best = sentence
                best_score = score
        return _squash(best) if best else "No answer found in context."


class ReplayChatProvider(ChatProvider):
    """Serves a recorded transcript; any unknown request is an error."""

    def __init__(self, path: str | Path, model_id: str = "stub-chat",
                 temperature: float = 0.0) -> None:
        self.model_id = model_id
        self.temperature = temperature
        self.path = Path(path)
        self._responses: dict[str, str] = {}
        with open(self.path, "r", encoding="utf-8") as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                obj = json.loads(line)
                self._responses[obj["key"]] = obj["response"]

    def complete(self, messages: list[dict]) -> str:
        key = request_key(self.model_id, self.temperature, messages)
        try:
            return self._responses[key]
        except KeyError:
            raise ReplayMiss(
                f"no recorded response for request {key[:12]}… "
                f"(model {self.model_id!r}, transcript {self.path.name})"
            ) from None


class RecordingChatProvider(ChatProvider):
    """Wraps a provider and appends (key, response) pairs to a JSONL file."""

    def __init__(self, inner: ChatProvider, path: str | Path) -> None:
        self.inner = inner
        self.model_id = inner.model_id
        self.temperature = inner.temperature
        self.path = Path(path)
        self._seen: set[str] = set()

    def complete(self, messages: list[dict]) -> str:
        response = self.inner.complete(messages)
        key = request_key(self.model_id, self.temperature, messages)
        if key not in self._seen:
            self._seen.add(key)
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(
                    json.dumps(
                        {"key": key, "response": response}, ensure_ascii=False
                    )
                    + "\n"
                )
        return response


def make_chat_provider(config: ChatConfig) -> ChatProvider:
    provider: ChatProvider
    if config.kind == "stub":
        provider = DeterministicStubChat(
            model_id=config.model_id, temperature=config.temperature
        )
    elif config.kind == "replay":
        provider = ReplayChatProvider(
            config.replay_path, model_id=config.model_id,
            temperature=config.temperature,
        )
    else:
        provider = RemoteChatProvider(config)
    if config.record_path:
        provider = RecordingChatProvider(provider, config.record_path)
    return provider
