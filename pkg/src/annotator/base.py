"""
Shared infrastructure for the annotation chain.

Provides the chat providers (OpenAI-compatible via LangChain, and a scripted
stub for offline runs), retry handling and attachment upload.
"""

import hashlib
import logging
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import httpx
import openai
from langchain_core.messages import AIMessage, BaseMessage
from langchain_openai import ChatOpenAI
from tenacity import (
    AsyncRetrying,
    before_sleep_log,
    retry_if_exception_type,
    stop_after_attempt,
    wait_exponential,
)

from errors import AuthError, ProviderUnavailable, TransientProviderError
from models import ProviderConfig


logger = logging.getLogger(__name__)

DEFAULT_ENDPOINT = "https://api.openai.com/v1"


@dataclass
class ChatReply:
    text: str
    usage: dict[str, int] | None = None


class ChatProvider(Protocol):
    """Anything that can answer a conversation."""

    provider_id: str
    model_id: str

    async def send(self, messages: list[BaseMessage]) -> ChatReply:
        ...


def resolve_credential(config: ProviderConfig) -> str:
    """Read the API key from the environment variable named in the config."""
    api_key = os.getenv(config.api_key_env)
    if not api_key:
        raise AuthError(f"Environment variable {config.api_key_env} is not set")
    return api_key


def file_digest(path: str | Path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def create_http_client(config: ProviderConfig, api_key: str, **kwargs) -> httpx.AsyncClient:
    """Create an async HTTP client authorized against the provider endpoint."""
    headers = {"Authorization": f"Bearer {api_key}", **kwargs.pop("headers", {})}
    return httpx.AsyncClient(
        base_url=config.endpoint or DEFAULT_ENDPOINT,
        timeout=config.timeout,
        headers=headers,
        **kwargs,
    )


class OpenAIChatProvider:
    """Chat-completion provider for any OpenAI-compatible endpoint."""

    def __init__(self, config: ProviderConfig):
        self.config = config
        self.provider_id = config.provider
        self.model_id = config.model
        self._api_key = resolve_credential(config)
        self._llm: ChatOpenAI | None = None
        self._uploads: dict[str, str] = {}

    def get_llm(self) -> ChatOpenAI:
        if self._llm is None:
            self._llm = ChatOpenAI(
                model=self.config.model,
                base_url=self.config.endpoint,
                api_key=self._api_key,
                timeout=self.config.timeout,
                max_retries=0,  # retries are handled by send_with_retry
                **self.config.sampling,
            )
        return self._llm

    async def send(self, messages: list[BaseMessage]) -> ChatReply:
        try:
            message: AIMessage = await self.get_llm().ainvoke(messages)
        except (openai.AuthenticationError, openai.PermissionDeniedError) as e:
            raise AuthError(f"Provider rejected the credential: {e}")
        except openai.RateLimitError as e:
            raise TransientProviderError(f"Rate limited: {e}", status=429)
        except openai.APIConnectionError as e:
            raise TransientProviderError(f"Connection failed: {e}")
        except openai.InternalServerError as e:
            raise TransientProviderError(f"Server error: {e}", status=e.status_code)
        except openai.APIStatusError as e:
            raise ProviderUnavailable(e.status_code, attempts=1)

        usage = None
        if message.usage_metadata:
            usage = {k: int(v) for k, v in message.usage_metadata.items() if isinstance(v, int)}
        return ChatReply(text=str(message.content), usage=usage)

    async def upload_attachment(self, path: str | Path) -> str:
        """Upload the annotation manual once per run; returns the provider file id."""
        path = Path(path)
        digest = file_digest(path)
        if digest in self._uploads:
            return self._uploads[digest]
        async with create_http_client(self.config, self._api_key) as client:
            try:
                response = await client.post(
                    "/files",
                    data={"purpose": "user_data"},
                    files={"file": (path.name, path.read_bytes())},
                )
            except httpx.HTTPError as e:
                raise TransientProviderError(f"Attachment upload failed: {e}")
            if response.status_code in (401, 403):
                raise AuthError("Provider rejected the credential during upload")
            if response.status_code >= 400:
                raise ProviderUnavailable(response.status_code, attempts=1)
            file_id = response.json()["id"]
        logger.info(f"Uploaded {path.name} as {file_id}")
        self._uploads[digest] = file_id
        return file_id


@dataclass
class StubProvider:
    """
    Scripted provider for offline runs and tests.

    `script` items are consumed in order: a string is returned as the reply,
    an exception instance is raised.
    """
    script: list[Any]
    provider_id: str = "stub"
    model_id: str = "stub-model"
    calls: list[list[BaseMessage]] = field(default_factory=list)

    async def send(self, messages: list[BaseMessage]) -> ChatReply:
        self.calls.append(list(messages))
        if not self.script:
            raise ProviderUnavailable(None, attempts=len(self.calls))
        item = self.script.pop(0)
        if isinstance(item, BaseException):
            raise item
        return ChatReply(text=str(item))

    async def upload_attachment(self, path: str | Path) -> str:
        return f"stub-{file_digest(path)[:12]}"


def get_provider(config: ProviderConfig) -> ChatProvider:
    if config.provider in ("openai", "openai-compatible"):
        return OpenAIChatProvider(config)
    raise ValueError(f"Unknown provider: {config.provider}")


async def send_with_retry(
    provider: ChatProvider,
    messages: list[BaseMessage],
    config: ProviderConfig,
) -> tuple[ChatReply, int]:
    """
    Send a conversation, retrying transient failures with exponential backoff.

    Returns:
        (reply, number of retries used)

    Raises:
        ProviderUnavailable: retries exhausted
        AuthError: credential rejected (never retried)
    """
    attempts = 0
    try:
        async for attempt in AsyncRetrying(
            stop=stop_after_attempt(config.max_attempts),
            wait=wait_exponential(multiplier=config.backoff_base, max=config.backoff_max),
            retry=retry_if_exception_type(TransientProviderError),
            before_sleep=before_sleep_log(logger, logging.WARNING),
            reraise=True,
        ):
            with attempt:
                attempts = attempt.retry_state.attempt_number
                reply = await provider.send(messages)
    except TransientProviderError as e:
        raise ProviderUnavailable(e.status, attempts=attempts)
    return reply, attempts - 1
