"""
Chat-completion client for an external text-generation endpoint.

Wire contract: POST {base_url}/v1/chat/completions with
{model, messages: [{role, content}], temperature, top_p, max_tokens};
the reply text is choices[0].message.content.
"""
from __future__ import annotations

import json
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence

import requests

from config import settings
from config.constants import PROMPT_SIMULATION
from datasources import assets
from datasources.http_client import make_session, post_json
from domain.errors import EndpointResponseError, EndpointStatusError
from domain.policy import GenerationParams
from utils.logger import get_logger


log = get_logger(__name__)

CHAT_PATH = "/v1/chat/completions"


@dataclass
class EndpointConfig:
    base_url: str
    model: str
    timeout_sec: float = settings.HTTP_TIMEOUT_SEC
    max_concurrency: int = settings.ENDPOINT_MAX_CONCURRENCY
    api_key_env: str = settings.ENDPOINT_API_KEY_ENV

    def issues(self) -> List[str]:
        out = []
        if not self.base_url.startswith(("http://", "https://")):
            out.append(f"endpoint.base_url must be an http(s) URL, got {self.base_url!r}")
        if not self.model:
            out.append("endpoint.model must be set")
        if self.max_concurrency < 1:
            out.append(f"endpoint.max_concurrency must be >= 1, got {self.max_concurrency}")
        return out

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + CHAT_PATH

    def headers(self) -> Dict[str, str]:
        h = {"Content-Type": "application/json"}
        key = os.environ.get(self.api_key_env, "")
        if key:
            h["Authorization"] = f"Bearer {key}"
        return h

    def to_dict(self) -> Dict[str, Any]:
        # the key itself never leaves the environment
        return {"base_url": self.base_url, "model": self.model, "timeout_sec": self.timeout_sec, "max_concurrency": self.max_concurrency}


def request_body(config: EndpointConfig, prompt: str, params: GenerationParams) -> Dict[str, Any]:
    return {
        "model": config.model,
        "messages": [{"role": "user", "content": prompt}],
        "temperature": params.temperature,
        "top_p": params.top_p,
        "max_tokens": params.max_length,
    }


def parse_reply(text: str) -> str:
    try:
        data = json.loads(text)
        content = data["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as e:
        raise EndpointResponseError(f"malformed chat-completion body: {type(e).__name__}: {e}") from e
    if not isinstance(content, str):
        raise EndpointResponseError("malformed chat-completion body: content is not a string")
    return content


def external_generate(
    config: EndpointConfig,
    prompt: str,
    params: Optional[GenerationParams] = None,
    session: Optional[requests.Session] = None,
) -> str:
    params = params or GenerationParams()
    params.validate_basic()
    s = session or make_session()
    res = post_json(s, config.url, request_body(config, prompt, params), headers=config.headers(), timeout_sec=config.timeout_sec)
    if not (200 <= res.status < 300):
        log.warning("endpoint_status status=%d model=%s", res.status, config.model)
        raise EndpointStatusError(res.status, res.text[:500])
    return parse_reply(res.text)


def generate_many(config: EndpointConfig, prompts: Sequence[str], params: Optional[GenerationParams] = None) -> List[str]:
    """Bounded concurrent requests; results in prompt order, first failure re-raised."""
    session = make_session()
    with ThreadPoolExecutor(max_workers=config.max_concurrency) as pool:
        futures = [pool.submit(external_generate, config, p, params, session) for p in prompts]
        return [f.result() for f in futures]


def render_simulation(**fields: Any) -> str:
    return assets.render_template(PROMPT_SIMULATION, **fields)


class EndpointGenerator:
    """Callable prompt -> text bound to one endpoint config."""

    def __init__(self, config: EndpointConfig, params: Optional[GenerationParams] = None):
        self.config = config
        self.params = params or GenerationParams()
        self.session = make_session()

    def __call__(self, prompt: str) -> str:
        return external_generate(self.config, prompt, self.params, self.session)
