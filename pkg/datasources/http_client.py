from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Dict, Optional

import requests
from requests.adapters import HTTPAdapter
from urllib3.util.retry import Retry

from config import settings
from domain.errors import EndpointTransportError


@dataclass
class HttpResult:
    status: int
    text: str


def make_session(retries: int = settings.HTTP_RETRIES, backoff: float = settings.HTTP_BACKOFF) -> requests.Session:
    """Session with urllib3 retries on throttling and 5xx, POST included."""
    s = requests.Session()
    policy = Retry(
        total=retries,
        backoff_factor=backoff,
        status_forcelist=[429, 500, 502, 503, 504],
        allowed_methods=["GET", "POST"],
        raise_on_status=False,
    )
    adapter = HTTPAdapter(max_retries=policy, pool_maxsize=max(1, settings.ENDPOINT_MAX_CONCURRENCY))
    s.mount("http://", adapter)
    s.mount("https://", adapter)
    return s


def post_json(
    session: requests.Session,
    url: str,
    body: Dict[str, Any],
    headers: Optional[Dict[str, str]] = None,
    timeout_sec: float = settings.HTTP_TIMEOUT_SEC,
) -> HttpResult:
    """
    POST a JSON body. Connection failures, timeouts and exhausted retries
    surface as EndpointTransportError; any HTTP status is returned as-is.
    """
    try:
        r = session.post(url, json=body, headers=headers, timeout=timeout_sec)
    except requests.RequestException as e:
        raise EndpointTransportError(f"POST {url}: {type(e).__name__}: {e}") from e
    return HttpResult(status=int(r.status_code), text=r.text or "")
