"""Minimal HTTP client plumbing over urllib (no third-party deps).

Non-2xx responses come back as ordinary (status, headers, body) results so
callers decide what is an error; network-level failures raise
RestViewError naming the unreachable origin.
"""

from __future__ import annotations

import base64
import json
import urllib.error
import urllib.request
from typing import Dict, Optional, Tuple

from ..engine import ConflictReport, RemoteWrite
from ..errors import RestViewError, TransactionConflict

DEFAULT_TIMEOUT = 10.0


def http_request(method: str, url: str, body: Optional[bytes] = None,
                 headers: Optional[Dict[str, str]] = None,
                 credentials: Optional[Tuple[str, str]] = None,
                 timeout: float = DEFAULT_TIMEOUT):
    req = urllib.request.Request(url, data=body, method=method)
    for k, v in (headers or {}).items():
        req.add_header(k, v)
    if credentials:
        raw = f"{credentials[0]}:{credentials[1]}".encode()
        req.add_header("Authorization", "Basic " + base64.b64encode(raw).decode())
    try:
        with urllib.request.urlopen(req, timeout=timeout) as resp:
            return resp.status, dict(resp.headers), resp.read()
    except urllib.error.HTTPError as e:
        return e.code, dict(e.headers), e.read()
    except (urllib.error.URLError, OSError) as e:
        raise RestViewError(f"contributor offline: {url}",
                            unreachable=[url]) from e


def get_json(url: str, credentials=None, headers=None,
             timeout: float = DEFAULT_TIMEOUT):
    status, hdrs, body = http_request("GET", url, headers=headers,
                                      credentials=credentials, timeout=timeout)
    data = json.loads(body.decode("utf-8")) if body else None
    return status, hdrs, data


def send_remote_write(w: RemoteWrite) -> int:
    """Step (c) of the commit protocol: the one conditional remote write."""
    headers = {"Content-Type": "application/json"}
    if w.if_match:
        headers["If-Match"] = w.if_match
    body = json.dumps(w.body).encode() if w.body is not None else None
    status, _, raw = http_request(w.method, w.url, body=body, headers=headers,
                                  credentials=w.credentials)
    if status == 412:
        raise TransactionConflict(ConflictReport(
            "conflict", None, "row-read-updated"))
    if status >= 300:
        detail = raw.decode("utf-8", "replace")[:200]
        raise RestViewError(
            f"remote update failed with HTTP {status} at {w.url}: {detail}")
    return status
