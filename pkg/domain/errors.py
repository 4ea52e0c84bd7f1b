from __future__ import annotations

from typing import List, Optional


class ArenaError(Exception):
    """Base class for every error raised on purpose by this project."""


class DatasetParseError(ArenaError, ValueError):
    def __init__(self, path: str, line: int, reason: str):
        self.path = path
        self.line = line
        self.reason = reason
        super().__init__(f"{path}:{line}: {reason}")


class ReferentialIntegrityError(ArenaError, ValueError):
    def __init__(self, offending_id: str, reason: str = "unknown user id"):
        self.offending_id = offending_id
        super().__init__(f"{reason}: {offending_id!r}")


class SchemaError(ArenaError, ValueError):
    pass


class ShapeError(ArenaError, ValueError):
    pass


class NonFiniteError(ArenaError, FloatingPointError):
    pass


class GraphConsumedError(ArenaError, RuntimeError):
    pass


class TrainingError(ArenaError, RuntimeError):
    def __init__(self, message: str, round_index: Optional[int] = None):
        self.round_index = round_index
        prefix = f"round {round_index}: " if round_index is not None else ""
        super().__init__(prefix + message)


class EndpointTransportError(ArenaError, ConnectionError):
    pass


class EndpointStatusError(ArenaError, RuntimeError):
    def __init__(self, status: int, body: str = ""):
        self.status = status
        self.body = body
        super().__init__(f"endpoint returned HTTP {status}")


class EndpointResponseError(ArenaError, ValueError):
    pass


class ConfigError(ArenaError, ValueError):
    def __init__(self, issues: List[str]):
        self.issues = list(issues)
        super().__init__("; ".join(self.issues))
