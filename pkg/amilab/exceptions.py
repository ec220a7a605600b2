from typing import Any, Dict, Optional


class AmiLabError(Exception):
    """Base error for the laboratory. `detail` mirrors the message, `context` carries diagnostics."""

    def __init__(self, detail: str, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail)
        self.detail = detail
        self.context = context or {}


class ConfigurationError(AmiLabError, ValueError):
    pass


class NumericError(AmiLabError, ArithmeticError):
    def __init__(self, detail: str, block: Optional[str] = None, context: Optional[Dict[str, Any]] = None):
        super().__init__(detail if block is None else f"{detail} (block '{block}')", context)
        self.block = block


class ProtocolError(AmiLabError, ValueError):
    pass


class IntegrityError(AmiLabError, RuntimeError):
    pass


class InfluenceInputError(AmiLabError, ValueError):
    pass


class PairingError(AmiLabError, ValueError):
    pass


class DivergenceError(AmiLabError, RuntimeError):
    pass
