"""Exception hierarchy. Each category maps to a CLI exit code."""


class QuencodeError(Exception):
    category = "run"


class ConfigError(QuencodeError):
    category = "config"


class DimensionError(QuencodeError, ValueError):
    category = "model"


class EncodingError(QuencodeError, ValueError):
    category = "model"


class ModelError(QuencodeError):
    category = "model"


class MetricsError(QuencodeError, ValueError):
    category = "metrics"


class DataError(QuencodeError):
    category = "data"


class ParseError(DataError):
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class PolicyError(QuencodeError, ValueError):
    category = "config"


class PlotError(QuencodeError):
    category = "data"
