"""Exception types shared across the package."""


class RangeSurveyError(Exception):
    """Base class for errors raised by this package."""


class ParseError(RangeSurveyError, ValueError):
    """A data file is malformed. The message names the offending line."""

    def __init__(self, path, line_no, message):
        self.path = str(path)
        self.line_no = line_no
        super().__init__(f"{path}:{line_no}: {message}")


class ConfigError(RangeSurveyError, ValueError):
    """An experiment or strategy configuration is invalid."""


class ExhaustedError(RangeSurveyError, RuntimeError):
    """No unsampled cell is left to query."""


class GenerationError(RangeSurveyError, RuntimeError):
    """Synthetic world generation failed (bad mask, bisection, or draws)."""


class IllPosedError(RangeSurveyError, ValueError):
    """A fit was requested on data that cannot identify a model."""
