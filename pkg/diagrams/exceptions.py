"""Errors raised by the path-analysis library."""


class PathAnalysisError(Exception):
    pass


class DiagramError(PathAnalysisError):
    """Unknown node, or a structurally invalid diagram handed to a numeric op."""


class DiagramParseError(PathAnalysisError):
    def __init__(self, line: int, message: str):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class QueryError(PathAnalysisError):
    """Malformed query (X = Y, endpoint in the conditioning set, bad position)."""


class WalkNotOpenError(PathAnalysisError):
    pass


class PathLimitExceeded(PathAnalysisError):
    def __init__(self, cap: int):
        self.cap = cap
        super().__init__(f"more than {cap} open paths")


class NumericalError(PathAnalysisError):
    pass


class NameCollisionError(PathAnalysisError):
    pass


class PremiseError(PathAnalysisError):
    pass


class InapplicableError(PathAnalysisError):
    def __init__(self, report, message: str = "factorization not applicable"):
        self.report = report
        kinds = ", ".join(f.label for f in report.failures)
        super().__init__(f"{message}: {kinds}" if kinds else message)


class GenerationError(PathAnalysisError):
    pass
