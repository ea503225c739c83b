# similarity/exceptions.py
"""Error types raised by the solvers, evaluators and oracles."""


class SimilarityError(Exception):
    """Base class for every error raised by the similarity package"""


class InvalidArgumentError(SimilarityError, ValueError):
    """An argument or parameter violates its stated range"""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class SingularParameterError(SimilarityError):
    """A closed form has a vanishing denominator for these parameters"""


class DomainError(SimilarityError):
    """A quantity left the set where it is defined (e.g. F crossed zero)"""

    def __init__(self, message, location=None):
        super().__init__(message)
        self.location = location


class ConvergenceError(SimilarityError):
    """An iterative solver stopped without meeting its tolerance"""

    def __init__(self, message, last_mismatch=None, best_iterate=None, iterations=None):
        super().__init__(message)
        self.last_mismatch = last_mismatch
        self.best_iterate = best_iterate
        self.iterations = iterations


class DivergenceError(SimilarityError):
    """An integration blew up before reaching the end of its interval"""

    def __init__(self, message, eta=None):
        super().__init__(message)
        self.eta = eta


class ExtrapolationError(SimilarityError):
    """A profile was requested outside the tabulated similarity domain"""


class ScenarioError(InvalidArgumentError):
    """A scenario file failed validation; diagnostics are (key, line, message)"""

    def __init__(self, message, diagnostics=None, source=None):
        diagnostics = list(diagnostics or [])
        super().__init__(message, field=diagnostics[0][0] if diagnostics else None)
        self.diagnostics = diagnostics
        self.source = source

    def __str__(self):
        if not self.diagnostics:
            return super().__str__()
        lines = [super().__str__()]
        for key, line, message in self.diagnostics:
            where = f"line {line}, " if line is not None else ''
            lines.append(f"  {self.source or '<scenario>'}: {where}{key}: {message}")
        return '\n'.join(lines)
