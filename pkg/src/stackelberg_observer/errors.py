"""Exception hierarchy.

Every error carries an ``exit_code`` so the command line front end can map
failures to the documented process exit status without a lookup table.
"""


class StackelbergError(Exception):
    exit_code = 1


# -- numerics -----------------------------------------------------------------

class MatrixError(StackelbergError, ValueError):
    pass


class NonSquare(MatrixError):
    pass


class NonSymmetric(MatrixError):
    pass


class DimensionMismatch(MatrixError):
    pass


class NotPositiveDefinite(MatrixError):
    pass


class Singular(MatrixError):
    pass


# -- solver -------------------------------------------------------------------

class NoConvergence(StackelbergError):
    exit_code = 3

    def __init__(self, max_iter, last_delta, what="iteration"):
        self.max_iter = max_iter
        self.last_delta = last_delta
        super().__init__(
            f"{what} did not converge in {max_iter} iterations "
            f"(last step {last_delta:.3e})"
        )


class GammaNotInvertible(StackelbergError):
    exit_code = 3


class SolutionInconsistent(StackelbergError):
    exit_code = 5


# -- observer -----------------------------------------------------------------

class Infeasible(StackelbergError):
    exit_code = 4

    def __init__(self, iterations, message=""):
        self.iterations = iterations
        super().__init__(message or f"LMI projections failed after {iterations} iterations")


class NotCertified(StackelbergError):
    exit_code = 4


class CertifiedButUnstable(StackelbergError):
    exit_code = 4


# -- analysis -----------------------------------------------------------------

class NotStable(StackelbergError):
    exit_code = 4


# -- configuration ------------------------------------------------------------

class ConfigError(StackelbergError):
    exit_code = 2


class ParseError(ConfigError):
    def __init__(self, line, message):
        self.line = line
        self.message = message
        super().__init__(f"line {line}: {message}")


class ValidationError(ConfigError):
    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")


class VerificationFailed(StackelbergError):
    exit_code = 5
