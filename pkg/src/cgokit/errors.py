"""Exception hierarchy shared by all modules."""


class CGOError(Exception):
    """Base class for library errors."""

    code = "error"

    def to_dict(self):
        return {"error": type(self).__name__, "code": self.code, "message": str(self)}


class InvalidGrid(CGOError, ValueError):
    code = "invalid_grid"


class GridMismatch(CGOError, ValueError):
    code = "grid_mismatch"


class NonFiniteField(CGOError, ValueError):
    code = "non_finite"


class InvalidDomain(CGOError, ValueError):
    code = "invalid_domain"


class InvalidPotential(CGOError, ValueError):
    code = "invalid_potential"


class InvalidExponent(CGOError, ValueError):
    code = "invalid_exponent"


class SupportTouchesBoundary(CGOError, ValueError):
    code = "support_touches_boundary"


class SolverFailure(CGOError, RuntimeError):
    code = "solver_failure"


class SheetOverlap(CGOError, ValueError):
    code = "sheet_overlap"


class InvalidBasePoint(CGOError, ValueError):
    code = "invalid_base_point"


class AliasRisk(CGOError, ValueError):
    code = "alias_risk"


class PhaseUnderResolved(CGOError, ValueError):
    code = "phase_under_resolved"


class InvalidExponentPair(CGOError, ValueError):
    code = "invalid_exponent_pair"


class NoDecaySignal(CGOError, ValueError):
    code = "no_decay_signal"


class NoContraction(CGOError, RuntimeError):
    code = "no_contraction"


class ResolutionMismatch(CGOError, ValueError):
    code = "resolution_mismatch"


class DirichletEigenvalueSuspected(CGOError, RuntimeError):
    code = "dirichlet_eigenvalue_suspected"


class BasisMismatch(CGOError, ValueError):
    code = "basis_mismatch"


class ReconstructionUnstable(CGOError, RuntimeError):
    code = "reconstruction_unstable"


class ConfigError(CGOError, ValueError):
    code = "config_invalid"
