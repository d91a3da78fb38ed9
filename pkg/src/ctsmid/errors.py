"""Exception hierarchy shared by all ctsmid modules."""


class CtsmidError(Exception):
    """Base class for all library-specific errors."""


class DegenerateMapError(CtsmidError):
    """The bilinear map is undefined: leading DT denominator coefficient is (numerically) zero."""


class IdentificationInfeasibleError(CtsmidError):
    """No parameter vector is consistent with the data, bounds, and priors."""


class RelaxationFailureError(CtsmidError):
    """The SDP relaxation could not be solved to a usable status."""


class BoundEstimationError(CtsmidError):
    """The discretization-error bound search found no feasible point below the cap."""


class FitUndefinedError(CtsmidError):
    """FIT is undefined because the reference output is constant."""


class CliqueAuditError(CtsmidError):
    """Internal invariant failure: the generated clique decomposition violates CS1-CS6."""
