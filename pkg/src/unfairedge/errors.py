"""Exception hierarchy.

Every error carries a short machine-readable ``code`` that the CLI echoes
in its structured error output.
"""


class UnfairEdgeError(Exception):
    code = "error"


class ModelValidationError(UnfairEdgeError, ValueError):
    code = "validation"


class CycleDetected(ModelValidationError):
    code = "cycle_detected"


class CptRowNotNormalized(ModelValidationError):
    code = "cpt_row_not_normalized"

    def __init__(self, child, row, total):
        self.child = child
        self.row = row
        self.total = total
        super().__init__(f"CPT of {child!r}: row {row} sums to {total:.12g}, expected 1")


class DomainMismatch(ModelValidationError):
    code = "domain_mismatch"


class UnknownVariable(ModelValidationError, KeyError):
    code = "unknown_variable"

    def __str__(self):
        return Exception.__str__(self)


# the load path reports references to undeclared names under this name
UnknownVariableReference = UnknownVariable


class PartialAssignment(UnfairEdgeError, ValueError):
    code = "partial_assignment"


class OverlappingDoAndTarget(UnfairEdgeError, ValueError):
    code = "overlapping_do_and_target"


class MismatchedSensitiveSets(UnfairEdgeError, ValueError):
    code = "mismatched_sensitive_sets"


class NotAParent(UnfairEdgeError, ValueError):
    code = "not_a_parent"


class RootNode(UnfairEdgeError, ValueError):
    code = "root_node"


class UnknownParent(UnfairEdgeError, ValueError):
    code = "unknown_parent"


class NotUnfairEdge(UnfairEdgeError, ValueError):
    code = "not_unfair_edge"


class IncompleteSensitiveAssignment(UnfairEdgeError, ValueError):
    code = "incomplete_sensitive_assignment"


class MissingMu(UnfairEdgeError, KeyError):
    code = "missing_mu"

    def __str__(self):
        return Exception.__str__(self)


class BoundViolation(UnfairEdgeError, AssertionError):
    code = "bound_violation"


class IncompleteSpec(UnfairEdgeError, ValueError):
    code = "incomplete_spec"


class MarginalityViolated(UnfairEdgeError, ValueError):
    code = "marginality_violated"


class InvalidGridPoint(UnfairEdgeError, ValueError):
    code = "invalid_grid_point"


class EmptyDataset(UnfairEdgeError, ValueError):
    code = "empty_dataset"


class NonConvergence(UnfairEdgeError, RuntimeWarning):
    """Raised as a warning: the solver hit its budget above tolerance."""

    code = "non_convergence"
