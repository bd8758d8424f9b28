"""Exception types shared across the package."""


class DegenerateInputError(ValueError):
    """Input carries too little information for the requested decomposition
    (zero variance, rank collapse, structurally singular matrix)."""


class StructurallySingularError(DegenerateInputError):
    """No row permutation gives a demixing matrix a zero-free diagonal."""
