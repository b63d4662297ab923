"""Exception taxonomy for salemlab.

Exit-code mapping used by the CLI:
  ValidationError  -> 2   (bad input, guard violations, domain errors)
  BudgetError      -> 3   (a configured budget would be exceeded)
  PrecisionError   -> 4   (requested precision cannot certify the result)
  anything else    -> 5   (internal error)
"""


class SalemLabError(Exception):
    """Base class for all salemlab errors."""


class ValidationError(SalemLabError):
    """Input or guard violation; maps to CLI exit code 2."""


class BudgetError(SalemLabError):
    """A configured budget (words, steps, candidates) would be exceeded."""


class PrecisionError(SalemLabError):
    """Guard bits exhausted or a certification failed at the working precision."""


# -- parsing / substitutions -------------------------------------------------

class SubstSyntaxError(ValidationError):
    """Malformed substitution source line."""


class AlphabetError(ValidationError):
    """Symbol out of range or letter without an image rule."""


class SizeError(BudgetError):
    """A substitution image would exceed the configured length cap."""


class CapError(BudgetError):
    """Language harvesting would exceed the word-length budget."""


class ConvergenceError(SalemLabError):
    """An iteration failed to converge at the working precision."""


# -- polynomial / spectral algebra -------------------------------------------

class DegreeError(ValidationError):
    """Polynomial degree exceeds the configured cap."""


class RootIsolationError(PrecisionError):
    """Root inclusion disks could not be certified disjoint."""


class DegenerateSpectrumError(ValidationError):
    """Eigenvalues are not simple enough to build a dual eigenbasis."""


# -- lattices -----------------------------------------------------------------

class RankError(ValidationError):
    """Generating vectors do not span full rank."""


class EnumerationBudgetError(BudgetError):
    """Lattice point enumeration would exceed the candidate budget."""


# -- digit expansions ----------------------------------------------------------

class CertificationError(PrecisionError):
    """A per-step bound assertion failed during trace construction."""


class TraceTooShortError(ValidationError):
    """Trace does not reach the scale required by a predicate."""


class DenominatorError(ValidationError):
    """A lower bound on a denominator is not positive at this step."""


class DomainError(ValidationError):
    """Argument outside the mathematical domain of the operation."""


class ClassificationError(ValidationError):
    """Operation requires a different number class (Pisot vs Salem)."""


# -- spectral / flows ----------------------------------------------------------

class ModeError(ValidationError):
    """Operation requires a specific suspension mode."""


class MeanNotZeroError(ValidationError):
    """Test function must have zero mean for this bound."""


# -- searches ------------------------------------------------------------------

class SearchBudgetError(BudgetError):
    """Search exhausted its candidate budget without a verified hit."""


class VerificationFailure(SalemLabError):
    """A candidate passed the inequality system but failed direct verification."""


class SingularityWarning(UserWarning):
    """Determinant below the certification threshold; result may be degenerate."""
