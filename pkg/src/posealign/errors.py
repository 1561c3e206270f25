"""Exception types shared across the package."""


class PoseAlignError(Exception):
    """Base class for all package-specific errors."""


class InvalidAnnotationError(PoseAlignError):
    """Annotation data is unusable (non-finite coordinates, degenerate box)."""


class SchemaError(PoseAlignError):
    """Mismatched landmark counts or array dimensions."""


class ConfigurationError(PoseAlignError):
    """A configuration value is out of its legal range."""


class PtsParseError(PoseAlignError):
    """A .pts document violates the grammar.

    Carries the 1-based line number where parsing failed.
    """

    def __init__(self, message, line):
        super().__init__(f"line {line}: {message}")
        self.line = line


class SplitError(PoseAlignError):
    """Dataset cannot be split as requested."""


class TrainingDivergedError(PoseAlignError):
    """Loss became non-finite during training."""

    def __init__(self, epoch, batch):
        super().__init__(f"non-finite loss at epoch {epoch}, batch {batch}")
        self.epoch = epoch
        self.batch = batch


class ZeroVectorError(PoseAlignError):
    """Cosine similarity is undefined for a zero vector."""


class NoConsistentClassError(PoseAlignError):
    """No pose class is consistent with the supplied evidence."""


class InfeasiblePathError(PoseAlignError):
    """The transition structure admits no path through the sequence.

    Carries the index of the first frame at which every state died out.
    """

    def __init__(self, frame):
        super().__init__(f"no feasible path: dead end at frame {frame}")
        self.frame = frame
