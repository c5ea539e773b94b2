"""Exception types shared across the package."""


class ValidationError(ValueError):
    """Invalid input: bad geometry, malformed record, inconsistent shapes."""


class DegenerateDataError(RuntimeError):
    """Input is well-formed but carries no usable information (e.g. empty
    ground truth, no query with a true loop)."""


class DegenerateGeometryError(DegenerateDataError):
    """Geometric configuration with no defined answer (parallel planes,
    coincident camera centers, line through the camera center)."""


class AnnotationError(ValidationError):
    """Malformed annotation/calibration file; carries file position."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:" if line is None else f"{path}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
