class TritrajError(Exception):
    """Base class for every error the planner reports to the user."""

    exit_code = 1
    code = "error"

    def __init__(self, message: str, code: str | None = None):
        super().__init__(message)
        if code is not None:
            self.code = code


class InputError(TritrajError):
    code = "input"


class DegenerateTriangleError(InputError):
    code = "degenerate-triangle"


class CrossingConstraintsError(InputError):
    code = "crossing-constraints"

    def __init__(self, first: tuple[int, int], second: tuple[int, int], message: str | None = None):
        self.pair = (first, second)
        super().__init__(message or f"constraint segments {first} and {second} cross")


class ObstacleError(InputError):
    code = "in-obstacle"

    def __init__(self, what: str = "point"):
        self.what = what
        super().__init__(f"{what} in obstacle")


class OutOfDomainError(InputError):
    code = "out-of-domain"


class SequenceError(InputError):
    code = "bad-sequence"


class StateDimensionError(InputError):
    code = "state-dimension"


class ObjectiveError(InputError):
    code = "objective"


class MapError(InputError):
    code = "invalid-map"


class MapParseError(MapError):
    code = "parse-failure"


class MissingDomainError(MapError):
    code = "missing-domain"


class CrossingPolygonsError(MapError):
    code = "crossing-polygons"


class MapValidationError(MapError):
    code = "invalid-map"


class ConfigError(InputError):
    code = "config"


class NoPathError(TritrajError):
    exit_code = 2
    code = "no-path"


class PlannerError(TritrajError):
    code = "planner"
