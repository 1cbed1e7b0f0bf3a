"""Exception hierarchy shared by the geometry, graph and CLI layers."""


class GeometryError(ValueError):
    """Base class for numerical domain violations on the manifold."""


class DomainError(GeometryError):
    """An argument lies outside the domain of a curvature-dependent function."""


class PoleError(DomainError):
    """A positive-curvature tangent hits (or crosses) a pole."""


class SingularityError(GeometryError):
    """Denominator of a Mobius operation vanished."""


class GraphError(ValueError):
    pass


class ParseError(GraphError):
    """Malformed edge list or manifold specification.

    ``position`` is a 1-based line number for edge lists and a 0-based
    character offset for manifold specs.
    """

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)


class EmptyGraphError(GraphError):
    pass


class DisconnectedError(GraphError):
    pass
