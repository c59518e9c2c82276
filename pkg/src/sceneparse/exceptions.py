"""Exception hierarchy shared by every stage.

Each class carries the process exit code the CLI maps it to.
"""


class SceneParseError(Exception):
    exit_code = 1


class InvalidInputError(SceneParseError, ValueError):
    exit_code = 2


class MissingArtifactError(SceneParseError, FileNotFoundError):
    exit_code = 3


class InsufficientDataError(SceneParseError, ValueError):
    exit_code = 4


class InvalidModelError(InvalidInputError):
    pass
