"""Exception hierarchy shared by every module.

Each class carries the CLI exit code it maps to.
"""


class BehaviometryError(Exception):
    exit_code = 1


class ValidationError(BehaviometryError, ValueError):
    """Invalid input data or arguments."""

    exit_code = 2


class ParseError(ValidationError):
    """A canonical file failed to parse; carries the file position."""

    def __init__(self, message, path=None, line=None, column=None):
        self.path = path
        self.line = line
        self.column = column
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ":".join(where[:1]) + (" " + ", ".join(where[1:]) if len(where) > 1 else "")
        super().__init__(f"{prefix}: {message}" if prefix else message)
        self.reason = message


class ConfigurationError(ValidationError):
    pass


class BackendError(BehaviometryError):
    """External backend process exited nonzero."""

    exit_code = 3

    def __init__(self, message, cmd=None, returncode=None, stdout="", stderr=""):
        super().__init__(message)
        self.cmd = cmd
        self.returncode = returncode
        self.stdout = stdout
        self.stderr = stderr


class SidecarError(BehaviometryError):
    """Sidecar metadata is missing required keys or is corrupt."""

    exit_code = 4
