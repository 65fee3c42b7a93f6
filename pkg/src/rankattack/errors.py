"""Exception types shared across the toolkit."""


class ToolkitError(Exception):
    """Base class for all toolkit errors."""


class EmptyDocument(ToolkitError):
    pass


class EmptyCorpus(ToolkitError):
    pass


class ParseError(ToolkitError):
    def __init__(self, path, line_no, message):
        super().__init__(f"{path}:{line_no}: {message}")
        self.path = str(path)
        self.line_no = line_no


class DuplicateDocId(ToolkitError):
    def __init__(self, doc_id, line_no=None):
        where = f" (line {line_no})" if line_no is not None else ""
        super().__init__(f"duplicate doc_id {doc_id!r}{where}")
        self.doc_id = doc_id


class ListTooShort(ToolkitError):
    pass


class EmptyList(ToolkitError):
    pass


class UnknownDocId(ToolkitError):
    pass


class PositionOutOfRange(ToolkitError):
    pass


class EmptyCandidateSet(ToolkitError):
    pass


class MissingLexicon(ToolkitError):
    pass


class MethodMismatch(ToolkitError):
    pass


class LengthMismatch(ToolkitError):
    pass


class BridgeUnavailable(ToolkitError):
    pass


class ConfigError(ToolkitError):
    pass


class MissingInput(ToolkitError):
    pass


class DegenerateFeatures(UserWarning):
    """Warning: a feature is constant across all training pairs."""
