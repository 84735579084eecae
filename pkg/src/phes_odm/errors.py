"""Exception hierarchy shared by every module."""


class OdmError(Exception):
    """Base class for user-facing errors (reported without a traceback by the CLI)."""


class ParseError(OdmError):
    pass


class SchemaError(OdmError):
    pass


class NotFound(OdmError, KeyError):
    def __str__(self) -> str:
        return str(self.args[0]) if self.args else "not found"


class UnknownTable(OdmError):
    pass


class UnknownGroup(OdmError, KeyError):
    pass


class UnknownPipeline(OdmError, KeyError):
    pass


class AmbiguousOrder(OdmError):
    pass


class CellCollision(OdmError):
    def __init__(self, message: str, measure_rep_ids: tuple[str, str]):
        super().__init__(message)
        self.measure_rep_ids = measure_rep_ids


class UnknownKeyField(OdmError):
    pass


class BadWideName(OdmError):
    pass


class UnknownField(OdmError):
    pass


class SpecError(OdmError):
    pass


class SourceParseError(OdmError):
    pass


class UnmappedError(OdmError):
    pass


class UnknownRecipient(OdmError):
    pass


class RuleError(OdmError):
    pass
