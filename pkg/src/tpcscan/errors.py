"""Exception hierarchy shared by every stage of the scanner."""


class TpcScanError(Exception):
    """Base class for all scanner errors."""


class SourceError(TpcScanError):
    """An error tied to a position in some input text."""

    def __init__(self, message, line=None, column=None, source=None):
        self.message = message
        self.line = line
        self.column = column
        self.source = source
        super().__init__(self._format())

    def _format(self):
        where = ""
        if self.source is not None:
            where = str(self.source)
        if self.line is not None:
            where += f":{self.line}" if where else f"line {self.line}"
            if self.column is not None:
                where += f":{self.column}"
        return f"{where}: {self.message}" if where else self.message

    def with_source(self, source):
        self.source = source
        self.args = (self._format(),)
        return self
