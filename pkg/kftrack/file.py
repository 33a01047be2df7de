"""
Data files of a run workspace and their formats.

A :class:`DataFileSpec` names a file by code and says whether a task can do without it.
Its :class:`CSVDataFileSpec` refinement adds a typed column schema, read back record by record
or as a ``pandas`` data frame.
"""
import csv
import enum
import os
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple

from .errors import ParseError


class TextDialect(csv.excel):
    """Comma-separated values with Unix line endings."""
    lineterminator = '\n'


class Flag(enum.IntEnum):
    OPTIONAL = 1


class DataFileSpec:
    """
    A file a task reads or writes, stored as ``d{code:04}_{name}.{extension}``.

    :param flags: Bitwise combination of :class:`Flag` values.
    """
    def __init__(self, code: int, name: str, extension: str, flags: int = 0):
        self.code = code
        self.name = name
        self.extension = extension
        self.flags = flags

    def file_name(self) -> str:
        return 'd{:04}_{}.{}'.format(self.code, self.name, self.extension)

    def _has(self, flag: Flag) -> bool:
        return bool(self.flags & flag)

    def is_optional(self) -> bool:
        """Whether a task reading the file runs even when it is absent."""
        return self._has(Flag.OPTIONAL)

    def is_csv(self) -> bool:
        return False


class CSVDataFileSpec(DataFileSpec):
    """
    :param schema: ``(column, type)`` pairs, ``type`` being ``int``, ``float`` or ``str``.
    :param dialect: ``csv`` dialect; a space delimiter treats runs of spaces as one.
    :param header: Whether line 1 lists the columns.
    """
    def __init__(self, code: int, name: str, extension: str = 'csv', flags: int = 0,
                 schema: Optional[List[Tuple[str, type]]] = None, dialect=TextDialect, header: bool = True):
        super().__init__(code, name, extension, flags)
        self.schema = list(schema or [])
        self.dialect = dialect
        self.header = header

    def columns(self) -> List[str]:
        return [column for column, _ in self.schema]

    def is_csv(self) -> bool:
        return True


class DataFile:
    """A spec bound to a path and a text ``open`` mode, ``'rt'`` or ``'wt'``."""

    def __init__(self, path: str, mode: str, spec: DataFileSpec):
        self.path = path
        self.mode = mode
        self.spec = spec

    def __repr__(self):
        return '{}({!r}, {!r})'.format(type(self).__name__, self.path, self.mode)

    def open(self):
        """Opens the file as UTF-8 text without newline translation."""
        return open(self.path, mode=self.mode, encoding='utf-8', newline='')

    def exists(self) -> bool:
        return os.path.isfile(self.path)

    def get_path(self) -> str:
        return self.path


def _to_int(value: str) -> int:
    # MOT files write integer columns as floats at times
    return int(float(value))


CONVERTERS = {int: _to_int, float: float, str: str}  # type: Dict[type, Callable[[str], Any]]


class CSVInputDataFile(DataFile):
    def _converters(self) -> List[Callable[[str], Any]]:
        try:
            return [CONVERTERS[t] for _, t in self.spec.schema]
        except KeyError as e:
            raise TypeError('Unsupported column type {}'.format(e))

    def iterate_rows(self) -> Iterator[Tuple[int, List[str]]]:
        """``(line number, stripped fields)`` of every non-blank data row."""
        assert self.mode[0] == 'r'
        collapse = self.spec.dialect.delimiter == ' '
        with self.open() as f:
            reader = csv.reader(f, dialect=self.spec.dialect)
            for row in reader:
                if self.spec.header and reader.line_num == 1:
                    continue
                fields = [field.strip() for field in row]
                if collapse:
                    fields = [field for field in fields if field]
                if any(fields):
                    yield reader.line_num, fields

    def _check_header(self):
        with self.open() as f:
            header = next(csv.reader(f, dialect=self.spec.dialect), None)
        if header is not None and [name.strip() for name in header] != self.spec.columns():
            raise ParseError(self.path, 1, 'header {} does not match columns {}'.format(header, self.spec.columns()))

    def iterate_records(self, validate: bool = True, numbered: bool = False) -> Iterator[Any]:
        """
        Rows as dictionaries typed by the schema.

        :param validate: Check the header line and the field count of every row.
        :param numbered: Yield ``(line number, record)`` pairs.
        :raise ParseError: on a row that does not fit the schema.
        """
        assert self.mode[0] == 'r'
        columns, converters = self.spec.columns(), self._converters()
        if validate and self.spec.header:
            self._check_header()
        for line_number, fields in self.iterate_rows():
            if validate and len(fields) != len(columns):
                raise ParseError(self.path, line_number, 'expected {} fields, got {}'.format(len(columns), len(fields)))
            try:
                record = {column: convert(field) for column, convert, field in zip(columns, converters, fields)}
            except ValueError as e:
                raise ParseError(self.path, line_number, str(e))
            yield (line_number, record) if numbered else record

    def read_data_frame(self, validate: bool = True):
        assert self.mode[0] == 'r'
        import pandas as pd
        columns = self.spec.columns()
        df = pd.read_csv(self.path, sep=self.spec.dialect.delimiter, quotechar=self.spec.dialect.quotechar,
                         header=0 if self.spec.header else None, names=None if self.spec.header else columns)
        if validate and list(df.columns) != columns:
            raise ParseError(self.path, 1, 'columns {} do not match schema {}'.format(list(df.columns), columns))
        return df


class RecordStreamWriter:
    """Context manager writing dictionaries row by row, header first when the spec has one."""

    def __init__(self, data_file: DataFile, validate: bool):
        self.data_file = data_file
        self.validate = validate
        self.columns = data_file.spec.columns()
        self.handle = None
        self.writer = None  # type: Optional[csv.DictWriter]

    def __enter__(self) -> 'RecordStreamWriter':
        spec = self.data_file.spec
        self.handle = self.data_file.open()
        self.writer = csv.DictWriter(self.handle, fieldnames=self.columns, dialect=spec.dialect)
        if spec.header:
            self.writer.writeheader()
        return self

    def write(self, record: Dict[str, Any]):
        """:raise ValueError: if validating and the keys differ from the columns."""
        if self.validate and set(record) != set(self.columns):
            raise ValueError('Record keys {} do not match columns {}'.format(sorted(record), self.columns))
        self.writer.writerow(record)

    def __exit__(self, exc_type, exc_val, exc_tb):
        self.handle.close()


class CSVOutputDataFile(DataFile):
    def get_record_writer(self, validate: bool = True) -> RecordStreamWriter:
        assert self.mode[0] == 'w'
        return RecordStreamWriter(self, validate)

    def write_data_frame(self, df, validate: bool = True, float_format: Optional[str] = None):
        """
        Writes a whole data frame in the file's dialect.

        :raise ValueError: if validating and the frame's columns differ from the schema, order included.
        """
        if validate and list(df.columns) != self.spec.columns():
            raise ValueError('Data frame columns {} do not match columns {}'.format(list(df.columns),
                                                                                    self.spec.columns()))
        dialect = self.spec.dialect
        df.to_csv(self.path, sep=dialect.delimiter, quotechar=dialect.quotechar, header=self.spec.header,
                  index=False, encoding='utf-8', lineterminator='\n', float_format=float_format)
