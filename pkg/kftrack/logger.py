"""
Run ledger and logging set-up of the command line.

Every invocation appends two rows to ``<out>/log/runs.log``: a START row carrying the command
and its flattened context, and a FINISH or CRASH row carrying the wall-clock duration.
"""
import abc
import csv
import datetime
import logging.config
import os
import time
from typing import Any, Dict, Optional

from .file import TextDialect


LEDGER_COLUMNS = ['run_id', 'timestamp', 'status', 'command', 'params', 'elapsed_s']

#: Third-party loggers kept at WARNING in the run log.
QUIET_LOGGERS = ('openpyxl',)


class LedgerDialect(TextDialect):
    delimiter = '|'
    quoting = csv.QUOTE_NONE
    escapechar = '\\'


class Logger(abc.ABC):
    """Records the start and the end of a command-line run."""

    @abc.abstractmethod
    def report_start(self, timestamp: int, command: str, params: Dict[str, Any]):
        pass

    @abc.abstractmethod
    def report_finish(self, timestamp: int, success: bool):
        pass


class DummyLogger(Logger):
    """Leaves logging unconfigured and keeps no ledger."""

    def report_start(self, timestamp: int, command: str, params: Dict[str, Any]):
        pass

    def report_finish(self, timestamp: int, success: bool):
        pass


def logging_config(log_file: str, console_level: str = 'INFO') -> Dict[str, Any]:
    """``logging.config.dictConfig`` schema: console at ``console_level``, everything to ``log_file``."""
    return {
        'version': 1,
        'disable_existing_loggers': False,
        'formatters': {
            'basic': {
                'format': '%(asctime)-15s %(name)s %(levelname)s %(message)s'
            }
        },
        'handlers': {
            'console': {
                'class': 'logging.StreamHandler',
                'formatter': 'basic',
                'level': console_level
            },
            'run': {
                'class': 'logging.FileHandler',
                'formatter': 'basic',
                'filename': log_file
            }
        },
        'loggers': {name: {'level': 'WARNING'} for name in QUIET_LOGGERS},
        'root': {
            'level': 'DEBUG',
            'handlers': ['console', 'run']
        }
    }


class FileLogger(Logger):
    """
    Sends log records to the console and to ``<out>/log/<run id>.log`` and keeps the run ledger
    ``<out>/log/runs.log``.
    """
    def __init__(self, out: str, timestamp: int, console_level: str = 'INFO'):
        self.log_dir = os.path.join(out, 'log')
        os.makedirs(self.log_dir, exist_ok=True)
        self.runs_log = os.path.join(self.log_dir, 'runs.log')
        self.started = None  # type: Optional[float]
        logging.config.dictConfig(logging_config(os.path.join(self.log_dir, '{}.log'.format(timestamp)),
                                                 console_level))

    def _append(self, row: list):
        new = not os.path.isfile(self.runs_log)
        with open(self.runs_log, 'at', newline='') as f:
            writer = csv.writer(f, dialect=LedgerDialect)
            if new:
                writer.writerow(LEDGER_COLUMNS)
            writer.writerow(row)

    @staticmethod
    def _params(params: Dict[str, Any]) -> str:
        return ' '.join('{}={}'.format(k, str(params[k]).replace(' ', '_').replace('|', '_')) for k in sorted(params))

    def report_start(self, timestamp: int, command: str, params: Dict[str, Any]):
        self.started = time.monotonic()
        started_at = datetime.datetime.strptime(str(timestamp), '%Y%m%d%H%M%S')
        self._append([timestamp, started_at.strftime('%Y-%m-%d %H:%M:%S'), 'START', command,
                      self._params(params), ''])

    def report_finish(self, timestamp: int, success: bool):
        elapsed = '' if self.started is None else '{:.3f}'.format(time.monotonic() - self.started)
        self._append([timestamp, datetime.datetime.now().strftime('%Y-%m-%d %H:%M:%S'),
                      'FINISH' if success else 'CRASH', '', '', elapsed])
