"""
Pipeline engine: coded data files, tasks turning input files into output files, and named
workflows of targets.

A run workspace holds one file per code, named ``d{code:04}_{name}.{extension}``. Since every
task reads only codes lower than the ones it writes, running the tasks of a target list in
ascending code order always runs producers before consumers.
"""
import abc
import collections
import importlib
import logging
import os
from typing import Any, Dict, List, Optional

import yaml

from .errors import ContractViolation
from .file import CSVDataFileSpec, CSVInputDataFile, CSVOutputDataFile, DataFile, DataFileSpec, Flag, TextDialect


#: Pipeline definition shipped with the package.
PIPELINE = 'pipeline.yaml'

#: Column types allowed in a schema of a pipeline definition.
SCHEMA_TYPES = {'float': float, 'int': int, 'str': str}


class Task(abc.ABC):
    """
    A step of the pipeline. A task declares the codes it reads and the codes it writes, and
    receives open-able :class:`~kftrack.file.DataFile` handles for both when it runs.
    """

    def __str__(self):
        return '{}({} -> {})'.format(type(self).__name__, self.get_input_data_file_codes(),
                                     self.get_output_data_file_codes())

    @abc.abstractmethod
    def get_input_data_file_codes(self) -> List[int]:
        """Codes of the files the task reads; several tasks may read the same file."""
        pass

    @abc.abstractmethod
    def get_output_data_file_codes(self) -> List[int]:
        """Codes of the files the task writes, all above its input codes. No two tasks share an output."""
        pass

    @abc.abstractmethod
    def run(self, input_files: Dict[int, DataFile], output_files: Dict[int, DataFile], context: Dict[str, Any]):
        """
        :param input_files: One handle per input code. Optional inputs are handed over even when
            the file does not exist; check :func:`~kftrack.file.DataFile.exists`.
        :param output_files: One handle per output code.
        :param context: Flat ``section.key`` parameters of the run.
        """
        pass


class Engine:
    """
    Registry of data file specifications, tasks and workflows, able to run the tasks producing
    a list of targets in a workspace directory.

    :func:`read` loads a registry from YAML; :func:`default` loads the packaged tracking pipeline.
    """
    def __init__(self):
        self.specs = dict()  # type: Dict[int, DataFileSpec]
        self.tasks_by_target = dict()  # type: Dict[int, Task]
        self.workflows = dict()  # type: Dict[str, List[int]]

    @classmethod
    def default(cls) -> 'Engine':
        engine = cls()
        engine.read(os.path.join(os.path.dirname(os.path.abspath(__file__)), PIPELINE))
        return engine

    def register_file_spec(self, spec: DataFileSpec):
        if spec.code in self.specs:
            raise ContractViolation("File specification {} already registered".format(spec.code))
        logging.getLogger(__name__).debug("Registering file spec {} ({})".format(spec.code, spec.name))
        self.specs[spec.code] = spec

    def register_task(self, task: Task):
        """
        :raise ContractViolation: if an output is already produced by another task, an input code
            is not below every output code, or a code has no registered spec.
        """
        inputs, outputs = task.get_input_data_file_codes(), task.get_output_data_file_codes()
        taken = [code for code in outputs if code in self.tasks_by_target]
        if taken:
            raise ContractViolation("Task with output {} already registered".format(taken[0]))
        if inputs and outputs and max(inputs) >= min(outputs):
            raise ContractViolation("Input code {} not smaller than output code {} in task {}".format(
                max(inputs), min(outputs), task))
        unknown = [code for code in inputs + outputs if code not in self.specs]
        if unknown:
            raise ContractViolation("Unregistered spec {} referenced in task {}".format(unknown[0], task))
        logging.getLogger(__name__).debug("Registering task {}".format(task))
        for code in outputs:
            self.tasks_by_target[code] = task

    def register_workflow(self, name: str, targets: List[int]):
        if name in self.workflows:
            raise ContractViolation("Workflow {} already registered".format(name))
        logging.getLogger(__name__).debug("Registering workflow {} with targets {}".format(name, targets))
        self.workflows[name] = list(targets)

    @staticmethod
    def _get_class_by_name(fully_qualified_class_name: str):
        module_name, _, class_name = fully_qualified_class_name.rpartition('.')
        try:
            return getattr(importlib.import_module(module_name), class_name)
        except (ImportError, AttributeError, ValueError) as e:
            raise ContractViolation("Cannot load task class {}: {}".format(fully_qualified_class_name, e))

    @staticmethod
    def _spec_from_config(item: Dict[str, Any]) -> DataFileSpec:
        try:
            code, name = int(item['code']), item['name']
        except (KeyError, TypeError, ValueError):
            raise ContractViolation("File spec {} needs an integer code and a name".format(item))
        extension = item.get('extension', 'csv')
        flags = 0
        for flag in item.get('flags', []):
            try:
                flags |= Flag[flag.upper()]
            except KeyError:
                raise ContractViolation("Unknown flag {} of file spec {}".format(flag, code))
        if 'schema' not in item:
            return DataFileSpec(code, name, extension, flags)
        schema = []
        for column in item['schema']:
            if column.get('type') not in SCHEMA_TYPES:
                raise ContractViolation("Unknown type {} of column {} in file spec {}".format(
                    column.get('type'), column.get('name'), code))
            schema.append((column['name'], SCHEMA_TYPES[column['type']]))
        dialect = type('dialect{}'.format(code), (TextDialect,), dict(item.get('dialect', dict())))
        return CSVDataFileSpec(code, name, extension, flags, schema, dialect, header=item.get('header', True))

    def read(self, config_file_name: str):
        """
        Registers the ``specs``, ``tasks`` and ``workflows`` of a YAML pipeline definition.

        :raise ContractViolation: on a malformed definition.
        """
        with open(config_file_name) as f:
            config = yaml.safe_load(f)
        for item in config['specs']:
            self.register_file_spec(self._spec_from_config(item))
        for item in config['tasks']:
            self.register_task(self._get_class_by_name(item['class'])())
        for name, targets in config.get('workflows', dict()).items():
            self.register_workflow(name, [int(code) for code in targets])

    def expand_targets(self, targets: List[str], dependencies: bool = False) -> List[int]:
        """
        Resolves workflow names and codes given as strings.

        :param dependencies: Also include the targets needed to build them, recursively; optional
            inputs are left out.
        :raise ContractViolation: on a name that is neither a workflow nor a code.
        """
        codes = []
        for target in targets:
            if target in self.workflows:
                codes += self.workflows[target]
                continue
            try:
                codes.append(int(target))
            except ValueError:
                raise ContractViolation("Unknown target {}".format(target))
        return self._add_dependencies(codes) if dependencies else codes

    def _get_task(self, target: int) -> Task:
        if target not in self.tasks_by_target:
            raise ContractViolation("No registered task that can create target {}".format(target))
        return self.tasks_by_target[target]

    def _add_dependencies(self, targets: List[int]) -> List[int]:
        needed, queue = set(), collections.deque(targets)
        while queue:
            target = queue.popleft()
            if target in needed:
                continue
            needed.add(target)
            queue.extend(code for code in self._get_task(target).get_input_data_file_codes()
                         if not self.specs[code].is_optional())
        return sorted(needed)

    def plan(self, targets: List[int]) -> List[Task]:
        """Tasks producing ``targets``, each once, in ascending order of the codes they produce."""
        tasks = []
        for target in sorted(set(targets)):
            task = self._get_task(target)
            if task not in tasks:
                tasks.append(task)
        return tasks

    def path(self, workspace: str, code: int) -> str:
        """Path of a data file inside a workspace."""
        return os.path.join(workspace, self.specs[code].file_name())

    def _to_data_file(self, path: str, rw: str, code: int) -> DataFile:
        spec = self.specs[code]
        if rw == 'r' and not spec.is_optional() and not os.path.isfile(path):
            raise FileNotFoundError("No input file for code {:04} at {}".format(code, path))
        mode = rw + 't'
        if not spec.is_csv():
            return DataFile(path, mode, spec)
        return (CSVInputDataFile if rw == 'r' else CSVOutputDataFile)(path, mode, spec)

    def run(self, workspace: str, targets: List[int], context: Optional[Dict[str, Any]] = None,
            inputs: Optional[Dict[int, str]] = None) -> List[Task]:
        """
        Runs the tasks producing ``targets`` in ``workspace``, creating the directory if needed.

        :param inputs: Paths to read instead of the workspace files, by code.
        :return: The tasks run, in order.
        :raise ContractViolation: if no task produces a target.
        :raise FileNotFoundError: if a required input file does not exist.
        """
        log = logging.getLogger(__name__)
        context = context if context else dict()
        inputs = inputs or dict()
        tasks = self.plan(targets)
        log.debug("Context has {} items".format(len(context)))
        for k in sorted(context, key=str):
            log.debug("* {}: {}".format(k, context[k]))
        os.makedirs(workspace, exist_ok=True)

        for number, task in enumerate(tasks, start=1):
            log.info("Running task {} of {}: {}".format(number, len(tasks), task))
            input_files = {code: self._to_data_file(inputs.get(code, self.path(workspace, code)), 'r', code)
                           for code in task.get_input_data_file_codes()}
            output_files = {code: self._to_data_file(self.path(workspace, code), 'w', code)
                            for code in task.get_output_data_file_codes()}
            for code, data_file in sorted(input_files.items()):
                log.debug("Input file {} is {}".format(code, data_file.get_path()))
            task.run(input_files, output_files, context)
        return tasks
