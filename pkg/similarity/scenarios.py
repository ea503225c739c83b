# similarity/scenarios.py
"""
Scenario files: YAML documents with top-level keys application, params,
grids, outputs (plus optional name, description, probes, sweep).
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional, Tuple

import yaml
from django.conf import settings

from .core import Grid1D
from .exceptions import ScenarioError
from .serializers import ScenarioSerializer, flatten_errors

logger = logging.getLogger(__name__)

SCENARIO_SUFFIX = '.scn'
BUNDLED_DIR = Path(__file__).resolve().parent / 'bundled'


@dataclass(frozen=True)
class Scenario:
    name: str
    application: str
    params: Any
    grids: Mapping[str, Grid1D]
    outputs: Tuple[str, ...]
    probes: Mapping[str, Any] = field(default_factory=dict)
    sweep: Mapping[str, List[float]] = field(default_factory=dict)
    description: str = ''
    transform: Optional[Any] = None   # GroupElement applied to reach this scenario
    source: Optional[str] = None

    @property
    def family(self) -> str:
        if self.application.startswith('lake'):
            return 'lake'
        if self.application.startswith('plume'):
            return 'plume'
        return 'blayer'

    @property
    def case(self) -> int:
        if self.family == 'lake':
            return self.params.case
        if self.family == 'plume':
            return 1 if self.application == 'plume-small-lambda' else 2
        return 0

    def grid(self, name: str) -> Grid1D:
        try:
            return self.grids[name]
        except KeyError:
            raise ScenarioError(f"Scenario '{self.name}' has no '{name}' grid",
                                [(f"grids.{name}", None, 'required for this output')], self.source)


def _walk(node, path, lines):
    lines[path] = node.start_mark.line + 1
    if isinstance(node, yaml.MappingNode):
        for key_node, value_node in node.value:
            child = f"{path}.{key_node.value}" if path else str(key_node.value)
            lines[child] = key_node.start_mark.line + 1
            _walk(value_node, child, lines)
            lines[child] = key_node.start_mark.line + 1
    elif isinstance(node, yaml.SequenceNode):
        for index, item in enumerate(node.value):
            _walk(item, f"{path}.{index}", lines)


def key_lines(text: str) -> Dict[str, int]:
    """Dotted key path -> 1-based line number of that key in the YAML text"""
    lines = {}
    node = yaml.compose(text, Loader=yaml.SafeLoader)
    if node is not None:
        _walk(node, '', lines)
    return lines


def _line_for(path: str, lines: Mapping[str, int]) -> Optional[int]:
    while path:
        if path in lines:
            return lines[path]
        path = path.rpartition('.')[0]
    return None


def parse_scenario(text: str, source: str = '<scenario>') -> Scenario:
    try:
        document = yaml.safe_load(text)
        lines = key_lines(text)
    except yaml.YAMLError as e:
        mark = getattr(e, 'problem_mark', None)
        line = mark.line + 1 if mark is not None else None
        raise ScenarioError(f"Malformed scenario {source}",
                            [('<yaml>', line, str(getattr(e, 'problem', e)))], source)
    if not isinstance(document, dict):
        raise ScenarioError(f"Malformed scenario {source}",
                            [('<document>', 1, 'expected a mapping of top-level keys')], source)

    serializer = ScenarioSerializer(data=document)
    if not serializer.is_valid():
        diagnostics = [(key or '<document>', _line_for(key, lines), message)
                       for key, message in flatten_errors(serializer.errors)]
        raise ScenarioError(f"Invalid scenario {source}", diagnostics, source)

    data = serializer.validated_data
    scenario = Scenario(
        name=data['name'],
        application=data['application'],
        params=data['params'],
        grids=dict(data['grids']),
        outputs=tuple(data['outputs']),
        probes=dict(data['probes']),
        sweep={key: list(values) for key, values in data['sweep'].items()},
        description=data['description'],
        source=source,
    )
    logger.debug(f"Loaded scenario '{scenario.name}' ({scenario.application}) from {source}")
    return scenario


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as e:
        raise ScenarioError(f"Cannot read scenario {path}", [('<file>', None, str(e))], str(path))
    return parse_scenario(text, source=str(path))


def scenario_dir() -> Path:
    return Path(getattr(settings, 'SIMILARITY_SCENARIO_DIR', BUNDLED_DIR))


def list_bundled() -> List[Tuple[str, str]]:
    """(name, description) of every bundled scenario, ordered by file name"""
    catalog = []
    for path in sorted(scenario_dir().glob(f"*{SCENARIO_SUFFIX}")):
        scenario = load_scenario(path)
        catalog.append((path.stem, scenario.description))
    return catalog


def resolve_scenario(name_or_path) -> Path:
    """A path to an existing file, or the name of a bundled scenario"""
    candidate = Path(name_or_path)
    if candidate.is_file():
        return candidate
    name = candidate.stem if candidate.suffix == SCENARIO_SUFFIX else str(name_or_path)
    bundled = scenario_dir() / f"{name}{SCENARIO_SUFFIX}"
    if bundled.is_file():
        return bundled
    raise ScenarioError(f"No scenario file or bundled scenario named '{name_or_path}'",
                        [('<file>', None, 'not found')], str(name_or_path))
