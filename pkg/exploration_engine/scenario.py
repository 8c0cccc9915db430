"""
scenario.py - Flat "key = value" scenario files: parsing, defaults,
emission and conversion to SimConfig
"""

from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import config
from utils import ScenarioValidator
from .learner import LearnerParams
from .map_generator import load_generated
from .planner import ControllerParams
from .simulator import SimConfig
from .world import GroundTruthGrid, SensorParams, load_map_file

GENERATED_PREFIX = "generated:"
REQUIRED_KEYS = ("map", "robots", "seed")


class ConfigError(ValueError):
    """Scenario problem tied to a 1-based line (0 when not line-specific)"""

    def __init__(self, message: str, line: int = 0):
        self.line = line
        super().__init__(f"line {line}: {message}" if line else message)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "yes", "1", "on"):
        return True
    if lowered in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"expected true/false, got {text!r}")


def _parse_list(text: str) -> List[str]:
    items = [item.strip() for item in text.split(',') if item.strip()]
    if not items:
        raise ValueError("expected a comma-separated list")
    return items


def _parse_starts(text: str) -> List[Tuple[int, int]]:
    starts = []
    for pair in text.split(';'):
        if not pair.strip():
            continue
        x, y = pair.split(',')
        starts.append((int(x), int(y)))
    if not starts:
        raise ValueError("expected 'x,y; x,y; ...'")
    return starts


def _emit_value(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, list) and value and isinstance(value[0], tuple):
        return "; ".join(f"{x},{y}" for x, y in value)
    if isinstance(value, list):
        return ",".join(value)
    return str(value)


# key -> (parser, default); None default means required or unset
SCHEMA: Dict[str, Tuple[Callable, object]] = {
    'map': (str, None),
    'robots': (int, None),
    'seed': (int, None),
    'starts': (_parse_starts, None),
    'trials': (int, config.DEFAULT_TRIALS),
    'policy': (str, config.DEFAULT_POLICY),
    'policies': (_parse_list, list(config.POLICIES)),
    'output': (str, config.OUTPUT_DIR),
    'alpha': (float, config.ALPHA),
    'gamma': (float, config.GAMMA),
    'lambda': (float, config.LAMBDA_STEP),
    'lambda_distance_aware': (_parse_bool, config.LAMBDA_DISTANCE_AWARE),
    'rho': (float, config.RHO),
    'sigma': (float, config.SIGMA),
    'kp': (float, config.KP),
    'ki': (float, config.KI),
    'v_max': (float, config.V_MAX),
    'w_max': (float, config.W_MAX),
    'r_s': (float, config.SENSOR_RANGE),
    'ray_count': (int, config.RAY_COUNT),
    'r_is': (float, config.R_IS),
    'r_c': (float, config.COMM_RANGE),
    'resolution': (float, config.RESOLUTION),
    'min_cluster': (int, config.MIN_CLUSTER),
    't_max': (int, config.T_MAX),
    'epsilon': (float, config.EPSILON),
    'drop_prob': (float, config.DROP_PROBABILITY),
    'shuffle_order': (_parse_bool, config.SHUFFLE_ORDER),
    'q_merge': (str, config.Q_MERGE_RULE),
    'patch_mode': (str, config.PATCH_MODE),
    'kappa': (float, config.COST_PER_BYTE),
    'confidence': (float, config.CONFIDENCE_E),
    'ssim_window': (int, config.SSIM_WINDOW),
    'snapshot_every': (int, 0),
}

CHOICES = {
    'policy': config.POLICIES,
    'q_merge': ["overwrite", "max"],
    'patch_mode': ["full", "delta"],
}


@dataclass
class ScenarioFile:
    """Parsed scenario; values hold every schema key (defaults filled in)"""
    values: Dict[str, object]
    lines: Dict[str, int] = field(default_factory=dict, compare=False)
    base_dir: Path = field(default_factory=Path, compare=False)

    def __getitem__(self, key: str):
        return self.values[key]

    @property
    def trials(self) -> int:
        return int(self.values['trials'])

    @property
    def output(self) -> str:
        return str(self.values['output'])

    @property
    def policies(self) -> List[str]:
        return list(self.values['policies'])

    def with_values(self, **overrides) -> 'ScenarioFile':
        return replace(self, values={**self.values, **overrides})


def parse_config(text: str, base_dir: Union[str, Path, None] = None) -> ScenarioFile:
    """
    Parse scenario text

    Lines are "key = value"; '#' starts a comment; blank lines are ignored.

    Args:
        text: Scenario file content
        base_dir: Directory relative map paths resolve against

    Returns:
        ScenarioFile with defaults applied
    """
    values: Dict[str, object] = {}
    lines: Dict[str, int] = {}
    raw_lines = text.splitlines()

    for number, raw in enumerate(raw_lines, start=1):
        line = raw.split('#', 1)[0].strip()
        if not line:
            continue
        if '=' not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", number)
        key, raw_value = (part.strip() for part in line.split('=', 1))
        if key not in SCHEMA:
            raise ConfigError(f"unknown key {key!r}", number)
        if key in lines:
            raise ConfigError(f"duplicate key {key!r} on lines {lines[key]} and {number}", number)
        parser = SCHEMA[key][0]
        try:
            value = parser(raw_value)
        except ValueError as e:
            raise ConfigError(f"cannot parse {key!r} value {raw_value!r}: {e}", number) from None
        if key in CHOICES and value not in CHOICES[key]:
            raise ConfigError(f"{key!r} must be one of {CHOICES[key]}, got {value!r}", number)
        if key == 'policies':
            unknown = [p for p in value if p not in config.POLICIES]
            if unknown:
                raise ConfigError(f"unknown policies {unknown}", number)
        ok, message = ScenarioValidator.validate_value(key, value)
        if not ok:
            raise ConfigError(message, number)
        values[key] = value
        lines[key] = number

    for key in REQUIRED_KEYS:
        if key not in values:
            raise ConfigError(f"missing required key {key!r}", len(raw_lines) + 1)

    for key, (_, default) in SCHEMA.items():
        if key not in values:
            values[key] = list(default) if isinstance(default, list) else default

    starts = values.get('starts')
    if starts is not None and len(starts) != values['robots']:
        raise ConfigError(f"{len(starts)} start cells for {values['robots']} robots", lines['starts'])

    return ScenarioFile(values, lines, Path(base_dir) if base_dir else Path('.'))


def load_scenario(path: Union[str, Path]) -> ScenarioFile:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"scenario file not found: {path}")
    return parse_config(path.read_text(encoding='utf-8'), path.parent)


def emit_config(scenario: ScenarioFile) -> str:
    """Render every set key in schema order; parse_config(emit_config(s)) == s"""
    out = []
    for key in SCHEMA:
        value = scenario.values.get(key)
        if value is None:
            continue
        out.append(f"{key} = {_emit_value(value)}")
    return '\n'.join(out) + '\n'


def load_world(scenario: ScenarioFile) -> GroundTruthGrid:
    """Load or generate the scenario's map"""
    source = str(scenario['map'])
    resolution = float(scenario['resolution'])
    if source.startswith(GENERATED_PREFIX):
        try:
            return load_generated(source[len(GENERATED_PREFIX):], resolution)
        except ValueError as e:
            raise ConfigError(str(e), scenario.lines.get('map', 0)) from None
    path = Path(source)
    if not path.is_absolute():
        path = scenario.base_dir / path
    if not path.exists():
        raise ConfigError(f"map file not found: {path}", scenario.lines.get('map', 0))
    return load_map_file(path, resolution)


def to_sim_config(
    scenario: ScenarioFile,
    seed: Optional[int] = None,
    policy: Optional[str] = None,
    grid: Optional[GroundTruthGrid] = None,
    snapshot_dir: Optional[str] = None,
) -> SimConfig:
    """
    Build the SimConfig for one trial

    Args:
        scenario: Parsed scenario
        seed: Trial seed (defaults to the scenario seed)
        policy: Policy override (compare mode)
        grid: Already loaded world
        snapshot_dir: Where per-tick union snapshots go

    Returns:
        SimConfig
    """
    v = scenario.values
    try:
        learner = LearnerParams(v['alpha'], v['gamma'], v['lambda'], v['rho'], v['sigma'], v['r_c'])
        controller = ControllerParams(v['kp'], v['ki'], v['v_max'], v['w_max'])
        sensor = SensorParams(v['r_s'], v['ray_count'])
    except ValueError as e:
        raise ConfigError(str(e)) from None

    return SimConfig(
        grid=grid if grid is not None else load_world(scenario),
        robots=int(v['robots']),
        seed=int(v['seed'] if seed is None else seed),
        starts=v.get('starts'),
        learner=learner,
        sensor=sensor,
        controller=controller,
        r_is=v['r_is'],
        min_cluster=v['min_cluster'],
        t_max=v['t_max'],
        policy=policy or v['policy'],
        epsilon=v['epsilon'],
        drop_probability=v['drop_prob'],
        shuffle_order=v['shuffle_order'],
        q_merge_rule=v['q_merge'],
        patch_mode=v['patch_mode'],
        kappa=v['kappa'],
        lambda_distance_aware=v['lambda_distance_aware'],
        confidence_e=v['confidence'],
        ssim_window=v['ssim_window'],
        snapshot_every=v['snapshot_every'],
        snapshot_dir=snapshot_dir,
    )
