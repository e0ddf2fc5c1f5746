"""
Target model: the pipeline envelope a compiled program should fit
"""
from dataclasses import asdict, dataclass

import yaml

from ..config import Config
from ..errors import ConfigError


@dataclass(frozen=True)
class TargetModel:
    name: str = 'tofino-envelope'
    max_stages: int = 24
    max_width: int = 63
    memory_bits_per_stage: int = 32 * 1024 * 1024

    def to_dict(self):
        return asdict(self)


def load_target(path=None):
    path = path or Config.TARGET_MODEL
    try:
        with open(path, encoding='utf-8') as f:
            data = yaml.safe_load(f) or {}
    except OSError as e:
        raise ConfigError(f'cannot read target model {path}: {e}') from e
    except yaml.YAMLError as e:
        raise ConfigError(f'target model {path} is not valid JSON/YAML: {e}') from e
    try:
        target = TargetModel(
            name=str(data.get('name', 'target')),
            max_stages=int(data['max_stages']),
            max_width=int(data['max_width']),
            memory_bits_per_stage=int(data['memory_bits_per_stage']),
        )
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f'target model {path} needs max_stages, max_width, memory_bits_per_stage: {e}') from e
    if target.max_stages < 1 or target.max_width < 1:
        raise ConfigError('target model limits must be positive')
    return target
