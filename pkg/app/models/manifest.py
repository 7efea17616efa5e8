"""
Run manifest: everything needed to regenerate a command's outputs bit-exactly.
"""
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Dict, List, Optional

import yaml

from app.models.errors import ConfigError
from app.models.settings import LabSettings, _build

MANIFEST_NAME = 'manifest.yaml'


@dataclass
class RunManifest:
    command: str
    preset: str
    version: str
    settings: Dict[str, Any]
    fingerprint: str
    seeds: Dict[str, Any] = field(default_factory=dict)
    outputs: List[str] = field(default_factory=list)
    started_at: str = ''
    finished_at: str = ''
    extra: Dict[str, Any] = field(default_factory=dict)

    @classmethod
    def start(cls, command: str, preset: str, version: str, settings: LabSettings,
              **extra) -> 'RunManifest':
        return cls(
            command=command,
            preset=preset,
            version=version,
            settings=settings.to_dict(),
            fingerprint=settings.fingerprint(),
            seeds={
                'population': settings.population.seed,
                'test_population': settings.population.test_seed,
                'maml': settings.maml.seed,
                'cnp': settings.cnp.seed,
                'gp': settings.gp.seed,
            },
            started_at=_now(),
            extra=extra
        )

    def finish(self, outputs: List[str]) -> 'RunManifest':
        self.outputs = sorted(outputs)
        self.finished_at = _now()
        return self

    def lab_settings(self) -> LabSettings:
        return _build(LabSettings, self.settings, '').validate()

    def write(self, directory) -> Path:
        path = Path(directory) / MANIFEST_NAME
        path.write_text(yaml.safe_dump(asdict(self), sort_keys=True), encoding='utf-8')
        return path

    @classmethod
    def read(cls, directory) -> Optional['RunManifest']:
        path = Path(directory) / MANIFEST_NAME
        if not path.exists():
            return None
        data = yaml.safe_load(path.read_text(encoding='utf-8'))
        try:
            return cls(**data)
        except TypeError as exc:
            raise ConfigError(f"malformed manifest {path}: {exc}") from exc


def _now() -> str:
    return datetime.now(timezone.utc).isoformat(timespec='seconds')
