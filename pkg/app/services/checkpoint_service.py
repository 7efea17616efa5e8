"""
Checkpoint Service - exact, byte-stable model checkpoints and training logs
"""
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional

import pandas as pd
import torch

from app.models import DTYPE, EpochRecord, ParamLayout, ParamVector
from app.models.errors import DataError, OutputError
from app.services.feature_service import AffineScaler, PcaBasis

FORMAT = 'poplab-checkpoint/1'


@dataclass
class Checkpoint:
    kind: str
    params: ParamVector
    config: Dict[str, Any]
    seed: int
    problem: int
    input_scaler: Optional[AffineScaler] = None
    target_scaler: Optional[AffineScaler] = None
    basis: Optional[PcaBasis] = None
    extra: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'format': FORMAT,
            'kind': self.kind,
            'problem': self.problem,
            'seed': self.seed,
            'config': self.config,
            'layout': self.params.layout.to_list(),
            'values': [float(v).hex() for v in self.params.values.tolist()],
            'input_scaler': self.input_scaler.to_dict() if self.input_scaler else None,
            'target_scaler': self.target_scaler.to_dict() if self.target_scaler else None,
            'basis': self.basis.to_dict() if self.basis is not None else None,
            'extra': self.extra,
        }

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'Checkpoint':
        if data.get('format') != FORMAT:
            raise DataError(f"unsupported checkpoint format {data.get('format')!r}")
        layout = ParamLayout.from_list(data['layout'])
        values = torch.tensor([float.fromhex(v) for v in data['values']], dtype=DTYPE)
        return cls(
            kind=data['kind'],
            params=ParamVector(values, layout),
            config=data['config'],
            seed=data['seed'],
            problem=data['problem'],
            input_scaler=AffineScaler.from_dict(data['input_scaler']) if data['input_scaler'] else None,
            target_scaler=AffineScaler.from_dict(data['target_scaler']) if data['target_scaler'] else None,
            basis=PcaBasis.from_dict(data['basis']) if data['basis'] else None,
            extra=data.get('extra', {})
        )


def save_checkpoint(checkpoint: Checkpoint, path) -> Path:
    path = Path(path)
    try:
        path.write_text(json.dumps(checkpoint.to_dict(), sort_keys=True, indent=1), encoding='utf-8')
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc
    return path


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        data = json.loads(path.read_text(encoding='utf-8'))
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed checkpoint {path}: {exc}") from exc
    return Checkpoint.from_dict(data)


def write_training_log(history: List[EpochRecord], path) -> Path:
    """CSV of (epoch, meta_loss, val_nmse)."""
    path = Path(path)
    frame = pd.DataFrame(
        [(r.epoch, r.loss, r.val_nmse) for r in history],
        columns=['epoch', 'meta_loss', 'val_nmse']
    )
    try:
        frame.to_csv(path, index=False, float_format='%.17g', na_rep='nan', lineterminator='\n')
    except OSError as exc:
        raise OutputError(f"cannot write {path}: {exc.strerror}") from exc
    return path
