"""
Dataset Service - per-structure CSV export and loading
Single Responsibility: the on-disk dataset format shared by simulate and train
"""
import json
import logging
from pathlib import Path
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from app.models import TaskDataset
from app.models.errors import DataError, OutputError
from app.services.feature_service import PcaBasis

logger = logging.getLogger(__name__)

STRUCTURE_GLOB = 'structure-*.csv'
INDEX_CSV = 'structures.csv'
BASIS_JSON = 'basis.json'


def target_columns(output_dim: int) -> List[str]:
    if output_dim == 1:
        return ['target']
    return [f'target_{j}' for j in range(output_dim)]


def structure_filename(index: int) -> str:
    return f'structure-{index:03d}.csv'


def write_dataset(tasks: Sequence[TaskDataset], directory, basis: Optional[PcaBasis] = None) -> List[str]:
    """One CSV per structure (temperature, target...), an index of stiffnesses and the PCA basis."""
    out = Path(directory)
    written = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        for i, task in enumerate(tasks):
            frame = pd.DataFrame(task.targets, columns=target_columns(task.output_dim))
            frame.insert(0, 'temperature', task.temperatures)
            name = structure_filename(i)
            frame.to_csv(out / name, index=False, float_format='%.17g', lineterminator='\n')
            written.append(name)
        index = pd.DataFrame({
            'file': written,
            'structure': [t.task_id for t in tasks],
            'stiffness': [t.stiffness for t in tasks],
        })
        index.to_csv(out / INDEX_CSV, index=False, float_format='%.17g', lineterminator='\n')
        written.append(INDEX_CSV)
        if basis is not None:
            (out / BASIS_JSON).write_text(json.dumps(basis.to_dict(), sort_keys=True), encoding='utf-8')
            written.append(BASIS_JSON)
    except OSError as exc:
        raise OutputError(f"cannot write dataset to {out}: {exc.strerror}") from exc
    return written


def load_dataset(directory) -> List[TaskDataset]:
    """Dense TaskDatasets from the structure CSVs of `directory`, in file order."""
    root = Path(directory)
    if not root.is_dir():
        raise DataError(f"dataset directory {root} does not exist")
    files = sorted(root.glob(STRUCTURE_GLOB))
    if not files:
        raise DataError(f"no {STRUCTURE_GLOB} files in {root}")

    stiffness = {}
    if (root / INDEX_CSV).exists():
        index = pd.read_csv(root / INDEX_CSV)
        stiffness = dict(zip(index['file'], zip(index['structure'], index['stiffness'])))

    tasks = []
    for path in files:
        frame = pd.read_csv(path)
        if 'temperature' not in frame.columns or frame.shape[1] < 2:
            raise DataError(f"{path.name}: expected columns temperature,target...")
        task_id, k = stiffness.get(path.name, (path.stem, float('nan')))
        tasks.append(TaskDataset.dense(
            str(task_id),
            frame['temperature'].to_numpy(dtype=float),
            frame.drop(columns='temperature').to_numpy(dtype=float),
            float(k)
        ))
    dims = {t.output_dim for t in tasks}
    if len(dims) != 1:
        raise DataError(f"structures in {root} have differing target dimensions {sorted(dims)}")
    logger.info("loaded %d structures from %s", len(tasks), root)
    return tasks


def load_basis(directory) -> Optional[PcaBasis]:
    path = Path(directory) / BASIS_JSON
    if not path.exists():
        return None
    return PcaBasis.from_dict(json.loads(path.read_text(encoding='utf-8')))


def spectral_line_table(stiffnesses, temperatures, lines: dict) -> pd.DataFrame:
    """Long table (stiffness, temperature, <line columns>) from {name: (n_k, n_T) arrays}."""
    k_grid, t_grid = np.meshgrid(np.asarray(stiffnesses, dtype=float),
                                 np.asarray(temperatures, dtype=float), indexing='ij')
    frame = pd.DataFrame({'stiffness': k_grid.ravel(), 'temperature': t_grid.ravel()})
    for name, values in lines.items():
        frame[name] = np.asarray(values, dtype=float).ravel()
    return frame
