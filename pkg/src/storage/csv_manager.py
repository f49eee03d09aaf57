"""CSV manager for traces, learning curves, sweeps and benchmark tables."""

import csv
import logging
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

from omegaconf import DictConfig

logger = logging.getLogger(__name__)

TRACE_FIELDS = ['iter', 'lb', 'delta_lb', 'value_estimate']
CURVE_FIELDS = ['iter', 'dataset_size', 'test_value', 'std_err', 'mean_inferred_Z', 'exploration_rate']
SWEEP_FIELDS = ['num_nodes', 'seed', 'empirical_value', 'test_value', 'std_err', 'wall_time']
BENCH_FIELDS = [
    'benchmark', 'num_agents', 'num_states', 'value', 'std_err',
    'inferred_sizes', 'wall_time', 'reference_value',
]


class CSVManager:
    """Write and read the CSV artifacts of an experiment directory."""

    def __init__(self, config: Union[DictConfig, str, Path]):
        """
        Initialize CSV manager.

        Args:
            config: OmegaConf configuration (uses ``output.directory``) or a directory path
        """
        if isinstance(config, DictConfig):
            directory = config.output.directory
        else:
            directory = config
        self.output_path = Path(directory)
        self.output_path.mkdir(parents=True, exist_ok=True)

    def _write(
        self,
        filename: str,
        fieldnames: Sequence[str],
        rows: Iterable[Dict],
        append: bool = False
    ) -> str:
        csv_file = self.output_path / filename
        file_exists = csv_file.exists()
        write_mode = 'a' if (append and file_exists) else 'w'
        write_header = not (append and file_exists)

        count = 0
        with open(csv_file, write_mode, encoding='utf-8-sig', newline='') as f:
            writer = csv.DictWriter(f, fieldnames=list(fieldnames), quoting=csv.QUOTE_MINIMAL)
            if write_header:
                writer.writeheader()
            for row in rows:
                writer.writerow(row)
                count += 1

        action = "appended" if (append and file_exists) else "wrote"
        logger.info("%s %d rows to %s", action, count, csv_file)
        return str(csv_file)

    def save_trace(self, rows: List[Dict], num_agents: int, filename: str = 'trace.csv') -> str:
        """
        Save a VB or EM trace.

        Args:
            rows: Dicts with ``iter, lb, delta_lb, value_estimate`` and optional ``sizes``
            num_agents: Number of ``size_n`` columns
            filename: Output file name
        """
        size_fields = [f'size_{n + 1}' for n in range(num_agents)]
        flat = []
        for row in rows:
            out = {key: row[key] for key in TRACE_FIELDS}
            sizes = row.get('sizes') or [''] * num_agents
            out.update(zip(size_fields, sizes))
            flat.append(out)
        return self._write(filename, TRACE_FIELDS + size_fields, flat)

    def save_learning_curve(self, rows: List[Dict], filename: str = 'learning_curve.csv') -> str:
        flat = [
            {
                'iter': row['iteration'],
                'dataset_size': row['dataset_size'],
                'test_value': row['test_value'],
                'std_err': row['std_err'],
                'mean_inferred_Z': row['mean_inferred_z'],
                'exploration_rate': row['exploration_rate'],
            }
            for row in rows
        ]
        return self._write(filename, CURVE_FIELDS, flat)

    def save_sweep(self, rows: List[Dict], filename: str = 'sweep.csv') -> str:
        return self._write(filename, SWEEP_FIELDS, rows)

    def save_bench_rows(self, rows: List[Dict], filename: str = 'bench.csv', append: bool = False) -> str:
        """
        Save benchmark table rows.

        ``inferred_sizes`` lists are joined with ``;``.
        """
        flat = []
        for row in rows:
            out = dict(row)
            sizes = out.get('inferred_sizes')
            if isinstance(sizes, (list, tuple)):
                out['inferred_sizes'] = ';'.join(str(z) for z in sizes)
            flat.append(out)
        return self._write(filename, BENCH_FIELDS, flat, append=append)

    def load_rows(self, csv_path: Optional[str] = None, filename: str = 'trace.csv') -> List[Dict]:
        """
        Load rows of a CSV file as string dictionaries.

        Raises:
            FileNotFoundError: If the file does not exist
        """
        csv_file = Path(csv_path) if csv_path is not None else self.output_path / filename
        if not csv_file.exists():
            raise FileNotFoundError(f"CSV file not found: {csv_file}")
        with open(csv_file, 'r', encoding='utf-8-sig') as f:
            return list(csv.DictReader(f))
