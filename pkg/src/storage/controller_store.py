"""JSON persistence of joint controllers and VB posteriors."""

import json
import logging
from pathlib import Path
from typing import Union

from ..errors import DimensionError
from ..fsc.controller import JointFsc
from ..sbprior.posterior import SbPosterior

logger = logging.getLogger(__name__)


class ControllerStore:
    """Read and write ``{"agents": [{"num_nodes", "initial", "policy", "transition"}, ...]}`` documents."""

    def __init__(self, directory: Union[str, Path] = '.'):
        self.directory = Path(directory)

    def _path(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        return path if path.is_absolute() or path.parent != Path('.') else self.directory / path

    def save(self, controllers: JointFsc, path: Union[str, Path] = 'controllers.json') -> str:
        target = self._path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, 'w', encoding='utf-8') as f:
            json.dump(controllers.to_dict(), f, indent=2)
        logger.info("saved controllers with sizes %s to %s", controllers.sizes, target)
        return str(target)

    def load(self, path: Union[str, Path]) -> JointFsc:
        """
        Load a joint controller.

        Raises:
            FileNotFoundError: If the file does not exist
            DimensionError: If the document is malformed
        """
        source = self._path(path)
        if not source.exists():
            raise FileNotFoundError(f"controller file not found: {source}")
        with open(source, 'r', encoding='utf-8') as f:
            data = json.load(f)
        try:
            return JointFsc.from_dict(data)
        except (KeyError, TypeError) as e:
            raise DimensionError(f"{source}: malformed controller document ({e})") from e

    def save_posterior(self, posterior: SbPosterior, path: Union[str, Path] = 'posterior.json') -> str:
        target = self._path(path)
        target.parent.mkdir(parents=True, exist_ok=True)
        with open(target, 'w', encoding='utf-8') as f:
            json.dump(posterior.to_dict(), f)
        logger.info("saved posterior to %s", target)
        return str(target)

    def load_posterior(self, path: Union[str, Path]) -> SbPosterior:
        source = self._path(path)
        if not source.exists():
            raise FileNotFoundError(f"posterior file not found: {source}")
        with open(source, 'r', encoding='utf-8') as f:
            return SbPosterior.from_dict(json.load(f))
