"""Storage module for episode, controller and CSV persistence."""

from .controller_store import ControllerStore
from .csv_manager import CSVManager
from .episode_store import EpisodeStore

__all__ = ['CSVManager', 'ControllerStore', 'EpisodeStore']
