"""JSON Lines persistence of episode sets."""

import json
import logging
from pathlib import Path
from typing import Dict, List, TextIO, Union

import numpy as np

from ..errors import EpisodeDataError
from ..inference.episodes import Episode, EpisodeSet
from ..model.dpomdp import RewardBounds

logger = logging.getLogger(__name__)


class EpisodeStore:
    """
    Read and write episode sets as JSON Lines.

    The first line is a header ``{"K", "N", "gamma", "r_min", "r_max"}``
    (plus optional per-agent ``num_actions`` / ``num_observations``); every
    following line holds one episode
    ``{"id", "steps": [{"a", "r", "q", "o_next"}, ...]}`` where the final step
    has no ``o_next``.
    """

    @staticmethod
    def header(episodes: EpisodeSet) -> Dict:
        data = {
            'K': len(episodes),
            'N': episodes.num_agents,
            'gamma': episodes.discount,
            'r_min': episodes.reward_bounds.r_min,
            'r_max': episodes.reward_bounds.r_max,
        }
        if episodes.num_actions is not None:
            data['num_actions'] = list(episodes.num_actions)
        if episodes.num_observations is not None:
            data['num_observations'] = list(episodes.num_observations)
        return data

    @staticmethod
    def episode_to_dict(episode: Episode) -> Dict:
        steps = []
        for t in range(episode.num_steps):
            step = {
                'a': [int(a) for a in episode.actions[t]],
                'r': float(episode.rewards[t]),
                'q': [float(q) for q in episode.behavior_probs[t]],
            }
            if t < episode.horizon:
                step['o_next'] = [int(o) for o in episode.observations[t]]
            steps.append(step)
        return {'id': int(episode.episode_id), 'steps': steps}

    @staticmethod
    def episode_from_dict(data: Dict, line: int = 0) -> Episode:
        try:
            steps = data['steps']
            if not steps:
                raise EpisodeDataError(f"line {line}: episode has no steps")
            actions = [step['a'] for step in steps]
            rewards = [step['r'] for step in steps]
            probs = [step['q'] for step in steps]
            observations = [step['o_next'] for step in steps[:-1]]
            if 'o_next' in steps[-1]:
                raise EpisodeDataError(f"line {line}: final step carries o_next")
            N = len(actions[0])
            return Episode(
                np.asarray(actions),
                np.asarray(observations, dtype=np.int64).reshape(len(steps) - 1, N),
                np.asarray(rewards),
                np.asarray(probs),
                int(data.get('id', 0)),
            )
        except (KeyError, TypeError, ValueError) as e:
            if isinstance(e, EpisodeDataError):
                raise
            raise EpisodeDataError(f"line {line}: malformed episode ({e})") from e

    def dump(self, episodes: EpisodeSet, stream: TextIO) -> None:
        stream.write(json.dumps(self.header(episodes), sort_keys=True) + '\n')
        for episode in episodes:
            stream.write(json.dumps(self.episode_to_dict(episode), sort_keys=True) + '\n')

    def save(self, episodes: EpisodeSet, path: Union[str, Path]) -> str:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, 'w', encoding='utf-8') as f:
            self.dump(episodes, f)
        logger.info("saved %d episodes to %s", len(episodes), path)
        return str(path)

    def loads(self, lines: List[str]) -> EpisodeSet:
        """Parse the lines of a JSONL document (blank lines are skipped)."""
        records = []
        for number, text in enumerate(lines, 1):
            if not text.strip():
                continue
            try:
                records.append((number, json.loads(text)))
            except json.JSONDecodeError as e:
                raise EpisodeDataError(f"line {number}: invalid JSON ({e.msg})") from e
        if not records:
            raise EpisodeDataError("episode file is empty")

        line, head = records[0]
        try:
            bounds = RewardBounds(float(head['r_min']), float(head['r_max']))
            discount = float(head['gamma'])
            declared_k = int(head['K'])
            declared_n = int(head['N'])
        except (KeyError, TypeError, ValueError) as e:
            raise EpisodeDataError(f"line {line}: malformed header ({e})") from e

        episodes = [self.episode_from_dict(data, number) for number, data in records[1:]]
        if len(episodes) != declared_k:
            raise EpisodeDataError(f"header declares K={declared_k}, file holds {len(episodes)}")
        if episodes and episodes[0].num_agents != declared_n:
            raise EpisodeDataError(
                f"header declares N={declared_n}, episodes have {episodes[0].num_agents} agents"
            )
        return EpisodeSet(
            episodes, discount, bounds,
            head.get('num_actions'), head.get('num_observations'),
        )

    def load(self, path: Union[str, Path]) -> EpisodeSet:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"episode file not found: {path}")
        with open(path, 'r', encoding='utf-8') as f:
            episodes = self.loads(f.readlines())
        logger.info("loaded %d episodes from %s", len(episodes), path)
        return episodes
