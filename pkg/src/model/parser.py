"""Reader and writer for the `.dpomdp` benchmark file format."""

import io
import itertools
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, TextIO, Tuple, Union

import numpy as np

from ..errors import ModelFormatError
from .dpomdp import DecPomdpModel, check_distribution

logger = logging.getLogger(__name__)

PARSE_TOL = 1e-6
RENORMALIZE_TOL = 1e-12

HEADER_KEYS = ('agents', 'discount', 'values', 'states', 'start', 'actions', 'observations')
TABLE_KEYS = ('T', 'O', 'R')


class _Statement:
    """One keyword line plus the data lines that follow it."""

    def __init__(self, line: int, key: str, fields: List[str]):
        self.line = line
        self.key = key
        self.fields = fields
        self.rows: List[Tuple[int, str]] = []

    def tokens(self) -> List[str]:
        """Tokens of the last head field followed by all continuation rows."""
        out = self.fields[-1].split() if self.fields else []
        for _, row in self.rows:
            out.extend(row.split())
        return out

    def row_tokens(self) -> List[List[str]]:
        """Inline remainder (if any) and each continuation row, split separately."""
        out = []
        if self.fields and self.fields[-1].strip():
            out.append(self.fields[-1].split())
        out.extend(row.split() for _, row in self.rows)
        return out


def _split_statements(stream: TextIO) -> List[_Statement]:
    """Group lines into statements: a line containing ':' starts a new one."""
    statements: List[_Statement] = []
    for number, raw in enumerate(stream, start=1):
        line = raw.split('#')[0].strip()
        if not line:
            continue
        if ':' in line:
            parts = line.split(':')
            key = parts[0].strip()
            if key not in HEADER_KEYS + TABLE_KEYS:
                raise ModelFormatError(f"unknown keyword '{key}'", number)
            statements.append(_Statement(number, key, [p.strip() for p in parts[1:]]))
        else:
            if not statements:
                raise ModelFormatError("data before the first keyword", number)
            statements[-1].rows.append((number, line))
    return statements


class _Builder:
    """Accumulates header values and table writes while statements are read."""

    def __init__(self):
        self.num_agents: Optional[int] = None
        self.agent_names: List[str] = []
        self.discount: Optional[float] = None
        self.cost = False
        self.states: Optional[List[str]] = None
        self.actions: Optional[List[List[str]]] = None
        self.observations: Optional[List[List[str]]] = None
        self.start: Optional[np.ndarray] = None
        self._start_statement: Optional[_Statement] = None
        self.num_actions: Tuple[int, ...] = ()
        self.num_obs: Tuple[int, ...] = ()
        self.T: Optional[np.ndarray] = None
        self.O: Optional[np.ndarray] = None
        self.R: Optional[np.ndarray] = None
        # (state, joint action) -> reward over (next state, joint observation)
        self.R_detail: Dict[Tuple[int, int], np.ndarray] = {}

    # -- header -----------------------------------------------------------------

    def header(self, st: _Statement) -> None:
        tokens = st.tokens()
        if st.key == 'agents':
            if len(tokens) == 1 and tokens[0].isdigit():
                self.num_agents = int(tokens[0])
                self.agent_names = [str(n) for n in range(self.num_agents)]
            elif tokens:
                self.num_agents = len(tokens)
                self.agent_names = tokens
            if not self.num_agents:
                raise ModelFormatError("agents must be a positive count or a list of names", st.line)
        elif st.key == 'discount':
            self.discount = _number(tokens, st.line, 'discount')
        elif st.key == 'values':
            if tokens not in (['reward'], ['cost']):
                raise ModelFormatError("values must be 'reward' or 'cost'", st.line)
            self.cost = tokens == ['cost']
        elif st.key == 'states':
            self.states = _names(tokens, st.line, 'states')
        elif st.key == 'start':
            # resolved once the state set is known
            self._start_statement = st
        elif st.key in ('actions', 'observations'):
            if self.num_agents is None:
                raise ModelFormatError(f"'{st.key}' before 'agents'", st.line)
            rows = st.row_tokens()
            if len(rows) != self.num_agents:
                raise ModelFormatError(
                    f"'{st.key}' needs one line per agent, got {len(rows)} for {self.num_agents}",
                    st.line,
                )
            sets = [_names(row, st.line, st.key) for row in rows]
            setattr(self, st.key, sets)

    def _resolve_start(self) -> None:
        S = len(self.states)
        st = self._start_statement
        if st is None:
            self.start = np.full(S, 1.0 / S)
            return
        tokens = st.tokens()
        if tokens == ['uniform']:
            self.start = np.full(S, 1.0 / S)
        elif len(tokens) == 1 and S > 1:
            belief = np.zeros(S)
            belief[_state_index(tokens[0], self.states, st.line)] = 1.0
            self.start = belief
        elif len(tokens) == S:
            self.start = np.array([_float(t, st.line) for t in tokens])
        else:
            raise ModelFormatError(f"start needs 'uniform', a state or {S} probabilities", st.line)

    def _ensure_tables(self, st: _Statement) -> None:
        missing = [
            name for name, value in (
                ('agents', self.num_agents), ('states', self.states),
                ('actions', self.actions), ('observations', self.observations),
            ) if value is None
        ]
        if missing:
            raise ModelFormatError(f"'{st.key}' before header keys {missing}", st.line)
        if self.T is None:
            S = len(self.states)
            self.num_actions = tuple(len(a) for a in self.actions)
            self.num_obs = tuple(len(o) for o in self.observations)
            A, O = int(np.prod(self.num_actions)), int(np.prod(self.num_obs))
            self.T = np.zeros((S, A, S))
            self.O = np.zeros((A, S, O))
            self.R = np.zeros((S, A))

    # -- index resolution -----------------------------------------------------

    def _joint(self, field: str, sets: List[List[str]], dims: Tuple[int, ...], line: int) -> List[int]:
        tokens = field.split()
        total = int(np.prod(dims))
        if tokens == ['*']:
            return list(range(total))
        if len(tokens) == 1 and len(dims) > 1:
            index = _int(tokens[0], line)
            if not 0 <= index < total:
                raise ModelFormatError(f"joint index {index} out of range", line)
            return [index]
        if len(tokens) != len(dims):
            raise ModelFormatError(f"expected {len(dims)} per-agent entries in '{field}'", line)
        per_agent = [
            list(range(dims[n])) if tok == '*' else [_member(tok, sets[n], line)]
            for n, tok in enumerate(tokens)
        ]
        return [int(np.ravel_multi_index(combo, dims)) for combo in itertools.product(*per_agent)]

    def _states(self, field: str, line: int) -> List[int]:
        if field.strip() == '*':
            return list(range(len(self.states)))
        return [_state_index(field.strip(), self.states, line)]

    @staticmethod
    def _is_wildcard(field: str) -> bool:
        return all(tok == '*' for tok in field.split())

    # -- tables ---------------------------------------------------------------

    def table(self, st: _Statement) -> None:
        self._ensure_tables(st)
        if len(st.fields) < 2:
            raise ModelFormatError(f"'{st.key}' needs at least one index field", st.line)
        index_fields = st.fields[:-1]
        data = st.tokens()
        if st.key == 'T':
            self._transition(st, index_fields, data)
        elif st.key == 'O':
            self._observation(st, index_fields, data)
        else:
            self._reward(st, index_fields, data)

    def _transition(self, st: _Statement, idx: List[str], data: List[str]) -> None:
        S = len(self.states)
        actions = self._joint(idx[0], self.actions, self.num_actions, st.line)
        if len(idx) == 1:
            matrix = _matrix(data, S, S, st.line)
            for a in actions:
                self.T[:, a, :] = matrix
        elif len(idx) == 2:
            row = _row(data, S, st.line)
            self.T[np.ix_(self._states(idx[1], st.line), actions)] = row
        elif len(idx) == 3:
            value = _number(data, st.line, 'probability')
            self.T[np.ix_(self._states(idx[1], st.line), actions, self._states(idx[2], st.line))] = value
        else:
            raise ModelFormatError("too many fields in T statement", st.line)

    def _observation(self, st: _Statement, idx: List[str], data: List[str]) -> None:
        S, O = len(self.states), int(np.prod(self.num_obs))
        actions = self._joint(idx[0], self.actions, self.num_actions, st.line)
        if len(idx) == 1:
            self.O[actions] = _matrix(data, S, O, st.line)
        elif len(idx) == 2:
            self.O[np.ix_(actions, self._states(idx[1], st.line))] = _row(data, O, st.line)
        elif len(idx) == 3:
            value = _number(data, st.line, 'probability')
            observations = self._joint(idx[2], self.observations, self.num_obs, st.line)
            self.O[np.ix_(actions, self._states(idx[1], st.line), observations)] = value
        else:
            raise ModelFormatError("too many fields in O statement", st.line)

    def _reward(self, st: _Statement, idx: List[str], data: List[str]) -> None:
        S, O = len(self.states), int(np.prod(self.num_obs))
        if len(idx) not in (2, 3, 4):
            raise ModelFormatError("R statement needs 2 to 4 index fields", st.line)
        actions = self._joint(idx[0], self.actions, self.num_actions, st.line)
        states = self._states(idx[1], st.line)

        if len(idx) == 4 and self._is_wildcard(idx[2]) and self._is_wildcard(idx[3]):
            value = _number(data, st.line, 'reward')
            self.R[np.ix_(states, actions)] = value
            for key in itertools.product(states, actions):
                self.R_detail.pop(key, None)
            return

        if len(idx) == 4:
            values = _number(data, st.line, 'reward')
            next_states = self._states(idx[2], st.line)
            observations = self._joint(idx[3], self.observations, self.num_obs, st.line)
        elif len(idx) == 3:
            values = _row(data, O, st.line, allow_keywords=False)
            next_states = self._states(idx[2], st.line)
            observations = list(range(O))
        else:
            values = _matrix(data, S, O, st.line, allow_keywords=False)
            next_states = list(range(S))
            observations = list(range(O))

        for s, a in itertools.product(states, actions):
            detail = self.R_detail.get((s, a))
            if detail is None:
                detail = np.full((S, O), self.R[s, a])
                self.R_detail[(s, a)] = detail
            detail[np.ix_(next_states, observations)] = values

    # -- finish ---------------------------------------------------------------

    def build(self, tol: float) -> DecPomdpModel:
        if self.discount is None:
            raise ModelFormatError("missing 'discount'")
        if self.states is None or self.actions is None or self.observations is None:
            raise ModelFormatError("missing 'states', 'actions' or 'observations'")
        if self.T is None:
            raise ModelFormatError("no T, O or R statements")
        self._resolve_start()

        check_distribution(self.start, 'start', tol)
        check_distribution(self.T, 'transition', tol)
        check_distribution(self.O, 'observation', tol)
        start = _renormalize(self.start)
        T = _renormalize(self.T)
        O = _renormalize(self.O)

        R = self.R.copy()
        for (s, a), detail in self.R_detail.items():
            R[s, a] = float(np.sum(T[s, a, :, None] * O[a] * detail))
        if self.cost:
            R = -R
        if self.R_detail:
            logger.debug("folded %d detailed reward rows by expectation", len(self.R_detail))

        return DecPomdpModel(
            state_names=list(self.states),
            action_names=[list(a) for a in self.actions],
            observation_names=[list(o) for o in self.observations],
            transition=T,
            observation=O,
            reward=R,
            discount=self.discount,
            initial_belief=start,
            agent_names=list(self.agent_names),
        )


def parse_dpomdp(text: Union[str, TextIO], tol: float = PARSE_TOL) -> DecPomdpModel:
    """
    Parse a `.dpomdp` document.

    Args:
        text: Document contents or an open text stream
        tol: Allowed deviation of a probability row sum from one

    Returns:
        Validated DecPomdpModel

    Raises:
        ModelFormatError: Syntax error, reported with its line number
        StochasticityError: A distribution does not sum to one within ``tol``
        DimensionError: Table shapes disagree with the declared index sets
    """
    stream = io.StringIO(text) if isinstance(text, str) else text
    builder = _Builder()
    for st in _split_statements(stream):
        if st.key in TABLE_KEYS:
            builder.table(st)
        else:
            builder.header(st)
    model = builder.build(tol)
    logger.debug(
        "parsed model: %d agents, %d states, actions %s, observations %s",
        model.num_agents, model.num_states, model.num_actions, model.num_observations,
    )
    return model


def load_dpomdp(path: Union[str, Path], tol: float = PARSE_TOL) -> DecPomdpModel:
    """Parse a `.dpomdp` file from disk."""
    with open(path, 'r', encoding='utf-8') as f:
        return parse_dpomdp(f, tol)


def serialize_dpomdp(model: DecPomdpModel) -> str:
    """
    Write ``model`` in the canonical subset of the `.dpomdp` format.

    Every table is written in full, rewards as ``R: a : s : * : * : r``.
    Floats use ``repr`` so re-parsing restores the exact values.
    """
    lines = [
        f"agents: {_name_list(model.agent_names)}",
        f"discount: {_fmt(model.discount)}",
        "values: reward",
        f"states: {_name_list(model.state_names)}",
        "start:",
        _fmt_row(model.initial_belief),
        "actions:",
    ]
    lines.extend(_name_list(names) for names in model.action_names)
    lines.append("observations:")
    lines.extend(_name_list(names) for names in model.observation_names)

    joint_labels = [
        ' '.join(model.action_names[n][i] for n, i in enumerate(model.split_joint_action(a)))
        for a in range(model.num_joint_actions)
    ]
    for a, label in enumerate(joint_labels):
        lines.append(f"T: {label} :")
        lines.extend(_fmt_row(row) for row in model.transition[:, a, :])
    for a, label in enumerate(joint_labels):
        lines.append(f"O: {label} :")
        lines.extend(_fmt_row(row) for row in model.observation[a])
    for a, label in enumerate(joint_labels):
        for s, state in enumerate(model.state_names):
            lines.append(f"R: {label} : {state} : * : * : {_fmt(model.reward[s, a])}")
    return '\n'.join(lines) + '\n'


def _renormalize(table: np.ndarray) -> np.ndarray:
    sums = table.sum(axis=-1, keepdims=True)
    off = np.abs(sums - 1.0) > RENORMALIZE_TOL
    return np.where(off, table / np.where(sums > 0, sums, 1.0), table)


def _name_list(names: Sequence[str]) -> str:
    if list(names) == [str(i) for i in range(len(names))]:
        return str(len(names))
    return ' '.join(names)


def _fmt(value: float) -> str:
    return repr(float(value))


def _fmt_row(values: Sequence[float]) -> str:
    return ' '.join(_fmt(v) for v in values)


def _names(tokens: List[str], line: int, what: str) -> List[str]:
    if not tokens:
        raise ModelFormatError(f"empty '{what}' declaration", line)
    if len(tokens) == 1 and tokens[0].isdigit():
        count = int(tokens[0])
        if count < 1:
            raise ModelFormatError(f"'{what}' count must be positive", line)
        return [str(i) for i in range(count)]
    if len(set(tokens)) != len(tokens):
        raise ModelFormatError(f"duplicate names in '{what}'", line)
    return list(tokens)


def _member(token: str, names: List[str], line: int) -> int:
    if token in names:
        return names.index(token)
    if token.isdigit() and int(token) < len(names):
        return int(token)
    raise ModelFormatError(f"unknown name '{token}'", line)


def _state_index(token: str, states: List[str], line: int) -> int:
    return _member(token, states, line)


def _float(token: str, line: int) -> float:
    try:
        return float(token)
    except ValueError:
        raise ModelFormatError(f"expected a number, got '{token}'", line)


def _int(token: str, line: int) -> int:
    try:
        return int(token)
    except ValueError:
        raise ModelFormatError(f"expected an integer, got '{token}'", line)


def _number(tokens: List[str], line: int, what: str) -> float:
    if len(tokens) != 1:
        raise ModelFormatError(f"expected a single {what} value, got {len(tokens)} tokens", line)
    return _float(tokens[0], line)


def _row(tokens: List[str], size: int, line: int, allow_keywords: bool = True) -> np.ndarray:
    if allow_keywords and tokens == ['uniform']:
        return np.full(size, 1.0 / size)
    if len(tokens) != size:
        raise ModelFormatError(f"expected {size} values, got {len(tokens)}", line)
    return np.array([_float(t, line) for t in tokens])


def _matrix(tokens: List[str], rows: int, cols: int, line: int, allow_keywords: bool = True) -> np.ndarray:
    if allow_keywords and tokens == ['uniform']:
        return np.full((rows, cols), 1.0 / cols)
    if allow_keywords and tokens == ['identity']:
        if rows != cols:
            raise ModelFormatError("identity needs a square matrix", line)
        return np.eye(rows)
    if len(tokens) != rows * cols:
        raise ModelFormatError(f"expected {rows}x{cols} values, got {len(tokens)}", line)
    return np.array([_float(t, line) for t in tokens]).reshape(rows, cols)
