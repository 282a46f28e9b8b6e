"""Windy and stormy gridworlds.

Coordinates are ``(row, col)``, 1-based, with row 1 at the top; an upward
wind decrements the row.  Moves and wind shifts that would leave the grid are
clamped at the border.  The goal is absorbing with zero reward; every step
taken from any other cell costs 1 (10 when landing in a puddle).
"""

from __future__ import annotations

import itertools

import numpy as np

from ..mdp import EnumerableMDP

UP, RIGHT, DOWN, LEFT = 0, 1, 2, 3
ACTION_NAMES = ("up", "right", "down", "left")
_MOVES = {UP: (-1, 0), RIGHT: (0, 1), DOWN: (1, 0), LEFT: (0, -1)}

WG_COLUMN_WIND = (0, 0, 0, 1, 1, 1, 2, 2, 1, 0)
SG_ROW_WIND = (0, 0, 1, 1, 1, 1, 0)
WIND_JITTER = (-1, 0, 1)


class _Grid(EnumerableMDP):
    width = 10
    height = 7

    def __init__(self, gamma, noise, start, goal):
        self.start = start
        self.goal = goal
        self.start_index = self.encode_state(start)
        self.goal_index = self.encode_state(goal)
        terminal = np.zeros(self.width * self.height, dtype=bool)
        terminal[self.goal_index] = True
        super().__init__(self.width * self.height, 4, gamma, noise, terminal=terminal)

    def encode_state(self, state):
        row, col = state
        if not (1 <= row <= self.height and 1 <= col <= self.width):
            raise ValueError(f"cell {state} is outside the grid")
        return (row - 1) * self.width + (col - 1)

    def decode_state(self, index):
        return divmod(int(index), self.width)[0] + 1, int(index) % self.width + 1

    def _clamp(self, row, col):
        return min(max(row, 1), self.height), min(max(col, 1), self.width)

    def _move(self, row, col, action):
        dr, dc = _MOVES[action]
        return self._clamp(row + dr, col + dc)

    def reset(self, rng):
        return self.start_index


class WindyGridworld(_Grid):
    """10x7 grid with a stochastic upward wind in the middle columns."""

    name = "wg"

    def __init__(self, gamma=0.9, column_wind=WG_COLUMN_WIND):
        self.column_wind = tuple(column_wind)
        super().__init__(gamma, [1 / 3, 1 / 3, 1 / 3], start=(3, 1), goal=(3, 8))

    def decode_noise(self, code):
        return WIND_JITTER[int(code)]

    def transition(self, s, a, k):
        if s == self.goal_index:
            return s, 0.0
        row, col = self.decode_state(s)
        wind = self.column_wind[col - 1]
        row, col = self._move(row, col, a)
        if wind:
            row, col = self._clamp(row - max(wind + WIND_JITTER[k], 0), col)
        return self.encode_state((row, col)), -1.0


class StormyGridworld(_Grid):
    """Windy gridworld with four wind directions and random rain puddles.

    A noise outcome is ``(direction, jitter, rain)``: the wind blows up with
    probability ``p_up`` and from each other direction with equal share of the
    rest; vertical winds use the column intensities, horizontal winds the row
    intensities, each perturbed by a jitter in ``{-1, 0, 1}``.  With
    probability ``p_rain`` it rains on one central cell drawn uniformly, which
    wets that cell and its eight neighbours for the current step only.
    """

    name = "sg"
    puddle_reward = -10.0

    def __init__(self, gamma=0.95, p_up=0.5, p_rain=0.5,
                 column_wind=WG_COLUMN_WIND, row_wind=SG_ROW_WIND):
        self.column_wind = tuple(column_wind)
        self.row_wind = tuple(row_wind)
        # more than two cells away from every edge
        self.rain_cells = [(r, c)
                           for r in range(1, self.height + 1)
                           for c in range(1, self.width + 1)
                           if min(r - 1, self.height - r, c - 1, self.width - c) > 2]
        self._wet = [None] + [self._neighbourhood(cell) for cell in self.rain_cells]
        p_other = (1.0 - p_up) / 3.0
        direction_p = {UP: p_up, DOWN: p_other, LEFT: p_other, RIGHT: p_other}
        n_rain = len(self.rain_cells)
        rain_p = [1.0 - p_rain] + [p_rain / n_rain] * n_rain
        self._outcomes = list(itertools.product(
            (UP, DOWN, LEFT, RIGHT), range(len(WIND_JITTER)), range(n_rain + 1)))
        probs = [direction_p[d] / len(WIND_JITTER) * rain_p[z] for d, _, z in self._outcomes]
        super().__init__(gamma, probs, start=(3, 1), goal=(3, 10))

    def _neighbourhood(self, cell):
        r, c = cell
        return {(r + dr, c + dc) for dr in (-1, 0, 1) for dc in (-1, 0, 1)}

    def decode_noise(self, code):
        direction, j, z = self._outcomes[int(code)]
        rain = None if z == 0 else self.rain_cells[z - 1]
        return ACTION_NAMES[direction], WIND_JITTER[j], rain

    def transition(self, s, a, k):
        if s == self.goal_index:
            return s, 0.0
        direction, j, z = self._outcomes[k]
        row0, col0 = self.decode_state(s)
        row, col = self._move(row0, col0, a)
        if direction in (UP, DOWN):
            wind = self.column_wind[col0 - 1]
            if wind:
                shift = max(wind + WIND_JITTER[j], 0)
                row, col = self._clamp(row - shift if direction == UP else row + shift, col)
        else:
            wind = self.row_wind[row0 - 1]
            if wind:
                shift = max(wind + WIND_JITTER[j], 0)
                row, col = self._clamp(row, col + shift if direction == RIGHT else col - shift)
        wet = self._wet[z]
        reward = self.puddle_reward if wet is not None and (row, col) in wet else -1.0
        return self.encode_state((row, col)), reward


def make_windy_gridworld(gamma=0.9):
    return WindyGridworld(gamma=gamma)


def make_stormy_gridworld(gamma=0.95, p_up=0.5, p_rain=0.5):
    return StormyGridworld(gamma=gamma, p_up=p_up, p_rain=p_rain)
