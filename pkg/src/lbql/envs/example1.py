"""Two-state coin-flip MDP with an absorbing terminal state.

States ``A`` and ``B`` plus a terminal ``T``; actions ``L`` and ``R``; a fair
coin decides each transition.  Going right is optimal in both states, with
``Q*(A, R) = Q*(B, R) = 0`` and ``Q*(A, L) = Q*(B, L) = -1``.
"""

from __future__ import annotations

from ..mdp import EnumerableMDP

A, B, T = 0, 1, 2
LEFT, RIGHT = 0, 1
HEADS, TAILS = 0, 1

STATE_NAMES = ("A", "B", "T")
ACTION_NAMES = ("L", "R")

# (state, action) -> {coin: (next_state, reward)}
_EDGES = {
    (A, LEFT): {HEADS: (T, -1.0), TAILS: (A, -1.0)},
    (A, RIGHT): {HEADS: (B, 1.0), TAILS: (A, -1.0)},
    (B, LEFT): {HEADS: (A, -1.0), TAILS: (A, -1.0)},
    (B, RIGHT): {HEADS: (T, 1.0), TAILS: (B, -1.0)},
}


class Example1(EnumerableMDP):
    name = "example1"

    def __init__(self, gamma=0.95):
        terminal = [False, False, True]
        super().__init__(3, 2, gamma, [0.5, 0.5], terminal=terminal)

    def transition(self, s, a, k):
        if s == T:
            return T, 0.0
        return _EDGES[(s, a)][k]

    def decode_noise(self, code):
        return "H" if int(code) == HEADS else "T"

    def decode_state(self, index):
        return STATE_NAMES[index]

    def encode_state(self, state):
        return STATE_NAMES.index(state) if isinstance(state, str) else int(state)

    def reset(self, rng):
        return A


def make_example1(gamma=0.95):
    return Example1(gamma=gamma)
