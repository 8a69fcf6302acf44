"""Two-player 16x16 grid Pong with a training agent (left) and a sparring agent (right)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .base import AsyncEnv, Discrete, MdpSpec, RoleSpec

UP, STAY, DOWN = 0, 1, 2
HEIGHT = 16
WIDTH = 16
PADDLE_HALF = 1  # paddles span 3 cells
LEFT_X, RIGHT_X = 0, WIDTH - 1


@dataclass
class PongState:
    ball_x: int
    ball_y: int
    ball_dx: int
    ball_dy: int
    left_y: int
    right_y: int
    score_left: int = 0
    score_right: int = 0

    def copy(self) -> "PongState":
        return PongState(**vars(self))


def _move(y: int, action: int) -> int:
    y += (action == DOWN) - (action == UP)
    return min(max(y, PADDLE_HALF), HEIGHT - 1 - PADDLE_HALF)


def serve(state: PongState, rng: np.random.Generator, toward: int | None = None) -> None:
    """Put the ball back in the middle columns heading left (-1) or right (+1)."""
    dx = toward if toward is not None else int(rng.choice((-1, 1)))
    state.ball_x = WIDTH // 2 - 1 if dx < 0 else WIDTH // 2
    state.ball_y = int(rng.integers(4, HEIGHT - 4))
    state.ball_dx = dx
    state.ball_dy = int(rng.choice((-1, 1)))


def ponglite_step(state: PongState, action_left: int, action_right: int,
                  rng: np.random.Generator) -> tuple[PongState, int]:
    """Advance one tick.  Returns the new state and who scored (-1 left, +1 right, 0 none).

    Paddles move first, then the ball moves one cell diagonally.  Leaving the
    top or bottom row mirrors the ball back; entering a paddle column on a
    row the paddle covers mirrors it back horizontally; entering it anywhere
    else scores for the opponent and re-serves from the centre.
    """
    s = state.copy()
    s.left_y = _move(s.left_y, action_left)
    s.right_y = _move(s.right_y, action_right)
    ny = s.ball_y + s.ball_dy
    if ny < 0 or ny >= HEIGHT:
        s.ball_dy = -s.ball_dy
        ny = s.ball_y + s.ball_dy
    nx = s.ball_x + s.ball_dx
    scored = 0
    if nx <= LEFT_X:
        if abs(ny - s.left_y) <= PADDLE_HALF:
            s.ball_dx = 1
            nx = LEFT_X + 2
        else:
            s.score_right += 1
            scored = 1
    elif nx >= RIGHT_X:
        if abs(ny - s.right_y) <= PADDLE_HALF:
            s.ball_dx = -1
            nx = RIGHT_X - 2
        else:
            s.score_left += 1
            scored = -1
    if scored:
        # the side that conceded receives the next serve
        serve(s, rng, toward=-1 if scored == 1 else 1)
    else:
        s.ball_x, s.ball_y = nx, ny
    return s, scored


def observation(state: PongState, side: int) -> np.ndarray:
    """(ball x, ball y, ball dx, ball dy, own paddle y, opponent paddle y) in [0, 1]."""
    own, opp = (state.left_y, state.right_y) if side == 0 else (state.right_y, state.left_y)
    return np.array([
        state.ball_x / (WIDTH - 1),
        state.ball_y / (HEIGHT - 1),
        (state.ball_dx + 1) / 2,
        (state.ball_dy + 1) / 2,
        own / (HEIGHT - 1),
        opp / (HEIGHT - 1),
    ])


class PongLite(AsyncEnv):
    spec = MdpSpec((
        RoleSpec("left", 6, Discrete(3, default=STAY), 1, training=True),
        RoleSpec("right", 6, Discrete(3, default=STAY), 0, training=False),
    ))

    def __init__(self, seed: int = 0, points_to_win: int = 5, horizon: int = 1000):
        if points_to_win < 1 or horizon < 1:
            raise ValueError("points_to_win and horizon must be >= 1")
        self.points_to_win = points_to_win
        self.horizon = horizon
        self._rng = np.random.default_rng(seed)
        super().__init__(seed)
        self.state = PongState(0, 0, 1, 1, HEIGHT // 2, HEIGHT // 2)
        self.moves = 0
        self.reset()

    def _reset(self):
        mid = HEIGHT // 2
        self.state = PongState(0, 0, 1, 1, mid, mid)
        serve(self.state, self._rng)
        self.moves = 0

    def _observe(self, index):
        return observation(self.state, index)

    def _advance(self, actions):
        a_left, a_right = int(actions[0]), int(actions[1])
        self.moves += a_left != STAY
        self.state, scored = ponglite_step(self.state, a_left, a_right, self._rng)
        reward = np.array([-float(scored)])
        s = self.state
        over = max(s.score_left, s.score_right) >= self.points_to_win
        return [reward, None], over

    @property
    def won(self) -> bool:
        return self.state.score_left > self.state.score_right


def scripted_sparring_policy(obs: np.ndarray, rng: np.random.Generator, epsilon: float = 0.2) -> int:
    """Track the ball's row; with probability ``epsilon`` pick uniformly at random."""
    if rng.random() < epsilon:
        return int(rng.integers(3))
    ball_y, own_y = obs[1], obs[4]
    if ball_y < own_y:
        return UP
    if ball_y > own_y:
        return DOWN
    return STAY
