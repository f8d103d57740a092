# fixture: cliffwalking
"""Cliff walking on a 4 x 12 grid."""


class Environment:
    ROWS, COLS = 4, 12
    START, GOAL = 36, 47

    def __init__(self):
        self.state = self.START

    def reset(self, seed=None):
        self.state = self.START
        return self.state

    def set_state(self, state):
        s = list(state) if hasattr(state, "__len__") else [state]
        if len(s) != 1:
            raise ValueError("state must have length 1")
        self.state = int(s[0])

    def step(self, action):
        row, col = divmod(self.state, self.COLS)
        if action == 0:
            row = max(row - 1, 0)
        elif action == 1:
            col = min(col + 1, self.COLS - 1)
        elif action == 2:
            row = min(row + 1, self.ROWS - 1)
        elif action == 3:
            col = max(col - 1, 0)
        else:
            raise ValueError(f"invalid action {action}")
        nxt = row * self.COLS + col
        if self.START < nxt < self.GOAL:
            self.state = self.START
            return self.state, -100.0, False
        self.state = nxt
        return nxt, -1.0, nxt == self.GOAL
