"""Decision problems and exact linear minimization oracles.

Every problem minimizes ``costs @ x`` over the vertices of a fixed polytope
and returns the chosen vertex as a 0/1 indicator vector. Ties are broken by
a fixed deterministic rule per problem, so identical inputs always produce
identical outputs. All operations are pure functions of their inputs.
"""

from __future__ import annotations

import math
from abc import ABC, abstractmethod

import numpy as np


def _as_cost_matrix(costs, dim: int) -> tuple[np.ndarray, bool]:
    """Validate costs and reshape to (m, dim). Returns (matrix, was_1d)."""
    c = np.asarray(costs, dtype=float)
    single = c.ndim == 1
    if single:
        c = c[None, :]
    if c.ndim != 2 or c.shape[1] != dim:
        raise ValueError(f"expected cost vectors of length {dim}, got shape {np.shape(costs)}")
    if not np.all(np.isfinite(c)):
        raise ValueError("cost vector contains non-finite entries")
    return c, single


class DecisionProblem(ABC):
    """A linear minimization oracle over a fixed polytope.

    Attributes:
        dim: length of the cost vectors the oracle accepts.
        name: human-readable problem identifier.
    """

    dim: int
    name: str

    @abstractmethod
    def solve_batch(self, costs: np.ndarray) -> np.ndarray:
        """Minimize each row of an (m, dim) cost matrix; returns (m, dim) 0/1 vertices."""

    def solve(self, costs) -> np.ndarray:
        """Return the vertex minimizing ``costs @ x``, with fixed tie-breaking."""
        c, _ = _as_cost_matrix(costs, self.dim)
        return self.solve_batch(c)[0]

    def optimal_values(self, costs) -> np.ndarray:
        """Optimal objective value(s) min_x costs @ x, one per cost row."""
        c, single = _as_cost_matrix(costs, self.dim)
        x = self.solve_batch(c)
        vals = np.einsum("ij,ij->i", c, x)
        return vals[0] if single else vals


class TwoEdgeProblem(DecisionProblem):
    """Pick exactly one of two parallel edges; ties go to edge 1 (index 0)."""

    def __init__(self):
        self.dim = 2
        self.name = "two-edge"

    def solve_batch(self, costs: np.ndarray) -> np.ndarray:
        c, _ = _as_cost_matrix(costs, self.dim)
        x = np.zeros_like(c)
        pick_second = c[:, 1] < c[:, 0]
        x[~pick_second, 0] = 1.0
        x[pick_second, 1] = 1.0
        return x


class EnumeratedPolytope(DecisionProblem):
    """Oracle backed by an explicit vertex list; argmin ties go to the lowest index.

    Used as the brute-force reference oracle in tests of the grid DP.
    """

    def __init__(self, vertices: np.ndarray, name: str = "enumerated"):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] == 0:
            raise ValueError("vertices must be a nonempty (k, d) array")
        self.vertices = v
        self.dim = v.shape[1]
        self.name = name

    def solve_batch(self, costs: np.ndarray) -> np.ndarray:
        c, _ = _as_cost_matrix(costs, self.dim)
        objectives = c @ self.vertices.T  # (m, k)
        best = np.argmin(objectives, axis=1)  # first minimum wins
        return self.vertices[best]


class GridNetwork(DecisionProblem):
    """Shortest path on a rows x cols grid with directed right/down edges.

    Source is the upper-left node, sink the lower-right. Edges are indexed in
    lexicographic node order with the right edge before the down edge, so a
    5x5 grid has 40 edges and 70 source-to-sink paths. The solver is a
    single-pass dynamic program in topological (row-major) order and handles
    negative edge costs. Ties prefer the predecessor reached via the right
    edge (lower edge index).
    """

    def __init__(self, rows: int = 5, cols: int = 5):
        if rows < 1 or cols < 1 or (rows == 1 and cols == 1):
            raise ValueError("grid must contain at least one edge")
        self.rows = rows
        self.cols = cols
        self.name = f"grid-{rows}x{cols}"

        right = -np.ones((rows, cols), dtype=int)
        down = -np.ones((rows, cols), dtype=int)
        idx = 0
        for r in range(rows):
            for c in range(cols):
                if c + 1 < cols:
                    right[r, c] = idx
                    idx += 1
                if r + 1 < rows:
                    down[r, c] = idx
                    idx += 1
        self._right = right
        self._down = down
        self.dim = idx

    @property
    def n_paths(self) -> int:
        return math.comb(self.rows + self.cols - 2, self.rows - 1)

    def solve_batch(self, costs: np.ndarray) -> np.ndarray:
        c, _ = _as_cost_matrix(costs, self.dim)
        m = c.shape[0]
        rows, cols = self.rows, self.cols

        dist = np.full((m, rows, cols), np.inf)
        dist[:, 0, 0] = 0.0
        # True where the incoming shortest path enters via the right edge
        # (from the left neighbor); ties prefer that edge.
        from_left = np.zeros((m, rows, cols), dtype=bool)
        for r in range(rows):
            for col in range(cols):
                if r == 0 and col == 0:
                    continue
                via_left = (
                    dist[:, r, col - 1] + c[:, self._right[r, col - 1]]
                    if col > 0
                    else np.full(m, np.inf)
                )
                via_up = (
                    dist[:, r - 1, col] + c[:, self._down[r - 1, col]]
                    if r > 0
                    else np.full(m, np.inf)
                )
                take_left = via_left <= via_up
                dist[:, r, col] = np.where(take_left, via_left, via_up)
                from_left[:, r, col] = take_left

        x = np.zeros((m, self.dim))
        sample = np.arange(m)
        rr = np.full(m, rows - 1)
        cc = np.full(m, cols - 1)
        for _ in range(rows + cols - 2):
            left = from_left[sample, rr, cc]
            edge = np.where(left, self._right[rr, cc - 1], self._down[rr - 1, cc])
            x[sample, edge] = 1.0
            cc = np.where(left, cc - 1, cc)
            rr = np.where(left, rr, rr - 1)
        return x

    def enumerate_solutions(self, max_paths: int = 10**6) -> np.ndarray:
        """All source-to-sink path indicators, shape (n_paths, dim).

        Paths are generated right-move-first, matching edge index order.
        Raises if the path count exceeds ``max_paths``.
        """
        if self.n_paths > max_paths:
            raise ValueError(
                f"{self.n_paths} paths exceed the enumeration bound {max_paths}"
            )
        paths = []
        indicator = np.zeros(self.dim)

        def walk(r, c):
            if r == self.rows - 1 and c == self.cols - 1:
                paths.append(indicator.copy())
                return
            if c + 1 < self.cols:
                e = self._right[r, c]
                indicator[e] = 1.0
                walk(r, c + 1)
                indicator[e] = 0.0
            if r + 1 < self.rows:
                e = self._down[r, c]
                indicator[e] = 1.0
                walk(r + 1, c)
                indicator[e] = 0.0

        walk(0, 0)
        return np.array(paths)


def enumerate_solutions(problem: DecisionProblem, max_paths: int = 10**6) -> np.ndarray:
    """Explicit vertex list of a problem's feasible set (test oracle helper)."""
    if isinstance(problem, GridNetwork):
        return problem.enumerate_solutions(max_paths)
    if isinstance(problem, TwoEdgeProblem):
        return np.eye(2)
    if isinstance(problem, EnumeratedPolytope):
        return problem.vertices.copy()
    raise TypeError(f"cannot enumerate solutions of {type(problem).__name__}")


def decision_regret(problem: DecisionProblem, c_true, c_pred) -> float:
    """Extra cost of acting on ``c_pred`` instead of ``c_true``.

    Computes ``c_true @ (x*(c_pred) - x*(c_true))`` under the minimization
    convention; nonnegative, and exactly zero when both decisions coincide.
    """
    ct, _ = _as_cost_matrix(c_true, problem.dim)
    cp, _ = _as_cost_matrix(c_pred, problem.dim)
    x_pred = problem.solve_batch(cp)[0]
    x_true = problem.solve_batch(ct)[0]
    return float(ct[0] @ x_pred - ct[0] @ x_true)


def decision_regret_batch(
    problem: DecisionProblem, c_true: np.ndarray, c_pred: np.ndarray
) -> np.ndarray:
    """Row-wise decision regret for paired (n, dim) cost matrices."""
    ct, _ = _as_cost_matrix(c_true, problem.dim)
    cp, _ = _as_cost_matrix(c_pred, problem.dim)
    if ct.shape[0] != cp.shape[0]:
        raise ValueError("c_true and c_pred must have the same number of rows")
    x_pred = problem.solve_batch(cp)
    x_true = problem.solve_batch(ct)
    return np.einsum("ij,ij->i", ct, x_pred - x_true)
