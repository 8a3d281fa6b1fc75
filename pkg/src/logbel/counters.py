"""Operation counters used as the portable cost signal.

Wall-clock time is noisy, so every engine in this package reports its work
through an OpCounters instance: how many matrix-vector products, how many
matrix-matrix products, how many equation evaluations, and the total number
of scalar multiply-adds those operations amount to.  A matrix-vector product
of an r x c matrix counts as r*c multiply-adds; an (r x m) @ (m x c) product
counts r*m*c; rescaling a matrix by a diagonal counts r*c.
"""

from __future__ import annotations

from dataclasses import dataclass, field


@dataclass
class OpCounters:
    matrix_vector_mults: int = 0
    matrix_matrix_mults: int = 0
    equation_evals: int = 0
    scalar_mult_adds: int = 0
    # Portion of scalar_mult_adds contributed by matrix-matrix products only.
    # This isolates the O(K^3)-vs-O(K*L^2) comparison for factored pipelines.
    matmat_mult_adds: int = 0
    # Histogram of product shapes seen in factored pipelines, e.g. "LKxKL".
    shape_tags: dict[str, int] = field(default_factory=dict)

    def count_matvec(self, rows: int, cols: int) -> None:
        self.matrix_vector_mults += 1
        self.scalar_mult_adds += rows * cols

    def count_matmat(self, rows: int, inner: int, cols: int) -> None:
        self.matrix_matrix_mults += 1
        self.scalar_mult_adds += rows * inner * cols
        self.matmat_mult_adds += rows * inner * cols

    def count_diag_scale(self, rows: int, cols: int) -> None:
        self.scalar_mult_adds += rows * cols

    def count_vector_op(self, n: int) -> None:
        self.scalar_mult_adds += n

    def count_equation(self) -> None:
        self.equation_evals += 1

    def tag(self, shape: str) -> None:
        self.shape_tags[shape] = self.shape_tags.get(shape, 0) + 1

    def snapshot(self) -> tuple[int, int, int, int]:
        return (
            self.matrix_vector_mults,
            self.matrix_matrix_mults,
            self.equation_evals,
            self.scalar_mult_adds,
        )

    def delta(self, before: tuple[int, int, int, int]) -> dict[str, int]:
        """Difference between the current totals and an earlier snapshot()."""
        now = self.snapshot()
        keys = ("matrix_vector_mults", "matrix_matrix_mults", "equation_evals", "scalar_mult_adds")
        return {k: now[i] - before[i] for i, k in enumerate(keys)}
