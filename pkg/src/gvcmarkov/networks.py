"""World-input and world-output networks built from an economy."""
from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .core import Economy, EconomyError

MAGIC = b"GVCM"
_HEADER = struct.Struct("<4sIII")  # magic, rows, cols, reserved


@dataclass(frozen=True)
class InputNetwork:
    """Column-normalised flows ``a_ij = z_ij / x_j`` and value-added shares."""

    A: np.ndarray
    delta: np.ndarray


@dataclass(frozen=True)
class OutputNetwork:
    """Row-normalised flows ``b_ij = z_ij / x_i`` with final-use shares.

    ``D_eta[i, c]`` is the share of node i's output bought by final users in
    country c; its rows sum to ``gamma``.
    """

    B: np.ndarray
    gamma: np.ndarray
    D_eta: np.ndarray


@dataclass(frozen=True)
class BlockStats:
    diag_mean: float
    offdiag_mean: float


def gross_output(economy: Economy) -> np.ndarray:
    """Gross output re-derived from the flows.

    Networks always normalise by this rather than by reported totals so the
    chains stay exactly stochastic on rounded tables.
    """
    return economy.Z.sum(axis=1) + economy.F.sum(axis=1)


def _check_active(x: np.ndarray) -> None:
    if (x <= 0).any():
        raise EconomyError("gross output must be positive at every node")


def build_input_network(economy: Economy) -> InputNetwork:
    x = gross_output(economy)
    _check_active(x)
    A = economy.Z / x[None, :]
    delta = 1.0 - A.sum(axis=0)
    # w_j / x_j computed as a residual keeps exhaustion exact to rounding
    if (delta < -1e-12).any():
        j = int(np.argmin(delta)) + 1
        raise EconomyError(f"negative value added at node {j}; chain is not absorbing")
    return InputNetwork(A, np.clip(delta, 0.0, None))


def build_output_network(economy: Economy) -> OutputNetwork:
    x = gross_output(economy)
    _check_active(x)
    B = economy.Z / x[:, None]
    D_eta = economy.F / x[:, None]
    gamma = D_eta.sum(axis=1)
    assert (gamma >= 0).all(), "negative final-use share"
    return OutputNetwork(B, gamma, D_eta)


def verify_similarity(inp: InputNetwork, outp: OutputNetwork, x) -> float:
    """Largest entrywise gap between ``B`` and ``X^-1 A X``."""
    x = np.asarray(x, dtype=float)
    return float(np.abs(outp.B - (inp.A * x[None, :]) / x[:, None]).max())


def block_means(matrix, J: int, S: int) -> BlockStats:
    """Mean entry over the J domestic S x S blocks and over the J(J-1) others."""
    M = np.asarray(matrix, dtype=float)
    n = J * S
    if M.shape != (n, n):
        raise EconomyError(f"matrix shape {M.shape} does not match J*S = {n}")
    blocks = M.reshape(J, S, J, S)
    diag_sum = np.einsum("isit->", blocks)
    total = M.sum()
    diag_mean = diag_sum / (J * S * S)
    off_mean = (total - diag_sum) / (J * (J - 1) * S * S) if J > 1 else 0.0
    return BlockStats(float(diag_mean), float(off_mean))


def write_matrix_csv(path, matrix, row_labels=None, col_labels=None) -> None:
    M = np.atleast_2d(np.asarray(matrix, dtype=float))
    with open(path, "w", newline="") as fh:
        if col_labels is not None:
            head = ([""] if row_labels is not None else []) + list(col_labels)
            fh.write(",".join(head) + "\n")
        for i, row in enumerate(M):
            cells = [f"{v:.12g}" for v in row]
            if row_labels is not None:
                cells.insert(0, row_labels[i])
            fh.write(",".join(cells) + "\n")


def write_matrix_binary(path, matrix) -> None:
    """Row-major little-endian doubles after a 16-byte ``GVCM`` header."""
    M = np.atleast_2d(np.asarray(matrix, dtype="<f8"))
    rows, cols = M.shape
    with open(path, "wb") as fh:
        fh.write(_HEADER.pack(MAGIC, rows, cols, 0))
        fh.write(np.ascontiguousarray(M).tobytes())


def read_matrix_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic, rows, cols, _ = _HEADER.unpack(fh.read(_HEADER.size))
        if magic != MAGIC:
            raise ValueError(f"{path}: bad magic {magic!r}")
        data = np.frombuffer(fh.read(), dtype="<f8")
    if data.size != rows * cols:
        raise ValueError(f"{path}: expected {rows * cols} values, found {data.size}")
    return data.reshape(rows, cols).copy()
