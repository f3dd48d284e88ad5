"""Sensing matrices and the multi-user block-sparse signal model.

Randomness comes from PCG64 generators seeded with ``SeedSequence([seed, stream])``;
the matrix, signal and noise streams use fixed stream ids so each component is
reproducible on its own.
"""

from __future__ import annotations

import enum
import functools
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .model import Problem, SensingMatrix
from .types import BlockStructure, ContractError

MATRIX_STREAM = 0
SIGNAL_STREAM = 1
NOISE_STREAM = 2

EXP_ROWS = 839
# (chirp coefficient, first column 1-based, last column 1-based)
EXP_TYPE1_BANDS = ((420, 1, 832), (419, 833, 1664), (1, 1665, 2048))
EXP_TYPE2_BANDS = (
    (420, 1, 837), (419, 838, 1674), (1, 1675, 2511), (838, 2512, 3348),
    (15, 3349, 4185), (824, 4186, 5022), (427, 5023, 5859), (412, 5860, 5952),
)

BCSM_MAGIC = b"BCSM"
BCSM_VERSION = 1


class MatrixKind(str, enum.Enum):
    GAUSSIAN = "A1"
    PARTIAL_DCT = "A2"
    EXP_TYPE1 = "A3"
    EXP_TYPE2 = "A4"

    @classmethod
    def parse(cls, value) -> "MatrixKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip()
        aliases = {
            "A1_gaussian": cls.GAUSSIAN, "gaussian": cls.GAUSSIAN,
            "A2_partial_dct": cls.PARTIAL_DCT, "partial_dct": cls.PARTIAL_DCT,
            "A3_exp_type1": cls.EXP_TYPE1, "exp_type1": cls.EXP_TYPE1,
            "A4_exp_type2": cls.EXP_TYPE2, "exp_type2": cls.EXP_TYPE2,
        }
        for kind in cls:
            if key.upper() == kind.value:
                return kind
        if key in aliases:
            return aliases[key]
        raise ContractError(f"unknown matrix kind {value!r} (expected one of A1, A2, A3, A4)")

    @property
    def fixed_shape(self) -> tuple[int, int] | None:
        if self is MatrixKind.EXP_TYPE1:
            return EXP_ROWS, EXP_TYPE1_BANDS[-1][2]
        if self is MatrixKind.EXP_TYPE2:
            return EXP_ROWS, EXP_TYPE2_BANDS[-1][2]
        return None

    def default_blocks(self) -> BlockStructure:
        if self is MatrixKind.EXP_TYPE2:
            return BlockStructure.uniform(64, 93, 1)
        return BlockStructure.uniform(64, 32, 1)


def stream_rng(seed: int, stream: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed) & (2**64 - 1), stream])))


def _complex_normal(rng: np.random.Generator, size, var: float = 1.0) -> np.ndarray:
    scale = np.sqrt(var / 2.0)
    return scale * rng.standard_normal(size) + 1j * (scale * rng.standard_normal(size))


def gaussian_entries(m: int, n: int, seed: int, normalize: bool = False) -> np.ndarray:
    """i.i.d. CN(0, 1) entries; ``normalize`` rescales every column to unit norm."""
    if m < 1 or n < 1:
        raise ContractError(f"matrix dimensions must be positive, got {m}x{n}")
    rng = stream_rng(seed, MATRIX_STREAM)
    A = _complex_normal(rng, (m, n))
    if normalize:
        A /= np.linalg.norm(A, axis=0, keepdims=True)
    return A


def partial_dct_entries(m: int, n: int, seed: int, psi=None, phi=None) -> np.ndarray:
    """``cos(2 pi (c-1) psi_r) + i cos(2 pi (c-1) phi_r)`` with per-row uniforms.

    ``psi`` / ``phi`` override the sampled row parameters (length ``m``).
    """
    if m < 1 or n < 1:
        raise ContractError(f"matrix dimensions must be positive, got {m}x{n}")
    rng = stream_rng(seed, MATRIX_STREAM)
    psi_s = rng.uniform(0.0, 1.0, m)
    phi_s = rng.uniform(0.0, 1.0, m)
    psi = psi_s if psi is None else np.asarray(psi, dtype=float)
    phi = phi_s if phi is None else np.asarray(phi, dtype=float)
    cols = np.arange(n, dtype=float)
    return np.cos(2 * np.pi * np.outer(psi, cols)) + 1j * np.cos(2 * np.pi * np.outer(phi, cols))


def exponential_entries(bands, rows: int = EXP_ROWS) -> np.ndarray:
    """Chirp-modulated DFT bands: ``exp(j c pi m(m-1)/P) exp(j 2 pi (m-1)(n-n_b)/P)``.

    Both phases are multiples of ``pi / P`` (``P = 839``); the multiple is reduced
    modulo ``2P`` in exact integer arithmetic before the exponential is evaluated.
    """
    P = EXP_ROWS
    n = bands[-1][2]
    mm = np.arange(1, rows + 1, dtype=np.int64)[:, None]
    table = np.exp(1j * np.pi * np.arange(2 * P) / P)
    A = np.empty((rows, n), dtype=np.complex128)
    for coeff, first, last in bands:
        cols = np.arange(first, last + 1, dtype=np.int64)[None, :]
        k = (coeff * (mm * (mm - 1)) % (2 * P)) + 2 * (((mm - 1) * (cols - first)) % P)
        A[:, first - 1:last] = table[k % (2 * P)]
    return A


def _finish(A: np.ndarray) -> SensingMatrix:
    return SensingMatrix(A)


@functools.lru_cache(maxsize=4)
def _cached_matrix(kind: MatrixKind, m: int, n: int, seed: int, normalize: bool) -> SensingMatrix:
    if kind is MatrixKind.GAUSSIAN:
        return _finish(gaussian_entries(m, n, seed, normalize))
    if kind is MatrixKind.PARTIAL_DCT:
        return _finish(partial_dct_entries(m, n, seed))
    if kind is MatrixKind.EXP_TYPE1:
        return _finish(exponential_entries(EXP_TYPE1_BANDS))
    return _finish(exponential_entries(EXP_TYPE2_BANDS))


def gen_gaussian(m: int, n: int, seed: int, normalize: bool = False) -> SensingMatrix:
    return _cached_matrix(MatrixKind.GAUSSIAN, int(m), int(n), int(seed), bool(normalize))


def gen_partial_dct(m: int, n: int, seed: int) -> SensingMatrix:
    return _cached_matrix(MatrixKind.PARTIAL_DCT, int(m), int(n), int(seed), False)


def gen_exp_type1() -> SensingMatrix:
    return _cached_matrix(MatrixKind.EXP_TYPE1, EXP_ROWS, 2048, 0, False)


def gen_exp_type2() -> SensingMatrix:
    return _cached_matrix(MatrixKind.EXP_TYPE2, EXP_ROWS, 5952, 0, False)


def gen_matrix(kind, m: int, n: int, seed: int, normalize: bool = False) -> SensingMatrix:
    kind = MatrixKind.parse(kind)
    shape = kind.fixed_shape
    if shape is not None:
        if (m, n) != shape:
            raise ContractError(f"matrix {kind.value} is fixed at {shape[0]}x{shape[1]}, requested {m}x{n}")
        return gen_exp_type1() if kind is MatrixKind.EXP_TYPE1 else gen_exp_type2()
    if kind is MatrixKind.GAUSSIAN:
        return gen_gaussian(m, n, seed, normalize)
    return gen_partial_dct(m, n, seed)


@dataclass(frozen=True)
class ScenarioParams:
    """One draw of the multi-user scenario.

    ``seed`` drives the signal and noise streams; ``matrix_seed`` (defaults to
    ``seed``) drives the random matrix kinds so a matrix can be shared across trials.
    """

    m: int = EXP_ROWS
    bs: BlockStructure = field(default_factory=lambda: BlockStructure.uniform(64, 32, 1))
    s_bar: int = 20
    beta_signal: float = 1.0
    sigma_noise: float = 0.001
    matrix_kind: MatrixKind = MatrixKind.GAUSSIAN
    seed: int = 0
    matrix_seed: int | None = None
    normalize_columns: bool = False

    def __post_init__(self):
        object.__setattr__(self, "matrix_kind", MatrixKind.parse(self.matrix_kind))
        if not 0 <= self.s_bar <= self.bs.num_blocks:
            raise ContractError(f"s_bar={self.s_bar} outside [0, {self.bs.num_blocks}]")
        if self.beta_signal <= 0:
            raise ContractError(f"beta_signal must be positive, got {self.beta_signal}")
        if self.sigma_noise < 0:
            raise ContractError(f"sigma_noise must be nonnegative, got {self.sigma_noise}")
        shape = self.matrix_kind.fixed_shape
        if shape is not None and (self.m, self.bs.total_len) != shape:
            raise ContractError(
                f"matrix {self.matrix_kind.value} is {shape[0]}x{shape[1]} but the scenario asks for "
                f"m={self.m}, n={self.bs.total_len}"
            )

    @property
    def effective_matrix_seed(self) -> int:
        return self.seed if self.matrix_seed is None else self.matrix_seed


@dataclass(frozen=True)
class Instance:
    problem: Problem
    x_true: np.ndarray
    active_set: tuple[int, ...]
    noise: np.ndarray


def gen_instance(params: ScenarioParams) -> Instance:
    """Draw active users, one nonzero per active block, noise, and ``y = A x + z``."""
    bs = params.bs
    A = gen_matrix(params.matrix_kind, params.m, bs.total_len, params.effective_matrix_seed,
                   params.normalize_columns)
    rng = stream_rng(params.seed, SIGNAL_STREAM)
    active = np.sort(rng.choice(bs.num_blocks, size=params.s_bar, replace=False))
    x = np.zeros(bs.total_len, dtype=np.complex128)
    if active.size:
        pos = np.array([rng.integers(0, bs.lengths[i]) for i in active])
        vals = _complex_normal(rng, active.size, params.beta_signal)
        x[np.asarray(bs.offsets)[active] + pos] = vals
    z = _complex_normal(stream_rng(params.seed, NOISE_STREAM), params.m, params.sigma_noise ** 2)
    y = A.entries @ x + z
    x.setflags(write=False)
    z.setflags(write=False)
    return Instance(Problem(A, y, bs), x, tuple(int(i) for i in active), z)


def write_bcsm(path, A) -> None:
    """Write ``A`` as magic ``BCSM``, u32 version/m/n, then row-major (re, im) float64 pairs, little-endian."""
    entries = A.entries if isinstance(A, SensingMatrix) else np.asarray(A)
    m, n = entries.shape
    with open(path, "wb") as fh:
        fh.write(BCSM_MAGIC)
        fh.write(struct.pack("<III", BCSM_VERSION, m, n))
        fh.write(np.ascontiguousarray(entries, dtype="<c16").tobytes())


def read_bcsm(path) -> np.ndarray:
    raw = Path(path).read_bytes()
    if raw[:4] != BCSM_MAGIC:
        raise ContractError(f"{path}: not a BCSM file")
    version, m, n = struct.unpack("<III", raw[4:16])
    if version != BCSM_VERSION:
        raise ContractError(f"{path}: unsupported BCSM version {version}")
    body = raw[16:]
    if len(body) != 16 * m * n:
        raise ContractError(f"{path}: expected {16 * m * n} payload bytes, found {len(body)}")
    return np.frombuffer(body, dtype="<c16").reshape(m, n).astype(np.complex128)
