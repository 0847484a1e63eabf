"""Generalized memory polynomial (single carrier) fitted by complex least squares.

    y(n) = sum_{k<Ka} sum_{l<La}  a_kl  x(n-l) |x(n-l)|^k
         + sum_{k=1..Kb} sum_{l<Lb} sum_{m=1..Mb} b_klm x(n-l) |x(n-l-m)|^k
         + sum_{k=1..Kc} sum_{l<Lc} sum_{m=1..Mc} c_klm x(n-l) |x(n-l+m)|^k

Samples outside [0, N) are zero. Columns are ordered aligned (k, l), then
lagging (k, l, m), then leading (k, l, m), each loop nest outer to inner.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import ArgumentError, ConfigurationError

COLUMN_ORDER = "aligned[k,l], lagging[k,l,m], leading[k,l,m]"


@dataclass(frozen=True)
class GmpIndex:
    Ka: int = 0
    La: int = 0
    Kb: int = 0
    Mb: int = 0
    Lb: int = 0
    Kc: int = 0
    Mc: int = 0
    Lc: int = 0

    def __post_init__(self):
        if any(int(v) < 0 for v in self.as_dict().values()):
            raise ConfigurationError("GMP index arrays must be nonnegative")
        if self.num_terms == 0:
            raise ConfigurationError("GMP index arrays describe an empty model")

    def as_dict(self) -> dict:
        return {k: int(getattr(self, k)) for k in ("Ka", "La", "Kb", "Mb", "Lb", "Kc", "Mc", "Lc")}

    @property
    def num_terms(self) -> int:
        return self.Ka * self.La + self.Kb * self.Lb * self.Mb + self.Kc * self.Lc * self.Mc

    @property
    def max_lag(self) -> int:
        return max(self.La - 1, self.Lb - 1 + self.Mb, self.Lc - 1, 0)


@dataclass(frozen=True)
class GmpModel:
    index: GmpIndex
    coeffs: np.ndarray
    rank_deficient: bool = False
    residual_nmse_db: float | None = None
    meta: dict = field(default_factory=dict, compare=False)

    kind = "gmp"
    K = 1

    @property
    def coefficient_count(self) -> int:
        # real scalars: two per complex coefficient
        return 2 * self.index.num_terms


def _delayed(x: np.ndarray, d: int) -> np.ndarray:
    # x(n - d) with zeros outside the record; d may be negative (advance)
    n = x.size
    out = np.zeros_like(x)
    if d >= n or -d >= n:
        return out
    if d >= 0:
        out[d:] = x[: n - d]
    else:
        out[:d] = x[-d:]
    return out


def gmp_design_matrix(x, idx: GmpIndex) -> np.ndarray:
    """Complex regression matrix with one column per GMP basis term."""
    x = np.asarray(getattr(x, "samples", x), dtype=np.complex128)
    if x.size <= idx.max_lag:
        raise ArgumentError(f"need more than {idx.max_lag} samples")
    env = np.abs(x)
    cols = []
    for k in range(idx.Ka):
        for l in range(idx.La):
            xl = _delayed(x, l)
            cols.append(xl * np.abs(xl) ** k if k else xl)
    for k in range(1, idx.Kb + 1):
        for l in range(idx.Lb):
            xl = _delayed(x, l)
            for m in range(1, idx.Mb + 1):
                cols.append(xl * _delayed(env, l + m) ** k)
    for k in range(1, idx.Kc + 1):
        for l in range(idx.Lc):
            xl = _delayed(x, l)
            for m in range(1, idx.Mc + 1):
                cols.append(xl * _delayed(env, l - m) ** k)
    return np.stack(cols, axis=1)


def gmp_fit(x, y, idx: GmpIndex) -> GmpModel:
    """Least-squares GMP coefficients.

    Columns are scaled to unit norm before the solve (LAPACK gelsd), which
    keeps high-order envelope terms well conditioned. A rank-deficient
    design yields the minimum-norm solution and sets ``rank_deficient``.
    """
    x = np.asarray(getattr(x, "samples", x), dtype=np.complex128)
    y = np.asarray(getattr(y, "samples", y), dtype=np.complex128)
    if x.shape != y.shape:
        raise ArgumentError("x and y must have the same length")
    phi = gmp_design_matrix(x, idx)
    if x.size < 2 * phi.shape[1]:
        raise ArgumentError(f"need at least {2 * phi.shape[1]} samples for {phi.shape[1]} terms")
    norms = np.linalg.norm(phi, axis=0)
    norms[norms == 0] = 1.0
    sol, _, rank, _ = np.linalg.lstsq(phi / norms, y, rcond=None)
    coeffs = sol / norms
    deficient = rank < phi.shape[1]
    if deficient:
        warnings.warn(f"GMP design matrix is rank deficient ({rank} < {phi.shape[1]})", stacklevel=2)
    resid = phi @ coeffs - y
    denom = np.vdot(y, y).real
    nmse = 10 * np.log10(np.vdot(resid, resid).real / denom) if denom > 0 else None
    return GmpModel(idx, coeffs, bool(deficient), None if nmse is None else float(nmse))


def gmp_predict(model: GmpModel, x) -> np.ndarray:
    return gmp_design_matrix(x, model.index) @ model.coeffs
