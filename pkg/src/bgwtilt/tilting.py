"""Exponential tilting of multitype offspring families.

A tilt with parameters ``a, b`` maps ``mu_i(k)`` to ``a_i * prod_j b_j**k_j * mu_i(k)``;
normalization forces ``a_i = 1 / phi_i(b)``. A tilt leaves every Gamma-conditioned
tree law unchanged when ``c = log(a*b)`` lies in the row space of Gamma.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import field
from .pgf import (
    OffspringModel,
    eval_pgf,
    eval_pgf_all,
    eval_pgf_exact,
    jacobian_pgf,
    mean_matrix,
    spectral_radius,
)

NORMALIZATION_TOL = 1e-10
GOOD_TILT_TOL = 1e-9
ON_CURVE_TOL = 1e-9


class NormalizationError(ValueError):
    def __init__(self, residuals):
        super().__init__(f"tilt parameters violate a_i * phi_i(b) = 1; residuals {list(residuals)}")
        self.residuals = residuals


class OffCurveError(ValueError):
    def __init__(self, residuals):
        super().__init__(f"point is not on the solution set; residuals {list(residuals)}")
        self.residuals = residuals


@dataclass(frozen=True)
class TiltParams:
    a: tuple
    b: tuple
    beta: object = None

    @property
    def exact(self) -> bool:
        return all(field.is_exact(v) for v in self.a + self.b)

    def as_float(self) -> "TiltParams":
        beta = None if self.beta is None else float(self.beta)
        return TiltParams(tuple(float(v) for v in self.a), tuple(float(v) for v in self.b), beta)

    def to_json(self) -> dict:
        f = self.as_float()
        out = {"a": [repr(v) for v in f.a], "b": [repr(v) for v in f.b]}
        out["beta"] = None if f.beta is None else repr(f.beta)
        return out

    @classmethod
    def from_json(cls, data) -> "TiltParams":
        beta = data.get("beta")
        return cls(
            tuple(float(v) for v in data["a"]),
            tuple(float(v) for v in data["b"]),
            None if beta is None else float(beta),
        )


@dataclass(frozen=True)
class ConditionSpec:
    """Linear conditioning ``Gamma N(T) = g``.

    ``gamma_matrix`` holds rational rows; ``reduced_gamma`` is a positive
    integer vector with some entry 1 spanning a line inside the row space
    (present whenever such a vector exists).
    """

    gamma_matrix: tuple
    reduced_gamma: tuple | None = None
    rhs: tuple | None = None

    @classmethod
    def from_gamma(cls, gamma, rhs=None):
        gamma = tuple(int(v) for v in gamma)
        red = field.find_condition_vector([gamma])
        return cls((tuple(Fraction(v) for v in gamma),), red, None if rhs is None else tuple(rhs))

    @classmethod
    def from_matrix(cls, rows, rhs=None, search_max: int = 10):
        rows = tuple(tuple(Fraction(v) for v in r) for r in rows)
        red = field.find_condition_vector(rows, search_max)
        return cls(rows, red, None if rhs is None else tuple(rhs))

    @property
    def num_types(self) -> int:
        return len(self.gamma_matrix[0])

    @property
    def rank(self) -> int:
        return field.rank(self.gamma_matrix)

    @property
    def pivot(self) -> int:
        """Coordinate with ``gamma == 1`` used to define ``beta``."""
        if self.reduced_gamma is None:
            raise ValueError("no reduced weight vector: condition (B) fails")
        return self.reduced_gamma.index(1)

    def require_reduced(self) -> tuple:
        if self.reduced_gamma is None:
            raise ValueError("no reduced weight vector: condition (B) fails")
        return self.reduced_gamma

    def integer_rows(self):
        """Rows scaled to integers (for counting); ``rhs`` is scaled alongside."""
        rows, scales = [], []
        for r in self.gamma_matrix:
            den = math.lcm(*(Fraction(v).denominator for v in r))
            rows.append([int(Fraction(v) * den) for v in r])
            scales.append(den)
        return np.array(rows, dtype=np.int64), scales


def _is_exact_vec(v):
    return all(field.is_exact(x) for x in v)


def tilt_params_from_b(model: OffspringModel, b, condition: ConditionSpec | None = None) -> TiltParams:
    """Normalized parameters ``a_i = 1/phi_i(b)``; exact when ``b`` and the model are."""
    k = model.num_types
    if _is_exact_vec(b) and model.is_exact:
        phis = [eval_pgf_exact(model, i, b) for i in range(k)]
        a = tuple(1 / p for p in phis)
    else:
        b = tuple(float(v) for v in b)
        a = tuple(float(1.0 / p) for p in eval_pgf_all(model, b))
    beta = None
    if condition is not None and condition.reduced_gamma is not None:
        p = condition.pivot
        beta = a[p] * b[p]
    return TiltParams(a, tuple(b), beta)


def normalization_residuals(model, params):
    k = model.num_types
    if params.exact and model.is_exact:
        return [params.a[i] * eval_pgf_exact(model, i, params.b) - 1 for i in range(k)]
    b = np.array([float(v) for v in params.b])
    return [float(params.a[i]) * eval_pgf(model, i, b) - 1.0 for i in range(k)]


def apply_tilt(model: OffspringModel, params: TiltParams, tol: float = NORMALIZATION_TOL) -> OffspringModel:
    """Return the tilted family.

    Exact parameters on an exact model give an exact result; otherwise
    probabilities become floats. In float mode the normalizing constants
    are recomputed from ``b`` after checking the supplied ``a``.
    """
    k = model.num_types
    if len(params.a) != k or len(params.b) != k:
        raise ValueError("tilt parameters have the wrong length")
    res = normalization_residuals(model, params)
    exact = params.exact and model.is_exact
    if exact:
        if any(r != 0 for r in res):
            raise NormalizationError(res)
        a, b = params.a, params.b
    else:
        if max(abs(float(r)) for r in res) > tol:
            raise NormalizationError(res)
        b = tuple(float(v) for v in params.b)
        if model.exp_poly is None:
            a = tuple(float(1.0 / p) for p in eval_pgf_all(model, b))
        else:
            a = None

    name = f"{model.name} (tilted)" if model.name else ""
    if model.exp_poly is not None:
        polys = []
        for poly in model.exp_poly:
            polys.append({e: c * math.prod(bj**ej for bj, ej in zip(b, e)) for e, c in poly.items()})
        return OffspringModel.from_exp_poly(polys, name=name)

    def weight(i, counts):
        w = a[i]
        for bj, kj in zip(b, counts):
            if kj:
                w = w * bj**kj
        return w

    if model.ordered is not None:
        laws = []
        for i, zeta in enumerate(model.ordered):
            laws.append({w: weight(i, _counts(w, k)) * p for w, p in zeta.items()})
        return OffspringModel.from_ordered(laws, name=name)
    laws = [{c: weight(i, c) * p for c, p in mu.items()} for i, mu in enumerate(model.projection)]
    return OffspringModel.from_projection(laws, name=name)


def _counts(word, k):
    c = [0] * k
    for x in word:
        c[x] += 1
    return c


@dataclass(frozen=True)
class GoodTiltResult:
    good: bool
    residual: float
    coefficients: tuple
    exact: bool = False

    def __bool__(self):
        return self.good


def is_good_tilting(params: TiltParams, condition: ConditionSpec, tol: float = GOOD_TILT_TOL,
                    exact: bool = False) -> GoodTiltResult:
    """Test ``c = log(a*b)`` for membership in the row space of Gamma.

    Float mode solves ``Gamma^T y = c`` in the least-squares sense and compares
    the residual norm with ``tol``. ``exact=True`` needs exact parameters and a
    reduced weight vector ``gamma``, and checks ``a_i b_i = (a_p b_p)**gamma_i``
    exactly (``c`` proportional to ``gamma``).
    """
    if exact:
        gamma = condition.require_reduced()
        if not params.exact:
            raise ValueError("exact mode needs exact tilt parameters")
        p = gamma.index(1)
        base = params.a[p] * params.b[p]
        ok = all(params.a[i] * params.b[i] == base**g for i, g in enumerate(gamma))
        coeff = (math.log(float(base)),) if ok else ()
        return GoodTiltResult(ok, 0.0 if ok else math.inf, coeff, exact=True)
    c = np.log(np.array([float(a) * float(b) for a, b in zip(params.a, params.b)]))
    g = np.array([[float(v) for v in r] for r in condition.gamma_matrix])
    y, *_ = np.linalg.lstsq(g.T, c, rcond=None)
    resid = float(np.linalg.norm(g.T @ y - c))
    return GoodTiltResult(resid <= tol, resid, tuple(float(v) for v in y))


def beta_from_b(model, condition, b) -> float:
    p = condition.pivot
    return float(b[p]) / eval_pgf(model, p, b)


def solve_beta_system_residual(model, condition, b, beta) -> np.ndarray:
    """``beta * (phi_i(b) / b_i)**(1/gamma_i) - 1`` for each type."""
    gamma = condition.require_reduced()
    b = np.asarray(b, dtype=float)
    phis = eval_pgf_all(model, b)
    return np.array([beta * (phis[i] / b[i]) ** (1.0 / gamma[i]) - 1.0 for i in range(len(b))])


def curve_residual(model, condition, b) -> np.ndarray:
    """Residuals of the reduced system with ``beta`` taken from the pivot coordinate."""
    return solve_beta_system_residual(model, condition, b, beta_from_b(model, condition, b))


def tilted_mean_prime(model, condition, b) -> np.ndarray:
    """``M'[i, j] = beta**gamma_i * d phi_i / d x_j (b)``."""
    gamma = condition.require_reduced()
    b = np.asarray(b, dtype=float)
    beta = beta_from_b(model, condition, b)
    jac = jacobian_pgf(model, b)
    scale = np.array([beta**g for g in gamma])
    return scale[:, None] * jac


def tilted_mean_spectral_radius(model, condition, b, tol: float = ON_CURVE_TOL) -> float:
    """Spectral radius of the tilted mean matrix at an on-curve point ``b``,
    computed from the similar matrix ``M'`` (no explicit tilt)."""
    res = curve_residual(model, condition, b)
    if np.max(np.abs(res)) > tol:
        raise OffCurveError(res)
    return spectral_radius(tilted_mean_prime(model, condition, b))


def rationalize_tilt(model: OffspringModel, condition: ConditionSpec, params: TiltParams,
                     max_denominator: int = 10_000) -> TiltParams | None:
    """Try to upgrade float critical parameters to exact ones.

    Each ``b_j`` is guessed as ``r_j*sqrt(d)`` (common ``d``) and the guess is
    accepted only if, in exact arithmetic, the tilt is good (``a_i b_i =
    beta**gamma_i``) and the tilted mean matrix has eigenvalue 1
    (``det(I - M~) = 0``). Returns ``None`` when no guess verifies.
    """
    if not model.is_exact:
        return None
    guesses = [field.recognize_sqrt_rational(float(v), max_denominator) for v in params.b]
    if any(g is None for g in guesses):
        return None
    ds = {g.d for g in guesses if isinstance(g, field.QuadraticNumber)}
    if len(ds) > 1:
        return None
    try:
        exact = tilt_params_from_b(model, tuple(guesses), condition)
    except ZeroDivisionError:
        return None
    if condition.reduced_gamma is not None and not is_good_tilting(exact, condition, exact=True):
        return None
    tilted = apply_tilt(model, exact)
    m = mean_matrix(tilted, exact=True)
    k = model.num_types
    eye_minus = [[(1 if i == j else 0) - m[i][j] for j in range(k)] for i in range(k)]
    if field.det(eye_minus) != 0:
        return None
    return exact
