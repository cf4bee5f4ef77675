"""Closed-form building blocks for classification-based anomaly detection.

Activations and surrogate losses, probability densities on the unit cube,
the mixed anomaly density obtained by blending a known-anomaly density with
the uniform background, and the induced regression function, conditional
class probability, Bayes classifier and likelihood-ratio level sets.

Everything is a pure function of its inputs. Density and problem objects
are immutable after construction and safe to share across threads.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidParameterError, ParseError, UndefinedPointError

__all__ = [
    "ActivationSpec",
    "Density",
    "UniformDensity",
    "Hat1D",
    "ProductHat",
    "TabulatedDensity",
    "tabulated_from_csv",
    "density_integral",
    "check_normalized",
    "MixtureProblem",
    "LevelSetSpec",
    "NoiseCondition",
    "relu_k",
    "approx_sign",
    "approx_sign_deriv",
    "hinge_loss",
    "logistic_loss",
    "sign_plus",
    "regression_function",
    "conditional_class_prob",
    "bayes_classifier",
    "level_set_indicator",
    "example1_problem",
    "example2_problem",
    "centered_hat_product",
]


# ---------------------------------------------------------------------------
# activations and losses
# ---------------------------------------------------------------------------

def relu_k(x, k: int = 1):
    """Power-of-ReLU activation: max(0, x)**k for integer k >= 1."""
    if int(k) != k or k < 1:
        raise InvalidParameterError(f"k must be an integer >= 1, got {k!r}")
    x = np.asarray(x, dtype=float)
    out = np.maximum(x, 0.0) ** int(k)
    return float(out) if out.ndim == 0 else out


def approx_sign(x, tau: float, k: int = 1):
    """Smoothed sign function with transition band (-k*tau, k*tau).

    Built from k-th powers of ReLU as an alternating sum of shifted terms;
    outside the band it saturates to exactly +/-1, inside it rises
    monotonically through 0. For k=1 it is the piecewise-linear ramp
    x/tau clipped to [-1, 1].

    The sum formula suffers catastrophic cancellation for |x| >> k*tau, so
    saturation is returned as an exact constant and the sum is evaluated
    only on the band, where its terms are O((k*tau)**k) and benign.
    """
    _check_tau_k(tau, k)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.where(x >= k * tau, 1.0, -1.0)
    band = np.abs(x) < k * tau
    if np.any(band):
        out[band] = _approx_sign_band(x[band], tau, k)
    return float(out[0]) if scalar else out


def _approx_sign_band(x, tau, k):
    k = int(k)
    acc = np.zeros_like(x)
    for ell in range(k + 1):
        c = (-1.0) ** ell * math.comb(k, ell)
        acc += c * (np.maximum(x - ell * tau, 0.0) ** k
                    - np.maximum(-x - ell * tau, 0.0) ** k)
    return acc / (math.factorial(k) * tau ** k)


def approx_sign_deriv(x, tau: float, k: int = 1):
    """Derivative of approx_sign; zero outside the transition band.

    At k=1 the kink points +/-tau take the outer (zero) one-sided value.
    """
    _check_tau_k(tau, k)
    x = np.asarray(x, dtype=float)
    scalar = x.ndim == 0
    x = np.atleast_1d(x)
    out = np.zeros_like(x)
    band = np.abs(x) < k * tau
    if np.any(band):
        xb = x[band]
        k = int(k)
        acc = np.zeros_like(xb)
        for ell in range(k + 1):
            c = (-1.0) ** ell * math.comb(k, ell)
            acc += c * (_relu_pow(xb - ell * tau, k - 1)
                        + _relu_pow(-xb - ell * tau, k - 1))
        out[band] = acc * k / (math.factorial(k) * tau ** k)
    return float(out[0]) if scalar else out


def _relu_pow(z, p):
    """max(0, z)**p with the p = 0 case read as the step function 1{z > 0}."""
    if p == 0:
        return (z > 0.0).astype(float)
    return np.maximum(z, 0.0) ** p


def _check_tau_k(tau, k):
    if not 0.0 < tau <= 1.0:
        raise InvalidParameterError(f"tau must lie in (0, 1], got {tau!r}")
    if int(k) != k or k < 1:
        raise InvalidParameterError(f"k must be an integer >= 1, got {k!r}")


def hinge_loss(u):
    """max(0, 1 - u)."""
    u = np.asarray(u, dtype=float)
    out = np.maximum(0.0, 1.0 - u)
    return float(out) if out.ndim == 0 else out


def logistic_loss(u):
    """log(1 + exp(-u)), branch-free against overflow for large |u|."""
    u = np.asarray(u, dtype=float)
    out = np.log1p(np.exp(-np.abs(u))) + np.maximum(-u, 0.0)
    return float(out) if out.ndim == 0 else out


def sign_plus(x):
    """Sign with the tie mapped to +1, the convention used everywhere here."""
    x = np.asarray(x, dtype=float)
    out = np.where(x >= 0.0, 1, -1)
    return int(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class ActivationSpec:
    """Hidden / output activation choice for the feedforward classifier.

    kind: one of "relu", "leaky_relu", "relu_k", "approx_sign".
    slope applies to leaky_relu; k to relu_k and approx_sign; tau to
    approx_sign only.
    """

    kind: str = "relu"
    slope: float = 0.01
    k: int = 1
    tau: float = 1.0

    def __post_init__(self):
        if self.kind not in ("relu", "leaky_relu", "relu_k", "approx_sign"):
            raise InvalidParameterError(f"unknown activation kind {self.kind!r}")
        if self.kind == "leaky_relu" and not 0.0 < self.slope < 1.0:
            raise InvalidParameterError(f"slope must lie in (0, 1), got {self.slope!r}")
        if self.kind in ("relu_k", "approx_sign") and (int(self.k) != self.k or self.k < 1):
            raise InvalidParameterError(f"k must be an integer >= 1, got {self.k!r}")
        if self.kind == "approx_sign" and not 0.0 < self.tau <= 1.0:
            raise InvalidParameterError(f"tau must lie in (0, 1], got {self.tau!r}")

    def apply(self, z):
        if self.kind == "relu":
            return np.maximum(z, 0.0)
        if self.kind == "leaky_relu":
            return np.where(z > 0.0, z, self.slope * z)
        if self.kind == "relu_k":
            return relu_k(z, self.k)
        return approx_sign(z, self.tau, self.k)

    def deriv(self, z):
        if self.kind == "relu":
            return (z > 0.0).astype(float)
        if self.kind == "leaky_relu":
            return np.where(z > 0.0, 1.0, self.slope)
        if self.kind == "relu_k":
            return self.k * np.maximum(z, 0.0) ** (self.k - 1)
        return approx_sign_deriv(z, self.tau, self.k)


# ---------------------------------------------------------------------------
# densities on [0,1]^d
# ---------------------------------------------------------------------------

def _as_points(x, dim):
    """Coerce x to an (n, dim) array; returns (points, was_single_point)."""
    pts = np.asarray(x, dtype=float)
    if pts.ndim == 0:
        if dim != 1:
            raise InvalidParameterError(f"scalar input to a {dim}-dimensional density")
        return pts.reshape(1, 1), True
    if pts.ndim == 1:
        if dim == 1:
            return pts.reshape(-1, 1), False
        if pts.shape[0] != dim:
            raise InvalidParameterError(
                f"point has dimension {pts.shape[0]}, density expects {dim}")
        return pts.reshape(1, dim), True
    if pts.shape[1] != dim:
        raise InvalidParameterError(
            f"points have dimension {pts.shape[1]}, density expects {dim}")
    return pts, False


class Density:
    """Evaluable probability density w.r.t. the uniform measure on [0,1]^d.

    Subclasses implement ``_values`` on an (n, d) array and optionally
    ``sample``. Normalization is *not* enforced at construction; use
    :func:`check_normalized` to verify it numerically.
    """

    kind = "density"

    def __init__(self, dim):
        if int(dim) != dim or dim < 1:
            raise InvalidParameterError(f"dimension must be an integer >= 1, got {dim!r}")
        self.dim = int(dim)

    def __call__(self, x):
        pts, single = _as_points(x, self.dim)
        vals = self._values(pts)
        return float(vals[0]) if single else vals

    def _values(self, pts):
        raise NotImplementedError

    def sample(self, n, rng):
        raise NotImplementedError(f"{type(self).__name__} does not support sampling")


class UniformDensity(Density):
    """The constant density 1 on [0,1]^d."""

    kind = "uniform"

    def _values(self, pts):
        return np.ones(pts.shape[0])

    def sample(self, n, rng):
        return rng.uniform(0.0, 1.0, size=(n, self.dim))


class Hat1D(Density):
    """Normalized triangular bump on [center - half_width, center + half_width].

    Density (1/w) * max(1 - |x - center|/w, 0); the support must lie inside
    [0, 1] so the density integrates to one.
    """

    kind = "hat_1d"

    def __init__(self, center, half_width):
        super().__init__(1)
        if half_width <= 0.0:
            raise InvalidParameterError(f"half_width must be > 0, got {half_width!r}")
        if center - half_width < -1e-12 or center + half_width > 1.0 + 1e-12:
            raise InvalidParameterError(
                f"hat support [{center - half_width}, {center + half_width}] leaves [0, 1]")
        self.center = float(center)
        self.half_width = float(half_width)

    def _values(self, pts):
        return _hat1d_values(pts[:, 0], self.center, self.half_width)

    def sample(self, n, rng):
        u = rng.uniform(0.0, 1.0, size=n)
        return _hat1d_inverse_cdf(u, self.center, self.half_width).reshape(-1, 1)


def _hat1d_values(x, center, half_width):
    return np.maximum(1.0 - np.abs(x - center) / half_width, 0.0) / half_width


def _hat1d_inverse_cdf(u, center, half_width):
    # triangular CDF: quadratic on each side of the peak
    left = u <= 0.5
    out = np.empty_like(u)
    out[left] = center - half_width + half_width * np.sqrt(2.0 * u[left])
    out[~left] = center + half_width - half_width * np.sqrt(2.0 * (1.0 - u[~left]))
    return out


class ProductHat(Density):
    """Product of independent 1D hat densities, one per coordinate."""

    kind = "product_hat"

    def __init__(self, centers, half_widths):
        centers = tuple(float(c) for c in centers)
        half_widths = tuple(float(w) for w in half_widths)
        if len(centers) != len(half_widths):
            raise InvalidParameterError("centers and half_widths must have equal length")
        super().__init__(len(centers))
        for c, w in zip(centers, half_widths):
            if w <= 0.0 or c - w < -1e-12 or c + w > 1.0 + 1e-12:
                raise InvalidParameterError(
                    f"hat (center={c}, half_width={w}) leaves [0, 1]")
        self.centers = centers
        self.half_widths = half_widths

    def _values(self, pts):
        vals = np.ones(pts.shape[0])
        for i, (c, w) in enumerate(zip(self.centers, self.half_widths)):
            vals *= _hat1d_values(pts[:, i], c, w)
        return vals

    def sample(self, n, rng):
        # coordinates are independent, so exact per-coordinate inversion works
        cols = [_hat1d_inverse_cdf(rng.uniform(0.0, 1.0, size=n), c, w)
                for c, w in zip(self.centers, self.half_widths)]
        return np.column_stack(cols)


class TabulatedDensity(Density):
    """Density given by values on a rectilinear grid, multilinearly interpolated.

    Coordinates outside the grid's bounding box clamp to the boundary.
    """

    kind = "tabulated"

    def __init__(self, axes, values):
        axes = tuple(np.asarray(a, dtype=float) for a in axes)
        values = np.asarray(values, dtype=float)
        if values.shape != tuple(len(a) for a in axes):
            raise InvalidParameterError(
                f"values shape {values.shape} does not match axes {tuple(len(a) for a in axes)}")
        if np.any(values < 0.0):
            raise InvalidParameterError("tabulated density has negative entries")
        for a in axes:
            if len(a) < 2 or np.any(np.diff(a) <= 0.0):
                raise InvalidParameterError("each axis needs >= 2 strictly increasing points")
        super().__init__(len(axes))
        self.axes = axes
        self.values = values

    def _values(self, pts):
        n = pts.shape[0]
        idx, frac = [], []
        for i, ax in enumerate(self.axes):
            j = np.clip(np.searchsorted(ax, pts[:, i], side="right") - 1, 0, len(ax) - 2)
            t = (pts[:, i] - ax[j]) / (ax[j + 1] - ax[j])
            idx.append(j)
            frac.append(np.clip(t, 0.0, 1.0))
        out = np.zeros(n)
        for corner in range(2 ** self.dim):
            w = np.ones(n)
            offs = []
            for i in range(self.dim):
                bit = (corner >> i) & 1
                w *= frac[i] if bit else (1.0 - frac[i])
                offs.append(idx[i] + bit)
            out += w * self.values[tuple(offs)]
        return out


def tabulated_from_csv(path):
    """Load a tabulated density from CSV with columns x1..xd,value.

    The points must form a full rectilinear grid (every combination of the
    per-axis coordinate values appears exactly once).
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-1].strip().lower() != "value":
            raise ParseError("expected header x1,...,xd,value", row=0)
        dim = len(header) - 1
        if dim < 1:
            raise ParseError("no coordinate columns", row=0)
        coords, vals = [], []
        for i, row in enumerate(reader, start=1):
            if len(row) != dim + 1:
                raise ParseError(f"row {i} has {len(row)} fields, expected {dim + 1}", row=i)
            try:
                coords.append([float(v) for v in row[:dim]])
                vals.append(float(row[dim]))
            except ValueError as exc:
                raise ParseError(f"row {i}: {exc}", row=i) from exc
    coords = np.asarray(coords)
    vals = np.asarray(vals)
    axes = [np.unique(coords[:, i]) for i in range(dim)]
    shape = tuple(len(a) for a in axes)
    if math.prod(shape) != len(vals):
        raise ParseError(f"{len(vals)} rows do not form a full {shape} grid")
    grid = np.full(shape, np.nan)
    index = tuple(np.searchsorted(axes[i], coords[:, i]) for i in range(dim))
    grid[index] = vals
    if np.any(np.isnan(grid)):
        raise ParseError("grid has duplicate or missing points")
    return TabulatedDensity(axes, grid)


_GRID_POINTS_PER_AXIS = {1: 100_000, 2: 1_000, 3: 100}


def density_integral(density, mc_samples: int = 1_000_000, seed: int = 0):
    """Numerically integrate a density over [0,1]^d.

    Midpoint tensor grid for d <= 3, Monte Carlo otherwise. Returns
    (integral, standard_error); the grid rule reports 0 standard error.
    """
    d = density.dim
    if d <= 3:
        m = _GRID_POINTS_PER_AXIS[d]
        mid = (np.arange(m) + 0.5) / m
        grids = np.meshgrid(*([mid] * d), indexing="ij")
        pts = np.column_stack([g.ravel() for g in grids])
        vals = density(pts)
        return float(np.mean(vals)), 0.0
    rng = np.random.default_rng(seed)
    vals = density(rng.uniform(0.0, 1.0, size=(mc_samples, d)))
    return float(np.mean(vals)), float(np.std(vals) / np.sqrt(mc_samples))


def check_normalized(density, tol: float = 1e-4, mc_samples: int = 1_000_000, seed: int = 0):
    """Verify a density integrates to 1; returns the integral estimate.

    Monte Carlo estimates are granted a 4-sigma allowance on top of tol.
    """
    integral, se = density_integral(density, mc_samples=mc_samples, seed=seed)
    if abs(integral - 1.0) > tol + 4.0 * se:
        raise InvalidParameterError(
            f"density integrates to {integral:.6f} (tolerance {tol:g}, se {se:g})")
    return integral


# ---------------------------------------------------------------------------
# mixture problems
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureProblem:
    """Ground-truth scenario: normal density, known-anomaly density, and mix.

    The anomaly class draws a share ``s_tilde`` of its mass from the known
    anomaly density and the rest from the uniform background, so its density
    is s_tilde * known + (1 - s_tilde), bounded below by 1 - s_tilde. The
    degenerate value s_tilde = 1 (anomaly class entirely known, no uniform
    floor) is accepted but loses that lower bound, and pointwise quantities
    become undefined wherever both densities vanish.

    ``s`` is the prior probability of the normal class.
    """

    normal_density: Density
    known_anomaly_density: Density | None
    s: float
    s_tilde: float

    def __post_init__(self):
        if not 0.0 < self.s < 1.0:
            raise InvalidParameterError(f"s must lie in (0, 1), got {self.s!r}")
        if not 0.0 <= self.s_tilde <= 1.0:
            raise InvalidParameterError(f"s_tilde must lie in [0, 1], got {self.s_tilde!r}")
        if self.s_tilde > 0.0 and self.known_anomaly_density is None:
            raise InvalidParameterError("s_tilde > 0 requires a known-anomaly density")
        if (self.known_anomaly_density is not None
                and self.known_anomaly_density.dim != self.normal_density.dim):
            raise InvalidParameterError("density dimensions disagree")

    @property
    def dim(self):
        return self.normal_density.dim

    def anomaly_density(self, x):
        """The mixed anomaly-class density: s_tilde * known + (1 - s_tilde)."""
        if self.s_tilde == 0.0:
            pts, single = _as_points(x, self.dim)
            return 1.0 if single else np.ones(pts.shape[0])
        return self.s_tilde * self.known_anomaly_density(x) + (1.0 - self.s_tilde)


@dataclass(frozen=True)
class LevelSetSpec:
    """Likelihood-ratio threshold for the level-set decision."""

    rho: float

    def __post_init__(self):
        if self.rho <= 0.0:
            raise InvalidParameterError(f"rho must be > 0, got {self.rho!r}")

    @classmethod
    def for_problem(cls, problem: MixtureProblem):
        """Default threshold (1 - s)/s, the Bayes operating point."""
        return cls(rho=(1.0 - problem.s) / problem.s)


@dataclass(frozen=True)
class NoiseCondition:
    """Margin-noise certificate: P(|regression| <= t) <= c0 * t**q.

    q = 0 with c0 = 1 is admissible for every distribution.
    """

    q: float = 0.0
    c0: float = 1.0

    def __post_init__(self):
        if self.q < 0.0:
            raise InvalidParameterError(f"q must be >= 0, got {self.q!r}")
        if self.c0 <= 0.0:
            raise InvalidParameterError(f"c0 must be > 0, got {self.c0!r}")


def _class_densities(problem, x):
    h1 = np.atleast_1d(np.asarray(problem.normal_density(x), dtype=float))
    hm = np.atleast_1d(np.asarray(problem.anomaly_density(x), dtype=float))
    return h1, hm


def regression_function(problem: MixtureProblem, x):
    """Conditional mean of the +/-1 label: (s*h1 - (1-s)*h2)/(s*h1 + (1-s)*h2).

    Raises UndefinedPointError where the class-density mass vanishes, which
    can only happen in the degenerate s_tilde = 1 case.
    """
    h1, hm = _class_densities(problem, x)
    num = problem.s * h1 - (1.0 - problem.s) * hm
    den = problem.s * h1 + (1.0 - problem.s) * hm
    if np.any(den <= 0.0):
        raise UndefinedPointError("regression function undefined: both densities vanish")
    out = num / den
    return float(out[0]) if out.shape == (1,) and np.ndim(x) <= 1 else out


def conditional_class_prob(problem: MixtureProblem, x):
    """P(normal | x) = s*h1 / (s*h1 + (1-s)*h2)."""
    h1, hm = _class_densities(problem, x)
    den = problem.s * h1 + (1.0 - problem.s) * hm
    if np.any(den <= 0.0):
        raise UndefinedPointError("class probability undefined: both densities vanish")
    out = problem.s * h1 / den
    return float(out[0]) if out.shape == (1,) and np.ndim(x) <= 1 else out


def bayes_classifier(problem: MixtureProblem, x):
    """Optimal label: +1 iff s*h1 - (1-s)*h2 >= 0 (tie maps to +1)."""
    h1, hm = _class_densities(problem, x)
    out = np.where(problem.s * h1 - (1.0 - problem.s) * hm >= 0.0, 1, -1)
    return int(out[0]) if out.shape == (1,) and np.ndim(x) <= 1 else out


def level_set_indicator(problem: MixtureProblem, spec: LevelSetSpec, x):
    """True where the likelihood ratio h1/h2 meets the threshold.

    Evaluated as h1 >= rho * h2 so that points with h2 = 0 and h1 > 0 count
    as inside the set; both densities vanishing is an error.
    """
    h1, hm = _class_densities(problem, x)
    both_zero = (h1 == 0.0) & (hm == 0.0)
    if np.any(both_zero):
        raise UndefinedPointError("level set undefined: both densities vanish")
    out = h1 >= spec.rho * hm
    return bool(out[0]) if out.shape == (1,) and np.ndim(x) <= 1 else out


# ---------------------------------------------------------------------------
# reference scenarios
# ---------------------------------------------------------------------------

def example1_problem(s: float, s_tilde: float) -> MixtureProblem:
    """1D two-hat scenario: normal mass on [1/2, 1], known anomalies on [0, 1/2].

    Both densities are unit-mass triangular hats whose supports touch at 1/2
    with empty interior overlap, so with s_tilde = 1 the regression function
    jumps between -1 and +1 there, while any s_tilde < 1 makes it continuous.
    """
    return MixtureProblem(
        normal_density=Hat1D(center=0.75, half_width=0.25),
        known_anomaly_density=Hat1D(center=0.25, half_width=0.25),
        s=s,
        s_tilde=s_tilde,
    )


def example2_problem(d: int, s: float, s_tilde: float) -> MixtureProblem:
    """d-dimensional version of the two-hat scenario.

    Each density is a product of one-dimensional hats: the first coordinate
    carries the two half-interval hats of :func:`example1_problem` (supports
    touching at 1/2), every other coordinate a full-interval hat centered at
    1/2. d = 1 recovers example1_problem exactly.
    """
    if int(d) != d or d < 1:
        raise InvalidParameterError(f"d must be an integer >= 1, got {d!r}")
    d = int(d)
    rest_c = (0.5,) * (d - 1)
    rest_w = (0.5,) * (d - 1)
    return MixtureProblem(
        normal_density=ProductHat((0.75,) + rest_c, (0.25,) + rest_w),
        known_anomaly_density=ProductHat((0.25,) + rest_c, (0.25,) + rest_w),
        s=s,
        s_tilde=s_tilde,
    )


def centered_hat_product(x):
    """Origin-centered product hat prod_i max(2 - 4|x_i|, 0).

    Building block of the d-dimensional two-hat construction in its
    symmetric coordinates; peaks at 2**d at the origin and vanishes once
    any |x_i| reaches 1/2.
    """
    x = np.atleast_2d(np.asarray(x, dtype=float))
    vals = np.prod(np.maximum(2.0 - 4.0 * np.abs(x), 0.0), axis=1)
    return float(vals[0]) if vals.shape == (1,) else vals
