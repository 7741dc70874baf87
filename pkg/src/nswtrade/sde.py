"""Ito model of the first wavelet coefficient with online Robbins-Monro fitting.

``dY1 = F(Y1, Y2) dt + G(Y1) dw`` where F is a tensor-product expansion in
probabilists' Hermite polynomials of the standardized inputs and G an
expansion in Y1 alone. Both coefficient sets move by stochastic gradient
descent: F on ``(dy1 - F)^2`` and G on ``((dy1 - F)^2 - G^2)^2``.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, replace

import numpy as np

FORMAT_TAG = "nswtrade-sde-model"
FORMAT_VERSION = 1


def hermite_values(x: float, order: int) -> np.ndarray:
    """``He_0(x) .. He_order(x)`` via ``He_{n+1} = x He_n - n He_{n-1}``."""
    out = np.empty(order + 1)
    out[0] = 1.0
    if order >= 1:
        out[1] = x
    for n in range(1, order):
        out[n + 1] = x * out[n] - n * out[n - 1]
    return out


def hermite_matrix(x, order: int) -> np.ndarray:
    """Vectorised :func:`hermite_values`; shape ``(len(x), order + 1)``."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.shape + (order + 1,))
    out[..., 0] = 1.0
    if order >= 1:
        out[..., 1] = x
    for n in range(1, order):
        out[..., n + 1] = x * out[..., n] - n * out[..., n - 1]
    return out


@dataclass(frozen=True)
class Scale:
    mean1: float = 0.0
    std1: float = 1.0
    mean2: float = 0.0
    std2: float = 1.0


IDENTITY = Scale()

# standardized inputs beyond this many deviations are clipped before the polynomial basis
CLIP = 10.0


def _clip(u):
    if isinstance(u, np.ndarray):
        return np.clip(u, -CLIP, CLIP)
    return min(CLIP, max(-CLIP, float(u)))


@dataclass(frozen=True)
class Observation:
    y1: float
    y2: float
    dy1: float
    dt: float = 1.0


@dataclass
class SdeModel:
    lambda_F: np.ndarray
    lambda_G: np.ndarray
    beta_rm: float = 0.01
    scale: Scale = IDENTITY
    n_updates: int = 0
    g_floor: float = 1e-6
    schedule: str = "constant"
    avg_horizon: float | None = None
    avg_F: np.ndarray | None = None
    avg_G: np.ndarray | None = None

    def __post_init__(self):
        self.lambda_F = np.array(self.lambda_F, dtype=float, ndmin=2)
        self.lambda_G = np.array(self.lambda_G, dtype=float, ndmin=1)
        if self.avg_F is None:
            self.avg_F = self.lambda_F.copy()
        if self.avg_G is None:
            self.avg_G = self.lambda_G.copy()
        if self.avg_horizon is not None and self.avg_horizon < 1:
            raise ValueError("avg_horizon must be >= 1 bar")
        if self.lambda_F.shape[0] != self.lambda_F.shape[1]:
            raise ValueError("drift coefficients must be square (same order in Y1 and Y2)")
        if self.beta_rm <= 0:
            raise ValueError("beta_rm must be positive")
        if self.g_floor <= 0:
            raise ValueError("g_floor must be positive")
        if self.schedule not in ("constant", "harmonic"):
            raise ValueError(f"unknown step schedule {self.schedule!r}")

    @classmethod
    def zeros(cls, order_F: int = 3, order_G: int = 2, g0: float = 1.0, **kw) -> "SdeModel":
        """Zero drift and constant diffusion ``g0``."""
        lg = np.zeros(order_G + 1)
        lg[0] = g0
        return cls(np.zeros((order_F + 1, order_F + 1)), lg, **kw)

    @property
    def order_F(self) -> int:
        return self.lambda_F.shape[0] - 1

    @property
    def order_G(self) -> int:
        return len(self.lambda_G) - 1

    def step_size(self) -> float:
        if self.schedule == "harmonic":
            return self.beta_rm / (1.0 + 2.0 * self.beta_rm * self.n_updates)
        return self.beta_rm

    def averaged(self) -> "SdeModel":
        """Model carrying the exponentially averaged iterates as its coefficients.

        Without an averaging horizon this is the model itself.
        """
        if self.avg_horizon is None:
            return self
        return replace(self, lambda_F=self.avg_F.copy(), lambda_G=self.avg_G.copy())

    def _std(self, y1, y2):
        s = self.scale
        return _clip((y1 - s.mean1) / s.std1), _clip((y2 - s.mean2) / s.std2)

    def drift_features(self, y1: float, y2: float) -> np.ndarray:
        u1, u2 = self._std(y1, y2)
        return np.outer(hermite_values(u1, self.order_F), hermite_values(u2, self.order_F))

    def diffusion_features(self, y1: float) -> np.ndarray:
        return hermite_values(_clip((y1 - self.scale.mean1) / self.scale.std1), self.order_G)

    def raw_diffusion(self, y1: float) -> float:
        return float(self.lambda_G @ self.diffusion_features(y1))

    def drift_on_grid(self, y1, y2: float) -> np.ndarray:
        s = self.scale
        H1 = hermite_matrix(_clip((np.asarray(y1, dtype=float) - s.mean1) / s.std1), self.order_F)
        h2 = hermite_values(_clip((y2 - s.mean2) / s.std2), self.order_F)
        return H1 @ (self.lambda_F @ h2)

    def diffusion_on_grid(self, y1) -> np.ndarray:
        H = hermite_matrix(_clip((np.asarray(y1, dtype=float) - self.scale.mean1) / self.scale.std1), self.order_G)
        return np.maximum(self.g_floor, H @ self.lambda_G)

    def to_text(self) -> str:
        s = self.scale
        lines = [
            f"{FORMAT_TAG} {FORMAT_VERSION}",
            f"order_F {self.order_F}",
            f"order_G {self.order_G}",
            f"beta_rm {self.beta_rm!r}",
            f"schedule {self.schedule}",
            f"g_floor {self.g_floor!r}",
            f"n_updates {self.n_updates}",
            f"avg_horizon {'none' if self.avg_horizon is None else repr(self.avg_horizon)}",
            f"scale {s.mean1!r} {s.std1!r} {s.mean2!r} {s.std2!r}",
            "lambda_F " + " ".join(repr(float(v)) for v in self.lambda_F.ravel()),
            "lambda_G " + " ".join(repr(float(v)) for v in self.lambda_G),
            "avg_F " + " ".join(repr(float(v)) for v in self.avg_F.ravel()),
            "avg_G " + " ".join(repr(float(v)) for v in self.avg_G),
        ]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SdeModel":
        fields_ = {}
        lines = [ln for ln in text.splitlines() if ln.strip()]
        head = lines[0].split()
        if head[0] != FORMAT_TAG or int(head[1]) != FORMAT_VERSION:
            raise ValueError(f"unsupported model format: {lines[0]!r}")
        for ln in lines[1:]:
            key, *vals = ln.split()
            fields_[key] = vals
        oF, oG = int(fields_["order_F"][0]), int(fields_["order_G"][0])
        lf = np.array([float(v) for v in fields_["lambda_F"]]).reshape(oF + 1, oF + 1)
        lg = np.array([float(v) for v in fields_["lambda_G"]])
        af = np.array([float(v) for v in fields_["avg_F"]]).reshape(oF + 1, oF + 1)
        ag = np.array([float(v) for v in fields_["avg_G"]])
        sc = Scale(*(float(v) for v in fields_["scale"]))
        ah = fields_["avg_horizon"][0]
        return cls(lf, lg, float(fields_["beta_rm"][0]), sc, int(fields_["n_updates"][0]),
                   float(fields_["g_floor"][0]), fields_["schedule"][0],
                   None if ah == "none" else float(ah), af, ag)


def eval_drift(model: SdeModel, y1: float, y2: float) -> float:
    return float(np.sum(model.lambda_F * model.drift_features(y1, y2)))


def eval_diffusion(model: SdeModel, y1: float, floor: float | None = None) -> float:
    """``max(floor, G(y1))``; ``floor`` defaults to the model's ``g_floor``."""
    f = model.g_floor if floor is None else floor
    return max(f, model.raw_diffusion(y1))


def drift_loss(model: SdeModel, obs: Observation) -> float:
    """Square norm ``(dy1 - F dt)^2`` minimised by the drift update."""
    return (obs.dy1 - eval_drift(model, obs.y1, obs.y2) * obs.dt) ** 2


def drift_loss_gradient(model: SdeModel, obs: Observation) -> np.ndarray:
    phi = model.drift_features(obs.y1, obs.y2)
    r = obs.dy1 - float(np.sum(model.lambda_F * phi)) * obs.dt
    return -2.0 * r * obs.dt * phi


def diffusion_loss(model: SdeModel, obs: Observation) -> float:
    r = obs.dy1 - eval_drift(model, obs.y1, obs.y2) * obs.dt
    g = model.raw_diffusion(obs.y1)
    return (r * r - g * g * obs.dt) ** 2


def diffusion_loss_gradient(model: SdeModel, obs: Observation) -> np.ndarray:
    psi = model.diffusion_features(obs.y1)
    r = obs.dy1 - eval_drift(model, obs.y1, obs.y2) * obs.dt
    g = float(model.lambda_G @ psi)
    return -4.0 * (r * r - g * g * obs.dt) * g * obs.dt * psi


def _steps(model: SdeModel, obs: Observation):
    beta = model.step_size()
    dt = obs.dt
    phi = model.drift_features(obs.y1, obs.y2)
    r = obs.dy1 - float(np.sum(model.lambda_F * phi)) * dt
    beta_f = beta / (1.0 + beta * float(np.sum(phi * phi)) * dt * dt)
    d_F = (2.0 * beta_f * r * dt) * phi

    psi = model.diffusion_features(obs.y1)
    # below the floor the gradient would vanish or flip the sign of G
    g = max(float(model.lambda_G @ psi), model.g_floor)
    beta_g = beta / (1.0 + beta * float(psi @ psi))
    d_G = (beta_g * (r * r - g * g * dt) / (2.0 * g * dt)) * psi
    return d_F, d_G


def drift_step(model: SdeModel, obs: Observation) -> np.ndarray:
    """Change applied to ``lambda_F`` by one update: ``-beta_eff * grad Q``.

    ``beta_eff = beta / (1 + beta |phi|^2)`` keeps the step bounded when the
    Hermite features are large; for small features it is the plain step.
    """
    return _steps(model, obs)[0]


def diffusion_step(model: SdeModel, obs: Observation) -> np.ndarray:
    """Change applied to ``lambda_G``: the gradient of ``Q_G`` scaled by ``1 / (8 G^2 dt^2)``.

    The scaling makes the step invariant to the magnitude of ``dy1``; it remains a
    positive multiple of ``-grad Q_G``.
    """
    return _steps(model, obs)[1]


def rm_update(model: SdeModel, obs: Observation) -> SdeModel:
    """One Robbins-Monro descent step on the drift and diffusion losses.

    With ``avg_horizon`` set, the exponentially weighted average of the iterates
    (Polyak-Ruppert style) is advanced too; see :meth:`SdeModel.averaged`.
    Returns a new model; the input is not modified.
    """
    d_F, d_G = _steps(model, obs)
    lam_F = model.lambda_F + d_F
    lam_G = model.lambda_G + d_G
    n = model.n_updates + 1
    if model.avg_horizon is None:
        avg_F, avg_G = lam_F, lam_G
    else:
        w = max(1.0 / model.avg_horizon, 1.0 / n)
        avg_F = model.avg_F + w * (lam_F - model.avg_F)
        avg_G = model.avg_G + w * (lam_G - model.avg_G)
    out = copy.copy(model)
    out.lambda_F, out.lambda_G, out.avg_F, out.avg_G = lam_F, lam_G, avg_F, avg_G
    out.n_updates = n
    return out


def forecast_increment(model: SdeModel, y1: float, y2: float, dt: float = 1.0) -> float:
    """Deterministic part ``F(y1, y2) dt`` of the next increment of Y1."""
    return eval_drift(model, y1, y2) * dt


def simulate_path(model: SdeModel, y0: float, y2_source, steps: int, seed: int,
                  dt: float = 1.0, clamp: float = 1e6) -> np.ndarray:
    """Euler-Maruyama path of length ``steps + 1``.

    Diffusion is clamped at zero (not ``g_floor``) so a null model stays put;
    states are clipped to ``[-clamp, clamp]`` to keep unstable drifts finite.
    """
    if steps < 0:
        raise ValueError("steps must be non-negative")
    rng = np.random.default_rng(seed)
    y2 = np.asarray(y2_source, dtype=float)
    if y2.ndim == 0:
        y2 = np.full(max(steps, 1), float(y2))
    if steps and len(y2) < steps:
        raise ValueError("y2_source shorter than the number of steps")
    noise = rng.standard_normal(steps)
    out = np.empty(steps + 1)
    y = float(y0)
    out[0] = y
    sq = math.sqrt(dt)
    for k in range(steps):
        f = eval_drift(model, y, y2[k])
        g = eval_diffusion(model, y, floor=0.0)
        y = min(clamp, max(-clamp, y + f * dt + g * sq * noise[k]))
        out[k + 1] = y
    return out


@dataclass
class RunningScale:
    """Exponentially weighted mean/std of (Y1, Y2) with horizon ``T`` bars."""

    horizon: float = 240.0
    count: int = 0
    m1: float = 0.0
    v1: float = 0.0
    m2: float = 0.0
    v2: float = 0.0
    min_std: float = 1e-12
    _w: float = field(init=False, repr=False)

    def __post_init__(self):
        self._w = 1.0 / self.horizon

    def update(self, y1: float, y2: float) -> None:
        self.count += 1
        # warm-up uses plain averages until the horizon is reached
        w = max(self._w, 1.0 / self.count)
        d1, d2 = y1 - self.m1, y2 - self.m2
        self.m1 += w * d1
        self.m2 += w * d2
        self.v1 = (1 - w) * (self.v1 + w * d1 * d1)
        self.v2 = (1 - w) * (self.v2 + w * d2 * d2)

    @property
    def scale(self) -> Scale:
        if self.count < 2:
            return IDENTITY
        return Scale(self.m1, max(math.sqrt(self.v1), self.min_std), self.m2, max(math.sqrt(self.v2), self.min_std))


def fit_stream(model: SdeModel, y1, y2, scale: RunningScale | None = None) -> SdeModel:
    """Run :func:`rm_update` over consecutive observations of a (Y1, Y2) stream.

    Observation n pairs ``(y1[n], y2[n])`` with ``dy1 = y1[n+1] - y1[n]``. When
    ``scale`` is given it is updated first and its standardization is installed
    in the model before every step.
    """
    y1 = np.asarray(y1, dtype=float)
    y2 = np.asarray(y2, dtype=float)
    for n in range(len(y1) - 1):
        if scale is not None:
            scale.update(y1[n], y2[n])
            model = replace(model, scale=scale.scale)
        model = rm_update(model, Observation(y1[n], y2[n], y1[n + 1] - y1[n]))
    return model
