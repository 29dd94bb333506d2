"""Deterministic synthetic waste datasets with a planted strength function.

The real 66-specimen laboratory dataset is not published, so end-to-end
verification runs on synthetic data whose marginals qualitatively match the
published distribution summaries (right-skewed organics, bimodal plastics
on [0.40, 0.70], density normal around 7.00 kN/m^3, moisture peaking in
[0.50, 0.60], friction targets on [20, 50] degrees, cohesion on [2, 9]
kPa) and whose ground truth is a documented closed form. The planted
function's partial-derivative signs follow the qualitative attribution
findings for the real model: more food waste lowers friction angle, more
plastics raises it, textiles and plastics raise cohesion, food waste
lowers it. The friction response to plastics saturates (tanh), tying the
bimodal plastics marginal to two strength regimes; one interaction term
(moisture x food waste) keeps the truth non-additive so attribution is
exercised beyond linear cases.

Exact marginal parameters and coefficients below are artifact choices,
not measurements.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .data import DEFAULT_SCHEMA, Dataset, ValidationError, WasteSample, validate_sample
from .numeric import Rng

FRICTION_RANGE = (20.0, 50.0)
COHESION_RANGE = (2.0, 9.0)


@dataclass(frozen=True)
class Marginal:
    """One feature's sampling recipe: distribution family + clip bounds.

    Families: ``beta(a, b, scale)`` -> scale*Beta(a, b);
    ``normal(mu, sigma)``; ``bimodal(mu1, mu2, sigma, w)`` -> mixture of
    two normals; ``exponential(scale)``.
    """

    family: str
    params: tuple[float, ...]
    clip: tuple[float, float]

    def sample(self, n: int, rng: Rng) -> np.ndarray:
        if self.family == "beta":
            a, b, scale = self.params[:3]
            loc = self.params[3] if len(self.params) > 3 else 0.0
            u1 = rng.gamma(a, 1.0, n)  # Beta(a, b) as a gamma ratio
            u2 = rng.gamma(b, 1.0, n)
            values = loc + scale * u1 / (u1 + u2)
        elif self.family == "normal":
            mu, sigma = self.params
            values = rng.normal(mu, sigma, n)
        elif self.family == "bimodal":
            mu1, mu2, sigma, w = self.params
            pick = rng.uniform(0.0, 1.0, n) < w
            values = np.where(pick, rng.normal(mu1, sigma, n), rng.normal(mu2, sigma, n))
        elif self.family == "exponential":
            (scale,) = self.params
            values = rng.exponential(scale, n)
        else:
            raise ValidationError(f"unknown marginal family {self.family!r}")
        return np.clip(values, self.clip[0], self.clip[1])


# Planted coefficients. Centered predictors keep the noise-free outputs
# inside the target ranges over typical samples, so the clip below almost
# never binds and monotonicity survives. The dominant friction response is
# a saturating (tanh) function of the bimodal plastics content: the two
# plastics modes map to two strength regimes, which concentrates target
# variance and keeps the regression learnable at the fixed training budget.
FRICTION_COEFFS = {
    "intercept": 35.5,
    "food_waste": (-8.0, 0.10),
    "moisture_content": (-3.0, 0.55),
    "density_kn_m3": (0.8, 7.0),
    "size_5_10_mm": (2.5, 0.15),
    "size_2_5_mm": (2.0, 0.12),
    "size_lt_2_mm": (-2.5, 0.10),
    "fine_fraction": (-2.0, 0.08),
    "textiles": (1.5, 0.05),
}
# (feature, amplitude, center, width): amplitude * tanh((x - center)/width)
FRICTION_SATURATING = ("plastics", 7.0, 0.55, 0.045)
FRICTION_INTERACTION = ("moisture_content", "food_waste", -6.0, 0.55, 0.10)

COHESION_COEFFS = {
    "intercept": 5.2,
    "textiles": (9.0, 0.05),
    "plastics": (2.2, 0.5),
    "food_waste": (-3.5, 0.10),
    "paper_cardboard": (2.5, 0.06),
    "moisture_content": (-1.6, 0.55),
    "nappies": (-3.0, 0.03),
}
COHESION_INTERACTION = ("moisture_content", "food_waste", -3.0, 0.55, 0.10)


@dataclass(frozen=True)
class GeneratorSpec:
    """Marginals, planted coefficients and noise levels for one dataset."""

    marginals: dict = field(default_factory=dict)
    friction_noise_std: float = 0.3
    cohesion_noise_std: float = 0.45
    friction_coeffs: dict = field(default_factory=lambda: dict(FRICTION_COEFFS))
    cohesion_coeffs: dict = field(default_factory=lambda: dict(COHESION_COEFFS))
    friction_saturating: Optional[tuple] = FRICTION_SATURATING
    friction_interaction: tuple = FRICTION_INTERACTION
    cohesion_interaction: tuple = COHESION_INTERACTION


def default_generator_spec() -> GeneratorSpec:
    marginals = {
        "food_waste": Marginal("beta", (1.1, 7.0, 0.6), (0.0, 0.6)),
        "garden_waste": Marginal("exponential", (0.015,), (0.0, 0.1)),
        "paper_cardboard": Marginal("bimodal", (0.04, 0.12, 0.02, 0.55), (0.0, 0.3)),
        "textiles": Marginal("normal", (0.05, 0.02), (0.0, 0.2)),
        "plastics": Marginal("bimodal", (0.45, 0.65, 0.045, 0.5), (0.0, 0.8)),
        "rubber": Marginal("beta", (1.2, 10.0, 0.1), (0.0, 0.1)),
        "nappies": Marginal("beta", (1.3, 8.0, 0.15), (0.0, 0.15)),
        "metal": Marginal("beta", (1.2, 9.0, 0.1), (0.0, 0.1)),
        "glass": Marginal("beta", (1.2, 9.0, 0.1), (0.0, 0.1)),
        "other": Marginal("beta", (1.5, 6.0, 0.2), (0.0, 0.2)),
        "size_10_15_mm": Marginal("normal", (0.18, 0.05), (0.0, 0.6)),
        "size_5_10_mm": Marginal("normal", (0.15, 0.05), (0.0, 0.6)),
        "size_2_5_mm": Marginal("normal", (0.12, 0.04), (0.0, 0.6)),
        "size_lt_2_mm": Marginal("normal", (0.10, 0.04), (0.0, 0.6)),
        "fine_fraction": Marginal("normal", (0.08, 0.03), (0.0, 0.4)),
        "moisture_content": Marginal("beta", (2.0, 3.5, 0.55, 0.35), (0.0, 1.0)),
        "density_kn_m3": Marginal("normal", (7.0, 0.8), (3.0, 12.0)),
    }
    return GeneratorSpec(marginals=marginals)


COMPOSITION_FEATURES = [
    f.name for f in DEFAULT_SCHEMA.features if f.kind == "composition-fraction"
]


def _linear_part(values: dict[str, np.ndarray], coeffs: dict, interaction: tuple) -> np.ndarray:
    out = np.full_like(next(iter(values.values())), coeffs["intercept"], dtype=np.float64)
    for name, spec in coeffs.items():
        if name == "intercept":
            continue
        coef, center = spec
        out = out + coef * (values[name] - center)
    a, b, coef, ca, cb = interaction
    out = out + coef * (values[a] - ca) * (values[b] - cb)
    return out


def planted_truth(spec: GeneratorSpec, sample: Union[WasteSample, np.ndarray]):
    """Noise-free (friction_deg, cohesion_kpa) for one sample.

    Each target is a centered linear combination plus one
    moisture x food_waste interaction; friction additionally carries a
    saturating tanh response to plastics content. Outputs are clipped to
    the published target ranges (coefficients are sized so the clip stays
    inactive over typical samples).
    """
    features = sample.features if isinstance(sample, WasteSample) else np.asarray(sample)
    values = {
        name: np.asarray(features[..., i], dtype=np.float64)
        for i, name in enumerate(DEFAULT_SCHEMA.names)
    }
    friction = _linear_part(values, spec.friction_coeffs, spec.friction_interaction)
    if spec.friction_saturating is not None:
        name, amplitude, center, width = spec.friction_saturating
        friction = friction + amplitude * np.tanh((values[name] - center) / width)
    cohesion = _linear_part(values, spec.cohesion_coeffs, spec.cohesion_interaction)
    friction = np.clip(friction, *FRICTION_RANGE)
    cohesion = np.clip(cohesion, *COHESION_RANGE)
    if friction.ndim == 0:
        return float(friction), float(cohesion)
    return friction, cohesion


def generate(
    spec: GeneratorSpec, n: int, rng: Rng
) -> tuple[Dataset, Callable[[np.ndarray], tuple]]:
    """Draw n samples; returns (dataset, noise-free truth handle for oracles).

    Features are drawn column-wise in schema order from the spec marginals;
    composition fractions are rescaled to sum to 1 only when their sum
    exceeds 1. Targets are the planted function plus Gaussian noise,
    clipped to the published ranges. Pure function of (spec, n, seed).
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    columns = {}
    for name in DEFAULT_SCHEMA.names:
        if name not in spec.marginals:
            raise ValidationError(f"generator spec missing marginal for {name!r}")
        columns[name] = spec.marginals[name].sample(n, rng)

    comp = np.stack([columns[name] for name in COMPOSITION_FEATURES], axis=1)
    totals = comp.sum(axis=1)
    scale = 1.0 / np.maximum(totals, 1.0)
    for j, name in enumerate(COMPOSITION_FEATURES):
        columns[name] = comp[:, j] * scale

    x = np.stack([columns[name] for name in DEFAULT_SCHEMA.names], axis=1)
    friction, cohesion = planted_truth(spec, x)
    friction = friction + rng.normal(0.0, spec.friction_noise_std, n)
    cohesion = cohesion + rng.normal(0.0, spec.cohesion_noise_std, n)
    friction = np.clip(friction, *FRICTION_RANGE)
    cohesion = np.clip(cohesion, *COHESION_RANGE)

    samples = []
    for i in range(n):
        sample = WasteSample(
            features=x[i],
            friction_angle_deg=float(friction[i]),
            cohesion_kpa=float(cohesion[i]),
        )
        validate_sample(DEFAULT_SCHEMA, sample, row=i)
        samples.append(sample)
    dataset = Dataset(schema=DEFAULT_SCHEMA, samples=samples)

    def truth(features: np.ndarray):
        return planted_truth(spec, features)

    return dataset, truth


# ---------------------------------------------------------------------------
# Spec file I/O (JSON)


def spec_to_dict(spec: GeneratorSpec) -> dict:
    return {
        "marginals": {
            name: {"family": m.family, "params": list(m.params), "clip": list(m.clip)}
            for name, m in spec.marginals.items()
        },
        "friction_noise_std": spec.friction_noise_std,
        "cohesion_noise_std": spec.cohesion_noise_std,
        "friction_coeffs": {
            k: (v if k == "intercept" else list(v)) for k, v in spec.friction_coeffs.items()
        },
        "cohesion_coeffs": {
            k: (v if k == "intercept" else list(v)) for k, v in spec.cohesion_coeffs.items()
        },
        "friction_saturating": (
            list(spec.friction_saturating) if spec.friction_saturating else None
        ),
        "friction_interaction": list(spec.friction_interaction),
        "cohesion_interaction": list(spec.cohesion_interaction),
    }


def spec_from_dict(doc: dict) -> GeneratorSpec:
    marginals = {
        name: Marginal(
            family=m["family"], params=tuple(m["params"]), clip=tuple(m["clip"])
        )
        for name, m in doc["marginals"].items()
    }
    saturating = doc.get("friction_saturating", FRICTION_SATURATING)
    return GeneratorSpec(
        marginals=marginals,
        friction_noise_std=doc.get("friction_noise_std", 0.3),
        cohesion_noise_std=doc.get("cohesion_noise_std", 0.45),
        friction_coeffs={
            k: (v if k == "intercept" else tuple(v))
            for k, v in doc.get("friction_coeffs", FRICTION_COEFFS).items()
        },
        cohesion_coeffs={
            k: (v if k == "intercept" else tuple(v))
            for k, v in doc.get("cohesion_coeffs", COHESION_COEFFS).items()
        },
        friction_saturating=tuple(saturating) if saturating else None,
        friction_interaction=tuple(doc.get("friction_interaction", FRICTION_INTERACTION)),
        cohesion_interaction=tuple(doc.get("cohesion_interaction", COHESION_INTERACTION)),
    )


def load_generator_spec(path: Union[str, Path]) -> GeneratorSpec:
    with open(path, "r", encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))


def save_generator_spec(spec: GeneratorSpec, path: Union[str, Path]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(spec_to_dict(spec), fh, indent=2)
        fh.write("\n")
