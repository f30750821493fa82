"""Simulation cases B1-B3 (binary) and G1-G4 (Gaussian noise)."""

from __future__ import annotations

import numpy as np

from ..geometry import PolarImage, case_shape, generate_design, membership

BINARY_CASES = ("B1", "B2", "B3")
GAUSSIAN_CASES = ("G1", "G2", "G3", "G4")
CASES = BINARY_CASES + GAUSSIAN_CASES

# (mu_in, mu_out); the standard deviations are (1.5, 1) in every G case
GAUSSIAN_MEANS = {"G1": (4.0, 1.0), "G2": (1.0, 1.0)}
GAUSSIAN_SDS = (1.5, 1.0)
G3_GAP = 0.2
G4_MIXTURE = ((0.6, 2.0), (0.4, 1.0))  # (weight, mean); sds from GAUSSIAN_SDS

# Order constraint used when fitting each Gaussian case.
GAUSSIAN_FIT_ORDER = {"G1": "both", "G2": "variance", "G3": "both", "G4": "both"}


def noise_family(case: str) -> str:
    return "bernoulli" if case.upper().startswith("B") else "gaussian"


def default_noise(case: str) -> dict:
    case = case.upper()
    if case in BINARY_CASES:
        return {"p_in": 0.5, "p_out": 0.2}
    sd_in, sd_out = GAUSSIAN_SDS
    return {"sigma_in": sd_in, "sigma_out": sd_out}


def simulate_case(case: str, m: int = 100, noise: dict | None = None, seed=None) -> PolarImage:
    """Jittered ``m x m`` image for a simulation case.

    Binary cases take ``noise = {"p_in", "p_out"}``.  Gaussian cases take
    optional ``sigma_in``/``sigma_out`` overrides; means are fixed by the case.
    G3 uses location-dependent means ``r - r_I + 0.2`` inside and ``r - r_O``
    outside, with ``r_I`` the smallest inside pixel radius and ``r_O`` the
    largest outside pixel radius, so the two mean ranges are 0.2 apart.
    G4 draws inside intensities from a two-component normal mixture.
    """
    case = case.upper()
    if case not in CASES:
        raise ValueError(f"unknown case {case!r}; expected one of {CASES}")
    noise = {**default_noise(case), **(noise or {})}
    seq = np.random.SeedSequence(seed)
    design_seed, noise_seed = seq.spawn(2)
    rng = np.random.default_rng(noise_seed)
    xy = generate_design("jittered", m, design_seed)
    omega = np.mod(np.arctan2(xy[:, 1], xy[:, 0]), 2 * np.pi)
    r = np.hypot(xy[:, 0], xy[:, 1])
    shape = case_shape(case)
    inside = r < shape(omega)
    n = r.size

    if case in BINARY_CASES:
        p = np.where(inside, noise["p_in"], noise["p_out"])
        y = (rng.uniform(size=n) < p).astype(float)
    else:
        sd_in, sd_out = noise["sigma_in"], noise["sigma_out"]
        sd = np.where(inside, sd_in, sd_out)
        eps = rng.standard_normal(n)
        if case in GAUSSIAN_MEANS:
            mu_in, mu_out = GAUSSIAN_MEANS[case]
            y = np.where(inside, mu_in, mu_out) + sd * eps
        elif case == "G3":
            r_inner = r[inside].min()
            r_outer = r[~inside].max()
            mean = np.where(inside, r - r_inner + G3_GAP, r - r_outer)
            y = mean + sd * eps
        else:
            (w1, m1), (_, m2) = G4_MIXTURE
            first = rng.uniform(size=n) < w1
            mix = np.where(first, m1 + sd_in * eps, m2 + sd_out * eps)
            y = np.where(inside, mix, 1.0 + sd_out * eps)

    meta = {
        "case": case,
        "design": "jittered",
        "m": int(m),
        "seed": None if seed is None else int(seed),
        "family": noise_family(case),
        "noise": {k: float(v) for k, v in noise.items()},
    }
    return PolarImage(omega, r, y, meta)


def truth_inside(image: PolarImage) -> np.ndarray:
    shape = case_shape(image.meta["case"])
    return membership(shape(image.omega), image)
