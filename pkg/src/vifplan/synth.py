"""Seed-fixed synthetic stand-in trial dataset.

Mirrors the shape of the worked asthma example: 46 subjects, two arms,
one binary covariate (sex) and four continuous ones (age, baseline,
height, weight), plus an outcome strongly correlated with baseline. The
values are plausible but entirely synthetic; supply the real dataset to
reproduce published correlation tables.
"""

from __future__ import annotations

import io

import numpy as np

from .dataset import Binary, Continuous, CovariateKind, Dataset, load_csv

DEFAULT_SEED = 4646
DEFAULT_N = 46

TREATMENT_COLUMN = "treatment"
OUTCOME_COLUMN = "outcome"
ARM_LABELS = ("placebo", "ISF24")

SCHEMA: dict[str, CovariateKind] = {
    "sex": Binary(("F", "M")),
    "age": Continuous(),
    "baseline": Continuous(),
    "height": Continuous(),
    "weight": Continuous(),
}


def synthetic_trial_csv(n: int = DEFAULT_N, seed: int = DEFAULT_SEED) -> str:
    """CSV text for a synthetic two-arm trial; byte-stable for a fixed seed."""
    if n < 4:
        raise ValueError(f"need at least 4 subjects, got {n}")
    g = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(7,))))

    male = g.random(n) < 0.5
    sex = np.where(male, "M", "F")
    age = np.clip(np.round(g.normal(34.0, 9.0, size=n)), 18, 68).astype(int)
    height = g.normal(168.0, 6.5, size=n) + np.where(male, 7.0, -4.0)
    weight = 0.62 * height + g.normal(0.0, 7.0, size=n) - 36.0
    baseline = (0.92 + 0.011 * (height - 168.0) - 0.006 * (age - 34.0)
                + g.normal(0.0, 0.16, size=n))
    outcome = (0.30 + 0.85 * baseline - 0.003 * (age - 34.0)
               + np.where(male, 0.04, 0.0) + g.normal(0.0, 0.12, size=n))

    # completely randomised allocation; a one-arm draw is astronomically
    # unlikely but would make the dataset unusable, so reject it outright
    arm_pick = g.integers(0, 2, size=n)
    if arm_pick.min() == arm_pick.max():
        raise ValueError(f"seed {seed} produced a single-arm allocation; pick another")
    treatment = np.where(arm_pick == 0, ARM_LABELS[0], ARM_LABELS[1])

    buf = io.StringIO()
    buf.write("treatment,sex,age,baseline,height,weight,outcome\n")
    for i in range(n):
        buf.write(
            f"{treatment[i]},{sex[i]},{age[i]},{baseline[i]:.4f},"
            f"{height[i]:.1f},{weight[i]:.1f},{outcome[i]:.4f}\n"
        )
    return buf.getvalue()


def synthetic_trial(n: int = DEFAULT_N, seed: int = DEFAULT_SEED) -> Dataset:
    """The synthetic trial loaded through the normal CSV path."""
    text = synthetic_trial_csv(n=n, seed=seed)
    return load_csv(io.StringIO(text), SCHEMA, TREATMENT_COLUMN, OUTCOME_COLUMN)
