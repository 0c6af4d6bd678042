"""Shared fixtures: benchmark datasets, a fast reference config, and the
asia end-to-end run that several suites inspect.

Expensive artifacts (fixture datasets, the asia iterative run) are
session-scoped so the whole suite pays for them once.
"""
from __future__ import annotations

import warnings
from pathlib import Path

import numpy as np
import pytest

from edgecert.bench import load_manifest
from edgecert.model import Config, Dataset
from edgecert.oracle import GroundTruthBackend, run_iterative

FIXTURE_DIR = Path(__file__).resolve().parent.parent / "fixtures"

# Reference config for fixture-scale tests: the gamma HSIC approximation
# gives the same decisions as the permutation test on these datasets at a
# fraction of the cost.  Permutation p-values are exercised directly in the
# stats suite and in the calibration acceptance criterion.
GAMMA = Config(hsic_method="gamma")


def make_dataset(columns: dict[str, np.ndarray]) -> Dataset:
    """Small synthetic dataset without the N>=1000 advisory warning."""
    names = list(columns)
    data = np.column_stack([np.asarray(columns[n], float) for n in names])
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return Dataset(data, names, min_n=1)


@pytest.fixture(scope="session")
def manifest():
    return load_manifest(str(FIXTURE_DIR / "manifest.json"))


@pytest.fixture(scope="session")
def asia(manifest):
    dataset, gt = manifest["asia"].load()
    return dataset, gt


@pytest.fixture(scope="session")
def sachs(manifest):
    dataset, gt = manifest["sachs"].load()
    return dataset, gt


@pytest.fixture(scope="session")
def asia_run(asia):
    """One full asia iterative run (simulated expert, gamma config)."""
    dataset, gt = asia
    return run_iterative(dataset, GAMMA, GroundTruthBackend(gt, dataset.v))


@pytest.fixture()
def gamma_config():
    return GAMMA
