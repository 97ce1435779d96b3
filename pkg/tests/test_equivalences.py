"""Algebraic identities between the derivational forms of the optimizers.

These are the dual-route checks: each identity is measured by running both
recursions side by side and bounding the relative trajectory deviation.
"""

import numpy as np

from innaprop.harness.checks import (
    adam_equivalence_dev,
    dinadam_forms_dev,
    dinadam_reduction_dev,
    inna_rewrite_dev,
    memory_reduction_dev,
    momentum_forms_dev,
)
from innaprop.numerics import ParamVector, RngStream
from innaprop.optimizers import (
    InnapropConfig,
    innaprop_init,
    innaprop_naive_init,
    innaprop_naive_step,
    innaprop_plain_step,
)
from innaprop.problems import generate_synthetic, make_problem


def test_adam_special_case_rosenbrock():
    dev0 = adam_equivalence_dev(make_problem("rosenbrock"), ParamVector([-1.2, 1.0]), 0.0)
    dev1 = adam_equivalence_dev(make_problem("rosenbrock"), ParamVector([-1.2, 1.0]), 0.01)
    assert dev0 < 1e-12 and dev1 < 1e-12


def test_adam_special_case_mlp():
    data = generate_synthetic("two_gaussians", n=200, dim=2, seed=7)
    mlp = make_problem("tiny_mlp", dataset=data, hidden=(8,), activation="tanh")
    theta0 = ParamVector(mlp.init_theta(RngStream(5, 0).generator()))
    assert adam_equivalence_dev(mlp, theta0, 0.0) < 1e-12
    assert adam_equivalence_dev(mlp, theta0, 0.01) < 1e-12


def test_six_slot_vs_three_slot_500_steps():
    quad = make_problem("quadratic", spectrum=(1.0, 10.0))
    theta0 = ParamVector(quad.init_theta(RngStream(1, 1).generator()))
    assert memory_reduction_dev(quad, theta0, 500) < 1e-10
    assert memory_reduction_dev(make_problem("rosenbrock"), ParamVector([-1.2, 1.0]), 500) < 1e-10


def test_naive_bootstrap_matches_reduced_exactly():
    # The forced bootstrap makes the two forms coincide from the very first
    # step, not just asymptotically.
    cfg = InnapropConfig(alpha=0.7, beta=1.3, sigma=0.99, epsilon=1e-8)
    rng = RngStream(8, 0).generator()
    theta0 = ParamVector(rng.standard_normal(5))
    g0 = ParamVector(rng.standard_normal(5))
    reduced = innaprop_plain_step(innaprop_init(cfg, theta0), g0, 0.01, cfg)
    naive = innaprop_naive_step(innaprop_naive_init(cfg, theta0), g0, 0.01, cfg)
    rel = np.max(np.abs(reduced.theta.data - naive.theta_curr.data)) / np.max(
        np.abs(reduced.theta.data)
    )
    assert rel < 1e-15


def test_inna_rewrite_100_steps():
    assert inna_rewrite_dev(100) < 1e-12


def test_momentum_direct_vs_reduced_200_steps():
    assert momentum_forms_dev(200) < 1e-10


def test_dinadam_reduces_to_adam_500_steps():
    assert dinadam_reduction_dev(500) < 1e-12


def test_dinadam_direct_vs_mtilde_100_steps():
    assert dinadam_forms_dev(100) < 1e-12
