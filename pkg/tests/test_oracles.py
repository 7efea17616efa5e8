"""
The reference computations are checked on hand-solvable cases before any
service test relies on them.
"""
import ast
from pathlib import Path

import numpy as np

from tests.oracles import dense_gp_solve, dense_gp_variance, fd_gradient, modal_frequencies


def test_oracles_stand_alone():
    tree = ast.parse((Path(__file__).parent / 'oracles.py').read_text(encoding='utf-8'))
    imported = set()
    for node in ast.walk(tree):
        if isinstance(node, ast.Import):
            imported.update(alias.name.split('.')[0] for alias in node.names)
        elif isinstance(node, ast.ImportFrom):
            imported.add((node.module or '').split('.')[0])
    assert imported == {'numpy'}


def test_fd_gradient_of_quadratic():
    grad = fd_gradient(lambda t: t[0] ** 2 + 3.0 * t[0] * t[1], [1.0, -2.0])
    np.testing.assert_allclose(grad, [2.0 * 1.0 + 3.0 * -2.0, 3.0 * 1.0], atol=1e-9)


def test_fd_gradient_of_constant_is_zero():
    np.testing.assert_array_equal(fd_gradient(lambda t: 7.0, np.ones(4)), np.zeros(4))


def test_fd_gradient_respects_coordinate_subset():
    grad = fd_gradient(lambda t: float(np.sum(t ** 2)), [1.0, 2.0, 3.0], coordinates=[1])
    np.testing.assert_allclose(grad, [0.0, 4.0, 0.0], atol=1e-9)


def test_single_point_gp():
    # K = 2 (signal 1 + noise 1), k* = 0.5
    mean = dense_gp_solve([[2.0]], [4.0], [[0.5]])
    variance = dense_gp_variance([[2.0]], [[0.5]], 1.0)
    np.testing.assert_allclose(mean, [1.0])
    np.testing.assert_allclose(variance, [0.875])


def test_zero_targets_give_zero_mean():
    kernel = np.array([[2.0, 0.5], [0.5, 2.0]])
    cross = np.array([[0.3, 0.1], [0.9, 0.2]])
    np.testing.assert_array_equal(dense_gp_solve(kernel, np.zeros(2), cross), np.zeros(2))


def test_modal_frequencies_of_single_oscillator():
    frequencies = modal_frequencies([[2.0]], [[800.0]])
    np.testing.assert_allclose(frequencies, [np.sqrt(400.0) / (2.0 * np.pi)], rtol=1e-10)


def test_modal_frequencies_of_two_mass_chain():
    # Grounded chain k-m-k-m: eigenvalues (3 -+ sqrt 5)/2 * k/m
    k, m = 100.0, 1.0
    K = np.array([[2 * k, -k], [-k, k]])
    M = np.eye(2) * m
    expected = np.sqrt(np.array([(3 - np.sqrt(5)) / 2, (3 + np.sqrt(5)) / 2]) * k / m) / (2 * np.pi)
    np.testing.assert_allclose(modal_frequencies(M, K), expected, rtol=1e-9)
