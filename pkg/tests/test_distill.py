#!/usr/bin/python3
# coding=utf-8

#   Copyright 2024 getcarrier.io
#
#   Licensed under the Apache License, Version 2.0 (the "License");
#   you may not use this file except in compliance with the License.
#   You may obtain a copy of the License at
#
#       http://www.apache.org/licenses/LICENSE-2.0
#
#   Unless required by applicable law or agreed to in writing, software
#   distributed under the License is distributed on an "AS IS" BASIS,
#   WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
#   See the License for the specific language governing permissions and
#   limitations under the License.

""" Temperature softening, distillation loss and proxy training """

import math
import types

import numpy as np  # pylint: disable=E0401
import pytest  # pylint: disable=E0401

from centry_evasion.config import DistillConfig
from centry_evasion.distill.loss import soften_teacher, soften_student, distill_loss
from centry_evasion.distill.proxy import ProxyModel, proxy_logits, proxy_labels, save_proxy, load_proxy
from centry_evasion.distill.training import (
    train_proxy, save_teacher_matrix, load_teacher_matrix, cached_teacher_matrix,
)
from centry_evasion.errors import ShapeError
from centry_evasion.nn.gradcheck import check_gradients
from centry_evasion.nn.losses import one_hot
from centry_evasion.nn.tensor import Tensor, Parameter

from conftest import build_dataset


#
# Softening
#

def test_soften_teacher_identity_at_unit_temperature():
    q = np.array([[0.7, 0.2, 0.1]])
    assert np.allclose(soften_teacher(q, 1.0), q)


def test_soften_teacher_known_value():
    assert np.allclose(soften_teacher([0.8, 0.2], 5.0), [0.56887, 0.43113], atol=1e-4)


@pytest.mark.parametrize("temperature", [0.5, 1.0, 5.0, 50.0])
def test_soften_teacher_keeps_uniform(temperature):
    assert np.allclose(soften_teacher(np.full((2, 5), 0.2), temperature), 0.2)


def test_soften_teacher_preserves_order_and_floors_zero():
    softened = soften_teacher([0.6, 0.4, 0.0], 5.0)
    assert softened[0] > softened[1] > softened[2] > 0.0
    assert np.isclose(softened.sum(), 1.0)


def test_soften_student_known_value():
    assert np.allclose(soften_student(np.array([2.0, 0.0]), 2.0), [0.7311, 0.2689], atol=1e-4)


def test_soften_student_tends_to_uniform():
    logits = np.array([[4.0, 1.0, -2.0]])
    near = np.abs(soften_student(logits, 1.0) - 1.0 / 3.0).max()
    far = np.abs(soften_student(logits, 100.0) - 1.0 / 3.0).max()
    assert far < near


def test_soften_student_shift_invariant():
    logits = np.array([[1.0, 2.0, 3.0]])
    assert np.allclose(soften_student(logits, 3.0), soften_student(logits + 7.0, 3.0))


def test_soften_student_tensor_stays_tensor():
    assert isinstance(soften_student(Tensor([[1.0, 0.0]]), 2.0), Tensor)

#
# Loss
#

def test_distill_loss_zero_when_student_matches_teacher():
    cfg = DistillConfig(temperature=5.0, alpha=1.0)
    q = np.array([[0.7, 0.2, 0.1], [0.1, 0.1, 0.8]])
    logits = Tensor(cfg.temperature * np.log(soften_teacher(q, cfg.temperature)))
    assert abs(distill_loss(logits, q, [0, 2], cfg).item()) < 1e-10


def test_distill_loss_reduces_to_cross_entropy():
    cfg = DistillConfig(alpha=0.0)
    logits = np.array([[1.0, -1.0], [0.5, 0.5]])
    expected = -np.mean([math.log(math.exp(1.0) / (math.exp(1.0) + math.exp(-1.0))), math.log(0.5)])
    value = distill_loss(Tensor(logits), np.full((2, 2), 0.5), [0, 1], cfg).item()
    assert np.isclose(value, expected)


def test_distill_loss_two_class_hand_case():
    cfg = DistillConfig(temperature=5.0, alpha=0.9)
    value = distill_loss(Tensor([[0.0, 0.0]]), np.array([[0.8, 0.2]]), [0], cfg).item()
    #
    powered = [0.8 ** 0.2, 0.2 ** 0.2]
    q_soft = [item / sum(powered) for item in powered]
    kl = sum(item * math.log(item / 0.5) for item in q_soft)
    expected = 0.9 * 25.0 * kl + 0.1 * math.log(2.0)
    assert np.isclose(value, expected)


def test_distill_loss_nonnegative():
    rng = np.random.default_rng(0)
    cfg = DistillConfig(temperature=3.0, alpha=0.5)
    for _ in range(20):
        q = rng.dirichlet(np.ones(4), size=5)
        value = distill_loss(Tensor(rng.normal(size=(5, 4))), q, rng.integers(0, 4, 5), cfg).item()
        assert value >= 0.0


def test_distill_loss_gradients():
    rng = np.random.default_rng(1)
    cfg = DistillConfig(temperature=4.0, alpha=0.7)
    logits = Parameter(rng.normal(size=(3, 4)))
    q = rng.dirichlet(np.ones(4), size=3)
    result = check_gradients(lambda: distill_loss(logits, q, [0, 3, 1], cfg), [logits])
    assert result.max_relative_error < 1e-6

#
# Proxy
#

def test_proxy_emits_raw_logits_of_class_width():
    proxy = ProxyModel(40, (1, 2, 3, 4, 5, 6), DistillConfig(hidden=(16, 8)), np.random.default_rng(0))
    logits = proxy_logits(proxy, build_dataset(per_class=2).features())
    assert logits.shape == (12, 6)
    assert not np.allclose(logits.sum(axis=1), 1.0)


def test_proxy_width_mismatch():
    proxy = ProxyModel(40, (1, 2), DistillConfig(hidden=(8,)), np.random.default_rng(0))
    with pytest.raises(ShapeError):
        proxy_logits(proxy, np.ones((1, 10)))


def test_one_hot_teacher_supervised_training():
    dataset = build_dataset(per_class=8)
    classes = dataset.classes
    teacher = one_hot(dataset.labels - 1, len(classes))
    cfg = DistillConfig(hidden=(16, 8), alpha=0.0, epochs=60, lr=1e-2, batch_size=16, dropout=0.0)
    #
    proxy = train_proxy(types.SimpleNamespace(classes=classes), dataset, cfg, seed=0, teacher_q=teacher)
    #
    assert np.mean(proxy_labels(proxy, dataset.features()) == dataset.labels) >= 0.9
    assert all(not tensor.requires_grad for tensor in proxy.parameters())
    assert len(proxy.history) == 60


def test_train_proxy_rejects_wrong_teacher_shape():
    dataset = build_dataset(per_class=2)
    with pytest.raises(ShapeError):
        train_proxy(
            types.SimpleNamespace(classes=dataset.classes), dataset,
            DistillConfig(hidden=(8,), epochs=1), teacher_q=np.ones((3, 6)) / 6,
        )


def test_proxy_save_load(tmp_path):
    proxy = ProxyModel(40, (1, 2, 3), DistillConfig(hidden=(16, 8)), np.random.default_rng(3))
    X = build_dataset(per_class=2).features()
    save_proxy(tmp_path / "proxy.cevp", proxy)
    loaded = load_proxy(tmp_path / "proxy.cevp")
    assert loaded.classes == (1, 2, 3)
    assert np.array_equal(proxy_logits(loaded, X), proxy_logits(proxy, X))

#
# Teacher cache
#

def test_teacher_cache_is_keyed(tmp_path):
    path = str(tmp_path / "teacher.cevp")
    matrix = np.array([[0.25, 0.75], [1.0, 0.0]])
    assert load_teacher_matrix(path) is None
    #
    save_teacher_matrix(path, matrix, "abc")
    assert np.array_equal(load_teacher_matrix(path, "abc"), matrix)
    assert load_teacher_matrix(path, "other") is None
    assert np.array_equal(cached_teacher_matrix(path, None, np.zeros((2, 3)), "abc"), matrix)
