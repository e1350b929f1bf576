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

""" Conditional VAE: encoder, reparameterization, additive decoder, losses, training, tuning """

import math

import numpy as np  # pylint: disable=E0401
import pytest  # pylint: disable=E0401

from centry_evasion.config import DistillConfig, TuningConfig
from centry_evasion.cvae.losses import (
    loss_reconstruction, loss_kl, loss_sparsity, loss_classification, combine_terms, cvae_losses,
)
from centry_evasion.cvae.model import (
    CvaeModel, encode, reparameterize, decode_additive, score_features, save_cvae, load_cvae,
)
from centry_evasion.cvae.training import evasion_objective, malware_rows, train_cvae
from centry_evasion.cvae.tuning import sample_config, run_trial, best_trial, tune_hyperparameters
from centry_evasion.data.split import stratified_split
from centry_evasion.distill.proxy import ProxyModel
from centry_evasion.ensemble.targets import TargetAssignment
from centry_evasion.errors import ShapeError, UnknownClassError, EmptyMalwareSetError, EvasionError
from centry_evasion.internal import constants
from centry_evasion.nn import ops
from centry_evasion.nn.gradcheck import check_gradients
from centry_evasion.nn.layers import Module
from centry_evasion.nn.tensor import Tensor, Tape, Parameter
from centry_evasion.tools import files

from conftest import build_dataset, tiny_cvae_config


SMALL = tiny_cvae_config(encoder_hidden=(5, 4), decoder_hidden=(5, 5, 5), latent_dim=2, embed_dim=2)


class FixedProxy(Module):
    """ Constant logits regardless of input """

    def __init__(self, logits, classes):
        super().__init__()
        self.classes = tuple(classes)
        self.bias = Parameter(np.asarray(logits, dtype=np.float64).reshape(1, -1))

    def forward(self, x):  # pylint: disable=W0221
        return ops.add_bias(ops.matmul(x, np.zeros((x.cols, self.bias.cols))), self.bias)


@pytest.fixture(scope="module")
def attack_setup():
    """ Split synthetic data, target assignment and frozen random proxy """
    dataset = build_dataset(per_class=10)
    manifest = stratified_split(dataset, seed=1)
    malware_ids = dataset.sample_ids[dataset.labels == constants.MALWARE_CLASS]
    targets = TargetAssignment(
        sample_ids=malware_ids, targets=1 + malware_ids % 5, confidence=np.full(malware_ids.shape, 0.5),
    )
    proxy = ProxyModel(
        dataset.n_features, dataset.classes, DistillConfig(hidden=(16, 8)), np.random.default_rng(0),
    ).freeze()
    return {
        "train": dataset.subset(manifest.train_idx),
        "val_tune": dataset.subset(manifest.val_tune_idx),
        "val_es": dataset.subset(manifest.val_es_idx),
        "targets": targets,
        "proxy": proxy,
    }

#
# Model
#

def test_encode_is_deterministic_and_sized():
    model = CvaeModel(6, SMALL, np.random.default_rng(0)).eval()
    x = Tensor(np.array([[1, 0, 1, 0, 1, 1], [0, 0, 0, 1, 1, 1]], dtype=np.float64))
    mu_a, logvar_a = encode(model, x, [1, 3])
    mu_b, logvar_b = encode(model, x, [1, 3])
    assert mu_a.shape == (2, 2) and logvar_a.shape == (2, 2)
    assert np.array_equal(mu_a.value, mu_b.value)
    assert np.array_equal(logvar_a.value, logvar_b.value)


def test_encode_rejects_unknown_target_and_width():
    model = CvaeModel(6, SMALL, np.random.default_rng(0))
    with pytest.raises(UnknownClassError):
        encode(model, Tensor(np.zeros((1, 6))), [6])
    with pytest.raises(ShapeError):
        encode(model, Tensor(np.zeros((1, 5))), [1])


def test_class_embedding_init_range():
    model = CvaeModel(40, tiny_cvae_config(embed_dim=16), np.random.default_rng(0))
    table = model.class_embedding.value
    assert table.shape == (len(constants.BENIGN_CLASSES), 16)
    assert np.abs(table).max() <= 0.05
    assert np.abs(table).max() > 0.0


def test_reparameterize_cases():
    mu, logvar = Tensor([[0.5, -1.0]]), Tensor([[0.0, 0.0]])
    assert reparameterize(mu, logvar) is mu
    assert np.array_equal(reparameterize(mu, logvar, np.zeros((1, 2))).value, mu.value)
    assert np.allclose(reparameterize(mu, logvar, np.array([[1.0, -1.0]])).value, [[1.5, -2.0]])
    with pytest.raises(ShapeError):
        reparameterize(mu, logvar, np.zeros((2, 2)))


def test_reparameterize_monte_carlo_mean():
    draws = 10_000
    mu = Tensor(np.tile([[0.5, -1.0]], (draws, 1)))
    logvar = Tensor(np.tile([[math.log(4.0), 0.0]], (draws, 1)))
    z = reparameterize(mu, logvar, np.random.default_rng(0)).value
    sigma = np.array([2.0, 1.0])
    assert np.all(np.abs(z.mean(axis=0) - [0.5, -1.0]) < 4 * sigma / math.sqrt(draws))


def forced_scores(model, scores):
    """ Make the decoder output fixed per-feature scores """
    last = model.decoder_layers[-1]
    last.weight.value = np.zeros_like(last.weight.value)
    last.bias.value = np.log(np.asarray(scores) / (1.0 - np.asarray(scores))).reshape(1, -1)


def test_decode_additive_known_scores():
    model = CvaeModel(3, SMALL, np.random.default_rng(0))
    forced_scores(model, [0.2, 0.9, 0.4])
    x = Tensor([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [1.0, 1.0, 1.0]])
    z = Tensor(np.zeros((3, 2)))
    scores, relaxed = decode_additive(model, x, z, [1, 2, 5])
    #
    assert np.allclose(scores.value, [[0.2, 0.9, 0.4]] * 3)
    assert np.allclose(relaxed.value[0], [1.0, 0.9, 0.4])
    assert np.allclose(relaxed.value[1], [0.2, 0.9, 0.4])
    assert np.array_equal(relaxed.value[2], [1.0, 1.0, 1.0])


def test_additive_constraint_fuzz():
    rng = np.random.default_rng(7)
    model = CvaeModel(12, SMALL, rng)
    for _ in range(50):
        x = (rng.random((4, 12)) < 0.4).astype(np.float64)
        targets = rng.integers(1, 6, size=4)
        _, _, scores, relaxed = model(Tensor(x), targets, noise=rng)
        assert np.all(relaxed.value >= x)
        assert np.all(relaxed.value[x == 1] == 1.0)
        assert np.all((scores.value > 0) & (scores.value < 1))


def test_score_features_uses_latent_mean():
    model = CvaeModel(6, SMALL, np.random.default_rng(1))
    X = (np.random.default_rng(2).random((5, 6)) < 0.5).astype(np.float64)
    targets = np.array([1, 2, 3, 4, 5])
    mu, _ = encode(model.eval(), Tensor(X), targets)
    expected, _ = decode_additive(model, Tensor(X), mu, targets)
    assert np.allclose(score_features(model, X, targets, batch_size=2), expected.value)


def test_cvae_save_load(tmp_path):
    model = CvaeModel(6, SMALL, np.random.default_rng(3))
    X = np.eye(6)
    save_cvae(tmp_path / "cvae.cevp", model)
    loaded = load_cvae(tmp_path / "cvae.cevp")
    assert loaded.target_classes == constants.BENIGN_CLASSES
    assert np.array_equal(score_features(loaded, X, [1] * 6), score_features(model, X, [1] * 6))

#
# Loss terms
#

def test_reconstruction_scalar_case():
    loss = loss_reconstruction(Tensor([[1.0, 0.5]]), np.array([[1.0, 0.0]]), np.array([[1.0, 1.0]]))
    assert np.isclose(loss.value.item(), math.log(2.0), atol=1e-4)
    assert not loss.all_present


def test_reconstruction_matching_reference_is_near_zero():
    x = np.array([[1.0, 0.0, 0.0, 0.0]])
    x_ref = np.array([[0.0, 1.0, 0.0, 1.0]])
    relaxed = Tensor([[1.0, 1.0, 0.0, 1.0]])
    assert loss_reconstruction(relaxed, x, x_ref).value.item() < 1e-6


def test_reconstruction_all_present_flag():
    loss = loss_reconstruction(Tensor([[1.0, 1.0]]), np.ones((1, 2)), np.zeros((1, 2)))
    assert loss.all_present
    assert loss.value.item() == 0.0


def test_kl_values():
    assert loss_kl(Tensor([[0.0, 0.0]]), Tensor([[0.0, 0.0]])).item() == 0.0
    assert np.isclose(loss_kl(Tensor([[1.0]]), Tensor([[0.0]])).item(), 0.5)


def test_sparsity_values():
    x = np.array([[0.0, 0.0, 1.0]])
    assert loss_sparsity(Tensor(x), x).item() == 0.0
    assert np.isclose(loss_sparsity(Tensor([[0.3, 0.7, 1.0]]), x).item(), 1.0)


def test_classification_confident_proxy_is_near_zero():
    proxy = FixedProxy([-20.0, 20.0, -20.0], (1, 2, 3))
    value = loss_classification(Tensor([[0.2, 0.7]]), [2], proxy).item()
    assert value < 1e-6


def test_combine_terms_weights():
    cfg = SMALL.model_copy(update={"lambda_r": 2.0, "beta": 0.5, "lambda_s": 0.1, "lambda_c": 3.0})
    total = combine_terms(Tensor([[1.0]]), Tensor([[2.0]]), Tensor([[10.0]]), Tensor([[1.0]]), cfg)
    assert np.isclose(total.item(), 2.0 + 1.0 + 1.0 + 3.0)


def test_smooth_terms_gradients():
    rng = np.random.default_rng(4)
    model = CvaeModel(6, SMALL, rng)
    x = np.array([[1, 0, 0, 1, 0, 0], [0, 1, 0, 0, 1, 1]], dtype=np.float64)
    x_ref = np.array([[1, 1, 0, 0, 1, 0], [0, 1, 1, 0, 0, 1]], dtype=np.float64)
    noise = rng.standard_normal((2, 2))
    targets = [1, 4]
    #
    def fn():
        mu, logvar = encode(model, Tensor(x), targets)
        _, relaxed = decode_additive(model, Tensor(x), reparameterize(mu, logvar, noise), targets)
        return ops.add(
            ops.add(loss_reconstruction(relaxed, x, x_ref).value, loss_kl(mu, logvar)),
            ops.mul(loss_sparsity(relaxed, x), 0.1),
        )
    #
    assert check_gradients(fn, model.parameters()).max_relative_error < 1e-5


def test_total_loss_reaches_decoder(attack_setup):
    model = CvaeModel(40, SMALL, np.random.default_rng(5))
    X, targets, _ = malware_rows(attack_setup["train"], attack_setup["targets"])
    references = attack_setup["train"].features()[:X.shape[0]]
    with Tape() as tape:
        terms = cvae_losses(
            model, attack_setup["proxy"], Tensor(X), targets, references, SMALL, noise=np.random.default_rng(0),
        )
    tape.backward(terms.total)
    assert all(layer.weight.grad is not None for layer in model.decoder_layers)
    assert np.any(model.decoder_layers[0].weight.grad != 0.0)
    assert all(tensor.grad is None for tensor in attack_setup["proxy"].parameters())

#
# Objective and training
#

def test_evasion_objective_perfect_labeler():
    model = CvaeModel(40, SMALL, np.random.default_rng(0))
    dataset = build_dataset(per_class=3)
    malware = dataset.restrict_classes([constants.MALWARE_CLASS])
    targets = np.array([1, 2, 3])
    objective, per_k = evasion_objective(model, malware.features(), targets, lambda X: targets, ks=(5, 500))
    assert np.isclose(objective, 1.0)
    assert per_k[5] == {"uer": 1.0, "tsr": 1.0, "cts": 1.0}


def test_evasion_objective_never_evading():
    model = CvaeModel(40, SMALL, np.random.default_rng(0))
    X = build_dataset(per_class=2).restrict_classes([6]).features()
    objective, per_k = evasion_objective(model, X, np.array([1, 1]), lambda X: np.full(X.shape[0], 6), ks=(5,))
    assert objective == 0.0
    assert per_k[5]["cts"] is None


def test_evasion_objective_needs_malware():
    model = CvaeModel(40, SMALL, np.random.default_rng(0))
    with pytest.raises(EmptyMalwareSetError):
        evasion_objective(model, np.zeros((0, 40)), np.zeros(0), lambda X: X, ks=(5,))


def test_train_cvae_runs_and_records_history(attack_setup):
    model = train_cvae(
        attack_setup["train"], attack_setup["val_es"], attack_setup["targets"], attack_setup["proxy"],
        tiny_cvae_config(), seed=0,
    )
    assert not model.training
    assert 1 <= len(model.history) <= 2
    assert {"total", "reconstruction", "kl", "sparsity", "classification", "objective"} <= set(model.history[0])


def test_train_cvae_leaves_proxy_untouched(attack_setup):
    proxy = attack_setup["proxy"]
    before = {name: value.tobytes() for name, value in proxy.state_dict().items()}
    train_cvae(
        attack_setup["train"], attack_setup["val_es"], attack_setup["targets"], proxy,
        tiny_cvae_config(), seed=1,
    )
    after = {name: value.tobytes() for name, value in proxy.state_dict().items()}
    assert after == before


def test_train_cvae_is_deterministic(attack_setup):
    args = (attack_setup["train"], attack_setup["val_es"], attack_setup["targets"], attack_setup["proxy"])
    X, targets, _ = malware_rows(attack_setup["train"], attack_setup["targets"])
    first = score_features(train_cvae(*args, tiny_cvae_config(), seed=3), X, targets)
    second = score_features(train_cvae(*args, tiny_cvae_config(), seed=3), X, targets)
    assert np.array_equal(first, second)


def test_sparsity_dominated_training_collapses_scores(attack_setup):
    cfg = tiny_cvae_config(lambda_c=0.0, lambda_s=50.0, lr=0.05, epochs=80, patience=80)
    X, targets, _ = malware_rows(attack_setup["train"], attack_setup["targets"])
    initial = CvaeModel(40, cfg, np.random.default_rng(0))
    #
    model = train_cvae(attack_setup["train"], None, attack_setup["targets"], attack_setup["proxy"], cfg, seed=0)
    #
    absent = X == 0
    before = score_features(initial, X, targets)[absent].mean()
    after = score_features(model, X, targets)[absent].mean()
    assert after < before
    assert after < 0.2


def test_train_cvae_without_malware(attack_setup):
    benign = attack_setup["train"].restrict_classes(constants.BENIGN_CLASSES)
    with pytest.raises(EmptyMalwareSetError):
        train_cvae(benign, None, attack_setup["targets"], attack_setup["proxy"], tiny_cvae_config())

#
# Tuning
#

SPACE = TuningConfig(trials=1, latent_dim=(4,), embed_dim=(4,))


def test_sample_config_respects_space():
    cfg = sample_config(tiny_cvae_config(), SPACE, np.random.default_rng(0))
    assert SPACE.lambda_r[0] <= cfg.lambda_r <= SPACE.lambda_r[1]
    assert SPACE.lr[0] <= cfg.lr <= SPACE.lr[1]
    assert cfg.latent_dim == 4 and cfg.embed_dim == 4
    assert cfg.epochs == tiny_cvae_config().epochs


def test_budget_one_returns_sampled_config(tmp_path, attack_setup):
    base = tiny_cvae_config()
    log_path = str(tmp_path / "trials.jsonl")
    best = tune_hyperparameters(
        attack_setup["train"], attack_setup["val_tune"], attack_setup["targets"], attack_setup["proxy"],
        SPACE, base, seed=5, ds_val_es=attack_setup["val_es"], log_path=log_path,
    )
    assert best == sample_config(base, SPACE, np.random.default_rng([5, 0]))
    assert len(files.read_jsonl(log_path)) == 1


def test_trial_is_deterministic(attack_setup):
    args = (
        attack_setup["train"], attack_setup["val_tune"], attack_setup["targets"], attack_setup["proxy"],
        tiny_cvae_config(), SPACE, 2,
    )
    assert run_trial(0, *args)["objective"] == run_trial(0, *args)["objective"]


def test_more_trials_never_worse(attack_setup):
    args = (attack_setup["train"], attack_setup["val_tune"], attack_setup["targets"], attack_setup["proxy"])
    records = [run_trial(trial, *args, tiny_cvae_config(), SPACE, 9) for trial in range(2)]
    assert best_trial(records)["objective"] >= best_trial(records[:1])["objective"]


def test_best_trial_rules():
    records = [
        {"trial": 0, "objective": 0.4}, {"trial": 1, "objective": None}, {"trial": 2, "objective": 0.4},
    ]
    assert best_trial(records)["trial"] == 0
    with pytest.raises(EvasionError):
        best_trial([{"trial": 0, "objective": None}])
