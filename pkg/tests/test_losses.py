import math

import numpy as np
import pytest

from coop_forecaster.Model.fusion import AssociationSet
from coop_forecaster.Numerics.tensor import Tensor
from coop_forecaster.Training.losses import (LossTerms, WinnerSelection, combine_terms, loss_cls, loss_dis, loss_reg,
                                             select_winners)


def test_winner_is_the_lowest_mean_displacement_mode():
    targets = np.zeros((1, 2, 2))
    locations = np.zeros((1, 3, 2, 2))
    locations[0, 0] = 2.0
    locations[0, 1] = 0.5
    locations[0, 2] = 0.5
    # Modes 1 and 2 tie; the lower index wins
    assert select_winners(locations, targets).winners.tolist() == [1]


def test_association_loss_is_binary_cross_entropy():
    association = AssociationSet([(0, 1), (0, 2)], Tensor([0.0, 2.0]), np.array([False, True]))
    total, count = loss_dis(association, np.array([1.0, 0.0]))
    assert count == 2
    assert total.item() == pytest.approx(math.log(2.0) + math.log(1.0 + math.exp(2.0)))
    assert loss_dis(AssociationSet([], None, np.zeros(0, dtype=bool)), np.zeros(0)) == (0.0, 0)


def test_regression_loss_is_winner_laplace_nll():
    locations = Tensor(np.array([[[[0.0, 0.0], [1.0, 1.0]], [[5.0, 5.0], [5.0, 5.0]]]]))
    scales = Tensor(np.full((1, 2, 2, 2), 0.5))
    targets = np.array([[[1.0, 0.0], [1.0, 1.0]]])
    total, count = loss_reg(locations, scales, WinnerSelection(np.array([0]), targets))
    assert count == 2
    # Four axis terms of log(2b) = 0 plus |residual| / b = 1 / 0.5 for the one unit residual
    assert total.item() == pytest.approx(2.0)


def test_classification_loss_floors_probabilities():
    probabilities = Tensor(np.array([[0.25, 0.75], [1.0, 0.0]]))
    total, count = loss_cls(probabilities, WinnerSelection(np.array([1, 1]), np.zeros((2, 2, 2))))
    assert count == 2
    assert total.item() == pytest.approx(-math.log(0.75) - math.log(1e-12))


def test_batch_terms_are_count_weighted_means():
    first = LossTerms(Tensor(2.0), 2, Tensor(6.0), 3, Tensor(1.0), 1)
    second = LossTerms(0.0, 0, Tensor(3.0), 3, Tensor(3.0), 1)
    loss, parts = combine_terms([first, second], (1.0, 2.0, 1.0))
    assert parts["dis"] == pytest.approx(1.0)
    assert parts["reg"] == pytest.approx(1.5)
    assert parts["cls"] == pytest.approx(2.0)
    assert parts["total"] == pytest.approx(1.0 + 3.0 + 2.0)
    assert loss.item() == parts["total"]
