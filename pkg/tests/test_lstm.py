import numpy as np
import pytest
import torch
from torch import nn

from emrseg.lib.lstm import lstm_step, lstm_unroll, reset_lstm_parameters
from emrseg.services.sequence_tagger import SectionTagger, bilstm_encode


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def numpy_cell(x, h, c, w_ih, w_hh, b_ih, b_hh):
    gates = w_ih @ x + b_ih + w_hh @ h + b_hh
    i, f, g, o = np.split(gates, 4)
    c = sigmoid(f) * c + sigmoid(i) * np.tanh(g)
    return sigmoid(o) * np.tanh(c), c


@pytest.fixture
def tagger():
    torch.manual_seed(0)
    model = SectionTagger(5, 4, num_labels=3).double()
    with torch.no_grad():
        for param in model.lstm.parameters():
            param.normal_(0.0, 0.5)
    return model


class TestLstmStep:

    def test_zero_parameters_give_zero_output(self):
        h, c = lstm_step(
            torch.randn(3, dtype=torch.float64),
            torch.zeros(2, dtype=torch.float64), torch.zeros(2, dtype=torch.float64),
            torch.zeros(8, 3, dtype=torch.float64), torch.zeros(8, 2, dtype=torch.float64),
            torch.zeros(8, dtype=torch.float64), torch.zeros(8, dtype=torch.float64),
        )
        # g = tanh(0) = 0 keeps the cell at zero
        np.testing.assert_array_equal(h.numpy(), np.zeros(2))
        np.testing.assert_array_equal(c.numpy(), np.zeros(2))

    def test_matches_numpy_cell(self):
        rng = np.random.default_rng(1)
        args = [rng.normal(size=shape) for shape in [(3,), (2,), (2,), (8, 3), (8, 2), (8,), (8,)]]
        h, c = lstm_step(*[torch.tensor(a) for a in args])
        expected_h, expected_c = numpy_cell(*args)
        np.testing.assert_allclose(h.numpy(), expected_h, atol=1e-12)
        np.testing.assert_allclose(c.numpy(), expected_c, atol=1e-12)


class TestUnroll:

    @pytest.mark.parametrize('length', [1, 2, 7])
    def test_matches_library_bilstm(self, tagger, length):
        inputs = torch.tensor(np.random.default_rng(length).normal(size=(length, 5)))
        with torch.no_grad():
            context = bilstm_encode(inputs.numpy(), tagger)
            forward = lstm_unroll(inputs, tagger.lstm)
            backward = lstm_unroll(inputs, tagger.lstm, reverse=True)
        assert context.shape == (length, 8)
        np.testing.assert_allclose(context[:, :4].numpy(), forward.numpy(), atol=1e-12)
        np.testing.assert_allclose(context[:, 4:].numpy(), backward.numpy(), atol=1e-12)

    def test_single_sentence_uses_zero_state_both_ways(self, tagger):
        inputs = torch.tensor(np.random.default_rng(2).normal(size=(1, 5)))
        lstm = tagger.lstm
        zero = torch.zeros(4, dtype=torch.float64)
        with torch.no_grad():
            h_forward, _ = lstm_step(inputs[0], zero, zero, lstm.weight_ih_l0, lstm.weight_hh_l0,
                                     lstm.bias_ih_l0, lstm.bias_hh_l0)
            h_backward, _ = lstm_step(inputs[0], zero, zero, lstm.weight_ih_l0_reverse, lstm.weight_hh_l0_reverse,
                                      lstm.bias_ih_l0_reverse, lstm.bias_hh_l0_reverse)
            context = bilstm_encode(inputs.numpy(), tagger)
        np.testing.assert_allclose(context[0].numpy(), torch.cat([h_forward, h_backward]).numpy(), atol=1e-12)

    def test_shared_parameters_mirror_the_directions(self, tagger):
        lstm = tagger.lstm
        with torch.no_grad():
            for name in ('weight_ih', 'weight_hh', 'bias_ih', 'bias_hh'):
                getattr(lstm, f"{name}_l0_reverse").copy_(getattr(lstm, f"{name}_l0"))
            inputs = torch.tensor(np.random.default_rng(3).normal(size=(6, 5)))
            forward = lstm_unroll(inputs, lstm)
            backward_of_reversed = lstm_unroll(torch.flip(inputs, dims=[0]), lstm, reverse=True)
        np.testing.assert_allclose(torch.flip(backward_of_reversed, dims=[0]).numpy(), forward.numpy(), atol=1e-12)


class TestInitialisation:

    def test_reset_values(self):
        lstm = nn.LSTM(6, 3, bidirectional=True)
        reset_lstm_parameters(lstm)
        for name, param in lstm.named_parameters():
            values = param.detach().numpy()
            if name.startswith('weight'):
                assert np.abs(values).max() <= 1.0 / np.sqrt(param.shape[1])
            elif name.startswith('bias_ih'):
                np.testing.assert_array_equal(values[3:6], np.ones(3))
                np.testing.assert_array_equal(np.delete(values, range(3, 6)), np.zeros(9))
            else:
                np.testing.assert_array_equal(values, np.zeros(12))

    def test_tagger_starts_with_flat_transitions(self):
        model = SectionTagger(4, 2)
        assert model.transitions.shape == (27, 27)
        assert float(model.transitions.abs().sum()) == 0.0
        assert float(model.emission.bias.abs().sum()) == 0.0
