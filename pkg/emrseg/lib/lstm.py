"""
lstm.py
Reference LSTM cell using the library kernel's parameter layout.

Weights are stacked by gate in the order input, forget, cell candidate,
output: weight_ih is (4H, d_in), weight_hh is (4H, H), both biases are (4H,).
"""

import math
from typing import Tuple

import torch
from torch import nn


def lstm_step(
    x: torch.Tensor,
    h_prev: torch.Tensor,
    c_prev: torch.Tensor,
    weight_ih: torch.Tensor,
    weight_hh: torch.Tensor,
    bias_ih: torch.Tensor,
    bias_hh: torch.Tensor
) -> Tuple[torch.Tensor, torch.Tensor]:
    """
    One LSTM time step.

    i, f, o = sigmoid(affine), g = tanh(affine),
    c = f * c_prev + i * g, h = o * tanh(c)

    Returns:
        (h, c)
    """
    gates = weight_ih @ x + bias_ih + weight_hh @ h_prev + bias_hh
    i, f, g, o = gates.chunk(4, dim=-1)
    i = torch.sigmoid(i)
    f = torch.sigmoid(f)
    g = torch.tanh(g)
    o = torch.sigmoid(o)
    c = f * c_prev + i * g
    h = o * torch.tanh(c)
    return h, c


def lstm_unroll(inputs: torch.Tensor, lstm: nn.LSTM, reverse: bool = False) -> torch.Tensor:
    """
    Run one direction of a single-layer nn.LSTM step by step from zero state.

    Args:
        inputs: (L, d_in) sequence
        lstm: Module whose parameters are read
        reverse: Use the backward-direction parameters and walk right to left

    Returns:
        (L, H) hidden states aligned with the input positions
    """
    suffix = '_l0_reverse' if reverse else '_l0'
    weight_ih = getattr(lstm, 'weight_ih' + suffix)
    weight_hh = getattr(lstm, 'weight_hh' + suffix)
    bias_ih = getattr(lstm, 'bias_ih' + suffix)
    bias_hh = getattr(lstm, 'bias_hh' + suffix)

    hidden = lstm.hidden_size
    h = inputs.new_zeros(hidden)
    c = inputs.new_zeros(hidden)
    order = range(inputs.shape[0] - 1, -1, -1) if reverse else range(inputs.shape[0])
    outputs = [None] * inputs.shape[0]
    for t in order:
        h, c = lstm_step(inputs[t], h, c, weight_ih, weight_hh, bias_ih, bias_hh)
        outputs[t] = h
    return torch.stack(outputs)


def reset_lstm_parameters(lstm: nn.LSTM):
    """
    Uniform +-1/sqrt(fan_in) weights, zero biases and a forget-gate bias of 1.

    Only bias_ih carries the +1 so the summed forget bias is exactly 1.
    """
    hidden = lstm.hidden_size
    with torch.no_grad():
        for name, param in lstm.named_parameters():
            if name.startswith('weight'):
                bound = 1.0 / math.sqrt(param.shape[1])
                param.uniform_(-bound, bound)
            else:
                param.zero_()
                if name.startswith('bias_ih'):
                    param[hidden:2 * hidden] = 1.0
