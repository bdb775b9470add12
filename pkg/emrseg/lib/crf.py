"""
crf.py
Linear-chain CRF scoring, log-partition, Viterbi decoding and marginals.

The transition table has shape (Y + 2, Y + 2): rows/columns 0..Y-1 are the
labels, index Y is the virtual START state and Y + 1 the virtual STOP state.
Transitions into START and out of STOP are fixed at -inf.

Emissions are (L, Y) for one note or (B, L, Y) for a padded batch with a
(B, L) boolean validity mask whose first column is all true.
"""

import logging
from typing import List, Optional, Tuple

import numpy as np
import torch

from emrseg.errors import ValidationError

logger = logging.getLogger(__name__)


def start_index(num_labels: int) -> int:
    return num_labels


def stop_index(num_labels: int) -> int:
    return num_labels + 1


def forbidden_transitions(num_labels: int) -> torch.Tensor:
    """Boolean (Y + 2, Y + 2) mask of entries that are never used."""
    size = num_labels + 2
    mask = torch.zeros(size, size, dtype=torch.bool)
    mask[:, start_index(num_labels)] = True
    mask[stop_index(num_labels), :] = True
    return mask


def constrain_transitions(transitions: torch.Tensor) -> torch.Tensor:
    """Return a copy of the table with START-in and STOP-out set to -inf."""
    num_labels = transitions.shape[0] - 2
    return transitions.masked_fill(forbidden_transitions(num_labels), float('-inf'))


def _as_batch(emissions: torch.Tensor, mask: Optional[torch.Tensor]):
    if emissions.dim() == 2:
        emissions = emissions.unsqueeze(0)
        if mask is not None:
            mask = mask.unsqueeze(0)
    if emissions.dim() != 3:
        raise ValidationError(f"Emissions must be (L, Y) or (B, L, Y), got shape {tuple(emissions.shape)}")
    if emissions.shape[1] == 0:
        raise ValidationError("Cannot score an empty sentence sequence (L = 0)")
    if mask is None:
        mask = torch.ones(emissions.shape[:2], dtype=torch.bool)
    return emissions, mask.bool()


def crf_log_partition(
    emissions: torch.Tensor,
    transitions: torch.Tensor,
    mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """
    Log of the summed exponentiated score over every label path.

    Forward recursion in log space; padded positions carry the previous
    forward vector through unchanged.

    Args:
        emissions: (L, Y) or (B, L, Y) scores
        transitions: (Y + 2, Y + 2) table
        mask: Optional (B, L) validity mask

    Returns:
        Scalar for a single note, (B,) tensor for a batch
    """
    single = emissions.dim() == 2
    emissions, mask = _as_batch(emissions, mask)
    num_labels = emissions.shape[2]
    start, stop = start_index(num_labels), stop_index(num_labels)
    label_trans = transitions[:num_labels, :num_labels]

    alpha = transitions[start, :num_labels].unsqueeze(0) + emissions[:, 0]
    for t in range(1, emissions.shape[1]):
        step = torch.logsumexp(alpha.unsqueeze(2) + label_trans.unsqueeze(0), dim=1) + emissions[:, t]
        alpha = torch.where(mask[:, t].unsqueeze(1), step, alpha)

    log_z = torch.logsumexp(alpha + transitions[:num_labels, stop].unsqueeze(0), dim=1)
    return log_z[0] if single else log_z


def crf_path_score(
    emissions: torch.Tensor,
    transitions: torch.Tensor,
    labels: torch.Tensor,
    mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Score of given label paths: START, emissions, transitions and STOP terms."""
    single = emissions.dim() == 2
    emissions, mask = _as_batch(emissions, mask)
    if labels.dim() == 1:
        labels = labels.unsqueeze(0)
    num_labels = emissions.shape[2]
    if labels.shape != emissions.shape[:2]:
        raise ValidationError(f"Label shape {tuple(labels.shape)} does not match emissions {tuple(emissions.shape[:2])}")

    valid = mask.to(emissions.dtype)
    labels = labels.long()
    if bool(((labels < 0) | (labels >= num_labels))[mask].any()):
        raise ValidationError(f"Gold label out of range [0, {num_labels})")
    # padded positions may hold anything; point them at label 0
    labels = labels.masked_fill(~mask, 0)

    emit = emissions.gather(2, labels.unsqueeze(2)).squeeze(2)
    score = (emit * valid).sum(dim=1)
    score = score + transitions[start_index(num_labels), labels[:, 0]]
    if labels.shape[1] > 1:
        trans = transitions[labels[:, :-1], labels[:, 1:]]
        score = score + (trans * valid[:, 1:]).sum(dim=1)

    lengths = mask.long().sum(dim=1)
    last = labels.gather(1, (lengths - 1).unsqueeze(1)).squeeze(1)
    score = score + transitions[last, stop_index(num_labels)]
    return score[0] if single else score


def crf_nll(
    emissions: torch.Tensor,
    transitions: torch.Tensor,
    labels: torch.Tensor,
    mask: Optional[torch.Tensor] = None
) -> torch.Tensor:
    """Negative log-likelihood of the gold path: logZ - score(gold) >= 0."""
    return crf_log_partition(emissions, transitions, mask) - crf_path_score(emissions, transitions, labels, mask)


def viterbi_decode(emissions, transitions) -> Tuple[List[int], float]:
    """
    Highest-scoring label path for one note.

    Ties go to the lower label id at every backpointer and at the final
    state, so decoding is deterministic.

    Args:
        emissions: (L, Y) array or tensor
        transitions: (Y + 2, Y + 2) array or tensor

    Returns:
        (label path, path score)
    """
    emissions = _to_numpy(emissions)
    transitions = _to_numpy(transitions)
    length, num_labels = emissions.shape
    if length == 0:
        raise ValidationError("Cannot decode an empty sentence sequence (L = 0)")
    start, stop = start_index(num_labels), stop_index(num_labels)
    label_trans = transitions[:num_labels, :num_labels]

    score = transitions[start, :num_labels] + emissions[0]
    backpointers = np.zeros((length, num_labels), dtype=np.int64)
    for t in range(1, length):
        candidates = score[:, None] + label_trans
        backpointers[t] = np.argmax(candidates, axis=0)
        score = candidates[backpointers[t], np.arange(num_labels)] + emissions[t]

    final = score + transitions[:num_labels, stop]
    best = int(np.argmax(final))
    best_score = float(final[best])

    path = [best]
    for t in range(length - 1, 0, -1):
        path.append(int(backpointers[t, path[-1]]))
    path.reverse()
    return path, best_score


def crf_marginals(emissions: torch.Tensor, transitions: torch.Tensor) -> torch.Tensor:
    """
    Per-position label posteriors for one note via forward-backward.

    Returns:
        (L, Y) tensor whose rows sum to 1
    """
    emissions, _ = _as_batch(emissions, None)
    emissions = emissions[0]
    length, num_labels = emissions.shape
    start, stop = start_index(num_labels), stop_index(num_labels)
    label_trans = transitions[:num_labels, :num_labels]

    alphas = [transitions[start, :num_labels] + emissions[0]]
    for t in range(1, length):
        alphas.append(torch.logsumexp(alphas[-1].unsqueeze(1) + label_trans, dim=0) + emissions[t])

    betas = [transitions[:num_labels, stop]]
    for t in range(length - 2, -1, -1):
        betas.append(torch.logsumexp(label_trans + (emissions[t + 1] + betas[-1]).unsqueeze(0), dim=1))
    betas.reverse()

    alpha = torch.stack(alphas)
    beta = torch.stack(betas)
    log_z = torch.logsumexp(alpha[-1] + transitions[:num_labels, stop], dim=0)
    return torch.exp(alpha + beta - log_z)


def _to_numpy(values) -> np.ndarray:
    if isinstance(values, torch.Tensor):
        return values.detach().cpu().double().numpy()
    return np.asarray(values, dtype=np.float64)
