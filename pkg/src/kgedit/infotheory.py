"""Discrete information-theory utilities (entropy, mutual information) and a
numerical check of the data-processing inequality on three-variable Markov
chains built as G -> Theta -> Q.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import ValidationError

_SUM_TOL = 1e-6
_JOINT_TOL = 1e-9
_DPI_TOL = 1e-9


def _as_prob_vector(dist) -> np.ndarray:
    """Coerce a TokenDist, mapping, or sequence into a validated vector."""
    if hasattr(dist, "probabilities"):  # TokenDist
        values = np.asarray(dist.probabilities(), dtype=float)
    elif isinstance(dist, Mapping):
        values = np.asarray(list(dist.values()), dtype=float)
    else:
        values = np.asarray(list(dist), dtype=float)
    if values.ndim != 1 or values.size == 0:
        raise ValidationError("distribution must be a non-empty 1-D collection")
    if np.any(values < 0.0):
        raise ValidationError("distribution has negative entries")
    total = float(values.sum())
    if abs(total - 1.0) > _SUM_TOL:
        raise ValidationError(f"distribution sums to {total}, expected 1")
    return values


def shannon_entropy(dist) -> float:
    """Entropy in bits, -sum(p*log2(p)), with 0*log(0) taken as 0.

    Accepts a TokenDist (tail mass counts as one outcome), a mapping of
    outcome -> probability, or a plain probability vector.
    """
    values = _as_prob_vector(dist)
    positive = values[values > 0.0]
    return float(-(positive * np.log2(positive)).sum())


def _validate_joint(joint, dims: int) -> np.ndarray:
    table = np.asarray(joint, dtype=float)
    if table.ndim != dims:
        raise ValidationError(f"joint table must be {dims}-D, got {table.ndim}-D")
    if np.any(table < 0.0):
        raise ValidationError("joint table has negative entries")
    total = float(table.sum())
    if abs(total - 1.0) > _SUM_TOL:
        raise ValidationError(f"joint table sums to {total}, expected 1")
    return table


def mutual_information(joint) -> float:
    """I(X;Y) in bits from a 2-D joint table, via H(X) + H(Y) - H(X,Y)."""
    table = _validate_joint(joint, 2)
    hx = shannon_entropy(table.sum(axis=1))
    hy = shannon_entropy(table.sum(axis=0))
    hxy = shannon_entropy(table.reshape(-1))
    return hx + hy - hxy


@dataclass(frozen=True)
class DiscreteJoint:
    """Joint distribution over three finite alphabets (G, Theta, Q).

    ``markov_chain_flag`` asserts the chain structure p(q | theta, g) =
    p(q | theta); it is verified numerically at construction wherever the
    conditioning event has positive mass.
    """

    table: np.ndarray
    markov_chain_flag: bool = False

    def __post_init__(self):
        table = np.asarray(self.table, dtype=float)
        if table.ndim != 3:
            raise ValidationError(f"joint table must be 3-D, got {table.ndim}-D")
        if np.any(table < 0.0):
            raise ValidationError("joint table has negative entries")
        total = float(table.sum())
        if abs(total - 1.0) > _JOINT_TOL:
            raise ValidationError(f"joint table sums to {total}, expected 1")
        object.__setattr__(self, "table", table)
        if self.markov_chain_flag:
            self._check_markov()

    def _check_markov(self):
        # p(q | theta, g) must equal p(q | theta) wherever p(theta, g) > 0
        p_tg = self.table.sum(axis=2)  # (G, Theta)
        p_t = self.table.sum(axis=(0, 2))  # (Theta,)
        p_qt = self.table.sum(axis=0)  # (Theta, Q)
        for g in range(self.table.shape[0]):
            for t in range(self.table.shape[1]):
                if p_tg[g, t] <= 0.0 or p_t[t] <= 0.0:
                    continue
                cond_joint = self.table[g, t, :] / p_tg[g, t]
                cond_chain = p_qt[t, :] / p_t[t]
                if np.max(np.abs(cond_joint - cond_chain)) > 1e-9:
                    raise ValidationError(
                        "markov_chain_flag set but p(q|theta,g) != p(q|theta) "
                        f"at g={g}, theta={t}"
                    )

    @classmethod
    def from_chain_components(
        cls,
        p_g: Iterable[float],
        p_theta_given_g: np.ndarray,
        p_q_given_theta: np.ndarray,
    ) -> "DiscreteJoint":
        """Build p(g)*p(theta|g)*p(q|theta); the chain property holds exactly."""
        pg = np.asarray(list(p_g), dtype=float)
        ptg = np.asarray(p_theta_given_g, dtype=float)
        pqt = np.asarray(p_q_given_theta, dtype=float)
        if ptg.shape[0] != pg.size or pqt.shape[0] != ptg.shape[1]:
            raise ValidationError("component shapes are inconsistent")
        table = pg[:, None, None] * ptg[:, :, None] * pqt[None, :, :]
        return cls(table, markov_chain_flag=True)


def verify_dpi(joint: DiscreteJoint) -> tuple[float, float, bool]:
    """Check I(G;Theta) >= I(G;Q) on a Markov-chain joint.

    Returns both mutual informations and whether the inequality holds to
    the numeric tolerance.
    """
    if not joint.markov_chain_flag:
        raise ValidationError("verify_dpi requires a Markov-chain joint")
    i_g_theta = mutual_information(joint.table.sum(axis=2))
    i_g_q = mutual_information(joint.table.sum(axis=1))
    return i_g_theta, i_g_q, i_g_theta >= i_g_q - _DPI_TOL


def random_markov_joint(
    rng: np.random.Generator, max_alphabet: int = 5
) -> DiscreteJoint:
    """Sample a Markov-chain joint with alphabets of size 2..max_alphabet.

    Each component distribution is drawn flat over its simplex (Dirichlet
    with unit concentration), so the chain property holds by construction.
    """
    if max_alphabet < 2:
        raise ValidationError(f"max_alphabet must be >= 2, got {max_alphabet}")
    n_g, n_t, n_q = (int(rng.integers(2, max_alphabet + 1)) for _ in range(3))
    p_g = rng.dirichlet(np.ones(n_g))
    p_theta_given_g = rng.dirichlet(np.ones(n_t), size=n_g)
    p_q_given_theta = rng.dirichlet(np.ones(n_q), size=n_t)
    return DiscreteJoint.from_chain_components(p_g, p_theta_given_g, p_q_given_theta)
