#!/usr/bin/env python3
"""Numerically check the inequality behind the retrieval objective.

When a question q is generated from a latent concept that is itself drawn
from a fact subgraph G (a Markov chain G -> concept -> q), the information
G shares with the concept can never be less than what it shares with the
question. Maximizing I(G; q) therefore pushes up a lower bound on the
quantity we actually care about.
"""

import numpy as np

from kgedit import DiscreteJoint, random_markov_joint, verify_dpi

rng = np.random.default_rng(2024)

trials = 2000
worst_gap = float("inf")
violations = 0
for _ in range(trials):
    i_g_concept, i_g_question, holds = verify_dpi(random_markov_joint(rng, 5))
    violations += 0 if holds else 1
    worst_gap = min(worst_gap, i_g_concept - i_g_question)

print(f"random Markov joints checked: {trials}")
print(f"violations of I(G;concept) >= I(G;question): {violations}")
print(f"smallest observed slack: {worst_gap:.3e} bits\n")

# Edge case 1: the question is a verbatim copy of the concept -> equality.
p_g = rng.dirichlet(np.ones(3))
p_concept = rng.dirichlet(np.ones(4), size=3)
copy = DiscreteJoint.from_chain_components(p_g, p_concept, np.eye(4))
i_gc, i_gq, _ = verify_dpi(copy)
print(f"question = copy of concept: I(G;concept)={i_gc:.6f}, I(G;q)={i_gq:.6f}")

# Edge case 2: the question ignores the concept -> I(G;q) collapses to zero.
indep = DiscreteJoint.from_chain_components(
    p_g, p_concept, np.tile(rng.dirichlet(np.ones(5)), (4, 1))
)
i_gc, i_gq, _ = verify_dpi(indep)
print(f"question independent:       I(G;concept)={i_gc:.6f}, I(G;q)={i_gq:.6f}")
