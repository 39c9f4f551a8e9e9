"""Oracle-labeled training data drawn from rollouts of the enumeration controller."""

from __future__ import annotations

from .assembly import assemble
from .controller import Method
from .decision import LabeledSample, labeled_sample
from .sim import BatchRanges, SimParams, batch_scenarios, run_scenario

DEFAULT_SCENARIOS = 2000
DEFAULT_LABEL_EVERY = 5


def gen_dataset(
    n_scenarios: int = DEFAULT_SCENARIOS,
    seed: int = 0,
    ranges: BatchRanges = BatchRanges(),
    params: SimParams = SimParams(),
    label_every: int = DEFAULT_LABEL_EVERY,
) -> list[LabeledSample]:
    """Roll out the sub-QP enumeration controller on random scenes and label every ``label_every``-th step.

    The label of a step is the assignment the enumeration picked there, which
    is exactly the oracle argmin. Steps with no sensed obstacle or with all
    sub-QPs infeasible carry no label and are skipped.
    """
    if label_every < 1:
        raise ValueError("label_every must be at least 1")
    samples: list[LabeledSample] = []
    for cfg in batch_scenarios(n_scenarios, seed, Method.SUB_QPS, params, ranges):
        counter = [0]

        def hook(i, s, goal, seen, neighbors, cparams, u_pre, rep):
            k = counter[0]
            counter[0] += 1
            if k % label_every or not rep.feasible or not rep.assignment:
                return
            asm = assemble(s, goal, seen, neighbors, cparams, u_pre)
            samples.append(labeled_sample(s, goal, asm, rep.assignment, cparams.geom))

        run_scenario(cfg, on_step=hook, record=False)
    return samples
