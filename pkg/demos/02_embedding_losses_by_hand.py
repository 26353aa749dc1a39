"""The four embedding losses on hand-checkable geometry.

Places a few 2-D embeddings at known coordinates, evaluates every loss
against values you can verify with pencil and paper, and finishes with a
finite-difference check of the analytic gradients.
"""

import math

import numpy as np

from preflab.core import PreferenceLabel, PreferenceTriple, Segment
from preflab.embedding import (
    DistanceMetric,
    EmbeddingModel,
    loss_amb,
    loss_norm,
    loss_quad,
)
from preflab.gradcheck import run_all


def seg(sid):
    return Segment(sid, np.zeros((1, 1)), np.zeros((1, 1)), 0.0, 0)


def model_with(rows):
    rows = np.asarray(rows, dtype=float)
    model = EmbeddingModel.new_table([f"s{i}" for i in range(len(rows))], dim=2, seed=0)
    model.table = rows
    return model


def main():
    print("== ambiguity loss: push labeled-apart pairs apart, pull skipped pairs together ==")
    model = model_with([[0, 0], [3, 4], [0, 0], [2, 0]])
    clear = PreferenceTriple(seg("s0"), seg("s1"), PreferenceLabel.PREFER_SECOND)
    skipped = PreferenceTriple(seg("s2"), seg("s3"), PreferenceLabel.NO_COMP)
    v, _ = loss_amb(model, [clear])
    print(f"  one clear pair at distance 5          -> {v:+.4f}   (expected -5)")
    v, _ = loss_amb(model, [clear, skipped])
    print(f"  plus one skipped pair at distance 2   -> {v:+.4f}   (expected -3)")

    print("\n== quadrilateral loss: winners cluster with winners, losers with losers ==")
    model = model_with([[0, 1], [1, 1], [0, 0], [1, 0]])
    t0 = PreferenceTriple(seg("s0"), seg("s2"), PreferenceLabel.PREFER_FIRST)
    t1 = PreferenceTriple(seg("s1"), seg("s3"), PreferenceLabel.PREFER_FIRST)
    v, _ = loss_quad(model, [(t0, t1)])
    print(f"  unit square                            -> {v:+.5f}  (expected {-(2 * math.sqrt(2) - 2):+.5f})")

    _, grad = loss_quad(model, [(t0, t1)], DistanceMetric.SQUARED_L2)
    print(f"  squared-metric gradient at the winner  -> {grad.reshape(4, 2)[0]}   (expected [0, -2])")

    print("\n== norm loss: flat inside the unit ball, linear outside ==")
    model = model_with([[0.5, 0], [2, 0]])
    v, _ = loss_norm(model, [seg("s0"), seg("s1")])
    print(f"  norms (0.5, 2.0)                       -> {v:+.4f}   (expected 1.5)")

    print("\n== every analytic gradient vs central finite differences ==")
    for result in run_all(n_fixtures=3, seed=0):
        print(f"  {result.name:<16} max rel err {result.max_rel_error:.2e}  "
              f"{'ok' if result.passed else 'MISMATCH'}")


if __name__ == "__main__":
    main()
