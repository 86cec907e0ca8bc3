"""
Pareto frontier and trade-off weights
=====================================

Every candidate carries two scores: how well it fits the place constraint
(f_s) and how well it fits what the person wants (f_k). Nothing on the
frontier is beaten on both, and the weights pick the order in which the
frontier is served.
"""

import numpy as np

from georank.query import QueryIntent
from georank.ranking import ParetoPoint, TradeoffWeights, heuristic_weights, pareto_frontier, select

rng = np.random.default_rng(5)
scores = rng.random((12, 2)).round(2)
points = [ParetoPoint("c%02d" % i, s, k) for i, (s, k) in enumerate(scores)]

front = pareto_frontier(points)
print("candidates:")
for p in points:
    mark = "*" if p in front else " "
    print("  %s %s  f_s=%.2f  f_k=%.2f" % (mark, p.poi_id, p.f_s, p.f_k))

f_s = {p.poi_id: p.f_s for p in points}
f_k = {p.poi_id: p.f_k for p in points}

# the same frontier, served three ways
for lam in (0.8, 0.5, 0.2):
    w = TradeoffWeights(lam, 1 - lam)
    print("lambda_s=%.1f  top 5: %s" % (lam, select(front, f_s, f_k, w, 5)))

# with all weight on one score the other one stops mattering
print("spatial only frontier:", [p.poi_id for p in pareto_frontier(points, TradeoffWeights(1, 0))])

# weights from the wording of the question
for spatial, semantic in [
    ("I am staying near the station and would rather walk.", "Any food."),
    ("Somewhere in the area.", "Hand-pulled noodles, quiet booths and late opening hours."),
]:
    w = heuristic_weights(QueryIntent(spatial, semantic, "restaurant"))
    print("%-55s lambda_s=%.2f lambda_k=%.2f" % (spatial, w.lambda_s, w.lambda_k))
