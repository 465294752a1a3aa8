"""
Where greedy structure search stops short
=========================================

K2 adds one parent at a time while the score improves. When a child
depends on an interaction of its candidates, no single addition helps and
the search stops before the best parent set.
"""

# two independent fair bits and a noisy exclusive-or of them
import itertools
import numpy as np
from skypesiem.classifiers import k2_score, k2_search
rng = np.random.default_rng(0)
a = rng.integers(0, 2, 400)
b = rng.integers(0, 2, 400)
c = (a ^ b) ^ (rng.random(400) < 0.05)
data = np.column_stack([a, b, c])
card = [2, 2, 2]

# every candidate parent set for the third node and its log score
for k in range(3):
    for pa in itertools.combinations(range(2), k):
        print(pa, round(k2_score(2, pa, data, card), 2))

# neither bit alone explains the child, so greedy keeps no parents at all
print("greedy:", k2_search(data, card, [0, 1, 2], 3)[2])
