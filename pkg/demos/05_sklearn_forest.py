"""Convert a fitted scikit-learn forest to the tree JSON schema and explain it.

scikit-learn is used only here; the library reads the documented JSON schema.
"""

# %%
import tempfile
from pathlib import Path

import numpy as np
from sklearn.ensemble import RandomForestRegressor

from prodshap import explain_ensemble
from prodshap.io import dump_trees, load_trees, tree_from_sklearn
from prodshap.synthetic import regression_data
from prodshap.tree import efficiency_violation

rng = np.random.default_rng(3)
X, y = regression_data(rng, n=500, d=12)
forest = RandomForestRegressor(n_estimators=20, max_depth=10, random_state=0).fit(X, y)

# left_fraction = weighted samples reaching the left child / samples at the node;
# the forest averages its trees, so each tree's leaf values are scaled by 1/T
T = len(forest.estimators_)
trees = []
for est in forest.estimators_:
    t = tree_from_sklearn(est.tree_, 12)
    nodes = [dict(nd, value=nd["value"] / T) if "value" in nd else nd for nd in t.to_nodes()]
    trees.append(type(t).from_nodes(nodes, 12))

# %%
path = Path(tempfile.mkdtemp()) / "forest.json"
dump_trees(trees, path)
trees = load_trees(path)
xs = X[:5]
attr = explain_ensemble(trees, xs)
gaps = [abs(sum(t.predict(x) for t in trees) - forest.predict(x[None])[0]) for x in xs]
print("max |converted - forest| prediction:", max(gaps))
print("phi[0]", np.round(attr.phi[0], 4))
print("efficiency violation:", efficiency_violation(trees, xs, attr.phi))
