"""Two problems built from labeled data: orthogonal regression and graph embedding.

Three Gaussian blobs in 500 dimensions stand in for a real dataset.
"""

import numpy as np

from qmpo import GraphConfig, LabeledDataset, build_gcsed, build_olsr, solve

rng = np.random.default_rng(0)
centers = 3.0 * rng.standard_normal((500, 3))
labels = np.repeat([1, 2, 3], 100)
X = centers[:, labels - 1] + rng.standard_normal((500, 300))
data = LabeledDataset(X, labels, 3)

# regression: with more features than training samples H = A A^T has low rank,
# so the Krylov space becomes invariant after a few blocks
olsr = build_olsr(data, train_fraction=0.3, seed=1)
r = solve(olsr)
print(f"olsr   n={olsr.n} l={olsr.l}  {r.termination} at k={r.steps}  kkt={r.unscaled_kkt:.1e}")

# graph embedding: rows of U give an orthonormal spectral embedding of the samples
gcsed = build_gcsed(data, GraphConfig(t=50.0, gamma=1.0))
r = solve(gcsed)
emb = r.U
print(f"gcsed  n={gcsed.n} l={gcsed.l}  {r.termination} at k={r.steps}  kkt={r.unscaled_kkt:.1e}")
print(f"orthogonality error {np.linalg.norm(emb.T @ emb - np.eye(3)):.1e}")
