"""Published real/synthetic score triples (silhouette, CH, DB) used for arithmetic checks."""

from anonymixer.metrics import ValidationScores

REAL = {
    "kmeans": (0.642, 23342.92, 0.599),
    "dbscan": (0.552, 11659.34, 5.559),
    "ghmm": (0.629, 24788.87, 0.529),
    "agglomerative": (0.635, 26109.21, 0.501),
}
SYNTHETIC = {
    "kmeans": (0.634, 23714.57, 0.598),
    "dbscan": (0.171, 3742.45, 1.836),
    "ghmm": (0.409, 8865.44, 0.770),
    "agglomerative": (0.507, 12188.80, 0.769),
}


def as_scores(table):
    return {alg: ValidationScores(*vals, 0) for alg, vals in table.items()}
