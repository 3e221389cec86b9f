"""Independent checks of CLJP runs, shared by unit and acceptance tests."""
import numpy as np

from amgtune.amg import C_POINT, StrengthGraph


def random_strength_graph(rng, n, p_edge):
    """Directed graph without self loops, each ordered pair kept with ``p_edge``."""
    mask = rng.random((n, n)) < p_edge
    np.fill_diagonal(mask, False)
    rows, cols = np.nonzero(mask)
    return StrengthGraph.from_edges(n, rows, cols)


def independent_set_violations(G, split):
    """Rounds whose selected set has an edge inside the graph as it stood
    when the round started. The guard round (if any) is excluded."""
    rows = G.edge_rows()
    cols = G.s_idx
    bad = []
    for r in range(split.n_rounds):
        alive_v = split.label_round >= r
        alive_e = ((split.edge_round == -1) | (split.edge_round >= r)) & alive_v[rows] & alive_v[cols]
        in_d = (split.label_round == r) & (split.label == C_POINT)
        if np.any(alive_e & in_d[rows] & in_d[cols]):
            bad.append(r)
    return bad


def splitting_is_valid(G, split):
    labelled = np.isin(split.label, (0, 1)).all() and np.all(split.label_round >= 0)
    return bool(labelled) and not independent_set_violations(G, split)
