"""Tree-cotree decomposition of the free-edge graph.

A breadth-first spanning forest is grown from a root node set (the
tangential-Dirichlet boundary nodes by default, or the lowest node touched
by a free edge).  Edges through which a node is first discovered form the
tree; every other free edge is cotree.  Each tree edge is paired with the
node it discovered, giving the bijection used to index the divergence
constraint rows.  BFS with ascending-edge-id tie breaking makes the split
deterministic; short trees also tend to behave better numerically than
depth-first ones.
"""

from collections import deque
from dataclasses import dataclass

import numpy as np

from .linsolve import factor


class GaugeError(RuntimeError):
    """Free-edge graph not spanned from the requested roots."""


@dataclass(frozen=True)
class TreeCotreeSplit:
    """Partition of the free edges into cotree (R) and tree (T) blocks.

    free_edges   : underlying free edge ids, ascending
    cotree_edges : edge ids in the R block, ascending
    tree_edges   : edge ids in the T block, ascending
    child_node   : per tree edge (aligned with tree_edges), the node it
                   discovered during the BFS
    perm         : positions into free_edges producing [R block, T block]
    roots        : root node set
    """

    free_edges: np.ndarray
    cotree_edges: np.ndarray
    tree_edges: np.ndarray
    child_node: np.ndarray
    perm: np.ndarray
    roots: np.ndarray

    @property
    def n_cotree(self):
        return self.cotree_edges.size

    @property
    def n_tree(self):
        return self.tree_edges.size

    def inverse_perm(self):
        inv = np.empty_like(self.perm)
        inv[self.perm] = np.arange(self.perm.size)
        return inv


def default_roots(mesh, dofs):
    """Vector-Dirichlet patch nodes; the lowest free-edge node otherwise."""
    if dofs.constrained_edges.size:
        return np.unique(mesh.edges[dofs.constrained_edges])
    return np.array([int(mesh.edges[dofs.free_edges].min())])


def build_spanning_forest(mesh, free_edges, roots):
    """BFS spanning forest of the free-edge graph.

    Raises GaugeError when some node incident to a free edge cannot be
    reached from the roots (the message lists the orphans).
    """
    free_edges = np.asarray(free_edges, dtype=np.int64)
    roots = np.unique(np.asarray(roots, dtype=np.int64))
    if roots.size == 0:
        raise GaugeError("root set must not be empty")

    ends = mesh.edges[free_edges]
    touched = np.unique(ends)

    # adjacency sorted by edge id so neighbor visits are deterministic
    adj = {}
    order = np.argsort(free_edges, kind="stable")
    for k in order:
        e = int(free_edges[k])
        a, b = int(ends[k, 0]), int(ends[k, 1])
        adj.setdefault(a, []).append((e, b))
        adj.setdefault(b, []).append((e, a))

    visited = set(int(r) for r in roots)
    tree_pairs = []  # (edge id, discovered node)
    queue = deque(sorted(visited))
    while queue:
        n = queue.popleft()
        for e, other in adj.get(n, ()):
            if other not in visited:
                visited.add(other)
                tree_pairs.append((e, other))
                queue.append(other)

    orphans = sorted(set(int(t) for t in touched) - visited)
    if orphans:
        raise GaugeError(
            f"{len(orphans)} nodes unreachable from the roots: "
            f"{orphans[:20]}{'...' if len(orphans) > 20 else ''}"
        )

    tree_pairs.sort()  # ascending edge id; bijection stays intact
    tree_edges = np.array([e for e, _ in tree_pairs], dtype=np.int64)
    child_node = np.array([n for _, n in tree_pairs], dtype=np.int64)
    cotree_edges = np.setdiff1d(free_edges, tree_edges)

    pos = {int(e): i for i, e in enumerate(free_edges)}
    perm = np.array(
        [pos[int(e)] for e in cotree_edges] + [pos[int(e)] for e in tree_edges],
        dtype=np.int64,
    )
    return TreeCotreeSplit(
        free_edges=free_edges,
        cotree_edges=cotree_edges,
        tree_edges=tree_edges,
        child_node=child_node,
        perm=perm,
        roots=roots,
    )


def permute_system(matrix, rhs, split):
    """Reorder a free-edge system into [R; T] blocks.

    Returns the permuted matrix, the permuted right-hand side (or None) and
    the R-block size.  Applying `split.inverse_perm()` to a permuted
    solution recovers the original ordering exactly.
    """
    n = split.perm.size
    if matrix.shape != (n, n):
        raise ValueError(f"matrix shape {matrix.shape} does not match split size {n}")
    a = matrix[split.perm][:, split.perm].tocsr()
    b = None
    if rhs is not None:
        rhs = np.asarray(rhs)
        if rhs.shape[0] != n:
            raise ValueError("rhs length does not match split size")
        b = rhs[split.perm]
    return a, b, split.n_cotree


def split_blocks(matrix, split):
    """(RR, RT, TR, TT) views of a permuted or unpermuted free-edge matrix."""
    a, _, nr = permute_system(matrix, None, split)
    return (
        a[:nr, :nr].tocsr(),
        a[:nr, nr:].tocsr(),
        a[nr:, :nr].tocsr(),
        a[nr:, nr:].tocsr(),
    )


def dump_split_csv(split, path):
    """Debug CSV of the decomposition: edge id, class, child node."""
    child = {int(e): int(n) for e, n in zip(split.tree_edges, split.child_node)}
    with open(path, "w", encoding="utf-8") as f:
        f.write("edge,class,child_node\n")
        for e in split.free_edges:
            e = int(e)
            if e in child:
                f.write(f"{e},tree,{child[e]}\n")
            else:
                f.write(f"{e},cotree,\n")
    return path


def solve_magnetostatic_treegauge(k_curl_ff, j_f, split, g_top_f=None, tol=1e-8):
    """Magnetostatic solve with the plain tree gauge (tree DOFs zero).

    The source must be discretely divergence free; compatibility is checked
    through the topological gradient when given.  The cotree block is solved
    directly and the full residual of both block rows is verified.
    """
    j_f = np.asarray(j_f, dtype=float)
    jnorm = np.linalg.norm(j_f)
    if g_top_f is not None and jnorm > 0.0:
        compat = np.linalg.norm(g_top_f.T @ j_f)
        if compat > tol * jnorm:
            raise GaugeError(
                f"incompatible source: ||G^T j|| = {compat:.3e} "
                f"exceeds {tol:.0e} * ||j|| = {tol * jnorm:.3e}"
            )
    if jnorm == 0.0:
        return np.zeros_like(j_f)

    a_perm, b_perm, nr = permute_system(k_curl_ff, j_f, split)
    rr = a_perm[:nr, :nr].tocsc()
    x_r = factor(rr).solve(b_perm[:nr])
    x_perm = np.concatenate([x_r, np.zeros(split.n_tree)])
    x = x_perm[split.inverse_perm()]

    res = np.linalg.norm(k_curl_ff @ x - j_f)
    if res > 1e-10 * jnorm:
        raise GaugeError(
            f"tree-gauge residual {res:.3e} above 1e-10 * ||j|| = {1e-10 * jnorm:.3e}"
        )
    return x
