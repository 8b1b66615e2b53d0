"""Rooted trees over labeled leaves: parsing, relations, and aggregation.

Node numbering convention
-------------------------
Nodes are numbered ``1..n_nodes``: leaves first (``1..p``, in order of first
appearance in the source), then internal nodes from the deepest level up
(left to right within a level), with the root always ``n_nodes``.  This is
the numbering used throughout reports, penalties, and serialized output.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ArgumentError, NewickParseError, TreeValidationError

_RESERVED = set("(),:;")


class TaxTree:
    """Immutable rooted tree with 1-based node ids (root = ``n_nodes``).

    Construct via :func:`parse_newick`; the raw constructor expects already
    renumbered parent/children/label tables.
    """

    def __init__(self, parent, children, labels, n_leaves):
        n = len(labels) - 1
        self.n_nodes = n
        self.n_leaves = n_leaves
        self.parent = np.asarray(parent, dtype=np.int64)  # parent[root] == 0
        self.children = [tuple(c) for c in children]
        self.labels = list(labels)
        self._validate()
        self.depth = self._depths()
        self._subtree = self._subtree_leaves()

    # -- construction checks -------------------------------------------------

    def _validate(self):
        n, p = self.n_nodes, self.n_leaves
        if p < 1 or n < p:
            raise TreeValidationError(f"bad node counts: {p} leaves, {n} nodes")
        roots = [u for u in range(1, n + 1) if self.parent[u] == 0]
        if roots != [n]:
            raise TreeValidationError(f"expected the single root at node {n}, got {roots}")
        for u in range(1, n + 1):
            kids = self.children[u]
            if (len(kids) == 0) != (u <= p):
                raise TreeValidationError(f"node {u}: leaf/internal status inconsistent")
            for v in kids:
                if self.parent[v] != u:
                    raise TreeValidationError(f"node {v}: parent link does not match child list")
        seen = set()
        for u in range(1, p + 1):
            lab = self.labels[u]
            if not lab:
                raise TreeValidationError(f"leaf {u} has no label")
            if lab in seen:
                raise TreeValidationError(f"duplicate leaf label {lab!r}")
            seen.add(lab)
        # Reachability from the root covers all nodes iff the parent links are
        # acyclic, since every non-root node has exactly one parent.
        stack, reached = [n], 0
        while stack:
            u = stack.pop()
            reached += 1
            stack.extend(self.children[u])
        if reached != n:
            raise TreeValidationError("tree is not connected")

    def _depths(self):
        depth = np.zeros(self.n_nodes + 1, dtype=np.int64)
        stack = [self.root]
        while stack:
            u = stack.pop()
            for v in self.children[u]:
                depth[v] = depth[u] + 1
                stack.append(v)
        return depth

    def _subtree_leaves(self):
        """Leaf sets of every subtree, as sorted int arrays (index 0 unused)."""
        out = [None] * (self.n_nodes + 1)
        for u in range(1, self.n_leaves + 1):
            out[u] = np.array([u], dtype=np.int64)
        for u in range(self.n_leaves + 1, self.n_nodes + 1):
            out[u] = np.sort(np.concatenate([out[v] for v in self.children[u]]))
        return out

    # -- basic queries --------------------------------------------------------

    @property
    def root(self):
        return self.n_nodes

    @property
    def n_internal(self):
        return self.n_nodes - self.n_leaves

    def is_leaf(self, u):
        return 1 <= u <= self.n_leaves

    def internal_nodes(self):
        return range(self.n_leaves + 1, self.n_nodes + 1)

    def leaf_labels(self):
        return self.labels[1 : self.n_leaves + 1]

    def node_label(self, u):
        """The stored label, or a synthesized ``n<u>`` for unlabeled nodes."""
        self._check_node(u)
        return self.labels[u] if self.labels[u] else f"n{u}"

    def _check_node(self, u):
        if not (isinstance(u, (int, np.integer)) and 1 <= u <= self.n_nodes):
            raise ArgumentError(f"invalid node index {u!r} (valid range 1..{self.n_nodes})")

    def ancestors(self, u):
        """Strict ancestors of ``u``, nearest first, root last."""
        self._check_node(u)
        out = []
        v = self.parent[u]
        while v != 0:
            out.append(int(v))
            v = self.parent[v]
        return out

    def descendants(self, u):
        """Strict descendants of ``u`` in ascending node order."""
        self._check_node(u)
        out = []
        stack = list(self.children[u])
        while stack:
            v = stack.pop()
            out.append(v)
            stack.extend(self.children[v])
        return sorted(out)

    def leaves_of(self, u):
        """Sorted leaf ids of the subtree rooted at ``u`` (``[u]`` for a leaf)."""
        self._check_node(u)
        return self._subtree[u].copy()

    def relations(self, u):
        """All relation sets of node ``u`` in one dict."""
        self._check_node(u)
        return {
            "parent": int(self.parent[u]) or None,
            "children": list(self.children[u]),
            "ancestors": self.ancestors(u),
            "descendants": self.descendants(u),
            "leaves_of_subtree": self.leaves_of(u).tolist(),
        }

    def is_full(self):
        """True iff every internal node has at least two children."""
        return all(len(self.children[u]) >= 2 for u in self.internal_nodes())

    # -- transforms ------------------------------------------------------------

    def compress_unary(self):
        """Splice out internal nodes with a single child (including the root)."""
        top = self.root
        while len(self.children[top]) == 1:
            top = self.children[top][0]
        return parse_newick(self.to_newick(_skip_unary=True, _root=top))

    def to_newick(self, _skip_unary=False, _root=None):
        def render(u):
            kids = self.children[u]
            if not kids:
                return _escape(self.labels[u])
            if _skip_unary and len(kids) == 1:
                return render(kids[0])
            inner = ",".join(render(v) for v in kids)
            lab = self.labels[u] or ""
            return f"({inner}){_escape(lab) if lab else ''}"
        return render(self.root if _root is None else _root) + ";"

    def __repr__(self):
        return f"TaxTree(p={self.n_leaves}, nodes={self.n_nodes})"


def _escape(label):
    if any(ch in _RESERVED or ch.isspace() for ch in label):
        raise TreeValidationError(f"label {label!r} contains reserved characters")
    return label


# -- Newick parsing -----------------------------------------------------------


def parse_newick(text):
    """Parse a single rooted Newick expression into a :class:`TaxTree`.

    Leaf labels must be unique and nonempty; branch lengths are accepted and
    discarded; internal labels are kept.  Errors report the byte offset of
    the offending character.
    """
    s = text.strip()
    if not s:
        raise NewickParseError("empty input", 0)
    if not s.endswith(";"):
        raise NewickParseError("missing trailing ';'", len(s))
    body = s[:-1]
    pos = 0

    def skip_ws(i):
        while i < len(body) and body[i].isspace():
            i += 1
        return i

    def parse_label(i):
        j = i
        while j < len(body) and body[j] not in _RESERVED and not body[j].isspace():
            j += 1
        return body[i:j], j

    def parse_branch_length(i):
        # ':<number>' -- value ignored.
        j = i + 1
        k = j
        while k < len(body) and (body[k].isdigit() or body[k] in ".+-eE"):
            k += 1
        if k == j:
            raise NewickParseError("expected a branch length after ':'", j)
        try:
            float(body[j:k])
        except ValueError:
            raise NewickParseError(f"bad branch length {body[j:k]!r}", j) from None
        return k

    def parse_clade(i):
        i = skip_ws(i)
        if i < len(body) and body[i] == "(":
            open_at = i
            children = []
            i += 1
            while True:
                child, i = parse_clade(i)
                children.append(child)
                i = skip_ws(i)
                if i >= len(body):
                    raise NewickParseError("unbalanced '('", open_at)
                if body[i] == ",":
                    i += 1
                    continue
                if body[i] == ")":
                    i += 1
                    break
                raise NewickParseError(f"unexpected character {body[i]!r}", i)
            label, i = parse_label(skip_ws(i))
            i = skip_ws(i)
            if i < len(body) and body[i] == ":":
                i = parse_branch_length(i)
            return {"label": label, "children": children}, i
        label, j = parse_label(i)
        if not label:
            ch = body[i] if i < len(body) else "end of input"
            raise NewickParseError(f"expected a leaf label, found {ch!r}", i)
        j = skip_ws(j)
        if j < len(body) and body[j] == ":":
            j = parse_branch_length(j)
        return {"label": label, "children": []}, j

    node, pos = parse_clade(pos)
    pos = skip_ws(pos)
    if pos != len(body):
        raise NewickParseError(f"trailing content {body[pos:]!r}", pos)
    return _number_nodes(node)


def _number_nodes(root):
    """Assign ids: leaves 1..p by appearance, then internals deepest-first."""
    leaves, internals = [], []

    def walk(nd, depth):
        nd["depth"] = depth
        if nd["children"]:
            nd["order"] = len(internals)
            internals.append(nd)
            for c in nd["children"]:
                walk(c, depth + 1)
        else:
            leaves.append(nd)

    walk(root, 0)
    p = len(leaves)
    seen = set()
    for i, nd in enumerate(leaves):
        if nd["label"] in seen:
            raise TreeValidationError(f"duplicate leaf label {nd['label']!r}")
        seen.add(nd["label"])
        nd["id"] = i + 1
    internals.sort(key=lambda nd: (-nd["depth"], nd["order"]))
    for i, nd in enumerate(internals):
        nd["id"] = p + 1 + i

    n = p + len(internals)
    parent = [0] * (n + 1)
    children = [[] for _ in range(n + 1)]
    labels = [None] * (n + 1)

    def fill(nd):
        labels[nd["id"]] = nd["label"] or None
        for c in nd["children"]:
            parent[c["id"]] = nd["id"]
            children[nd["id"]].append(c["id"])
            fill(c)

    fill(root)
    return TaxTree(parent, children, labels, p)


# -- indicator matrix ----------------------------------------------------------


def indicator_matrix(tree):
    """The p x (n_nodes-1) binary ancestry matrix, root column excluded.

    Entry (j, k) is 1 iff node ``k`` lies on the root path of leaf ``j``
    (including ``j`` itself).  Multiplying by per-node values sums each
    leaf's path, so leaf coefficients are path sums of node coefficients.
    """
    p, n = tree.n_leaves, tree.n_nodes
    a = np.zeros((p, n - 1))
    for j in range(1, p + 1):
        a[j - 1, j - 1] = 1.0
        for u in tree.ancestors(j):
            if u != tree.root:
                a[j - 1, u - 1] = 1.0
    return a


# -- aggregating sets -----------------------------------------------------------


@dataclass(frozen=True)
class AggregatingSet:
    """A set of nodes whose subtree-leaf sets partition the leaves."""

    nodes: tuple
    blocks: dict  # node id -> sorted np.ndarray of leaf ids

    def __len__(self):
        return len(self.nodes)

    def validate(self, p):
        cover = np.concatenate([self.blocks[u] for u in self.nodes])
        if len(cover) != p or not np.array_equal(np.sort(cover), np.arange(1, p + 1)):
            raise TreeValidationError("blocks do not partition the leaves")


def make_aggregating_set(tree, nodes):
    """Build (and check) an AggregatingSet from the given node ids."""
    blocks = {int(u): tree.leaves_of(u) for u in nodes}
    agg = AggregatingSet(tuple(sorted(int(u) for u in nodes)), blocks)
    agg.validate(tree.n_leaves)
    return agg


def coarsest_aggregating_set(tree, beta, tol=1e-8):
    """The coarsest node set whose subtree leaves have equal coefficients.

    A node qualifies when the spread (max - min) of the coefficients over its
    subtree leaves is at most ``tol``; the result keeps the maximal such
    nodes.  The spread criterion makes the ``tol > 0`` result independent of
    merge order, unlike pairwise chaining.
    """
    beta = np.asarray(beta, dtype=float)
    if beta.shape != (tree.n_leaves,):
        raise ArgumentError(f"beta has length {beta.shape}, expected ({tree.n_leaves},)")
    if not np.all(np.isfinite(beta)):
        raise ArgumentError("beta must be finite")
    if tol < 0:
        raise ArgumentError("tol must be nonnegative")
    n, p = tree.n_nodes, tree.n_leaves
    lo = np.empty(n + 1)
    hi = np.empty(n + 1)
    lo[1 : p + 1] = hi[1 : p + 1] = beta
    for u in range(p + 1, n + 1):
        kids = tree.children[u]
        lo[u] = min(lo[v] for v in kids)
        hi[u] = max(hi[v] for v in kids)
    uniform = (hi - lo) <= tol
    nodes = [
        u
        for u in range(1, n + 1)
        if uniform[u] and (u == tree.root or not uniform[tree.parent[u]])
    ]
    return make_aggregating_set(tree, nodes)


def aggregate_columns(x, agg, tree=None):
    """Sum composition columns over each block of an aggregating set.

    ``x`` may be a CompositionMatrix or a bare array whose columns are the
    leaves 1..p in order.  Returns the same type; block columns are ordered
    by node id and labeled by the tree's node labels when a tree is given.
    """
    from .composition import CompositionMatrix

    values = x.values if isinstance(x, CompositionMatrix) else np.asarray(x, dtype=float)
    cols = []
    names = []
    for u in agg.nodes:
        cols.append(values[:, agg.blocks[u] - 1].sum(axis=1))
        names.append(tree.node_label(u) if tree is not None else f"n{u}")
    out = np.column_stack(cols)
    if isinstance(x, CompositionMatrix):
        return CompositionMatrix(out, row_labels=x.row_labels, col_labels=names)
    return out
