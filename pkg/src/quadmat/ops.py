"""Matrix operations as recursive task types.

Each task body handles one quadtree level: leaf inputs call leaf kernels,
branch inputs spawn one task per child quadrant and forward to an assemble
task.  Nil inputs are handled by per-operation fallback bodies which the
engine dispatches in place of the regular execute body, implementing the
short-circuit algebra (nil is an exact zero operand).

Symmetric matrices store the upper triangle: the SW quadrant of any node on
the diagonal path is nil and implied by transpose of NE, while diagonal
leaves hold full blocks.  Transposition never materializes: tasks carry
``ta``/``tb`` flags and remap child quadrants.
"""

from __future__ import annotations

import math
import pickle
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular
from scipy.linalg.lapack import dpotrf

from . import codec
from .chunkstore import NIL, ChunkId
from .engine import Engine, TaskRegistry, TaskSpec
from .errors import (
    ConfigurationError,
    ContractViolationError,
    DimensionMismatchError,
    NotPositiveDefiniteError,
)
from .leaves import leaf_class, leaf_from_dense, leaf_from_triplets
from .quadtree import Matrix, MatrixParams, OwnerPolicy, build_from_triplets

_SQRT2 = math.sqrt(2.0)


# ---------------------------------------------------------------------------
# Variant / truncation descriptors
# ---------------------------------------------------------------------------

_VARIANTS = ("regular", "symmetric", "symmetric_square", "rank_k", "approximate")


@dataclass(frozen=True)
class MultiplyVariant:
    tag: str = "regular"
    tau: float = 0.0

    def __post_init__(self):
        if self.tag not in _VARIANTS:
            raise ConfigurationError(f"unknown multiply variant {self.tag!r}")
        if self.tau < 0:
            raise ConfigurationError("approximate multiply needs tau >= 0")

    @classmethod
    def regular(cls):
        return cls("regular")

    @classmethod
    def symmetric(cls):
        return cls("symmetric")

    @classmethod
    def symmetric_square(cls):
        return cls("symmetric_square")

    @classmethod
    def rank_k(cls):
        return cls("rank_k")

    @classmethod
    def approximate(cls, tau: float):
        return cls("approximate", tau)


@dataclass(frozen=True)
class TruncationSpec:
    tau: float
    mode: str = "global_frobenius"

    def __post_init__(self):
        if self.tau < 0:
            raise ConfigurationError("truncation needs tau >= 0")
        if self.mode != "global_frobenius":
            raise ConfigurationError(f"unknown truncation mode {self.mode!r}")


# ---------------------------------------------------------------------------
# Shared helpers
# ---------------------------------------------------------------------------


def _decode(ctx, cid):
    return codec.decode_node(ctx.fetch(cid))


def _virtual_child(children, norms, r, c, trans, sym):
    """Child id for quadrant (r, c) of op(M), with its effective flags.

    ``trans`` asks for quadrant (c, r) of the stored tree, transposed.  When
    the node is symmetric upper-stored, the SW quadrant is materialized from
    NE with the transpose flag flipped; diagonal children stay symmetric,
    for which the transpose flag is moot and canonicalized to False.
    """
    if trans:
        r, c = c, r
    if sym and r > c:
        idx = 2 * c + r
        return children[idx], norms[idx], not trans, False
    idx = 2 * r + c
    if sym and r == c:
        return children[idx], norms[idx], False, True
    return children[idx], norms[idx], trans, False


def _put_leaf(ctx, level, leaf):
    if leaf.is_zero():
        return NIL
    return ctx.put(codec.encode_leaf_node(level, leaf), leaf.norm_frobenius())


def _assemble(ctx, level, quadrants):
    return ctx.spawn("assemble", quadrants, {"level": level})


# ---------------------------------------------------------------------------
# assemble
# ---------------------------------------------------------------------------


def _assemble_body(ctx, inputs, args):
    if all(c.is_nil for c in inputs):
        return NIL
    norms = [ctx.norm_of(c) for c in inputs]
    payload = codec.encode_branch(args["level"], list(inputs), norms)
    return ctx.put(payload, math.sqrt(math.fsum(x * x for x in norms)))


# ---------------------------------------------------------------------------
# add / scale
# ---------------------------------------------------------------------------


def _add_body(ctx, inputs, args):
    a, b = inputs
    na, nb = _decode(ctx, a), _decode(ctx, b)
    alpha, beta, level = args["alpha"], args["beta"], args["level"]
    if na[0] != nb[0]:
        raise ContractViolationError("add operands disagree on tree depth")
    if na[0] == "leaf":
        return _put_leaf(ctx, level, na[2].add(nb[2], alpha, beta))
    quadrants = [
        ctx.spawn("add", [ca, cb], {"level": level + 1, "alpha": alpha, "beta": beta})
        for ca, cb in zip(na[2], nb[2])
    ]
    return _assemble(ctx, level, quadrants)


def _add_fallback(ctx, inputs, args):
    a, b = inputs
    if a.is_nil and b.is_nil:
        return NIL
    survivor, coeff = (b, args["beta"]) if a.is_nil else (a, args["alpha"])
    if coeff == 1.0:
        return survivor
    return ctx.spawn("scale", [survivor], {"level": args["level"], "alpha": coeff})


def _scale_body(ctx, inputs, args):
    (a,) = inputs
    alpha, level = args["alpha"], args["level"]
    if alpha == 1.0:
        return a
    if alpha == 0.0:
        return NIL
    node = _decode(ctx, a)
    if node[0] == "leaf":
        return _put_leaf(ctx, level, node[2].scale(alpha))
    quadrants = [
        ctx.spawn("scale", [c], {"level": level + 1, "alpha": alpha}) for c in node[2]
    ]
    return _assemble(ctx, level, quadrants)


def _scale_fallback(ctx, inputs, args):
    return NIL


# ---------------------------------------------------------------------------
# multiply (all variants through one task type)
# ---------------------------------------------------------------------------


def _multiply_body(ctx, inputs, args):
    a, b = inputs
    tau = args["tau"]
    if tau > 0.0:
        bound = ctx.norm_of(a) * ctx.norm_of(b)
        if bound < tau:
            ctx.log_prune(bound)
            return NIL
    na, nb = _decode(ctx, a), _decode(ctx, b)
    level, ta, tb = args["level"], args["ta"], args["tb"]
    if na[0] != nb[0]:
        raise ContractViolationError("multiply operands disagree on tree depth")
    if na[0] == "leaf":
        return _put_leaf(ctx, level, na[2].multiply(nb[2], ta, tb))
    a_sym, b_sym, upper = args["a_sym"], args["b_sym"], args["upper"]
    quadrants = []
    for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)):
        if upper and i > j:
            quadrants.append(NIL)
            continue
        terms = []
        for k in (0, 1):
            ca, _, cta, csa = _virtual_child(na[2], na[3], i, k, ta, a_sym)
            cb, _, ctb, csb = _virtual_child(nb[2], nb[3], k, j, tb, b_sym)
            terms.append(
                ctx.spawn(
                    "multiply",
                    [ca, cb],
                    {
                        "level": level + 1,
                        "ta": cta,
                        "tb": ctb,
                        "a_sym": csa,
                        "b_sym": csb,
                        "upper": upper and i == j,
                        "tau": tau / 8.0,
                    },
                )
            )
        quadrants.append(
            ctx.spawn(
                "add", terms, {"level": level + 1, "alpha": 1.0, "beta": 1.0}
            )
        )
    return _assemble(ctx, level, quadrants)


def _multiply_fallback(ctx, inputs, args):
    return NIL


# ---------------------------------------------------------------------------
# add_scaled_identity
# ---------------------------------------------------------------------------


def _identity_leaf(args, c):
    k = min(args["leaf_dim"], args["n_logical"] - args["offset"])
    diag = np.arange(k)
    return leaf_from_triplets(
        leaf_class(args["leaf_kind"]), args["leaf_dim"], diag, diag,
        np.full(k, float(c)), args["block_size"],
    )


def _asi_child_args(args, quadrant):
    half = args["dim"] // 2
    child = dict(args)
    child["level"] += 1
    child["dim"] = half
    if quadrant == 3:
        child["offset"] += half
    return child


def _asi_body(ctx, inputs, args):
    (a,) = inputs
    c = args["c"]
    if c == 0.0 or args["offset"] >= args["n_logical"]:
        return a
    node = _decode(ctx, a)
    if node[0] == "leaf":
        leaf = node[2]
        if args["offset"] + args["leaf_dim"] <= args["n_logical"]:
            out = leaf.add_scaled_identity(c)
        else:
            out = leaf.add(_identity_leaf(args, c), 1.0, 1.0)
        return _put_leaf(ctx, args["level"], out)
    children = list(node[2])
    quadrants = [
        ctx.spawn("add_scaled_identity", [children[0]], _asi_child_args(args, 0)),
        children[1],
        children[2],
        ctx.spawn("add_scaled_identity", [children[3]], _asi_child_args(args, 3)),
    ]
    return _assemble(ctx, args["level"], quadrants)


def _asi_fallback(ctx, inputs, args):
    c = args["c"]
    if c == 0.0 or args["offset"] >= args["n_logical"]:
        return NIL
    if args["dim"] == args["leaf_dim"]:
        return _put_leaf(ctx, args["level"], _identity_leaf(args, c))
    quadrants = [
        ctx.spawn("add_scaled_identity", [NIL], _asi_child_args(args, 0)),
        NIL,
        NIL,
        ctx.spawn("add_scaled_identity", [NIL], _asi_child_args(args, 3)),
    ]
    return _assemble(ctx, args["level"], quadrants)


# ---------------------------------------------------------------------------
# inverse Cholesky
# ---------------------------------------------------------------------------


def _invchol_leaf(ctx, leaf, args):
    k = min(args["leaf_dim"], args["n_logical"] - args["offset"])
    dense = leaf.to_dense()
    factor, info = dpotrf(dense[:k, :k], lower=1)
    if info > 0:
        bad = args["offset"] + info - 1
        raise NotPositiveDefiniteError(
            bad, f"Cholesky breakdown at diagonal index {bad}: matrix is not positive definite"
        )
    if info < 0:
        raise ContractViolationError(f"dpotrf rejected argument {-info}")
    inv = solve_triangular(np.tril(factor), np.eye(k), lower=True)
    z = np.zeros_like(dense)
    z[:k, :k] = inv.T
    out = leaf_from_dense(leaf_class(args["leaf_kind"]), z, args["block_size"])
    return _put_leaf(ctx, args["level"], out)


def _invchol_child_args(args, se: bool):
    half = args["dim"] // 2
    child = dict(args)
    child["level"] += 1
    child["dim"] = half
    if se:
        child["offset"] += half
    return child


def _mul_args(level, ta=False, tb=False, a_sym=False, b_sym=False, upper=False):
    return {
        "level": level, "ta": ta, "tb": tb,
        "a_sym": a_sym, "b_sym": b_sym, "upper": upper, "tau": 0.0,
    }


def _invchol_body(ctx, inputs, args):
    (a,) = inputs
    node = _decode(ctx, a)
    level = args["level"]
    if node[0] == "leaf":
        return _invchol_leaf(ctx, node[2], args)
    a00, a01, a10, a11 = node[2]
    if not a10.is_nil:
        raise ContractViolationError(
            "inverse_cholesky input must be symmetric upper-stored (SW quadrant nil)"
        )
    z00 = ctx.spawn("inverse_cholesky", [a00], _invchol_child_args(args, se=False))
    # Y = Z00' * A01, Schur complement S = A11 - Y'Y, coupling Z01 = -Z00*Y*Z11.
    y = ctx.spawn("multiply", [z00, a01], _mul_args(level + 1, ta=True))
    yty = ctx.spawn("multiply", [y, y], _mul_args(level + 1, ta=True, upper=True))
    s = ctx.spawn("add", [a11, yty], {"level": level + 1, "alpha": 1.0, "beta": -1.0})
    z11 = ctx.spawn("inverse_cholesky", [s], _invchol_child_args(args, se=True))
    z0y = ctx.spawn("multiply", [z00, y], _mul_args(level + 1))
    z01p = ctx.spawn("multiply", [z0y, z11], _mul_args(level + 1))
    z01 = ctx.spawn("scale", [z01p], {"level": level + 1, "alpha": -1.0})
    return _assemble(ctx, level, [z00, z01, NIL, z11])


def _invchol_fallback(ctx, inputs, args):
    if args["offset"] >= args["n_logical"]:
        return NIL
    raise NotPositiveDefiniteError(
        args["offset"],
        f"Cholesky breakdown at diagonal index {args['offset']}: "
        "diagonal block is identically zero",
    )


# ---------------------------------------------------------------------------
# truncation: census / merge / rewrite
# ---------------------------------------------------------------------------


def _census_body(ctx, inputs, args):
    (a,) = inputs
    node = _decode(ctx, a)
    path, sym, on_diag = args["path"], args["sym"], args["on_diag"]
    if node[0] == "leaf":
        leaf = node[2]
        if sym and on_diag:
            items = leaf.sym_block_items()
            weight = 1.0
        else:
            items = leaf.block_items()
            weight = _SQRT2 if sym else 1.0
        blob = [(norm * weight, path, key) for key, norm in items]
        return ctx.put(pickle.dumps(blob))
    parts = []
    for q, child in enumerate(node[2]):
        if child.is_nil:
            continue
        child_args = {
            "level": args["level"] + 1,
            "path": path + (q,),
            "sym": sym,
            "on_diag": on_diag and q in (0, 3),
        }
        parts.append(ctx.spawn("census", [child], child_args))
    if len(parts) == 1:
        return parts[0]
    return ctx.spawn("merge_census", parts, {})


def _merge_body(ctx, inputs, args):
    blob = []
    for cid in inputs:
        blob.extend(pickle.loads(ctx.fetch(cid)))
    return ctx.put(pickle.dumps(blob))


def _rewrite_body(ctx, inputs, args):
    a, drops_cid = inputs
    drops = pickle.loads(ctx.fetch(drops_cid))
    path, level = args["path"], args["level"]
    node = _decode(ctx, a)
    if node[0] == "leaf":
        keys = drops.get(path)
        if not keys:
            return a
        if args["sym"] and args["on_diag"]:
            out = node[2].sym_drop_blocks(keys)
        else:
            out = node[2].drop_blocks(keys)
        return _put_leaf(ctx, level, out)
    depth_here = len(path)
    if not any(p[:depth_here] == path for p in drops):
        return a
    quadrants = []
    for q, child in enumerate(node[2]):
        if child.is_nil:
            quadrants.append(NIL)
            continue
        child_args = {
            "level": level + 1,
            "path": path + (q,),
            "sym": args["sym"],
            "on_diag": args["on_diag"] and q in (0, 3),
        }
        quadrants.append(ctx.spawn("rewrite", [child, drops_cid], child_args))
    return _assemble(ctx, level, quadrants)


# ---------------------------------------------------------------------------
# assignment / extraction task wrappers
# ---------------------------------------------------------------------------


class _CtxStore:
    """Adapter letting driver-side builders run inside a task context."""

    def __init__(self, ctx):
        self._ctx = ctx

    def register(self, payload, owner, norm=0.0):
        return self._ctx.put(payload, norm)

    def norm_of(self, cid):
        return self._ctx.norm_of(cid)


def _assign_body(ctx, inputs, args):
    params = MatrixParams.create(args["n"], args["leaf_dim"])
    return build_from_triplets(
        _CtxStore(ctx), params, args["rows"], args["cols"], args["vals"],
        leaf_class(args["leaf_kind"]), args["block_size"],
    )


def _extract_body(ctx, inputs, args):
    (root,) = inputs
    rows = np.asarray(args["rows"], dtype=np.int64)
    cols = np.asarray(args["cols"], dtype=np.int64)
    params = MatrixParams.create(args["n"], args["leaf_dim"])
    out = np.zeros(rows.shape[0])

    def probe(cid, level, r0, c0, idx):
        if cid.is_nil or idx.size == 0:
            return
        node = _decode(ctx, cid)
        if node[0] == "leaf":
            out[idx] = node[2].get_elements(rows[idx] - r0, cols[idx] - c0)
            return
        half = params.node_dim(level) // 2
        top = rows[idx] < r0 + half
        left = cols[idx] < c0 + half
        probe(node[2][0], level + 1, r0, c0, idx[top & left])
        probe(node[2][1], level + 1, r0, c0 + half, idx[top & ~left])
        probe(node[2][2], level + 1, r0 + half, c0, idx[~top & left])
        probe(node[2][3], level + 1, r0 + half, c0 + half, idx[~top & ~left])

    probe(root, 0, 0, 0, np.arange(rows.shape[0]))
    return ctx.put(pickle.dumps(out))


def _extract_fallback(ctx, inputs, args):
    n = len(np.asarray(args["rows"], dtype=np.int64))
    return ctx.put(pickle.dumps(np.zeros(n)))


# ---------------------------------------------------------------------------
# registry
# ---------------------------------------------------------------------------


def default_registry() -> TaskRegistry:
    reg = TaskRegistry()
    reg.register("assemble", _assemble_body)
    reg.register("add", _add_body, _add_fallback)
    reg.register("scale", _scale_body, _scale_fallback)
    reg.register("multiply", _multiply_body, _multiply_fallback)
    reg.register("add_scaled_identity", _asi_body, _asi_fallback)
    reg.register("inverse_cholesky", _invchol_body, _invchol_fallback)
    reg.register("census", _census_body)
    reg.register("merge_census", _merge_body)
    reg.register("rewrite", _rewrite_body)
    reg.register("assign_from_triplets", _assign_body)
    reg.register("extract_elements", _extract_body, _extract_fallback)
    return reg


# ---------------------------------------------------------------------------
# Driver-side launchers.  Each returns a TaskSpec (plus result bookkeeping);
# the session runs the spec on an engine and wraps the output chunk.
# ---------------------------------------------------------------------------


def _check_conformant(a: Matrix, b: Matrix):
    if a.params != b.params:
        raise DimensionMismatchError(
            f"operand params differ: {a.params} vs {b.params}"
        )
    if a.leaf_kind != b.leaf_kind or a.block_size != b.block_size:
        raise ConfigurationError("operands must share leaf kind and block size")


def add_spec(a: Matrix, b: Matrix, alpha: float = 1.0, beta: float = 1.0) -> TaskSpec:
    _check_conformant(a, b)
    if a.symmetric != b.symmetric:
        raise ContractViolationError(
            "add needs both operands general or both symmetric"
        )
    return TaskSpec(
        "add", [a.root, b.root], {"level": 0, "alpha": alpha, "beta": beta}
    )


def scale_spec(a: Matrix, alpha: float) -> TaskSpec:
    return TaskSpec("scale", [a.root], {"level": 0, "alpha": alpha})


def add_scaled_identity_spec(a: Matrix, c: float) -> TaskSpec:
    return TaskSpec(
        "add_scaled_identity",
        [a.root],
        {
            "level": 0,
            "dim": a.params.n_padded,
            "leaf_dim": a.params.leaf_dim,
            "offset": 0,
            "n_logical": a.params.n_logical,
            "c": float(c),
            "leaf_kind": a.leaf_kind.value,
            "block_size": a.block_size,
        },
    )


def multiply_spec(a: Matrix, b: Matrix | None, variant: MultiplyVariant) -> tuple[TaskSpec, bool]:
    """Returns (spec, result_is_symmetric)."""
    tag = variant.tag
    if tag in ("symmetric_square", "rank_k"):
        if b is not None and b.root != a.root:
            raise ContractViolationError(f"{tag} takes a single operand")
        b = a
    if b is None:
        raise ContractViolationError(f"variant {tag} needs two operands")
    _check_conformant(a, b)
    if tag == "symmetric_square" and not a.symmetric:
        raise ContractViolationError("symmetric_square needs a symmetric operand")
    if tag == "symmetric" and not (a.symmetric or b.symmetric):
        raise ContractViolationError("symmetric variant needs a symmetric operand")
    if tag == "rank_k" and a.symmetric:
        raise ContractViolationError("rank_k takes a general operand")
    upper = tag in ("symmetric_square", "rank_k")
    args = {
        "level": 0,
        "ta": False,
        "tb": tag == "rank_k",
        "a_sym": a.symmetric,
        "b_sym": b.symmetric,
        "upper": upper,
        "tau": float(variant.tau),
    }
    return TaskSpec("multiply", [a.root, b.root], args), upper


def inverse_cholesky_spec(a: Matrix) -> TaskSpec:
    if not a.symmetric:
        raise ContractViolationError("inverse_cholesky needs a symmetric matrix")
    return TaskSpec(
        "inverse_cholesky",
        [a.root],
        {
            "level": 0,
            "dim": a.params.n_padded,
            "leaf_dim": a.params.leaf_dim,
            "offset": 0,
            "n_logical": a.params.n_logical,
            "leaf_kind": a.leaf_kind.value,
            "block_size": a.block_size,
        },
    )


def census_spec(a: Matrix) -> TaskSpec:
    return TaskSpec(
        "census",
        [a.root],
        {"level": 0, "path": (), "sym": a.symmetric, "on_diag": True},
    )


def plan_drops(blob, tau: float):
    """Greedy ascending-norm prefix with sum of squares <= tau^2.

    Returns (drops dict mapping leaf path -> list of block keys, removed_norm).
    """
    budget = tau * tau
    total = 0.0
    drops: dict[tuple, list] = {}
    for norm, path, key in sorted(blob, key=lambda item: (item[0], item[1], repr(item[2]))):
        if total + norm * norm > budget:
            break
        total += norm * norm
        drops.setdefault(path, []).append(key)
    return drops, math.sqrt(total)


def rewrite_spec(a: Matrix, drops_cid: ChunkId) -> TaskSpec:
    return TaskSpec(
        "rewrite",
        [a.root, drops_cid],
        {"level": 0, "path": (), "sym": a.symmetric, "on_diag": True},
    )


def assign_spec(n, leaf_dim, rows, cols, vals, leaf_kind, block_size) -> TaskSpec:
    return TaskSpec(
        "assign_from_triplets",
        [],
        {
            "n": n,
            "leaf_dim": leaf_dim,
            "rows": np.asarray(rows, dtype=np.int64),
            "cols": np.asarray(cols, dtype=np.int64),
            "vals": np.asarray(vals, dtype=np.float64),
            "leaf_kind": leaf_kind if isinstance(leaf_kind, str) else leaf_kind.value,
            "block_size": block_size,
        },
    )


def extract_spec(a: Matrix, rows, cols) -> TaskSpec:
    return TaskSpec(
        "extract_elements",
        [a.root],
        {
            "rows": np.asarray(rows, dtype=np.int64),
            "cols": np.asarray(cols, dtype=np.int64),
            "n": a.params.n_logical,
            "leaf_dim": a.params.leaf_dim,
        },
    )
