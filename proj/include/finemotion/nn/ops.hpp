#pragma once

#include <vector>

#include "finemotion/nn/graph.hpp"

// Differentiable ops over Graph nodes. Each op validates shapes and throws
// NnError(ShapeMismatch) on disagreement.
namespace finemotion::nn {

NodeId matmul(Graph& g, NodeId a, NodeId b);
// a * b^T
NodeId matmul_bt(Graph& g, NodeId a, NodeId b);
NodeId add(Graph& g, NodeId a, NodeId b);
NodeId sub(Graph& g, NodeId a, NodeId b);
NodeId mul(Graph& g, NodeId a, NodeId b);
NodeId scale(Graph& g, NodeId a, double s);
// Adds a 1 x c row to every row of a.
NodeId add_row(Graph& g, NodeId a, NodeId row);
// Adds row s of `rows` (S x c) to every row of segment s of a.
NodeId add_segment_rows(Graph& g, NodeId a, NodeId rows, const Segments& segs);

NodeId gelu(Graph& g, NodeId a);
NodeId silu(Graph& g, NodeId a);

NodeId layer_norm(Graph& g, NodeId a, NodeId gamma, NodeId beta, double eps = 1e-5);

// Multi-head scaled dot-product attention, evaluated independently per
// segment pair (q segment i attends only to kv segment i). Inputs are already
// projected; width must be divisible by `heads`. With `causal`, query j of a
// segment only sees keys 0..j (q and kv segments must then have equal sizes).
NodeId attention(Graph& g, NodeId q, NodeId k, NodeId v, const Segments& q_segs,
                 const Segments& kv_segs, int heads, bool causal = false);

NodeId gather_rows(Graph& g, NodeId a, const std::vector<int>& rows);
NodeId concat_rows(Graph& g, const std::vector<NodeId>& parts);
NodeId concat_cols(Graph& g, const std::vector<NodeId>& parts);
// Mean over the rows of each segment -> S x c.
NodeId segment_mean(Graph& g, NodeId a, const Segments& segs);
NodeId mean_rows(Graph& g, NodeId a);

// Mean squared error over all entries -> 1 x 1.
NodeId mse(Graph& g, NodeId a, NodeId b);
NodeId sum_all(Graph& g, NodeId a);
NodeId normalize_rows(Graph& g, NodeId a, double eps = 1e-12);

// Symmetric margin ranking loss over a square similarity matrix whose
// diagonal holds matched pairs: mean over i != j of
// max(0, margin - s_ii + s_ij) + max(0, margin - s_ii + s_ji).
NodeId hinge_contrastive(Graph& g, NodeId similarity, double margin);

}  // namespace finemotion::nn
