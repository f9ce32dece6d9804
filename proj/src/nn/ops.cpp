#include "finemotion/nn/ops.hpp"

#include <cmath>
#include <memory>
#include <sstream>

namespace finemotion::nn {
namespace {

[[noreturn]] void shape_error(const char* op, const Matrix& a, const Matrix& b) {
  std::ostringstream os;
  os << op << ": shape mismatch " << a.rows() << "x" << a.cols() << " vs " << b.rows() << "x"
     << b.cols();
  throw NnError(NnErrc::ShapeMismatch, os.str());
}

void require_same(const char* op, const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_error(op, a, b);
}

constexpr double kGeluC = 0.7978845608028654;  // sqrt(2/pi)

}  // namespace

NodeId matmul(Graph& g, NodeId a, NodeId b) {
  const Matrix& A = g.value(a);
  const Matrix& B = g.value(b);
  if (A.cols() != B.rows()) shape_error("matmul", A, B);
  Matrix out = A * B;
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a) || g.needs_grad(b), [&g, a, b, id] {
    const Matrix& G = g.grad(id);
    if (g.needs_grad(a)) g.grad(a).noalias() += G * g.value(b).transpose();
    if (g.needs_grad(b)) g.grad(b).noalias() += g.value(a).transpose() * G;
  });
}

NodeId matmul_bt(Graph& g, NodeId a, NodeId b) {
  const Matrix& A = g.value(a);
  const Matrix& B = g.value(b);
  if (A.cols() != B.cols()) shape_error("matmul_bt", A, B);
  Matrix out = A * B.transpose();
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a) || g.needs_grad(b), [&g, a, b, id] {
    const Matrix& G = g.grad(id);
    if (g.needs_grad(a)) g.grad(a).noalias() += G * g.value(b);
    if (g.needs_grad(b)) g.grad(b).noalias() += G.transpose() * g.value(a);
  });
}

NodeId add(Graph& g, NodeId a, NodeId b) {
  require_same("add", g.value(a), g.value(b));
  Matrix out = g.value(a) + g.value(b);
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a) || g.needs_grad(b), [&g, a, b, id] {
    const Matrix& G = g.grad(id);
    if (g.needs_grad(a)) g.grad(a) += G;
    if (g.needs_grad(b)) g.grad(b) += G;
  });
}

NodeId sub(Graph& g, NodeId a, NodeId b) {
  require_same("sub", g.value(a), g.value(b));
  Matrix out = g.value(a) - g.value(b);
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a) || g.needs_grad(b), [&g, a, b, id] {
    const Matrix& G = g.grad(id);
    if (g.needs_grad(a)) g.grad(a) += G;
    if (g.needs_grad(b)) g.grad(b) -= G;
  });
}

NodeId mul(Graph& g, NodeId a, NodeId b) {
  require_same("mul", g.value(a), g.value(b));
  Matrix out = g.value(a).cwiseProduct(g.value(b));
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a) || g.needs_grad(b), [&g, a, b, id] {
    const Matrix& G = g.grad(id);
    if (g.needs_grad(a)) g.grad(a) += G.cwiseProduct(g.value(b));
    if (g.needs_grad(b)) g.grad(b) += G.cwiseProduct(g.value(a));
  });
}

NodeId scale(Graph& g, NodeId a, double s) {
  Matrix out = g.value(a) * s;
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a), [&g, a, s, id] { g.grad(a) += g.grad(id) * s; });
}

NodeId add_row(Graph& g, NodeId a, NodeId row) {
  const Matrix& A = g.value(a);
  const Matrix& R = g.value(row);
  if (R.rows() != 1 || R.cols() != A.cols()) shape_error("add_row", A, R);
  Matrix out = A.rowwise() + R.row(0);
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a) || g.needs_grad(row), [&g, a, row, id] {
    const Matrix& G = g.grad(id);
    if (g.needs_grad(a)) g.grad(a) += G;
    if (g.needs_grad(row)) g.grad(row) += G.colwise().sum();
  });
}

NodeId add_segment_rows(Graph& g, NodeId a, NodeId rows, const Segments& segs) {
  const Matrix& A = g.value(a);
  const Matrix& R = g.value(rows);
  if (segs.total() != A.rows() || R.rows() != segs.count() || R.cols() != A.cols())
    shape_error("add_segment_rows", A, R);
  Matrix out = A;
  for (int s = 0; s < segs.count(); ++s)
    out.middleRows(segs.begin(s), segs.size(s)).rowwise() += R.row(s);
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a) || g.needs_grad(rows), [&g, a, rows, segs, id] {
    const Matrix& G = g.grad(id);
    if (g.needs_grad(a)) g.grad(a) += G;
    if (g.needs_grad(rows)) {
      Matrix& GR = g.grad(rows);
      for (int s = 0; s < segs.count(); ++s)
        GR.row(s) += G.middleRows(segs.begin(s), segs.size(s)).colwise().sum();
    }
  });
}

NodeId gelu(Graph& g, NodeId a) {
  const Matrix& X = g.value(a);
  Matrix out = X.unaryExpr([](double x) {
    return 0.5 * x * (1.0 + std::tanh(kGeluC * (x + 0.044715 * x * x * x)));
  });
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a), [&g, a, id] {
    const Matrix& X = g.value(a);
    Matrix d = X.unaryExpr([](double x) {
      const double u = kGeluC * (x + 0.044715 * x * x * x);
      const double th = std::tanh(u);
      const double du = kGeluC * (1.0 + 3.0 * 0.044715 * x * x);
      return 0.5 * (1.0 + th) + 0.5 * x * (1.0 - th * th) * du;
    });
    g.grad(a) += g.grad(id).cwiseProduct(d);
  });
}

NodeId silu(Graph& g, NodeId a) {
  const Matrix& X = g.value(a);
  Matrix out = X.unaryExpr([](double x) { return x / (1.0 + std::exp(-x)); });
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a), [&g, a, id] {
    Matrix d = g.value(a).unaryExpr([](double x) {
      const double s = 1.0 / (1.0 + std::exp(-x));
      return s * (1.0 + x * (1.0 - s));
    });
    g.grad(a) += g.grad(id).cwiseProduct(d);
  });
}

NodeId layer_norm(Graph& g, NodeId a, NodeId gamma, NodeId beta, double eps) {
  const Matrix& X = g.value(a);
  const Matrix& Ga = g.value(gamma);
  const Matrix& Be = g.value(beta);
  const Eigen::Index n = X.rows();
  const Eigen::Index c = X.cols();
  if (Ga.rows() != 1 || Ga.cols() != c || Be.rows() != 1 || Be.cols() != c)
    shape_error("layer_norm", X, Ga);
  auto xhat = std::make_shared<Matrix>(n, c);
  auto inv_std = std::make_shared<Eigen::VectorXd>(n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const double mu = X.row(r).mean();
    const double var = (X.row(r).array() - mu).square().mean();
    const double is = 1.0 / std::sqrt(var + eps);
    (*inv_std)(r) = is;
    xhat->row(r) = (X.row(r).array() - mu) * is;
  }
  Matrix out = (xhat->array().rowwise() * Ga.row(0).array()).rowwise() + Be.row(0).array();
  NodeId id = static_cast<NodeId>(g.size());
  const bool needs = g.needs_grad(a) || g.needs_grad(gamma) || g.needs_grad(beta);
  return g.push(std::move(out), needs, [&g, a, gamma, beta, id, xhat, inv_std] {
    const Matrix& G = g.grad(id);
    if (g.needs_grad(gamma)) g.grad(gamma) += G.cwiseProduct(*xhat).colwise().sum();
    if (g.needs_grad(beta)) g.grad(beta) += G.colwise().sum();
    if (g.needs_grad(a)) {
      const Matrix& Ga = g.value(gamma);
      Matrix dxhat = G.array().rowwise() * Ga.row(0).array();
      Matrix& GA = g.grad(a);
      for (Eigen::Index r = 0; r < dxhat.rows(); ++r) {
        const double m1 = dxhat.row(r).mean();
        const double m2 = dxhat.row(r).dot(xhat->row(r)) / static_cast<double>(dxhat.cols());
        GA.row(r).array() +=
            (*inv_std)(r) * (dxhat.row(r).array() - m1 - xhat->row(r).array() * m2);
      }
    }
  });
}

NodeId attention(Graph& g, NodeId q, NodeId k, NodeId v, const Segments& q_segs,
                 const Segments& kv_segs, int heads, bool causal) {
  const Matrix& Q = g.value(q);
  const Matrix& K = g.value(k);
  const Matrix& V = g.value(v);
  if (K.rows() != V.rows() || K.cols() != Q.cols() || V.cols() != Q.cols())
    shape_error("attention", Q, K);
  if (q_segs.total() != Q.rows() || kv_segs.total() != K.rows() ||
      q_segs.count() != kv_segs.count())
    throw NnError(NnErrc::ShapeMismatch, "attention: segment layout does not match inputs");
  if (heads < 1 || Q.cols() % heads != 0)
    throw NnError(NnErrc::ShapeMismatch, "attention: width not divisible by head count");
  const int dh = static_cast<int>(Q.cols()) / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));
  const int nseg = q_segs.count();

  // Softmax weights per (segment, head), kept for the backward pass.
  auto probs = std::make_shared<std::vector<Matrix>>(static_cast<std::size_t>(nseg * heads));
  Matrix out = Matrix::Zero(Q.rows(), Q.cols());
  for (int s = 0; s < nseg; ++s) {
    const int qb = q_segs.begin(s), nq = q_segs.size(s);
    const int kb = kv_segs.begin(s), nk = kv_segs.size(s);
    if (nq == 0) continue;
    if (nk == 0) throw NnError(NnErrc::ShapeMismatch, "attention: empty key segment");
    if (causal && nq != nk)
      throw NnError(NnErrc::ShapeMismatch, "attention: causal segments must be square");
    for (int h = 0; h < heads; ++h) {
      Matrix S = Q.block(qb, h * dh, nq, dh) * K.block(kb, h * dh, nk, dh).transpose();
      S *= inv_sqrt;
      for (int i = 0; i < nq; ++i) {
        const int visible = causal ? i + 1 : nk;
        const double mx = S.row(i).head(visible).maxCoeff();
        double z = 0.0;
        for (int j = 0; j < nk; ++j) {
          const double e = j < visible ? std::exp(S(i, j) - mx) : 0.0;
          S(i, j) = e;
          z += e;
        }
        S.row(i) /= z;
      }
      out.block(qb, h * dh, nq, dh).noalias() = S * V.block(kb, h * dh, nk, dh);
      (*probs)[static_cast<std::size_t>(s * heads + h)] = std::move(S);
    }
  }
  NodeId id = static_cast<NodeId>(g.size());
  const bool needs = g.needs_grad(q) || g.needs_grad(k) || g.needs_grad(v);
  return g.push(std::move(out), needs,
                [&g, q, k, v, q_segs, kv_segs, heads, dh, inv_sqrt, probs, id] {
                  const Matrix& G = g.grad(id);
                  const Matrix& Q = g.value(q);
                  const Matrix& K = g.value(k);
                  const Matrix& V = g.value(v);
                  const bool gq = g.needs_grad(q), gk = g.needs_grad(k), gv = g.needs_grad(v);
                  for (int s = 0; s < q_segs.count(); ++s) {
                    const int qb = q_segs.begin(s), nq = q_segs.size(s);
                    const int kb = kv_segs.begin(s), nk = kv_segs.size(s);
                    if (nq == 0) continue;
                    for (int h = 0; h < heads; ++h) {
                      const Matrix& P = (*probs)[static_cast<std::size_t>(s * heads + h)];
                      auto dO = G.block(qb, h * dh, nq, dh);
                      if (gv) g.grad(v).block(kb, h * dh, nk, dh).noalias() += P.transpose() * dO;
                      if (!gq && !gk) continue;
                      Matrix dP = dO * V.block(kb, h * dh, nk, dh).transpose();
                      Eigen::VectorXd rs = dP.cwiseProduct(P).rowwise().sum();
                      Matrix dS = P.cwiseProduct(dP.colwise() - rs);
                      dS *= inv_sqrt;
                      if (gq) g.grad(q).block(qb, h * dh, nq, dh).noalias() += dS * K.block(kb, h * dh, nk, dh);
                      if (gk)
                        g.grad(k).block(kb, h * dh, nk, dh).noalias() +=
                            dS.transpose() * Q.block(qb, h * dh, nq, dh);
                    }
                  }
                });
}

NodeId gather_rows(Graph& g, NodeId a, const std::vector<int>& rows) {
  const Matrix& A = g.value(a);
  Matrix out(static_cast<Eigen::Index>(rows.size()), A.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    if (rows[i] < 0 || rows[i] >= A.rows())
      throw NnError(NnErrc::ShapeMismatch, "gather_rows: index out of range");
    out.row(static_cast<Eigen::Index>(i)) = A.row(rows[i]);
  }
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a), [&g, a, rows, id] {
    const Matrix& G = g.grad(id);
    Matrix& GA = g.grad(a);
    for (std::size_t i = 0; i < rows.size(); ++i) GA.row(rows[i]) += G.row(static_cast<Eigen::Index>(i));
  });
}

NodeId concat_rows(Graph& g, const std::vector<NodeId>& parts) {
  if (parts.empty()) throw NnError(NnErrc::ShapeMismatch, "concat_rows: no inputs");
  const Eigen::Index c = g.value(parts.front()).cols();
  Eigen::Index n = 0;
  bool needs = false;
  for (NodeId p : parts) {
    if (g.value(p).cols() != c) shape_error("concat_rows", g.value(parts.front()), g.value(p));
    n += g.value(p).rows();
    needs = needs || g.needs_grad(p);
  }
  Matrix out(n, c);
  Eigen::Index r = 0;
  for (NodeId p : parts) {
    out.middleRows(r, g.value(p).rows()) = g.value(p);
    r += g.value(p).rows();
  }
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), needs, [&g, parts, id] {
    const Matrix& G = g.grad(id);
    Eigen::Index r = 0;
    for (NodeId p : parts) {
      const Eigen::Index n = g.value(p).rows();
      if (g.needs_grad(p)) g.grad(p) += G.middleRows(r, n);
      r += n;
    }
  });
}

NodeId concat_cols(Graph& g, const std::vector<NodeId>& parts) {
  if (parts.empty()) throw NnError(NnErrc::ShapeMismatch, "concat_cols: no inputs");
  const Eigen::Index n = g.value(parts.front()).rows();
  Eigen::Index c = 0;
  bool needs = false;
  for (NodeId p : parts) {
    if (g.value(p).rows() != n) shape_error("concat_cols", g.value(parts.front()), g.value(p));
    c += g.value(p).cols();
    needs = needs || g.needs_grad(p);
  }
  Matrix out(n, c);
  Eigen::Index col = 0;
  for (NodeId p : parts) {
    out.middleCols(col, g.value(p).cols()) = g.value(p);
    col += g.value(p).cols();
  }
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), needs, [&g, parts, id] {
    const Matrix& G = g.grad(id);
    Eigen::Index col = 0;
    for (NodeId p : parts) {
      const Eigen::Index c = g.value(p).cols();
      if (g.needs_grad(p)) g.grad(p) += G.middleCols(col, c);
      col += c;
    }
  });
}

NodeId segment_mean(Graph& g, NodeId a, const Segments& segs) {
  const Matrix& A = g.value(a);
  if (segs.total() != A.rows())
    throw NnError(NnErrc::ShapeMismatch, "segment_mean: segments do not cover input");
  Matrix out(segs.count(), A.cols());
  for (int s = 0; s < segs.count(); ++s) {
    if (segs.size(s) == 0) throw NnError(NnErrc::ShapeMismatch, "segment_mean: empty segment");
    out.row(s) = A.middleRows(segs.begin(s), segs.size(s)).colwise().mean();
  }
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a), [&g, a, segs, id] {
    const Matrix& G = g.grad(id);
    Matrix& GA = g.grad(a);
    for (int s = 0; s < segs.count(); ++s)
      GA.middleRows(segs.begin(s), segs.size(s)).rowwise() += G.row(s) / segs.size(s);
  });
}

NodeId mean_rows(Graph& g, NodeId a) {
  return segment_mean(g, a, Segments::from_sizes({static_cast<int>(g.value(a).rows())}));
}

NodeId mse(Graph& g, NodeId a, NodeId b) {
  require_same("mse", g.value(a), g.value(b));
  const double n = static_cast<double>(g.value(a).size());
  Matrix out(1, 1);
  out(0, 0) = (g.value(a) - g.value(b)).squaredNorm() / n;
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a) || g.needs_grad(b), [&g, a, b, n, id] {
    const double go = g.grad(id)(0, 0);
    Matrix d = (g.value(a) - g.value(b)) * (2.0 * go / n);
    if (g.needs_grad(a)) g.grad(a) += d;
    if (g.needs_grad(b)) g.grad(b) -= d;
  });
}

NodeId sum_all(Graph& g, NodeId a) {
  Matrix out(1, 1);
  out(0, 0) = g.value(a).sum();
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a),
                [&g, a, id] { g.grad(a).array() += g.grad(id)(0, 0); });
}

NodeId normalize_rows(Graph& g, NodeId a, double eps) {
  const Matrix& A = g.value(a);
  auto norms = std::make_shared<Eigen::VectorXd>(A.rowwise().norm());
  norms->array() = norms->array().max(eps);
  Matrix out = A.array().colwise() / norms->array();
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(a), [&g, a, norms, id] {
    const Matrix& G = g.grad(id);
    const Matrix& A = g.value(a);
    Matrix& GA = g.grad(a);
    for (Eigen::Index r = 0; r < A.rows(); ++r) {
      const double n = (*norms)(r);
      const auto y = A.row(r) / n;
      GA.row(r) += (G.row(r) - y * G.row(r).dot(y)) / n;
    }
  });
}

NodeId hinge_contrastive(Graph& g, NodeId similarity, double margin) {
  const Matrix& S = g.value(similarity);
  if (S.rows() != S.cols() || S.rows() < 2)
    throw NnError(NnErrc::ShapeMismatch, "hinge_contrastive: need a square matrix of size >= 2");
  const Eigen::Index n = S.rows();
  const double denom = static_cast<double>(n * (n - 1));
  double loss = 0.0;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      loss += std::max(0.0, margin - S(i, i) + S(i, j));
      loss += std::max(0.0, margin - S(i, i) + S(j, i));
    }
  Matrix out(1, 1);
  out(0, 0) = loss / denom;
  NodeId id = static_cast<NodeId>(g.size());
  return g.push(std::move(out), g.needs_grad(similarity), [&g, similarity, margin, denom, id] {
    const Matrix& S = g.value(similarity);
    const double go = g.grad(id)(0, 0) / denom;
    Matrix& GS = g.grad(similarity);
    const Eigen::Index n = S.rows();
    for (Eigen::Index i = 0; i < n; ++i)
      for (Eigen::Index j = 0; j < n; ++j) {
        if (i == j) continue;
        if (margin - S(i, i) + S(i, j) > 0.0) {
          GS(i, i) -= go;
          GS(i, j) += go;
        }
        if (margin - S(i, i) + S(j, i) > 0.0) {
          GS(i, i) -= go;
          GS(j, i) += go;
        }
      }
  });
}

}  // namespace finemotion::nn
