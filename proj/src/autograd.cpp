#include "hoi/autograd.hpp"

#include <cmath>
#include <memory>

namespace hoi::ad {
namespace {

double gelu_val(double x) { return 0.5 * x * (1.0 + std::erf(x / M_SQRT2)); }

double gelu_deriv(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / M_SQRT2));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * M_PI);
  return cdf + x * pdf;
}

}  // namespace

Tape::Id Tape::push(Mat value, bool needs_grad, std::function<void()> back) {
  Node n;
  n.value = std::move(value);
  n.needs_grad = needs_grad;
  n.back = std::move(back);
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

Tape::Id Tape::leaf(Mat value, bool needs_grad) { return push(std::move(value), needs_grad); }

Tape::Id Tape::add(Id a, Id b) {
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
          "add: shape mismatch");
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(val(a) + val(b), ng);
  if (ng)
    nodes_[out].back = [this, a, b, out] {
      if (nodes_[a].needs_grad) grad_ref(a) += grad(out);
      if (nodes_[b].needs_grad) grad_ref(b) += grad(out);
    };
  return out;
}

Tape::Id Tape::sub(Id a, Id b) {
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
          "sub: shape mismatch");
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(val(a) - val(b), ng);
  if (ng)
    nodes_[out].back = [this, a, b, out] {
      if (nodes_[a].needs_grad) grad_ref(a) += grad(out);
      if (nodes_[b].needs_grad) grad_ref(b) -= grad(out);
    };
  return out;
}

Tape::Id Tape::mul(Id a, Id b) {
  require(val(a).rows() == val(b).rows() && val(a).cols() == val(b).cols(),
          "mul: shape mismatch");
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(val(a).cwiseProduct(val(b)), ng);
  if (ng)
    nodes_[out].back = [this, a, b, out] {
      if (nodes_[a].needs_grad) grad_ref(a) += grad(out).cwiseProduct(val(b));
      if (nodes_[b].needs_grad) grad_ref(b) += grad(out).cwiseProduct(val(a));
    };
  return out;
}

Tape::Id Tape::scale(Id a, double s) {
  const bool ng = nodes_[a].needs_grad;
  Id out = push(val(a) * s, ng);
  if (ng)
    nodes_[out].back = [this, a, s, out] { grad_ref(a) += grad(out) * s; };
  return out;
}

Tape::Id Tape::matmul(Id a, Id b) {
  require(val(a).cols() == val(b).rows(), "matmul: inner dimension mismatch");
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(val(a) * val(b), ng);
  if (ng)
    nodes_[out].back = [this, a, b, out] {
      if (nodes_[a].needs_grad) grad_ref(a).noalias() += grad(out) * val(b).transpose();
      if (nodes_[b].needs_grad) grad_ref(b).noalias() += val(a).transpose() * grad(out);
    };
  return out;
}

Tape::Id Tape::add_row(Id x, Id row) {
  require(val(row).rows() == 1 && val(row).cols() == val(x).cols(),
          "add_row: row must be 1 x cols(x)");
  const bool ng = nodes_[x].needs_grad || nodes_[row].needs_grad;
  Mat v = val(x);
  v.rowwise() += val(row).row(0);
  Id out = push(std::move(v), ng);
  if (ng)
    nodes_[out].back = [this, x, row, out] {
      if (nodes_[x].needs_grad) grad_ref(x) += grad(out);
      if (nodes_[row].needs_grad) grad_ref(row) += grad(out).colwise().sum();
    };
  return out;
}

Tape::Id Tape::gelu(Id x) {
  const bool ng = nodes_[x].needs_grad;
  Id out = push(val(x).unaryExpr([](double v) { return gelu_val(v); }), ng);
  if (ng)
    nodes_[out].back = [this, x, out] {
      grad_ref(x) += grad(out).cwiseProduct(
          val(x).unaryExpr([](double v) { return gelu_deriv(v); }));
    };
  return out;
}

Tape::Id Tape::layer_norm_rows(Id x, Id gamma, Id beta, double eps) {
  const Eigen::Index c = val(x).cols();
  require(val(gamma).rows() == 1 && val(gamma).cols() == c, "layer_norm: bad gamma shape");
  require(val(beta).rows() == 1 && val(beta).cols() == c, "layer_norm: bad beta shape");
  const bool ng = nodes_[x].needs_grad || nodes_[gamma].needs_grad || nodes_[beta].needs_grad;

  auto xhat = std::make_shared<Mat>(val(x).rows(), c);
  auto inv_s = std::make_shared<Vec>(val(x).rows());
  Mat out_v(val(x).rows(), c);
  for (Eigen::Index i = 0; i < val(x).rows(); ++i) {
    const RowVec row = val(x).row(i);
    const double m = row.mean();
    const RowVec d = row.array() - m;
    const double var = d.squaredNorm() / static_cast<double>(c);
    const double s = std::sqrt(var + eps);
    (*inv_s)[i] = 1.0 / s;
    xhat->row(i) = d / s;
    out_v.row(i) = xhat->row(i).cwiseProduct(val(gamma).row(0)) + val(beta).row(0);
  }
  Id out = push(std::move(out_v), ng);
  if (ng)
    nodes_[out].back = [this, x, gamma, beta, out, xhat, inv_s] {
      const Mat& go = grad(out);
      if (nodes_[beta].needs_grad) grad_ref(beta) += go.colwise().sum();
      if (nodes_[gamma].needs_grad)
        grad_ref(gamma) += go.cwiseProduct(*xhat).colwise().sum();
      if (nodes_[x].needs_grad) {
        for (Eigen::Index i = 0; i < go.rows(); ++i) {
          const RowVec dxhat = go.row(i).cwiseProduct(val(gamma).row(0));
          const double mu1 = dxhat.mean();
          const double mu2 = dxhat.cwiseProduct(xhat->row(i)).mean();
          grad_ref(x).row(i) +=
              (*inv_s)[i] * (dxhat.array() - mu1 - xhat->row(i).array() * mu2).matrix();
        }
      }
    };
  return out;
}

Tape::Id Tape::dropout(Id x, double p, Rng& rng) {
  if (p <= 0.0) return x;
  require(p < 1.0, "dropout: p must be < 1");
  const double keep = 1.0 - p;
  auto mask = std::make_shared<Mat>(val(x).rows(), val(x).cols());
  for (Eigen::Index i = 0; i < mask->rows(); ++i)
    for (Eigen::Index j = 0; j < mask->cols(); ++j)
      (*mask)(i, j) = rng.uniform() < keep ? 1.0 / keep : 0.0;
  const bool ng = nodes_[x].needs_grad;
  Id out = push(val(x).cwiseProduct(*mask), ng);
  if (ng)
    nodes_[out].back = [this, x, out, mask] {
      grad_ref(x) += grad(out).cwiseProduct(*mask);
    };
  return out;
}

Tape::Id Tape::attention(Id q, Id k, Id v, int heads, Eigen::Index q_block,
                         Eigen::Index kv_block) {
  const Eigen::Index d = val(q).cols();
  require(heads > 0 && d % heads == 0, "attention: width not divisible by heads");
  require(val(k).cols() == d && val(v).cols() == d, "attention: width mismatch");
  require(q_block > 0 && kv_block > 0, "attention: block sizes must be positive");
  require(val(q).rows() % q_block == 0, "attention: q rows not a multiple of q_block");
  require(val(k).rows() % kv_block == 0, "attention: k rows not a multiple of kv_block");
  require(val(k).rows() == val(v).rows(), "attention: k/v row mismatch");
  const Eigen::Index batch = val(q).rows() / q_block;
  require(val(k).rows() / kv_block == batch, "attention: batch mismatch");
  const Eigen::Index dh = d / heads;
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(dh));

  auto smax = std::make_shared<std::vector<Mat>>();
  smax->reserve(static_cast<std::size_t>(batch * heads));
  Mat out_v = Mat::Zero(val(q).rows(), d);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (int h = 0; h < heads; ++h) {
      const auto qb = val(q).block(b * q_block, h * dh, q_block, dh);
      const auto kb = val(k).block(b * kv_block, h * dh, kv_block, dh);
      const auto vb = val(v).block(b * kv_block, h * dh, kv_block, dh);
      Mat z = qb * kb.transpose() * inv_sqrt;
      for (Eigen::Index i = 0; i < z.rows(); ++i) {
        const double m = z.row(i).maxCoeff();
        z.row(i) = (z.row(i).array() - m).exp();
        z.row(i) /= z.row(i).sum();
      }
      out_v.block(b * q_block, h * dh, q_block, dh) = z * vb;
      smax->push_back(std::move(z));
    }
  }

  const bool ng = nodes_[q].needs_grad || nodes_[k].needs_grad || nodes_[v].needs_grad;
  Id out = push(std::move(out_v), ng);
  if (ng)
    nodes_[out].back = [this, q, k, v, out, heads, q_block, kv_block, batch, dh, inv_sqrt,
                        smax] {
      for (Eigen::Index b = 0; b < batch; ++b) {
        for (int h = 0; h < heads; ++h) {
          const Mat& s = (*smax)[static_cast<std::size_t>(b * heads + h)];
          const auto go = grad(out).block(b * q_block, h * dh, q_block, dh);
          const auto qb = val(q).block(b * q_block, h * dh, q_block, dh);
          const auto kb = val(k).block(b * kv_block, h * dh, kv_block, dh);
          const auto vb = val(v).block(b * kv_block, h * dh, kv_block, dh);
          if (nodes_[v].needs_grad)
            grad_ref(v).block(b * kv_block, h * dh, kv_block, dh).noalias() +=
                s.transpose() * go;
          Mat ds = go * vb.transpose();
          // softmax backward, row-wise
          for (Eigen::Index i = 0; i < ds.rows(); ++i) {
            const double dot = ds.row(i).dot(s.row(i));
            ds.row(i) = s.row(i).cwiseProduct((ds.row(i).array() - dot).matrix());
          }
          ds *= inv_sqrt;
          if (nodes_[q].needs_grad)
            grad_ref(q).block(b * q_block, h * dh, q_block, dh).noalias() += ds * kb;
          if (nodes_[k].needs_grad)
            grad_ref(k).block(b * kv_block, h * dh, kv_block, dh).noalias() +=
                ds.transpose() * qb;
        }
      }
    };
  return out;
}

Tape::Id Tape::slice_cols(Id x, Eigen::Index start, Eigen::Index count) {
  require(start >= 0 && count > 0 && start + count <= val(x).cols(),
          "slice_cols: range out of bounds");
  const bool ng = nodes_[x].needs_grad;
  Id out = push(val(x).middleCols(start, count), ng);
  if (ng)
    nodes_[out].back = [this, x, out, start, count] {
      grad_ref(x).middleCols(start, count) += grad(out);
    };
  return out;
}

Tape::Id Tape::concat_cols(Id a, Id b) {
  require(val(a).rows() == val(b).rows(), "concat_cols: row mismatch");
  Mat v(val(a).rows(), val(a).cols() + val(b).cols());
  v << val(a), val(b);
  const bool ng = nodes_[a].needs_grad || nodes_[b].needs_grad;
  Id out = push(std::move(v), ng);
  if (ng)
    nodes_[out].back = [this, a, b, out] {
      const Eigen::Index ca = val(a).cols();
      if (nodes_[a].needs_grad) grad_ref(a) += grad(out).leftCols(ca);
      if (nodes_[b].needs_grad) grad_ref(b) += grad(out).rightCols(val(b).cols());
    };
  return out;
}

Tape::Id Tape::interleave_rows(const std::vector<Id>& parts) {
  require(!parts.empty(), "interleave_rows: no parts");
  const Eigen::Index rows = val(parts[0]).rows();
  const Eigen::Index cols = val(parts[0]).cols();
  bool ng = false;
  for (Id p : parts) {
    require(val(p).rows() == rows && val(p).cols() == cols,
            "interleave_rows: shape mismatch");
    ng = ng || nodes_[p].needs_grad;
  }
  const Eigen::Index k = static_cast<Eigen::Index>(parts.size());
  Mat v(rows * k, cols);
  for (Eigen::Index b = 0; b < rows; ++b)
    for (Eigen::Index i = 0; i < k; ++i) v.row(b * k + i) = val(parts[i]).row(b);
  Id out = push(std::move(v), ng);
  if (ng) {
    auto parts_copy = std::make_shared<std::vector<Id>>(parts);
    nodes_[out].back = [this, out, parts_copy, rows, k] {
      for (Eigen::Index b = 0; b < rows; ++b)
        for (Eigen::Index i = 0; i < k; ++i) {
          const Id p = (*parts_copy)[static_cast<std::size_t>(i)];
          if (nodes_[p].needs_grad) grad_ref(p).row(b) += grad(out).row(b * k + i);
        }
    };
  }
  return out;
}

Tape::Id Tape::pack_tokens(Id head, Id body, Eigen::Index body_block) {
  const Eigen::Index batch = val(head).rows();
  require(body_block > 0 && val(body).rows() == batch * body_block,
          "pack_tokens: body rows must equal head rows * body_block");
  require(val(head).cols() == val(body).cols(), "pack_tokens: width mismatch");
  const Eigen::Index c = val(head).cols();
  const Eigen::Index stride = body_block + 1;
  Mat v(batch * stride, c);
  for (Eigen::Index b = 0; b < batch; ++b) {
    v.row(b * stride) = val(head).row(b);
    v.middleRows(b * stride + 1, body_block) = val(body).middleRows(b * body_block, body_block);
  }
  const bool ng = nodes_[head].needs_grad || nodes_[body].needs_grad;
  Id out = push(std::move(v), ng);
  if (ng)
    nodes_[out].back = [this, head, body, out, batch, body_block, stride] {
      for (Eigen::Index b = 0; b < batch; ++b) {
        if (nodes_[head].needs_grad) grad_ref(head).row(b) += grad(out).row(b * stride);
        if (nodes_[body].needs_grad)
          grad_ref(body).middleRows(b * body_block, body_block) +=
              grad(out).middleRows(b * stride + 1, body_block);
      }
    };
  return out;
}

Tape::Id Tape::rows_strided(Id x, Eigen::Index stride, Eigen::Index offset) {
  require(stride > 0 && offset >= 0 && offset < stride, "rows_strided: bad stride/offset");
  require(val(x).rows() % stride == 0, "rows_strided: rows not a multiple of stride");
  const Eigen::Index batch = val(x).rows() / stride;
  Mat v(batch, val(x).cols());
  for (Eigen::Index b = 0; b < batch; ++b) v.row(b) = val(x).row(b * stride + offset);
  const bool ng = nodes_[x].needs_grad;
  Id out = push(std::move(v), ng);
  if (ng)
    nodes_[out].back = [this, x, out, batch, stride, offset] {
      for (Eigen::Index b = 0; b < batch; ++b)
        grad_ref(x).row(b * stride + offset) += grad(out).row(b);
    };
  return out;
}

Tape::Id Tape::unpack_body(Id packed, Eigen::Index body_block) {
  const Eigen::Index stride = body_block + 1;
  require(val(packed).rows() % stride == 0, "unpack_body: rows not a multiple of block+1");
  const Eigen::Index batch = val(packed).rows() / stride;
  Mat v(batch * body_block, val(packed).cols());
  for (Eigen::Index b = 0; b < batch; ++b)
    v.middleRows(b * body_block, body_block) =
        val(packed).middleRows(b * stride + 1, body_block);
  const bool ng = nodes_[packed].needs_grad;
  Id out = push(std::move(v), ng);
  if (ng)
    nodes_[out].back = [this, packed, out, batch, body_block, stride] {
      for (Eigen::Index b = 0; b < batch; ++b)
        grad_ref(packed).middleRows(b * stride + 1, body_block) +=
            grad(out).middleRows(b * body_block, body_block);
    };
  return out;
}

Tape::Id Tape::colwise_max_pool(Id x, Eigen::Index block) {
  require(block > 0 && val(x).rows() % block == 0, "colwise_max_pool: bad block");
  const Eigen::Index batch = val(x).rows() / block;
  const Eigen::Index c = val(x).cols();
  Mat v(batch, c);
  auto argmax = std::make_shared<Eigen::MatrixXi>(batch, c);
  for (Eigen::Index b = 0; b < batch; ++b) {
    for (Eigen::Index j = 0; j < c; ++j) {
      double best = val(x)(b * block, j);
      Eigen::Index bi = 0;
      for (Eigen::Index i = 1; i < block; ++i) {
        const double cand = val(x)(b * block + i, j);
        if (cand > best) {
          best = cand;
          bi = i;
        }
      }
      v(b, j) = best;
      (*argmax)(b, j) = static_cast<int>(bi);
    }
  }
  const bool ng = nodes_[x].needs_grad;
  Id out = push(std::move(v), ng);
  if (ng)
    nodes_[out].back = [this, x, out, batch, block, argmax] {
      for (Eigen::Index b = 0; b < batch; ++b)
        for (Eigen::Index j = 0; j < grad(out).cols(); ++j)
          grad_ref(x)(b * block + (*argmax)(b, j), j) += grad(out)(b, j);
    };
  return out;
}

Tape::Id Tape::mean_sq(Id x) {
  const double n = static_cast<double>(val(x).size());
  Mat v(1, 1);
  v(0, 0) = val(x).squaredNorm() / n;
  const bool ng = nodes_[x].needs_grad;
  Id out = push(std::move(v), ng);
  if (ng)
    nodes_[out].back = [this, x, out, n] {
      grad_ref(x) += (2.0 / n) * grad(out)(0, 0) * val(x);
    };
  return out;
}

void Tape::backward(Id root) {
  require(root >= 0 && root < static_cast<Id>(nodes_.size()), "backward: bad root");
  require(val(root).rows() == 1 && val(root).cols() == 1, "backward: root must be scalar");
  for (auto& n : nodes_) n.grad = Mat::Zero(n.value.rows(), n.value.cols());
  nodes_[root].grad(0, 0) = 1.0;
  for (Id i = root; i >= 0; --i) {
    if (nodes_[i].needs_grad && nodes_[i].back) nodes_[i].back();
  }
}

}  // namespace hoi::ad
