#pragma once

#include <functional>
#include <vector>

#include "hoi/common.hpp"

namespace hoi::ad {

// Reverse-mode tape over dense double matrices. Build a graph by chaining op
// calls, then run backward() from a scalar node; gradients accumulate into
// each node and can be harvested for bound parameters.
//
// Batched sequence data uses a flattened row layout: a tensor of B samples
// with R rows each is stored as a (B*R) x C matrix, sample-major. Ops that
// need sample boundaries take the per-sample block size explicitly.
class Tape {
 public:
  using Id = int;

  Id leaf(Mat value, bool needs_grad = false);

  const Mat& val(Id id) const { return nodes_[id].value; }
  const Mat& grad(Id id) const { return nodes_[id].grad; }

  Id add(Id a, Id b);
  Id sub(Id a, Id b);
  Id mul(Id a, Id b);  // elementwise
  Id scale(Id a, double s);
  Id matmul(Id a, Id b);
  Id add_row(Id x, Id row);  // broadcast a 1 x c row over every row of x
  Id gelu(Id x);             // exact erf form
  Id layer_norm_rows(Id x, Id gamma, Id beta, double eps = 1e-5);
  Id dropout(Id x, double p, Rng& rng);  // inverted scaling; identity when p <= 0

  // Multi-head softmax attention over per-sample blocks. q is (B*Lq) x d,
  // k and v are (B*Lkv) x d, d divisible by heads. Returns (B*Lq) x d.
  Id attention(Id q, Id k, Id v, int heads, Eigen::Index q_block, Eigen::Index kv_block);

  Id slice_cols(Id x, Eigen::Index start, Eigen::Index count);
  Id concat_cols(Id a, Id b);

  // Interleave k same-shaped (B x c) matrices into (B*k) x c, sample-major.
  Id interleave_rows(const std::vector<Id>& parts);

  // Prepend one head row per sample block: head is B x c, body is (B*Lb) x c,
  // result is (B*(Lb+1)) x c.
  Id pack_tokens(Id head, Id body, Eigen::Index body_block);

  // Strided row gather: rows offset, offset+stride, ... -> (B x c).
  Id rows_strided(Id x, Eigen::Index stride, Eigen::Index offset);

  // Drop the per-block head row: inverse of pack_tokens' body part.
  Id unpack_body(Id packed, Eigen::Index body_block);

  // Per-sample column-wise max over blocks of rows: (B*N) x c -> B x c.
  Id colwise_max_pool(Id x, Eigen::Index block);

  Id mean_sq(Id x);  // 1 x 1: mean of squared entries

  // Backpropagate from a 1 x 1 node; gradients of all reachable nodes are
  // populated (zeroed first).
  void backward(Id root);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    Mat value;
    Mat grad;
    bool needs_grad = false;
    std::function<void()> back;  // empty for leaves
  };

  Id push(Mat value, bool needs_grad, std::function<void()> back = {});
  Mat& grad_ref(Id id) { return nodes_[id].grad; }

  std::vector<Node> nodes_;
};

}  // namespace hoi::ad
