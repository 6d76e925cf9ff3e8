#pragma once

#include <string>
#include <utility>
#include <vector>

#include "hoi/autograd.hpp"
#include "hoi/common.hpp"

namespace hoi::nn {

struct Param {
  std::string name;
  Mat value;
  Mat grad;
  Mat m;  // Adam first moment
  Mat v;  // Adam second moment

  Param() = default;
  Param(std::string n, Mat val)
      : name(std::move(n)),
        value(std::move(val)),
        grad(Mat::Zero(value.rows(), value.cols())),
        m(Mat::Zero(value.rows(), value.cols())),
        v(Mat::Zero(value.rows(), value.cols())) {}
};

// Binds parameters into a tape as leaves and harvests their gradients after
// backward(). A parameter bound more than once accumulates from every use.
struct Binder {
  ad::Tape& tape;
  std::vector<std::pair<ad::Tape::Id, Param*>> bound;

  explicit Binder(ad::Tape& t) : tape(t) {}

  ad::Tape::Id operator()(Param& p) {
    const auto id = tape.leaf(p.value, true);
    bound.emplace_back(id, &p);
    return id;
  }

  void harvest() {
    for (auto& [id, p] : bound) p->grad += tape.grad(id);
  }
};

struct AdamConfig {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;  // decoupled
};

// Adam with decoupled weight decay. Updated values are snapped to the
// float32 grid so checkpoints round-trip losslessly.
class Adam {
 public:
  explicit Adam(AdamConfig cfg) : cfg_(cfg) {}
  void step(const std::vector<Param*>& params);
  int steps_taken() const { return t_; }

 private:
  AdamConfig cfg_;
  int t_ = 0;
};

Mat xavier_uniform(Eigen::Index in, Eigen::Index out, Rng& rng);

struct Linear {
  Param w;  // in x out
  Param b;  // 1 x out

  Linear() = default;
  Linear(const std::string& name, int in, int out, Rng& rng);

  ad::Tape::Id apply(Binder& bind, ad::Tape::Id x);
  void collect(std::vector<Param*>& out);
};

struct LayerNorm {
  Param gamma;  // 1 x dim
  Param beta;   // 1 x dim

  LayerNorm() = default;
  LayerNorm(const std::string& name, int dim);

  ad::Tape::Id apply(Binder& bind, ad::Tape::Id x);
  void collect(std::vector<Param*>& out);
};

// Post-norm transformer encoder layer: self-attention and feed-forward
// sublayers, each followed by residual addition and layer norm.
struct EncoderLayer {
  Linear wq, wk, wv, wo, ff1, ff2;
  LayerNorm ln1, ln2;
  int heads = 4;

  EncoderLayer() = default;
  EncoderLayer(const std::string& name, int dim, int ff_dim, int n_heads, Rng& rng);

  ad::Tape::Id apply(Binder& bind, ad::Tape::Id x, Eigen::Index block, double dropout_p,
                     Rng* dropout_rng);
  void collect(std::vector<Param*>& out);
};

// Bidirectional cross-attention exchange between the two branch feature
// streams. Each direction projects queries from its own branch, keys/values
// from the other, applies multi-head attention and a two-layer MLP, and adds
// the result back residually. Both directions read the pre-update features.
struct CommunicationBlock {
  Linear hq, hk, hv, h_mlp1, h_mlp2;
  Linear oq, ok, ov, o_mlp1, o_mlp2;
  int heads = 4;

  CommunicationBlock() = default;
  CommunicationBlock(const std::string& name, int dim, int n_heads, Rng& rng);

  std::pair<ad::Tape::Id, ad::Tape::Id> apply(Binder& bind, ad::Tape::Id f_h, ad::Tape::Id f_o,
                                              Eigen::Index block_h, Eigen::Index block_o,
                                              double dropout_p, Rng* dropout_rng);
  void collect(std::vector<Param*>& out);
};

// Sinusoidal embedding rows for arbitrary positions (timesteps or token
// indices): even channels sin, odd channels cos, geometric frequency ladder.
Mat sinusoidal_embedding(const std::vector<double>& positions, int dim);

}  // namespace hoi::nn
