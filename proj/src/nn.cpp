#include "hoi/nn.hpp"

#include <cmath>

namespace hoi::nn {

void Adam::step(const std::vector<Param*>& params) {
  ++t_;
  const double bc1 = 1.0 - std::pow(cfg_.beta1, t_);
  const double bc2 = 1.0 - std::pow(cfg_.beta2, t_);
  for (Param* p : params) {
    p->m = cfg_.beta1 * p->m + (1.0 - cfg_.beta1) * p->grad;
    p->v = cfg_.beta2 * p->v + (1.0 - cfg_.beta2) * p->grad.cwiseProduct(p->grad);
    const Mat mhat = p->m / bc1;
    const Mat vhat = p->v / bc2;
    const Mat denom = (vhat.array().sqrt() + cfg_.eps).matrix();
    Mat update = mhat.cwiseQuotient(denom);
    if (cfg_.weight_decay > 0.0) update += cfg_.weight_decay * p->value;
    p->value -= cfg_.lr * update;
    snap_f32(p->value);
    p->grad.setZero();
  }
}

Mat xavier_uniform(Eigen::Index in, Eigen::Index out, Rng& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  Mat w(in, out);
  for (Eigen::Index i = 0; i < in; ++i)
    for (Eigen::Index j = 0; j < out; ++j) w(i, j) = (2.0 * rng.uniform() - 1.0) * limit;
  snap_f32(w);
  return w;
}

Linear::Linear(const std::string& name, int in, int out, Rng& rng)
    : w(name + ".w", xavier_uniform(in, out, rng)), b(name + ".b", Mat::Zero(1, out)) {}

ad::Tape::Id Linear::apply(Binder& bind, ad::Tape::Id x) {
  auto& t = bind.tape;
  return t.add_row(t.matmul(x, bind(w)), bind(b));
}

void Linear::collect(std::vector<Param*>& out) {
  out.push_back(&w);
  out.push_back(&b);
}

LayerNorm::LayerNorm(const std::string& name, int dim)
    : gamma(name + ".gamma", Mat::Ones(1, dim)), beta(name + ".beta", Mat::Zero(1, dim)) {}

ad::Tape::Id LayerNorm::apply(Binder& bind, ad::Tape::Id x) {
  return bind.tape.layer_norm_rows(x, bind(gamma), bind(beta));
}

void LayerNorm::collect(std::vector<Param*>& out) {
  out.push_back(&gamma);
  out.push_back(&beta);
}

EncoderLayer::EncoderLayer(const std::string& name, int dim, int ff_dim, int n_heads, Rng& rng)
    : wq(name + ".wq", dim, dim, rng),
      wk(name + ".wk", dim, dim, rng),
      wv(name + ".wv", dim, dim, rng),
      wo(name + ".wo", dim, dim, rng),
      ff1(name + ".ff1", dim, ff_dim, rng),
      ff2(name + ".ff2", ff_dim, dim, rng),
      ln1(name + ".ln1", dim),
      ln2(name + ".ln2", dim),
      heads(n_heads) {}

ad::Tape::Id EncoderLayer::apply(Binder& bind, ad::Tape::Id x, Eigen::Index block,
                                 double dropout_p, Rng* dropout_rng) {
  auto& t = bind.tape;
  auto a = t.attention(wq.apply(bind, x), wk.apply(bind, x), wv.apply(bind, x), heads, block,
                       block);
  a = wo.apply(bind, a);
  if (dropout_p > 0.0 && dropout_rng) a = t.dropout(a, dropout_p, *dropout_rng);
  const auto x1 = ln1.apply(bind, t.add(x, a));
  auto f = ff2.apply(bind, t.gelu(ff1.apply(bind, x1)));
  if (dropout_p > 0.0 && dropout_rng) f = t.dropout(f, dropout_p, *dropout_rng);
  return ln2.apply(bind, t.add(x1, f));
}

void EncoderLayer::collect(std::vector<Param*>& out) {
  wq.collect(out);
  wk.collect(out);
  wv.collect(out);
  wo.collect(out);
  ff1.collect(out);
  ff2.collect(out);
  ln1.collect(out);
  ln2.collect(out);
}

CommunicationBlock::CommunicationBlock(const std::string& name, int dim, int n_heads, Rng& rng)
    : hq(name + ".hq", dim, dim, rng),
      hk(name + ".hk", dim, dim, rng),
      hv(name + ".hv", dim, dim, rng),
      h_mlp1(name + ".h_mlp1", dim, dim, rng),
      h_mlp2(name + ".h_mlp2", dim, dim, rng),
      oq(name + ".oq", dim, dim, rng),
      ok(name + ".ok", dim, dim, rng),
      ov(name + ".ov", dim, dim, rng),
      o_mlp1(name + ".o_mlp1", dim, dim, rng),
      o_mlp2(name + ".o_mlp2", dim, dim, rng),
      heads(n_heads) {}

std::pair<ad::Tape::Id, ad::Tape::Id> CommunicationBlock::apply(Binder& bind, ad::Tape::Id f_h,
                                                                ad::Tape::Id f_o,
                                                                Eigen::Index block_h,
                                                                Eigen::Index block_o,
                                                                double dropout_p,
                                                                Rng* dropout_rng) {
  auto& t = bind.tape;
  auto ah = t.attention(hq.apply(bind, f_h), hk.apply(bind, f_o), hv.apply(bind, f_o), heads,
                        block_h, block_o);
  auto mh = h_mlp2.apply(bind, t.gelu(h_mlp1.apply(bind, ah)));
  if (dropout_p > 0.0 && dropout_rng) mh = t.dropout(mh, dropout_p, *dropout_rng);

  auto ao = t.attention(oq.apply(bind, f_o), ok.apply(bind, f_h), ov.apply(bind, f_h), heads,
                        block_o, block_h);
  auto mo = o_mlp2.apply(bind, t.gelu(o_mlp1.apply(bind, ao)));
  if (dropout_p > 0.0 && dropout_rng) mo = t.dropout(mo, dropout_p, *dropout_rng);

  return {t.add(f_h, mh), t.add(f_o, mo)};
}

void CommunicationBlock::collect(std::vector<Param*>& out) {
  hq.collect(out);
  hk.collect(out);
  hv.collect(out);
  h_mlp1.collect(out);
  h_mlp2.collect(out);
  oq.collect(out);
  ok.collect(out);
  ov.collect(out);
  o_mlp1.collect(out);
  o_mlp2.collect(out);
}

Mat sinusoidal_embedding(const std::vector<double>& positions, int dim) {
  require(dim >= 2 && dim % 2 == 0, "sinusoidal_embedding: dim must be even");
  Mat out(static_cast<Eigen::Index>(positions.size()), dim);
  const int half = dim / 2;
  for (std::size_t r = 0; r < positions.size(); ++r) {
    for (int i = 0; i < half; ++i) {
      const double freq = std::exp(-std::log(10000.0) * (2.0 * i) / dim);
      out(static_cast<Eigen::Index>(r), 2 * i) = std::sin(positions[r] * freq);
      out(static_cast<Eigen::Index>(r), 2 * i + 1) = std::cos(positions[r] * freq);
    }
  }
  return out;
}

}  // namespace hoi::nn
