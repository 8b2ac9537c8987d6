#include <algorithm>
#include <cmath>
#include <limits>

#include "cgat/autodiff.hpp"
#include "cgat/error.hpp"

namespace cgat::ad {

namespace {

void require(bool ok, const std::string& what) {
  if (!ok) fail(ErrorCode::shape_mismatch, what);
}

std::string dims(const Tensor& t) { return shape_string(t.shape()); }

constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;

}  // namespace

Var matmul(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require(av.cols() == bv.rows(), "matmul " + dims(av) + " x " + dims(bv));
  Tensor out({av.rows(), bv.cols()});
  out.mat().noalias() = av.mat() * bv.mat();
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    if (t.requires_grad(a)) t.grad(a).mat().noalias() += gy.mat() * t.value(b).mat().transpose();
    if (t.requires_grad(b)) t.grad(b).mat().noalias() += t.value(a).mat().transpose() * gy.mat();
  });
}

Var linear(Tape& t, Var x, Var w, Var bias) {
  const Tensor& xv = t.value(x);
  const Tensor& wv = t.value(w);
  const Tensor& bv = t.value(bias);
  require(xv.cols() == wv.rows(), "linear " + dims(xv) + " x " + dims(wv));
  require(bv.size() == wv.cols(), "linear bias " + dims(bv) + " for weight " + dims(wv));
  Tensor out({xv.rows(), wv.cols()});
  out.mat().noalias() = xv.mat() * wv.mat();
  const Eigen::Map<const Eigen::RowVectorXd> brow(bv.data(), Eigen::Index(bv.size()));
  out.mat().rowwise() += brow;
  return t.record(std::move(out), {x, w, bias}, [x, w, bias](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    if (t.requires_grad(x)) t.grad(x).mat().noalias() += gy.mat() * t.value(w).mat().transpose();
    if (t.requires_grad(w)) t.grad(w).mat().noalias() += t.value(x).mat().transpose() * gy.mat();
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad(bias);
      Eigen::Map<Eigen::RowVectorXd> gbrow(gb.data(), Eigen::Index(gb.size()));
      gbrow += gy.mat().colwise().sum();
    }
  });
}

Var add(Tape& t, Var a, Var b) {
  const Tensor& av = t.value(a);
  const Tensor& bv = t.value(b);
  require(av.shape() == bv.shape(), "add " + dims(av) + " + " + dims(bv));
  Tensor out = av;
  out.mat() += bv.mat();
  return t.record(std::move(out), {a, b}, [a, b](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    if (t.requires_grad(a)) t.grad(a).mat() += gy.mat();
    if (t.requires_grad(b)) t.grad(b).mat() += gy.mat();
  });
}

Var add_bias(Tape& t, Var x, Var bias) {
  const Tensor& xv = t.value(x);
  const Tensor& bv = t.value(bias);
  require(bv.size() == xv.cols(), "add_bias " + dims(xv) + " + " + dims(bv));
  Tensor out = xv;
  const Eigen::Map<const Eigen::RowVectorXd> brow(bv.data(), Eigen::Index(bv.size()));
  out.mat().rowwise() += brow;
  return t.record(std::move(out), {x, bias}, [x, bias](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    if (t.requires_grad(x)) t.grad(x).mat() += gy.mat();
    if (t.requires_grad(bias)) {
      Tensor& gb = t.grad(bias);
      Eigen::Map<Eigen::RowVectorXd> gbrow(gb.data(), Eigen::Index(gb.size()));
      gbrow += gy.mat().colwise().sum();
    }
  });
}

Var scale(Tape& t, Var x, double factor) {
  Tensor out = t.value(x);
  out.mat() *= factor;
  return t.record(std::move(out), {x}, [x, factor](Tape& t, std::size_t self) {
    t.grad(x).mat() += factor * t.grad(self).mat();
  });
}

Var gelu(Tape& t, Var x) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  const std::size_t n = xv.size();
  const double* in = xv.data();
  double* o = out.data();
  std::vector<double> cdf(n);
  for (std::size_t i = 0; i < n; ++i) {
    cdf[i] = 0.5 * (1.0 + std::erf(in[i] * kInvSqrt2));
    o[i] = in[i] * cdf[i];
  }
  return t.record(std::move(out), {x}, [x, cdf = std::move(cdf)](Tape& t, std::size_t self) {
    const auto n = static_cast<Eigen::Index>(cdf.size());
    const Eigen::Map<const Eigen::ArrayXd> v(t.value(x).data(), n);
    const Eigen::Map<const Eigen::ArrayXd> gy(t.grad(self).data(), n);
    const Eigen::Map<const Eigen::ArrayXd> phi(cdf.data(), n);
    Eigen::Map<Eigen::ArrayXd> gx(t.grad(x).data(), n);
    gx += gy * (phi + v * kInvSqrt2Pi * (-0.5 * v.square()).exp());
  });
}

Var leaky_relu(Tape& t, Var x, double slope) {
  const Tensor& xv = t.value(x);
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < xv.size(); ++i) out[i] = xv[i] > 0.0 ? xv[i] : slope * xv[i];
  return t.record(std::move(out), {x}, [x, slope](Tape& t, std::size_t self) {
    const Tensor& xv = t.value(x);
    const Tensor& gy = t.grad(self);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < xv.size(); ++i) gx[i] += xv[i] > 0.0 ? gy[i] : slope * gy[i];
  });
}

Var activation(Tape& t, Var x, Activation kind, double slope) {
  return kind == Activation::gelu ? gelu(t, x) : leaky_relu(t, x, slope);
}

Var layer_norm(Tape& t, Var x, Var gain, Var bias, double eps) {
  const Tensor& xv = t.value(x);
  const std::size_t rows = xv.rows();
  const std::size_t width = xv.cols();
  require(width >= 1, "layer_norm needs at least one column");
  require(t.value(gain).size() == width && t.value(bias).size() == width,
          "layer_norm gain/bias width must be " + std::to_string(width));
  Tensor normalized(xv.shape());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* in = xv.data() + r * width;
    double mean = 0.0;
    for (std::size_t c = 0; c < width; ++c) mean += in[c];
    mean /= double(width);
    double var = 0.0;
    for (std::size_t c = 0; c < width; ++c) var += (in[c] - mean) * (in[c] - mean);
    var /= double(width);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    double* o = normalized.data() + r * width;
    for (std::size_t c = 0; c < width; ++c) o[c] = (in[c] - mean) * inv_std[r];
  }
  Tensor out = normalized;
  const Tensor& g = t.value(gain);
  const Tensor& b = t.value(bias);
  for (std::size_t r = 0; r < rows; ++r) {
    double* o = out.data() + r * width;
    for (std::size_t c = 0; c < width; ++c) o[c] = o[c] * g[c] + b[c];
  }
  return t.record(std::move(out), {x, gain, bias},
                  [x, gain, bias, normalized = std::move(normalized), inv_std = std::move(inv_std)](
                      Tape& t, std::size_t self) {
                    const Tensor& gy = t.grad(self);
                    const std::size_t rows = gy.rows();
                    const std::size_t width = gy.cols();
                    if (t.requires_grad(gain)) {
                      Tensor& gg = t.grad(gain);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < width; ++c) gg[c] += gy(r, c) * normalized(r, c);
                    }
                    if (t.requires_grad(bias)) {
                      Tensor& gb = t.grad(bias);
                      for (std::size_t r = 0; r < rows; ++r)
                        for (std::size_t c = 0; c < width; ++c) gb[c] += gy(r, c);
                    }
                    if (!t.requires_grad(x)) return;
                    const Tensor& g = t.value(gain);
                    Tensor& gx = t.grad(x);
                    const double inv_w = 1.0 / double(width);
                    for (std::size_t r = 0; r < rows; ++r) {
                      double sum_d = 0.0, sum_dx = 0.0;
                      for (std::size_t c = 0; c < width; ++c) {
                        const double d = gy(r, c) * g[c];
                        sum_d += d;
                        sum_dx += d * normalized(r, c);
                      }
                      for (std::size_t c = 0; c < width; ++c) {
                        const double d = gy(r, c) * g[c];
                        gx(r, c) += inv_std[r] * (d - inv_w * sum_d - normalized(r, c) * inv_w * sum_dx);
                      }
                    }
                  });
}

Var segment_softmax(Tape& t, Var scores, const EdgeIndex& edges) {
  const Tensor& sv = t.value(scores);
  require(sv.rows() == edges.num_edges(),
          "segment_softmax: " + std::to_string(sv.rows()) + " scores for " +
              std::to_string(edges.num_edges()) + " edges");
  const std::size_t k = sv.cols();
  Tensor out(sv.shape());
  for (std::size_t node = 0; node < edges.num_nodes(); ++node) {
    const std::size_t begin = edges.offsets[node];
    const std::size_t end = edges.offsets[node + 1];
    if (begin == end) fail(ErrorCode::empty_segment, "node " + std::to_string(node) + " has no incoming edges");
    for (std::size_t h = 0; h < k; ++h) {
      double mx = -std::numeric_limits<double>::infinity();
      for (std::size_t e = begin; e < end; ++e) mx = std::max(mx, sv[e * k + h]);
      double total = 0.0;
      for (std::size_t e = begin; e < end; ++e) {
        const double v = std::exp(sv[e * k + h] - mx);
        out[e * k + h] = v;
        total += v;
      }
      const double inv = 1.0 / total;
      for (std::size_t e = begin; e < end; ++e) out[e * k + h] *= inv;
    }
  }
  return t.record(std::move(out), {scores}, [scores, &edges](Tape& t, std::size_t self) {
    const Tensor& y = t.value(self);
    const Tensor& gy = t.grad(self);
    Tensor& gs = t.grad(scores);
    const std::size_t k = y.cols();
    for (std::size_t node = 0; node < edges.num_nodes(); ++node) {
      const std::size_t begin = edges.offsets[node];
      const std::size_t end = edges.offsets[node + 1];
      for (std::size_t h = 0; h < k; ++h) {
        double dot = 0.0;
        for (std::size_t e = begin; e < end; ++e) dot += y[e * k + h] * gy[e * k + h];
        for (std::size_t e = begin; e < end; ++e) gs[e * k + h] += y[e * k + h] * (gy[e * k + h] - dot);
      }
    }
  });
}

Var scatter_weighted_sum(Tape& t, Var values, Var weights, const EdgeIndex& edges) {
  const Tensor& vv = t.value(values);
  const Tensor& wv = t.value(weights);
  require(vv.rows() == edges.num_edges() && wv.size() == edges.num_edges(),
          "scatter_weighted_sum: values " + dims(vv) + ", weights " + dims(wv));
  const std::size_t width = vv.cols();
  Tensor out({edges.num_nodes(), width});
  for (std::size_t e = 0; e < edges.num_edges(); ++e) {
    const auto tgt = static_cast<std::size_t>(edges.target[e]);
    for (std::size_t c = 0; c < width; ++c) out(tgt, c) += wv[e] * vv(e, c);
  }
  return t.record(std::move(out), {values, weights}, [values, weights, &edges](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    const std::size_t width = gy.cols();
    if (t.requires_grad(values)) {
      const Tensor& wv = t.value(weights);
      Tensor& gv = t.grad(values);
      for (std::size_t e = 0; e < edges.num_edges(); ++e) {
        const auto tgt = static_cast<std::size_t>(edges.target[e]);
        for (std::size_t c = 0; c < width; ++c) gv(e, c) += wv[e] * gy(tgt, c);
      }
    }
    if (t.requires_grad(weights)) {
      const Tensor& vv = t.value(values);
      Tensor& gw = t.grad(weights);
      for (std::size_t e = 0; e < edges.num_edges(); ++e) {
        const auto tgt = static_cast<std::size_t>(edges.target[e]);
        double acc = 0.0;
        for (std::size_t c = 0; c < width; ++c) acc += vv(e, c) * gy(tgt, c);
        gw[e] += acc;
      }
    }
  });
}

Var multihead_aggregate(Tape& t, Var node_values, Var weights, const EdgeIndex& edges, std::size_t heads) {
  const Tensor& xv = t.value(node_values);
  const Tensor& wv = t.value(weights);
  require(xv.rows() == edges.num_nodes(), "multihead_aggregate: node rows " + dims(xv));
  require(wv.rows() == edges.num_edges() && wv.cols() == heads,
          "multihead_aggregate: weights " + dims(wv) + " for " + std::to_string(heads) + " heads");
  require(xv.cols() % heads == 0, "multihead_aggregate: width not divisible by heads");
  const std::size_t width = xv.cols();
  const std::size_t per_head = width / heads;
  Tensor out({edges.num_nodes(), width});
  for (std::size_t e = 0; e < edges.num_edges(); ++e) {
    const double* src = xv.data() + static_cast<std::size_t>(edges.source[e]) * width;
    double* dst = out.data() + static_cast<std::size_t>(edges.target[e]) * width;
    for (std::size_t h = 0; h < heads; ++h) {
      const double w = wv[e * heads + h];
      const std::size_t base = h * per_head;
      for (std::size_t f = 0; f < per_head; ++f) dst[base + f] += w * src[base + f];
    }
  }
  return t.record(std::move(out), {node_values, weights},
                  [node_values, weights, &edges, heads](Tape& t, std::size_t self) {
                    const Tensor& gy = t.grad(self);
                    const std::size_t width = gy.cols();
                    const std::size_t per_head = width / heads;
                    const bool need_x = t.requires_grad(node_values);
                    const bool need_w = t.requires_grad(weights);
                    const Tensor& xv = t.value(node_values);
                    const Tensor& wv = t.value(weights);
                    Tensor* gx = need_x ? &t.grad(node_values) : nullptr;
                    Tensor* gw = need_w ? &t.grad(weights) : nullptr;
                    for (std::size_t e = 0; e < edges.num_edges(); ++e) {
                      const auto s = static_cast<std::size_t>(edges.source[e]);
                      const double* g = gy.data() + static_cast<std::size_t>(edges.target[e]) * width;
                      const double* src = xv.data() + s * width;
                      for (std::size_t h = 0; h < heads; ++h) {
                        const std::size_t base = h * per_head;
                        if (need_x) {
                          const double w = wv[e * heads + h];
                          double* gs = gx->data() + s * width;
                          for (std::size_t f = 0; f < per_head; ++f) gs[base + f] += w * g[base + f];
                        }
                        if (need_w) {
                          const auto ph = static_cast<Eigen::Index>(per_head);
                          (*gw)[e * heads + h] += Eigen::Map<const Eigen::VectorXd>(src + base, ph)
                                                      .dot(Eigen::Map<const Eigen::VectorXd>(g + base, ph));
                        }
                      }
                    }
                  });
}

Var gatv2_scores(Tape& t, Var src, Var dst, Var att, const EdgeIndex& edges, std::size_t heads, double slope) {
  const Tensor& sv = t.value(src);
  const Tensor& dv = t.value(dst);
  const Tensor& av = t.value(att);
  require(sv.shape() == dv.shape() && sv.rows() == edges.num_nodes(),
          "gatv2_scores: src " + dims(sv) + ", dst " + dims(dv));
  require(sv.cols() % heads == 0 && av.size() == sv.cols(),
          "gatv2_scores: attention " + dims(av) + " for width " + std::to_string(sv.cols()));
  const std::size_t width = sv.cols();
  const std::size_t per_head = width / heads;
  const auto w = static_cast<Eigen::Index>(width);
  const auto ph = static_cast<Eigen::Index>(per_head);
  const Eigen::Map<const Eigen::ArrayXd> a(av.data(), w);
  Eigen::ArrayXd z(w);
  Tensor out({edges.num_edges(), heads});
  for (std::size_t e = 0; e < edges.num_edges(); ++e) {
    const Eigen::Map<const Eigen::ArrayXd> xs(sv.data() + static_cast<std::size_t>(edges.source[e]) * width, w);
    const Eigen::Map<const Eigen::ArrayXd> xd(dv.data() + static_cast<std::size_t>(edges.target[e]) * width, w);
    z = xs + xd;
    z = z.max(slope * z) * a;
    for (std::size_t h = 0; h < heads; ++h) {
      out[e * heads + h] = z.segment(static_cast<Eigen::Index>(h) * ph, ph).sum();
    }
  }
  return t.record(std::move(out), {src, dst, att}, [src, dst, att, &edges, heads, slope](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    const Tensor& sv = t.value(src);
    const Tensor& dv = t.value(dst);
    const Tensor& av = t.value(att);
    const auto w = static_cast<Eigen::Index>(sv.cols());
    const auto ph = w / static_cast<Eigen::Index>(heads);
    Tensor* gs = t.requires_grad(src) ? &t.grad(src) : nullptr;
    Tensor* gd = t.requires_grad(dst) ? &t.grad(dst) : nullptr;
    Tensor* ga = t.requires_grad(att) ? &t.grad(att) : nullptr;
    const Eigen::Map<const Eigen::ArrayXd> a(av.data(), w);
    Eigen::ArrayXd z(w), g(w), dz(w), ga_acc = Eigen::ArrayXd::Zero(w);
    for (std::size_t e = 0; e < edges.num_edges(); ++e) {
      const auto s = static_cast<std::size_t>(edges.source[e]);
      const auto d = static_cast<std::size_t>(edges.target[e]);
      const Eigen::Map<const Eigen::ArrayXd> xs(sv.data() + s * static_cast<std::size_t>(w), w);
      const Eigen::Map<const Eigen::ArrayXd> xd(dv.data() + d * static_cast<std::size_t>(w), w);
      for (std::size_t h = 0; h < heads; ++h) {
        g.segment(static_cast<Eigen::Index>(h) * ph, ph).setConstant(gy[e * heads + h]);
      }
      z = xs + xd;
      if (ga) ga_acc += g * z.max(slope * z);
      dz = g * a * (z > 0.0).select(Eigen::ArrayXd::Ones(w), slope);
      if (gs) Eigen::Map<Eigen::ArrayXd>(gs->data() + s * static_cast<std::size_t>(w), w) += dz;
      if (gd) Eigen::Map<Eigen::ArrayXd>(gd->data() + d * static_cast<std::size_t>(w), w) += dz;
    }
    if (ga) Eigen::Map<Eigen::ArrayXd>(ga->data(), w) += ga_acc;
  });
}

Var static_gat_scores(Tape& t, Var projected, Var att_dst, Var att_src, const EdgeIndex& edges,
                      std::size_t heads, double slope) {
  const Tensor& xv = t.value(projected);
  require(xv.rows() == edges.num_nodes() && xv.cols() % heads == 0,
          "static_gat_scores: projected " + dims(xv));
  require(t.value(att_dst).size() == xv.cols() && t.value(att_src).size() == xv.cols(),
          "static_gat_scores: attention width");
  const std::size_t n = xv.rows();
  const std::size_t width = xv.cols();
  const std::size_t per_head = width / heads;
  // Per-node halves of the attention dot product.
  auto node_terms = [&](const Tensor& a) {
    Tensor terms({n, heads});
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < heads; ++h) {
        double acc = 0.0;
        for (std::size_t f = 0; f < per_head; ++f) acc += a[h * per_head + f] * xv(i, h * per_head + f);
        terms(i, h) = acc;
      }
    return terms;
  };
  Tensor dst_terms = node_terms(t.value(att_dst));
  Tensor src_terms = node_terms(t.value(att_src));
  Tensor out({edges.num_edges(), heads});
  for (std::size_t e = 0; e < edges.num_edges(); ++e) {
    for (std::size_t h = 0; h < heads; ++h) {
      const double z = dst_terms(static_cast<std::size_t>(edges.target[e]), h) +
                       src_terms(static_cast<std::size_t>(edges.source[e]), h);
      out[e * heads + h] = z > 0.0 ? z : slope * z;
    }
  }
  return t.record(
      std::move(out), {projected, att_dst, att_src},
      [projected, att_dst, att_src, &edges, heads, slope, dst_terms = std::move(dst_terms),
       src_terms = std::move(src_terms)](Tape& t, std::size_t self) {
        const Tensor& gy = t.grad(self);
        const Tensor& xv = t.value(projected);
        const std::size_t n = xv.rows();
        const std::size_t width = xv.cols();
        const std::size_t per_head = width / heads;
        Tensor g_dst({n, heads});
        Tensor g_src({n, heads});
        for (std::size_t e = 0; e < edges.num_edges(); ++e) {
          const auto d = static_cast<std::size_t>(edges.target[e]);
          const auto s = static_cast<std::size_t>(edges.source[e]);
          for (std::size_t h = 0; h < heads; ++h) {
            const double z = dst_terms(d, h) + src_terms(s, h);
            const double dz = gy[e * heads + h] * (z > 0.0 ? 1.0 : slope);
            g_dst(d, h) += dz;
            g_src(s, h) += dz;
          }
        }
        const Tensor& ad = t.value(att_dst);
        const Tensor& as = t.value(att_src);
        Tensor* gx = t.requires_grad(projected) ? &t.grad(projected) : nullptr;
        Tensor* gad = t.requires_grad(att_dst) ? &t.grad(att_dst) : nullptr;
        Tensor* gas = t.requires_grad(att_src) ? &t.grad(att_src) : nullptr;
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t h = 0; h < heads; ++h)
            for (std::size_t f = 0; f < per_head; ++f) {
              const std::size_t c = h * per_head + f;
              if (gx) (*gx)(i, c) += g_dst(i, h) * ad[c] + g_src(i, h) * as[c];
              if (gad) (*gad)[c] += g_dst(i, h) * xv(i, c);
              if (gas) (*gas)[c] += g_src(i, h) * xv(i, c);
            }
      });
}

Var head_max_pool(Tape& t, Var x, std::size_t heads) {
  const Tensor& xv = t.value(x);
  require(heads >= 1 && xv.cols() % heads == 0, "head_max_pool: " + dims(xv));
  const std::size_t n = xv.rows();
  const std::size_t per_head = xv.cols() / heads;
  Tensor out({n, per_head});
  std::vector<std::uint16_t> argmax(n * per_head, 0);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = xv.data() + i * xv.cols();
    for (std::size_t f = 0; f < per_head; ++f) {
      double best = row[f];
      std::uint16_t arg = 0;
      for (std::size_t h = 1; h < heads; ++h) {
        if (row[h * per_head + f] > best) {
          best = row[h * per_head + f];
          arg = static_cast<std::uint16_t>(h);
        }
      }
      out(i, f) = best;
      argmax[i * per_head + f] = arg;
    }
  }
  return t.record(std::move(out), {x}, [x, per_head, argmax = std::move(argmax)](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < gy.rows(); ++i)
      for (std::size_t f = 0; f < per_head; ++f)
        gx(i, argmax[i * per_head + f] * per_head + f) += gy(i, f);
  });
}

Var head_mean_pool(Tape& t, Var x, std::size_t heads) {
  const Tensor& xv = t.value(x);
  require(heads >= 1 && xv.cols() % heads == 0, "head_mean_pool: " + dims(xv));
  const std::size_t per_head = xv.cols() / heads;
  Tensor out({xv.rows(), per_head});
  const double inv = 1.0 / double(heads);
  for (std::size_t i = 0; i < xv.rows(); ++i)
    for (std::size_t h = 0; h < heads; ++h)
      for (std::size_t f = 0; f < per_head; ++f) out(i, f) += inv * xv(i, h * per_head + f);
  return t.record(std::move(out), {x}, [x, heads, per_head, inv](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < gy.rows(); ++i)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t f = 0; f < per_head; ++f) gx(i, h * per_head + f) += inv * gy(i, f);
  });
}

Var gather_rows(Tape& t, Var x, std::span<const std::int32_t> rows) {
  const Tensor& xv = t.value(x);
  const std::size_t width = xv.cols();
  Tensor out({rows.size(), width});
  for (std::size_t r = 0; r < rows.size(); ++r) {
    if (rows[r] < 0 || static_cast<std::size_t>(rows[r]) >= xv.rows()) {
      fail(ErrorCode::index_out_of_range, "gather_rows index " + std::to_string(rows[r]));
    }
    std::copy_n(xv.data() + static_cast<std::size_t>(rows[r]) * width, width, out.data() + r * width);
  }
  std::vector<std::int32_t> idx(rows.begin(), rows.end());
  return t.record(std::move(out), {x}, [x, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    Tensor& gx = t.grad(x);
    const std::size_t width = gy.cols();
    for (std::size_t r = 0; r < idx.size(); ++r)
      for (std::size_t c = 0; c < width; ++c) gx(static_cast<std::size_t>(idx[r]), c) += gy(r, c);
  });
}

Var overwrite_rows(Tape& t, Var base, Var row, std::span<const std::int32_t> rows) {
  const Tensor& bv = t.value(base);
  const Tensor& rv = t.value(row);
  require(rv.size() == bv.cols(), "overwrite_rows: row " + dims(rv) + " into " + dims(bv));
  Tensor out = bv;
  const std::size_t width = bv.cols();
  for (auto r : rows) {
    if (r < 0 || static_cast<std::size_t>(r) >= bv.rows()) {
      fail(ErrorCode::index_out_of_range, "overwrite_rows index " + std::to_string(r));
    }
    std::copy_n(rv.data(), width, out.data() + static_cast<std::size_t>(r) * width);
  }
  std::vector<std::int32_t> idx(rows.begin(), rows.end());
  return t.record(std::move(out), {base, row}, [base, row, idx = std::move(idx)](Tape& t, std::size_t self) {
    const Tensor& gy = t.grad(self);
    const std::size_t width = gy.cols();
    if (t.requires_grad(base)) {
      Tensor g = gy;
      for (auto r : idx) std::fill_n(g.data() + static_cast<std::size_t>(r) * width, width, 0.0);
      t.grad(base).mat() += g.mat();
    }
    if (t.requires_grad(row)) {
      Tensor& gr = t.grad(row);
      for (auto r : idx)
        for (std::size_t c = 0; c < width; ++c) gr[c] += gy(static_cast<std::size_t>(r), c);
    }
  });
}

Var segment_mean(Tape& t, Var x, std::span<const std::int32_t> group, std::size_t num_groups) {
  const Tensor& xv = t.value(x);
  require(group.size() == xv.rows(), "segment_mean: group ids for " + dims(xv));
  const std::size_t width = xv.cols();
  std::vector<double> counts(num_groups, 0.0);
  for (auto g : group) {
    if (g < 0 || static_cast<std::size_t>(g) >= num_groups) {
      fail(ErrorCode::index_out_of_range, "segment_mean group " + std::to_string(g));
    }
    counts[static_cast<std::size_t>(g)] += 1.0;
  }
  Tensor out({num_groups, width});
  for (std::size_t i = 0; i < xv.rows(); ++i) {
    const auto g = static_cast<std::size_t>(group[i]);
    for (std::size_t c = 0; c < width; ++c) out(g, c) += xv(i, c) / counts[g];
  }
  std::vector<std::int32_t> ids(group.begin(), group.end());
  return t.record(std::move(out), {x},
                  [x, ids = std::move(ids), counts = std::move(counts)](Tape& t, std::size_t self) {
                    const Tensor& gy = t.grad(self);
                    Tensor& gx = t.grad(x);
                    const std::size_t width = gy.cols();
                    for (std::size_t i = 0; i < ids.size(); ++i) {
                      const auto g = static_cast<std::size_t>(ids[i]);
                      for (std::size_t c = 0; c < width; ++c) gx(i, c) += gy(g, c) / counts[g];
                    }
                  });
}

Var dropout(Tape& t, Var x, double p, bool training, std::mt19937_64& rng) {
  if (!(p >= 0.0 && p < 1.0)) fail(ErrorCode::invalid_argument, "dropout probability must be in [0, 1)");
  if (!training || p == 0.0) return x;
  const Tensor& xv = t.value(x);
  Tensor mask(xv.shape());
  std::uniform_real_distribution<double> uniform(0.0, 1.0);
  const double keep_scale = 1.0 / (1.0 - p);
  for (std::size_t i = 0; i < mask.size(); ++i) mask[i] = uniform(rng) < p ? 0.0 : keep_scale;
  Tensor out = xv;
  out.mat().array() *= mask.mat().array();
  return t.record(std::move(out), {x}, [x, mask = std::move(mask)](Tape& t, std::size_t self) {
    t.grad(x).mat().array() += t.grad(self).mat().array() * mask.mat().array();
  });
}

Var softmax_cross_entropy(Tape& t, Var logits, std::span<const int> labels) {
  const Tensor& lv = t.value(logits);
  const std::size_t batch = lv.rows();
  const std::size_t classes = lv.cols();
  require(labels.size() == batch, "softmax_cross_entropy: " + std::to_string(labels.size()) +
                                      " labels for " + std::to_string(batch) + " rows");
  Tensor probs(lv.shape());
  double loss = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] < 0 || static_cast<std::size_t>(labels[b]) >= classes) {
      fail(ErrorCode::label_out_of_range, "label " + std::to_string(labels[b]));
    }
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < classes; ++c) mx = std::max(mx, lv(b, c));
    double total = 0.0;
    for (std::size_t c = 0; c < classes; ++c) total += std::exp(lv(b, c) - mx);
    const double log_z = mx + std::log(total);
    for (std::size_t c = 0; c < classes; ++c) probs(b, c) = std::exp(lv(b, c) - log_z);
    loss += log_z - lv(b, static_cast<std::size_t>(labels[b]));
  }
  loss /= double(batch);
  std::vector<int> ys(labels.begin(), labels.end());
  return t.record(Tensor::scalar(loss), {logits},
                  [logits, probs = std::move(probs), ys = std::move(ys)](Tape& t, std::size_t self) {
                    const double g = t.grad(self)[0] / double(probs.rows());
                    Tensor& gl = t.grad(logits);
                    for (std::size_t b = 0; b < probs.rows(); ++b)
                      for (std::size_t c = 0; c < probs.cols(); ++c) {
                        const double onehot = static_cast<int>(c) == ys[b] ? 1.0 : 0.0;
                        gl(b, c) += g * (probs(b, c) - onehot);
                      }
                  });
}

Var sum(Tape& t, Var x) {
  const double total = t.value(x).mat().sum();
  return t.record(Tensor::scalar(total), {x}, [x](Tape& t, std::size_t self) {
    t.grad(x).mat().array() += t.grad(self)[0];
  });
}

Var weighted_sum(Tape& t, Var x, const Tensor& coeffs) {
  const Tensor& xv = t.value(x);
  require(coeffs.size() == xv.size(), "weighted_sum coefficients " + dims(coeffs) + " for " + dims(xv));
  double total = 0.0;
  for (std::size_t i = 0; i < xv.size(); ++i) total += coeffs[i] * xv[i];
  return t.record(Tensor::scalar(total), {x}, [x, coeffs](Tape& t, std::size_t self) {
    const double g = t.grad(self)[0];
    Tensor& gx = t.grad(x);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g * coeffs[i];
  });
}

}  // namespace cgat::ad
