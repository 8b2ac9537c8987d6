#include <cmath>

#include "cgat/error.hpp"
#include "cgat/model.hpp"

namespace cgat {

std::string to_string(Architecture a) {
  switch (a) {
    case Architecture::cgat: return "cgat";
    case Architecture::gcn_mean: return "gcn_mean";
    case Architecture::gat_mean: return "gat_mean";
  }
  return "cgat";
}

std::string to_string(AttentionKind a) {
  return a == AttentionKind::static_gat ? "static" : "dynamic";
}

std::string to_string(HeadMerge m) {
  switch (m) {
    case HeadMerge::max: return "max";
    case HeadMerge::mean: return "mean";
    case HeadMerge::concat: return "concat";
  }
  return "max";
}

Architecture parse_architecture(const std::string& text) {
  if (text == "cgat") return Architecture::cgat;
  if (text == "gcn_mean" || text == "gcn") return Architecture::gcn_mean;
  if (text == "gat_mean" || text == "gat") return Architecture::gat_mean;
  fail(ErrorCode::invalid_config, "unknown architecture '" + text + "'");
}

AttentionKind parse_attention_kind(const std::string& text) {
  if (text == "dynamic") return AttentionKind::dynamic_gatv2;
  if (text == "static") return AttentionKind::static_gat;
  fail(ErrorCode::invalid_config, "unknown attention kind '" + text + "'");
}

HeadMerge parse_head_merge(const std::string& text) {
  if (text == "max") return HeadMerge::max;
  if (text == "mean") return HeadMerge::mean;
  if (text == "concat") return HeadMerge::concat;
  fail(ErrorCode::invalid_config, "unknown head merge '" + text + "'");
}

void validate(const ModelConfig& c) {
  if (c.blocks < 1 || c.blocks > 15) fail(ErrorCode::invalid_config, "blocks must be in 1..15");
  if (c.heads < 1) fail(ErrorCode::invalid_config, "heads must be positive");
  if (c.hidden < 1) fail(ErrorCode::invalid_config, "hidden width must be positive");
  if (c.classes < 2) fail(ErrorCode::invalid_config, "need at least two classes");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) fail(ErrorCode::invalid_config, "dropout must be in [0, 1)");
}

std::string model_name(const ModelConfig& c) {
  const std::string features = to_string(c.features);
  switch (c.architecture) {
    case Architecture::cgat:
      return std::to_string(c.blocks) + "-CGAT" + (c.cls_mode == ClsMode::directed ? "→" : "↔") + "-" +
             features;
    case Architecture::gcn_mean: return std::to_string(c.blocks) + "-GCN-mean-" + features;
    case Architecture::gat_mean: return std::to_string(c.blocks) + "-GAT-mean-" + features;
  }
  return "";
}

namespace {

std::string block_name(int l, const char* suffix) {
  return "block" + std::to_string(l) + "." + suffix;
}

Tensor glorot(std::size_t rows, std::size_t cols, std::size_t fan_in, std::size_t fan_out,
              std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  std::uniform_real_distribution<double> dist(-limit, limit);
  Tensor t({rows, cols});
  for (std::size_t i = 0; i < t.size(); ++i) t[i] = dist(rng);
  return t;
}

bool has_attention(const ModelConfig& c) {
  return c.architecture != Architecture::gcn_mean;
}

std::size_t conv_heads(const ModelConfig& c) {
  return has_attention(c) ? static_cast<std::size_t>(c.heads) : 1;
}

}  // namespace

Model init_model(const ModelConfig& config, std::uint64_t seed) {
  validate(config);
  std::mt19937_64 rng(seed);
  const std::size_t d = config.input_width();
  const std::size_t f = config.hidden;
  const std::size_t k = conv_heads(config);
  const std::size_t c = config.classes;
  Model m{config, {}};
  auto& p = m.params;
  p.add("input.weight", glorot(d, f, d, f, rng));
  p.add("input.bias", Tensor({f}));
  if (config.uses_cls()) p.add("cls_embedding", glorot(1, d, 1, d, rng));
  for (int l = 0; l < config.blocks; ++l) {
    // Each head's F x F transform sits in its own column block.
    if (config.architecture == Architecture::gcn_mean) {
      p.add(block_name(l, "conv.weight"), glorot(f, f, f, f, rng));
    } else if (config.attention == AttentionKind::dynamic_gatv2) {
      Tensor src({f, k * f}), dst({f, k * f}), att({k, f});
      for (std::size_t h = 0; h < k; ++h) {
        const Tensor ws = glorot(f, f, f, f, rng);
        const Tensor wd = glorot(f, f, f, f, rng);
        const Tensor a = glorot(1, f, f, 1, rng);
        for (std::size_t r = 0; r < f; ++r) {
          for (std::size_t q = 0; q < f; ++q) {
            src(r, h * f + q) = ws(r, q);
            dst(r, h * f + q) = wd(r, q);
          }
          att(h, r) = a[r];
        }
      }
      p.add(block_name(l, "conv.w_src"), std::move(src));
      p.add(block_name(l, "conv.w_dst"), std::move(dst));
      p.add(block_name(l, "conv.att"), std::move(att));
    } else {
      Tensor w({f, k * f}), att_src({k, f}), att_dst({k, f});
      for (std::size_t h = 0; h < k; ++h) {
        const Tensor wh = glorot(f, f, f, f, rng);
        const Tensor a = glorot(1, 2 * f, 2 * f, 1, rng);
        for (std::size_t r = 0; r < f; ++r) {
          for (std::size_t q = 0; q < f; ++q) w(r, h * f + q) = wh(r, q);
          att_dst(h, r) = a[r];
          att_src(h, r) = a[f + r];
        }
      }
      p.add(block_name(l, "conv.weight"), std::move(w));
      p.add(block_name(l, "conv.att_src"), std::move(att_src));
      p.add(block_name(l, "conv.att_dst"), std::move(att_dst));
    }
    if (config.head_bias) p.add(block_name(l, "conv.bias"), Tensor({k * f}));
    if (has_attention(config) && config.head_merge == HeadMerge::concat) {
      p.add(block_name(l, "merge.weight"), glorot(k * f, f, k * f, f, rng));
      p.add(block_name(l, "merge.bias"), Tensor({f}));
    }
    p.add(block_name(l, "norm1.gain"), Tensor({f}, 1.0));
    p.add(block_name(l, "norm1.bias"), Tensor({f}));
    p.add(block_name(l, "linear.weight"), glorot(f, f, f, f, rng));
    p.add(block_name(l, "linear.bias"), Tensor({f}));
    p.add(block_name(l, "norm2.gain"), Tensor({f}, 1.0));
    p.add(block_name(l, "norm2.bias"), Tensor({f}));
  }
  p.add("head.weight", glorot(f, c, f, c, rng));
  p.add("head.bias", Tensor({c}));
  return m;
}

std::vector<Var> bind_params(Tape& tape, Model& model) {
  std::vector<Var> vars;
  for (auto& p : model.params.params()) vars.push_back(tape.param(p));
  return vars;
}

std::vector<Var> bind_constants(Tape& tape, const Model& model) {
  std::vector<Var> vars;
  for (const auto& p : model.params.params()) vars.push_back(tape.constant(p.value));
  return vars;
}

Tensor gcn_coefficients(const EdgeIndex& edges) {
  std::vector<double> out_degree(edges.num_nodes(), 0.0);
  std::vector<double> in_degree(edges.num_nodes(), 0.0);
  for (std::size_t e = 0; e < edges.num_edges(); ++e) {
    out_degree[edges.source[e]] += 1.0;
    in_degree[edges.target[e]] += 1.0;
  }
  Tensor c({edges.num_edges()});
  for (std::size_t e = 0; e < edges.num_edges(); ++e) {
    c[e] = 1.0 / std::sqrt(out_degree[edges.source[e]] * in_degree[edges.target[e]]);
  }
  return c;
}

AugmentedGraph prepare_graph(const ModelConfig& config, const Graph& graph) {
  return config.uses_cls() ? augment_with_cls(graph, config.cls_mode) : add_self_loops(graph);
}

namespace {

class Forward {
 public:
  Forward(Tape& tape, const Model& model, std::span<const Var> params)
      : t_(tape), m_(model), c_(model.config), vars_(params) {
    if (params.size() != model.params.size()) {
      fail(ErrorCode::shape_mismatch, "parameter bindings do not match the model");
    }
  }

  Var p(const std::string& name) const { return vars_[m_.params.index_of(name)]; }

  // Raw per-edge, per-head scores and the source-side projection used for
  // aggregation.
  std::pair<Var, Var> scores(int l, Var h, const EdgeIndex& edges) const {
    const std::size_t k = c_.heads;
    if (c_.attention == AttentionKind::dynamic_gatv2) {
      const Var src = ad::matmul(t_, h, p(block_name(l, "conv.w_src")));
      const Var dst = ad::matmul(t_, h, p(block_name(l, "conv.w_dst")));
      return {ad::gatv2_scores(t_, src, dst, p(block_name(l, "conv.att")), edges, k), src};
    }
    const Var projected = ad::matmul(t_, h, p(block_name(l, "conv.weight")));
    return {ad::static_gat_scores(t_, projected, p(block_name(l, "conv.att_dst")),
                                  p(block_name(l, "conv.att_src")), edges, k),
            projected};
  }

  // Message passing, per-head bias and GeLU, then head merge. Returns the
  // merged [N x F] conv output and the attention weights (if any).
  std::pair<Var, std::optional<Var>> conv(int l, Var h, const EdgeIndex& edges, const Tensor* gcn) const {
    const std::size_t k = conv_heads(c_);
    Var messages;
    std::optional<Var> attention;
    if (c_.architecture == Architecture::gcn_mean) {
      const Var projected = ad::matmul(t_, h, p(block_name(l, "conv.weight")));
      messages = ad::multihead_aggregate(t_, projected, t_.constant(*gcn), edges, 1);
    } else {
      auto [raw, src] = scores(l, h, edges);
      attention = ad::segment_softmax(t_, raw, edges);
      messages = ad::multihead_aggregate(t_, src, *attention, edges, k);
    }
    if (c_.head_bias) messages = ad::add_bias(t_, messages, p(block_name(l, "conv.bias")));
    messages = ad::gelu(t_, messages);
    if (k == 1) return {messages, attention};
    switch (c_.head_merge) {
      case HeadMerge::max: return {ad::head_max_pool(t_, messages, k), attention};
      case HeadMerge::mean: return {ad::head_mean_pool(t_, messages, k), attention};
      case HeadMerge::concat:
        return {ad::linear(t_, messages, p(block_name(l, "merge.weight")), p(block_name(l, "merge.bias"))),
                attention};
    }
    return {messages, attention};
  }

  std::pair<Var, std::optional<Var>> block(int l, Var h, const EdgeIndex& edges, const Tensor* gcn) const {
    auto [merged, attention] = conv(l, h, edges, gcn);
    const Var h1 = ad::layer_norm(t_, ad::add(t_, h, merged), p(block_name(l, "norm1.gain")),
                                  p(block_name(l, "norm1.bias")));
    const Var ff = ad::gelu(t_, ad::linear(t_, h1, p(block_name(l, "linear.weight")),
                                            p(block_name(l, "linear.bias"))));
    const Var h2 = ad::layer_norm(t_, ad::add(t_, h1, ff), p(block_name(l, "norm2.gain")),
                                  p(block_name(l, "norm2.bias")));
    return {h2, attention};
  }

  ForwardVars run(const GraphBatch& batch, bool training, std::mt19937_64& rng) const {
    if (batch.x.rank() != 2 || batch.x.cols() != c_.input_width()) {
      fail(ErrorCode::config_mismatch, "batch feature width does not match the model");
    }
    if (c_.uses_cls()) {
      if (!batch.has_cls()) fail(ErrorCode::config_mismatch, "CGAT expects CLS-augmented graphs");
      if (*batch.cls_mode != c_.cls_mode) {
        fail(ErrorCode::config_mismatch, "batch CLS mode is " + to_string(*batch.cls_mode) + ", model expects " +
                                             to_string(c_.cls_mode));
      }
    } else if (batch.has_cls()) {
      fail(ErrorCode::cls_node_present, "mean-readout baselines take graphs without a CLS node");
    }

    Var x = t_.constant(batch.x);
    if (c_.uses_cls()) x = ad::overwrite_rows(t_, x, p("cls_embedding"), batch.cls_indices);
    Var h = ad::linear(t_, x, p("input.weight"), p("input.bias"));

    std::optional<Tensor> gcn;
    if (c_.architecture == Architecture::gcn_mean) gcn = gcn_coefficients(batch.edges);

    ForwardVars out;
    for (int l = 0; l < c_.blocks; ++l) {
      auto [next, attention] = block(l, h, batch.edges, gcn ? &*gcn : nullptr);
      h = next;
      out.hidden.push_back(h);
      if (attention) out.attention.push_back(*attention);
    }

    Var readout = c_.uses_cls() ? ad::gather_rows(t_, h, batch.cls_indices)
                                : ad::segment_mean(t_, h, batch.graph_id, batch.num_graphs());
    readout = ad::dropout(t_, readout, c_.dropout, training, rng);
    out.logits = ad::linear(t_, readout, p("head.weight"), p("head.bias"));
    return out;
  }

 private:
  Tape& t_;
  const Model& m_;
  const ModelConfig& c_;
  std::span<const Var> vars_;
};

}  // namespace

ForwardVars forward(Tape& tape, const Model& model, std::span<const Var> params, const GraphBatch& batch,
                    bool training, std::mt19937_64& rng) {
  return Forward(tape, model, params).run(batch, training, rng);
}

ForwardResult forward(const Model& model, const GraphBatch& batch) {
  Tape tape(false);
  const auto vars = bind_constants(tape, model);
  std::mt19937_64 rng(0);
  const auto fv = forward(tape, model, vars, batch, false, rng);
  ForwardResult r;
  r.logits = tape.value(fv.logits);
  for (std::size_t l = 0; l < fv.attention.size(); ++l) {
    r.attention.push_back({static_cast<int>(l), tape.value(fv.attention[l])});
  }
  for (Var h : fv.hidden) r.hidden.push_back(tape.value(h));
  return r;
}

Prediction softmax_predict(const Tensor& logits) {
  Prediction out;
  out.probabilities = Tensor({logits.rows(), logits.cols()});
  for (std::size_t b = 0; b < logits.rows(); ++b) {
    double top = logits(b, 0);
    int label = 0;
    for (std::size_t c = 1; c < logits.cols(); ++c) {
      if (logits(b, c) > top) {
        top = logits(b, c);
        label = static_cast<int>(c);
      }
    }
    double z = 0.0;
    for (std::size_t c = 0; c < logits.cols(); ++c) z += std::exp(logits(b, c) - top);
    for (std::size_t c = 0; c < logits.cols(); ++c) out.probabilities(b, c) = std::exp(logits(b, c) - top) / z;
    out.labels.push_back(label);
  }
  return out;
}

Prediction predict(const Model& model, const GraphBatch& batch) {
  return softmax_predict(forward(model, batch).logits);
}

Tensor attention_scores(const Model& model, int block, const Tensor& h, const EdgeIndex& edges) {
  if (!has_attention(model.config)) fail(ErrorCode::invalid_config, "GCN blocks have no attention");
  if (block < 0 || block >= model.config.blocks) fail(ErrorCode::invalid_argument, "block out of range");
  Tape tape(false);
  const auto vars = bind_constants(tape, model);
  Forward f(tape, model, vars);
  return tape.value(f.scores(block, tape.constant(h), edges).first);
}

}  // namespace cgat
