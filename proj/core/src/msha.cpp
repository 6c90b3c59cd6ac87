#include "uamsim/msha.hpp"

#include <cmath>

#include <json.hpp>

#include "uamsim/errors.hpp"
#include "uamsim/nn/checkpoint.hpp"
#include "uamsim/rng.hpp"

namespace uamsim {

using nn::Param;
using nn::Shape;
using nn::Tape;
using nn::Var;

namespace {

// SINR windows arrive in dB (tens of dB); a fixed input scale keeps all
// network inputs at unit order.
constexpr double kSinrInputScale = 1.0 / 60.0;

constexpr int kUamCols = 3;
constexpr int kPaxCols = 7;

int flat_input_width(const MshaConfig& c) {
  return c.n1 * kUamCols + c.n2 * kPaxCols + 2 * c.window_side * c.window_side;
}

int output_ffn_input_width(const MshaConfig& c) {
  int side2 = c.window_side * c.window_side;
  switch (c.variant) {
    case ModelVariant::LinearEncoder:
      return flat_input_width(c);
    case ModelVariant::DesignedEncoders:
      return c.entity_rows() * c.c2 + 2 * side2 * c.c1;
    case ModelVariant::MultiSourceFusion:
      return side2 * c.c3();
    case ModelVariant::FullMsha:
      return side2 * c.dk() * c.h_head;
  }
  throw ConfigError("unknown model variant");
}

}  // namespace

ModelVariant variant_from_flags(bool le, bool de, bool msfea, bool haf) {
  if (le && !de && !msfea && !haf) return ModelVariant::LinearEncoder;
  if (!le && de && !msfea && !haf) return ModelVariant::DesignedEncoders;
  if (!le && de && msfea && !haf) return ModelVariant::MultiSourceFusion;
  if (!le && de && msfea && haf) return ModelVariant::FullMsha;
  throw ConfigError("unsupported LE/DE/MSFea/HAF flag combination");
}

void MshaConfig::validate() const {
  if (c1 < 1 || c2 < 1) throw ConfigError("c1 and c2 must be positive");
  if (h_head < 2 || h_head % 2 != 0) throw ConfigError("h_head must be even and >= 2");
  if (c3() % h_head != 0) throw ConfigError("c1 + c2 must be divisible by h_head");
  if (n_win < 1) throw ConfigError("n_win must be >= 1");
  if (window_side % n_win != 0) {
    throw ConfigError("window_side " + std::to_string(window_side) +
                      " is not divisible by n_win " + std::to_string(n_win));
  }
  if (out_width < 1) throw ConfigError("out_width must be positive");
  if (n1 < 1) throw ConfigError("n1 must be >= 1");
  if (n2 < 1) throw ConfigError("n2 must be >= 1");
  if (k_actions < 3) throw ConfigError("k_actions must be >= 3");
  if (enc_heads < 1 || c2 % enc_heads != 0) {
    throw ConfigError("c2 must be divisible by enc_heads");
  }
  if (dk() < 1) throw ConfigError("d_k must be positive");
}

std::string MshaConfig::to_json() const {
  nlohmann::json j;
  j["c1"] = c1;
  j["c2"] = c2;
  j["h_head"] = h_head;
  j["n_win"] = n_win;
  j["d_k"] = d_k;
  j["out_width"] = out_width;
  j["n1"] = n1;
  j["n2"] = n2;
  j["window_side"] = window_side;
  j["k_actions"] = k_actions;
  j["enc_heads"] = enc_heads;
  j["variant"] = static_cast<int>(variant);
  return j.dump();
}

MshaConfig MshaConfig::from_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("bad model config: ") + e.what());
  }
  MshaConfig c;
  c.c1 = j.value("c1", c.c1);
  c.c2 = j.value("c2", c.c2);
  c.h_head = j.value("h_head", c.h_head);
  c.n_win = j.value("n_win", c.n_win);
  c.d_k = j.value("d_k", c.d_k);
  c.out_width = j.value("out_width", c.out_width);
  c.n1 = j.value("n1", c.n1);
  c.n2 = j.value("n2", c.n2);
  c.window_side = j.value("window_side", c.window_side);
  c.k_actions = j.value("k_actions", c.k_actions);
  c.enc_heads = j.value("enc_heads", c.enc_heads);
  c.variant = static_cast<ModelVariant>(j.value("variant", 4));
  c.validate();
  return c;
}

std::size_t expected_param_count(const MshaConfig& c) {
  std::size_t count = 0;
  auto mat = [&](int rows, int cols) { count += std::size_t(rows) * cols + cols; };  // weight+bias
  if (c.variant != ModelVariant::LinearEncoder) {
    count += 2 * (std::size_t(3 * 3 * 1) * c.c1 + c.c1);       // two conv encoders
    count += std::size_t(kUamCols) * 4 * c.c2 +                 // lstm wx
             std::size_t(c.c2) * 4 * c.c2 + 4 * c.c2;           // lstm wh + bias
    int dh = c.c2 / c.enc_heads;
    mat(kPaxCols, c.enc_heads * dh);                            // mha wq
    mat(kPaxCols, c.enc_heads * dh);                            // mha wk
    mat(kPaxCols, c.enc_heads * dh);                            // mha wv
    mat(c.enc_heads * dh, c.c2);                                // mha wo
  }
  if (c.variant == ModelVariant::FullMsha) {
    mat(c.c3(), c.c3());  // fusion FFN
    int d = c.c3() / c.h_head;
    for (int b = 0; b < 2; ++b) {
      mat(d, c.dk());  // wq
      mat(d, c.dk());  // wk
      mat(d, c.dk());  // wv
    }
  }
  mat(output_ffn_input_width(c), c.out_width);  // output FFN
  for (int head = 0; head < 2; ++head) {
    mat(c.out_width, c.out_width);
    mat(c.out_width, c.out_width);
  }
  mat(c.out_width, c.k_actions + 1);  // policy logits
  mat(c.out_width, 1);                // value
  return count;
}

MshaModel::MshaModel(const MshaConfig& config, std::uint64_t init_seed) {
  config.validate();
  params_.config = config;
  nn::ParamStore& st = params_.store;
  std::mt19937_64 rng = make_rng(init_seed, "init");

  auto linear = [&](const std::string& name, int rows, int cols) {
    Param& w = st.add(name + ".w", {rows, cols});
    nn::init_uniform_fan_in(w, rows, rng);
    st.add(name + ".b", {cols});  // biases start at zero
  };

  if (config.variant != ModelVariant::LinearEncoder) {
    Param& ce = st.add("enc.conv_e.w", {3, 3, 1, config.c1});
    nn::init_uniform_fan_in(ce, 9, rng);
    st.add("enc.conv_e.b", {config.c1});
    Param& cr = st.add("enc.conv_r.w", {3, 3, 1, config.c1});
    nn::init_uniform_fan_in(cr, 9, rng);
    st.add("enc.conv_r.b", {config.c1});

    Param& wx = st.add("enc.lstm.wx", {kUamCols, 4 * config.c2});
    nn::init_uniform_fan_in(wx, kUamCols + config.c2, rng);
    Param& wh = st.add("enc.lstm.wh", {config.c2, 4 * config.c2});
    nn::init_uniform_fan_in(wh, kUamCols + config.c2, rng);
    st.add("enc.lstm.b", {4 * config.c2});

    int dh = config.c2 / config.enc_heads;
    linear("enc.mha.q", kPaxCols, config.enc_heads * dh);
    linear("enc.mha.k", kPaxCols, config.enc_heads * dh);
    linear("enc.mha.v", kPaxCols, config.enc_heads * dh);
    linear("enc.mha.o", config.enc_heads * dh, config.c2);
  }
  if (config.variant == ModelVariant::FullMsha) {
    linear("attn.fuse", config.c3(), config.c3());
    int d = config.c3() / config.h_head;
    linear("attn.local.q", d, config.dk());
    linear("attn.local.k", d, config.dk());
    linear("attn.local.v", d, config.dk());
    linear("attn.global.q", d, config.dk());
    linear("attn.global.k", d, config.dk());
    linear("attn.global.v", d, config.dk());
  }
  linear("out", output_ffn_input_width(config), config.out_width);
  linear("pi.1", config.out_width, config.out_width);
  linear("pi.2", config.out_width, config.out_width);
  linear("pi.3", config.out_width, config.k_actions + 1);
  linear("vf.1", config.out_width, config.out_width);
  linear("vf.2", config.out_width, config.out_width);
  linear("vf.3", config.out_width, 1);

  params_.adam = nn::AdamState::for_params(st, 1e-3);
}

void MshaModel::check_observation(const Observation& obs) const {
  const MshaConfig& c = params_.config;
  if (obs.n1 != c.n1 || obs.n2 != c.n2 || obs.window_side != c.window_side) {
    throw ShapeError("observation (n1=" + std::to_string(obs.n1) + ", n2=" +
                     std::to_string(obs.n2) + ", side=" + std::to_string(obs.window_side) +
                     ") does not match model config (n1=" + std::to_string(c.n1) + ", n2=" +
                     std::to_string(c.n2) + ", side=" + std::to_string(c.window_side) + ")");
  }
}

namespace {

Var linear_layer(Tape& tape, nn::ParamStore& st, const std::string& name, Var x) {
  Var w = tape.param(*st.find(name + ".w"));
  Var b = tape.param(*st.find(name + ".b"));
  return tape.add_rowvec(tape.matmul(x, w), b);
}

}  // namespace

MshaModel::MapFeatures MshaModel::encode_maps(Tape& tape, const Observation& obs) {
  const MshaConfig& c = params_.config;
  int side = c.window_side;
  std::vector<double> scaled_sinr = obs.sinr_window;
  for (double& v : scaled_sinr) v *= kSinrInputScale;

  auto encode = [&](const std::vector<double>& grid, const std::string& name) {
    Var img = tape.input({side, side, 1}, grid);
    Var kernel = tape.param(*params_.store.find(name + ".w"));
    Var bias = tape.param(*params_.store.find(name + ".b"));
    Var conv = tape.conv2d(img, kernel);
    Var flat = tape.reshape(conv, {side * side, c.c1});
    return tape.relu(tape.add_rowvec(flat, bias));
  };
  return {encode(obs.uncertainty_window, "enc.conv_e"), encode(scaled_sinr, "enc.conv_r")};
}

Var MshaModel::encode_entities(Tape& tape, const Observation& obs) {
  const MshaConfig& c = params_.config;
  nn::ParamStore& st = params_.store;

  // Recurrent encoder over the trajectory history; one output row per step.
  Var uam = tape.input({c.n1, kUamCols}, obs.uam_rows);
  Var wx = tape.param(*st.find("enc.lstm.wx"));
  Var wh = tape.param(*st.find("enc.lstm.wh"));
  Var b = tape.param(*st.find("enc.lstm.b"));
  Var h = tape.input({1, c.c2}, std::vector<double>(c.c2, 0.0));
  Var cell = tape.input({1, c.c2}, std::vector<double>(c.c2, 0.0));
  std::vector<Var> hidden_rows;
  for (int t = 0; t < c.n1; ++t) {
    Var x_t = tape.slice(uam, 0, t, t + 1);
    Var z = tape.add_rowvec(tape.add(tape.matmul(x_t, wx), tape.matmul(h, wh)), b);
    Var gate_i = tape.sigmoid(tape.slice(z, 1, 0, c.c2));
    Var gate_f = tape.sigmoid(tape.slice(z, 1, c.c2, 2 * c.c2));
    Var gate_g = tape.tanh_(tape.slice(z, 1, 2 * c.c2, 3 * c.c2));
    Var gate_o = tape.sigmoid(tape.slice(z, 1, 3 * c.c2, 4 * c.c2));
    cell = tape.add(tape.mul(gate_f, cell), tape.mul(gate_i, gate_g));
    h = tape.mul(gate_o, tape.tanh_(cell));
    hidden_rows.push_back(h);
  }
  Var e_u = tape.concat(hidden_rows, 0);  // (n1, c2)

  // Masked multi-head self-attention over passenger rows; rows of unknown
  // passengers are zero and excluded from every softmax denominator.
  Var pax = tape.input({c.n2, kPaxCols}, obs.passenger_rows);
  Var q_all = linear_layer(tape, st, "enc.mha.q", pax);
  Var k_all = linear_layer(tape, st, "enc.mha.k", pax);
  Var v_all = linear_layer(tape, st, "enc.mha.v", pax);
  int dh = c.c2 / c.enc_heads;
  std::vector<Var> head_outs;
  for (int head = 0; head < c.enc_heads; ++head) {
    Var q = tape.slice(q_all, 1, head * dh, (head + 1) * dh);
    Var k = tape.slice(k_all, 1, head * dh, (head + 1) * dh);
    Var v = tape.slice(v_all, 1, head * dh, (head + 1) * dh);
    Var scores = tape.scale(tape.matmul_nt(q, k), 1.0 / std::sqrt(double(dh)));
    Var attn = tape.masked_softmax(scores, obs.passenger_mask);
    head_outs.push_back(tape.matmul(attn, v));
  }
  Var merged = tape.concat(head_outs, 1);
  Var e_p = linear_layer(tape, st, "enc.mha.o", merged);
  // Zero the output rows of masked passengers.
  std::vector<double> row_mask(static_cast<std::size_t>(c.n2) * c.c2);
  for (int i = 0; i < c.n2; ++i) {
    for (int j = 0; j < c.c2; ++j) row_mask[static_cast<std::size_t>(i) * c.c2 + j] = obs.passenger_mask[i];
  }
  e_p = tape.mul(e_p, tape.input({c.n2, c.c2}, row_mask));

  return tape.concat({e_u, e_p}, 0);  // (n1+n2, c2)
}

Var MshaModel::fuse_multisource(Tape& tape, Var e_up, Var v_e, Var v_r) {
  const MshaConfig& c = params_.config;
  int side = c.window_side;
  // Mean over the 2N stacked entity-aligned maps collapses to: entity
  // channels = mean entity embedding (each entity appears once against each
  // map), map channels = (v_E + v_R)/2. The divisor stays 2N regardless of
  // masking because masked rows enter as zeros.
  Var ent_mean = tape.mean_axis0(e_up);  // (1, c2)
  Var ent_tile = tape.reshape(tape.broadcast_row_to_hwc(ent_mean, side, side),
                              {side * side, c.c2});
  Var maps = tape.scale(tape.add(v_e, v_r), 0.5);  // (side^2, c1)
  return tape.concat({ent_tile, maps}, 1);         // (side^2, c2 + c1)
}

Var MshaModel::hybrid_attention(Tape& tape, Var f_m) {
  const MshaConfig& c = params_.config;
  nn::ParamStore& st = params_.store;
  int side = c.window_side;
  int tokens = side * side;
  int d = c.c3() / c.h_head;
  int dk = c.dk();

  Var f_m2 = linear_layer(tape, st, "attn.fuse", f_m);  // (tokens, c3)

  // Window partition of the token grid for the local branch.
  int wside = side / c.n_win;
  std::vector<std::vector<int>> windows;
  for (int wi = 0; wi < c.n_win; ++wi) {
    for (int wj = 0; wj < c.n_win; ++wj) {
      std::vector<int> idx;
      for (int i = wi * wside; i < (wi + 1) * wside; ++i) {
        for (int j = wj * wside; j < (wj + 1) * wside; ++j) idx.push_back(i * side + j);
      }
      windows.push_back(std::move(idx));
    }
  }
  std::vector<int> window_order;
  for (const auto& wnd : windows) window_order.insert(window_order.end(), wnd.begin(), wnd.end());
  std::vector<int> inverse_order(window_order.size());
  for (std::size_t p = 0; p < window_order.size(); ++p) inverse_order[window_order[p]] = static_cast<int>(p);

  double inv_sqrt_dk = 1.0 / std::sqrt(static_cast<double>(dk));
  std::vector<Var> head_features;
  for (int head = 0; head < c.h_head; ++head) {
    bool local = head < c.h_head / 2;
    const std::string branch = local ? "attn.local" : "attn.global";
    Var x_h = tape.slice(f_m2, 1, head * d, (head + 1) * d);  // (tokens, d)
    Var q = linear_layer(tape, st, branch + ".q", x_h);
    Var k = linear_layer(tape, st, branch + ".k", x_h);
    Var v = linear_layer(tape, st, branch + ".v", x_h);
    if (local) {
      std::vector<Var> parts;
      for (const auto& wnd : windows) {
        Var qw = tape.gather_rows(q, wnd);
        Var kw = tape.gather_rows(k, wnd);
        Var vw = tape.gather_rows(v, wnd);
        Var attn = tape.softmax(tape.scale(tape.matmul_nt(qw, kw), inv_sqrt_dk), -1);
        parts.push_back(tape.matmul(attn, vw));
      }
      Var stacked = tape.concat(parts, 0);  // window-major token order
      head_features.push_back(tape.gather_rows(stacked, inverse_order));
    } else {
      Var attn = tape.softmax(tape.scale(tape.matmul_nt(q, k), inv_sqrt_dk), -1);
      head_features.push_back(tape.matmul(attn, v));
    }
  }
  Var merged = tape.concat(head_features, 1);                      // (tokens, dk*h_head)
  Var flat = tape.reshape(merged, {1, tokens * dk * c.h_head});
  return linear_layer(tape, st, "out", flat);                      // (1, out_width)
}

Var MshaModel::feature(Tape& tape, const Observation& obs) {
  const MshaConfig& c = params_.config;
  int side2 = c.window_side * c.window_side;

  if (c.variant == ModelVariant::LinearEncoder) {
    std::vector<double> flat;
    flat.reserve(flat_input_width(c));
    flat.insert(flat.end(), obs.uam_rows.begin(), obs.uam_rows.end());
    flat.insert(flat.end(), obs.passenger_rows.begin(), obs.passenger_rows.end());
    for (double v : obs.sinr_window) flat.push_back(v * kSinrInputScale);
    flat.insert(flat.end(), obs.uncertainty_window.begin(), obs.uncertainty_window.end());
    Var x = tape.input({1, flat_input_width(c)}, flat);
    return linear_layer(tape, params_.store, "out", x);
  }

  MapFeatures maps = encode_maps(tape, obs);
  Var e_up = encode_entities(tape, obs);

  if (c.variant == ModelVariant::DesignedEncoders) {
    Var flat = tape.concat({tape.reshape(e_up, {1, c.entity_rows() * c.c2}),
                            tape.reshape(maps.v_E, {1, side2 * c.c1}),
                            tape.reshape(maps.v_R, {1, side2 * c.c1})},
                           1);
    return linear_layer(tape, params_.store, "out", flat);
  }

  Var f_m = fuse_multisource(tape, e_up, maps.v_E, maps.v_R);
  if (c.variant == ModelVariant::MultiSourceFusion) {
    Var flat = tape.reshape(f_m, {1, side2 * c.c3()});
    return linear_layer(tape, params_.store, "out", flat);
  }
  return hybrid_attention(tape, f_m);
}

MshaModel::GraphOut MshaModel::build(Tape& tape, const Observation& obs) {
  check_observation(obs);
  const MshaConfig& c = params_.config;
  nn::ParamStore& st = params_.store;

  Var f = feature(tape, obs);
  Var pi_h = tape.relu(linear_layer(tape, st, "pi.1", f));
  pi_h = tape.relu(linear_layer(tape, st, "pi.2", pi_h));
  Var logits = linear_layer(tape, st, "pi.3", pi_h);  // (1, k+1)
  Var probs = tape.softmax(logits, -1);

  Var vf_h = tape.relu(linear_layer(tape, st, "vf.1", f));
  vf_h = tape.relu(linear_layer(tape, st, "vf.2", vf_h));
  Var value = linear_layer(tape, st, "vf.3", vf_h);  // (1, 1)

  for (double p : tape.value(probs)) {
    if (!std::isfinite(p)) throw NumericError("non-finite action probability in policy head");
  }
  if (!std::isfinite(tape.value(value)[0])) throw NumericError("non-finite value head output");
  return {logits, probs, value};
}

MshaModel::Output MshaModel::forward(const Observation& obs) {
  Tape tape;
  GraphOut g = build(tape, obs);
  return {tape.value(g.probs), tape.value(g.value)[0]};
}

void MshaModel::save_checkpoint(const std::string& path) const {
  nn::save_checkpoint(params_.store, params_.config.to_json(), path);
}

MshaModel MshaModel::load_checkpoint(const std::string& path) {
  nn::LoadedCheckpoint loaded = nn::load_checkpoint(path);
  MshaConfig config = MshaConfig::from_json(loaded.header);
  MshaModel model(config, 0);
  if (loaded.store.params.size() != model.params_.store.params.size()) {
    throw ParseError("checkpoint parameter list does not match its config");
  }
  for (std::size_t i = 0; i < loaded.store.params.size(); ++i) {
    Param& dst = model.params_.store.params[i];
    Param& src = loaded.store.params[i];
    if (src.name != dst.name || src.shape != dst.shape) {
      throw ParseError("checkpoint parameter " + src.name + " does not match its config");
    }
    dst.value = std::move(src.value);
  }
  return model;
}

}  // namespace uamsim
