#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "uamsim/environment.hpp"
#include "uamsim/nn/tensor.hpp"

namespace uamsim {

/// Ablation axis: each model enables one more stage of the architecture.
///   1 LinearEncoder     one linear layer on the flattened raw inputs
///   2 DesignedEncoders  CNN/LSTM/MHA encoders, outputs concatenated flat
///   3 MultiSourceFusion encoders + map-aligned fusion into f_M
///   4 FullMsha          fusion + hybrid local/global attention
enum class ModelVariant : int {
  LinearEncoder = 1,
  DesignedEncoders = 2,
  MultiSourceFusion = 3,
  FullMsha = 4,
};

ModelVariant variant_from_flags(bool le, bool de, bool msfea, bool haf);

struct MshaConfig {
  int c1 = 8;          // map feature channels
  int c2 = 16;         // entity embedding width
  int h_head = 4;      // fusion attention heads (even; half local, half global)
  int n_win = 2;       // windows per side in the local branch
  int d_k = 0;         // per-head attention width; 0 means c3()/h_head
  int out_width = 64;  // C, the fused feature width
  int n1 = 8;          // UAM history rows
  int n2 = 1;          // passenger rows
  int window_side = 10;
  int k_actions = 15;  // k; policy outputs k+1 logits
  int enc_heads = 2;   // heads of the passenger-attribute MHA encoder
  ModelVariant variant = ModelVariant::FullMsha;

  int c3() const { return c1 + c2; }
  int dk() const { return d_k > 0 ? d_k : c3() / h_head; }
  int entity_rows() const { return n1 + n2; }

  void validate() const;  // throws ConfigError
  std::string to_json() const;
  static MshaConfig from_json(const std::string& text);
};

/// All network parameters (encoders, fusion, attention branches, output FFN,
/// policy and value heads) plus the optimizer state.
struct PolicyParams {
  MshaConfig config;
  nn::ParamStore store;
  nn::AdamState adam;
};

/// Analytic parameter count for a config; matches the actual store exactly.
std::size_t expected_param_count(const MshaConfig& config);

class MshaModel {
 public:
  MshaModel(const MshaConfig& config, std::uint64_t init_seed);

  struct GraphOut {
    nn::Var logits;
    nn::Var probs;
    nn::Var value;
  };
  /// Builds the forward graph for one observation on the caller's tape.
  GraphOut build(nn::Tape& tape, const Observation& obs);

  struct Output {
    std::vector<double> probs;
    double value = 0.0;
  };
  Output forward(const Observation& obs);

  PolicyParams& params() { return params_; }
  const PolicyParams& params() const { return params_; }
  const MshaConfig& config() const { return params_.config; }

  void save_checkpoint(const std::string& path) const;
  static MshaModel load_checkpoint(const std::string& path);

  // Exposed stages (tests exercise them directly).
  struct MapFeatures {
    nn::Var v_E;  // (side^2, c1)
    nn::Var v_R;
  };
  MapFeatures encode_maps(nn::Tape& tape, const Observation& obs);
  nn::Var encode_entities(nn::Tape& tape, const Observation& obs);  // (n1+n2, c2)
  nn::Var fuse_multisource(nn::Tape& tape, nn::Var e_up, nn::Var v_e, nn::Var v_r);  // (side^2, c3)
  nn::Var hybrid_attention(nn::Tape& tape, nn::Var f_m);  // (1, out_width)

 private:
  PolicyParams params_;

  nn::Var feature(nn::Tape& tape, const Observation& obs);
  void check_observation(const Observation& obs) const;
};

}  // namespace uamsim
