#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "dcgl/cf_propagation.hpp"
#include "dcgl/digest.hpp"
#include "dcgl/ssl.hpp"

namespace dcgl::train {

enum class Ablation { none, no_llm, no_id, cat, no_freq, no_aug, no_align };
enum class OptimizerKind { adam, sgd };

Ablation parse_ablation(std::string_view tag);
std::string_view to_string(Ablation a);
std::vector<Ablation> all_ablations();

struct TrainConfig {
  std::size_t dim = 64;
  int kg_layers = 3;
  int cf_layers = 3;
  double learning_rate = 0.005;
  double transe_learning_rate = 0;  // 0: reuse learning_rate
  double lambda_aug = 0.05;
  double lambda_align = 0.05;
  double lambda_gate = 0.05;
  double lambda_reg = 1e-5;
  double rho = 0.5;
  double mu = 0.5;
  double tau = 0.2;
  std::size_t batch_size = 2048;
  std::size_t negatives = 1;
  std::size_t ssl_batch = 256;  // row cap for contrastive terms, 0 = no cap
  std::size_t max_epochs = 2000;
  std::size_t patience = 50;
  std::uint64_t seed = 2026;
  Ablation ablation = Ablation::none;
  cf::LayerCombine layer_combine = cf::LayerCombine::mean;
  ssl::Denominator infonce_denominator = ssl::Denominator::exclude_positive;
  OptimizerKind optimizer = OptimizerKind::adam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_epsilon = 1e-8;
  std::size_t adapter_mid = 0;  // 0: (d_llm + d) / 2
  bool transe = true;
  std::size_t early_stop_k = 50;
  bool bpr_alpha_grad = false;
  std::size_t threads = 1;  // not part of the hash; results do not depend on it

  // Ablation switches applied on top of the raw fields.
  double effective_lambda_aug() const;
  double effective_lambda_align() const;
  double effective_transe_lr() const;

  void validate() const;
  // Sets one key from its text value. Keys are snake_case field names;
  // kebab-case is accepted too. Unknown keys throw ConfigError.
  void set(std::string_view key, std::string_view value);
  // Canonical "key=value" lines in a fixed order (threads excluded).
  std::string to_text() const;
  static TrainConfig from_text(std::string_view text);
  Sha256 hash() const;
  static std::vector<std::string> keys();
};

}  // namespace dcgl::train
