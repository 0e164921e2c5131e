#include "dcgl/config.hpp"

#include <algorithm>
#include <charconv>
#include <functional>
#include <map>
#include <sstream>

#include "dcgl/error.hpp"

namespace dcgl::train {
namespace {

struct Field {
  std::function<void(TrainConfig&, std::string_view)> set;
  std::function<std::string(const TrainConfig&)> get;
};

template <typename T>
T parse_number(std::string_view key, std::string_view v) {
  T out{};
  const auto* end = v.data() + v.size();
  auto [ptr, ec] = std::from_chars(v.data(), end, out);
  if (ec != std::errc() || ptr != end)
    throw ConfigError("bad value '" + std::string(v) + "' for " + std::string(key));
  return out;
}

std::string fmt_double(double v) {
  std::ostringstream ss;
  ss.precision(17);
  ss << v;
  return ss.str();
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("bad boolean '" + std::string(v) + "' for " + std::string(key));
}

#define DCGL_NUM_FIELD(name, type)                                                          \
  {                                                                                         \
    #name, Field {                                                                          \
      [](TrainConfig& c, std::string_view v) { c.name = parse_number<type>(#name, v); },    \
          [](const TrainConfig& c) { return std::to_string(c.name); }                       \
    }                                                                                       \
  }
#define DCGL_REAL_FIELD(name)                                                                \
  {                                                                                          \
    #name, Field {                                                                           \
      [](TrainConfig& c, std::string_view v) { c.name = parse_number<double>(#name, v); },   \
          [](const TrainConfig& c) { return fmt_double(c.name); }                            \
    }                                                                                        \
  }

const std::vector<std::pair<std::string, Field>>& fields() {
  static const std::vector<std::pair<std::string, Field>> kFields = {
      DCGL_NUM_FIELD(dim, std::size_t),
      DCGL_NUM_FIELD(kg_layers, int),
      DCGL_NUM_FIELD(cf_layers, int),
      DCGL_REAL_FIELD(learning_rate),
      DCGL_REAL_FIELD(transe_learning_rate),
      DCGL_REAL_FIELD(lambda_aug),
      DCGL_REAL_FIELD(lambda_align),
      DCGL_REAL_FIELD(lambda_gate),
      DCGL_REAL_FIELD(lambda_reg),
      DCGL_REAL_FIELD(rho),
      DCGL_REAL_FIELD(mu),
      DCGL_REAL_FIELD(tau),
      DCGL_NUM_FIELD(batch_size, std::size_t),
      DCGL_NUM_FIELD(negatives, std::size_t),
      DCGL_NUM_FIELD(ssl_batch, std::size_t),
      DCGL_NUM_FIELD(max_epochs, std::size_t),
      DCGL_NUM_FIELD(patience, std::size_t),
      DCGL_NUM_FIELD(seed, std::uint64_t),
      {"ablation", Field{[](TrainConfig& c, std::string_view v) { c.ablation = parse_ablation(v); },
                         [](const TrainConfig& c) { return std::string(to_string(c.ablation)); }}},
      {"layer_combine",
       Field{[](TrainConfig& c, std::string_view v) {
               if (v == "mean") c.layer_combine = cf::LayerCombine::mean;
               else if (v == "last") c.layer_combine = cf::LayerCombine::last;
               else throw ConfigError("layer_combine must be mean or last");
             },
             [](const TrainConfig& c) {
               return std::string(c.layer_combine == cf::LayerCombine::mean ? "mean" : "last");
             }}},
      {"infonce_denominator",
       Field{[](TrainConfig& c, std::string_view v) {
               if (v == "exclude_positive") c.infonce_denominator = ssl::Denominator::exclude_positive;
               else if (v == "include_positive") c.infonce_denominator = ssl::Denominator::include_positive;
               else throw ConfigError("infonce_denominator must be exclude_positive or include_positive");
             },
             [](const TrainConfig& c) {
               return std::string(c.infonce_denominator == ssl::Denominator::exclude_positive
                                      ? "exclude_positive"
                                      : "include_positive");
             }}},
      {"optimizer",
       Field{[](TrainConfig& c, std::string_view v) {
               if (v == "adam") c.optimizer = OptimizerKind::adam;
               else if (v == "sgd") c.optimizer = OptimizerKind::sgd;
               else throw ConfigError("optimizer must be adam or sgd");
             },
             [](const TrainConfig& c) {
               return std::string(c.optimizer == OptimizerKind::adam ? "adam" : "sgd");
             }}},
      DCGL_REAL_FIELD(adam_beta1),
      DCGL_REAL_FIELD(adam_beta2),
      DCGL_REAL_FIELD(adam_epsilon),
      DCGL_NUM_FIELD(adapter_mid, std::size_t),
      {"transe", Field{[](TrainConfig& c, std::string_view v) { c.transe = parse_bool("transe", v); },
                       [](const TrainConfig& c) { return std::string(c.transe ? "true" : "false"); }}},
      DCGL_NUM_FIELD(early_stop_k, std::size_t),
      {"bpr_alpha_grad",
       Field{[](TrainConfig& c, std::string_view v) { c.bpr_alpha_grad = parse_bool("bpr_alpha_grad", v); },
             [](const TrainConfig& c) { return std::string(c.bpr_alpha_grad ? "true" : "false"); }}},
  };
  return kFields;
}

std::string normalize_key(std::string_view key) {
  std::string k(key);
  std::replace(k.begin(), k.end(), '-', '_');
  return k;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

}  // namespace

Ablation parse_ablation(std::string_view tag) {
  for (auto a : all_ablations())
    if (to_string(a) == tag) return a;
  throw ConfigError("unknown ablation '" + std::string(tag) + "'");
}

std::string_view to_string(Ablation a) {
  switch (a) {
    case Ablation::none: return "none";
    case Ablation::no_llm: return "no_llm";
    case Ablation::no_id: return "no_id";
    case Ablation::cat: return "cat";
    case Ablation::no_freq: return "no_freq";
    case Ablation::no_aug: return "no_aug";
    case Ablation::no_align: return "no_align";
  }
  return "none";
}

std::vector<Ablation> all_ablations() {
  return {Ablation::none, Ablation::no_llm, Ablation::no_id, Ablation::cat,
          Ablation::no_freq, Ablation::no_aug, Ablation::no_align};
}

double TrainConfig::effective_lambda_aug() const {
  return ablation == Ablation::no_aug ? 0.0 : lambda_aug;
}

double TrainConfig::effective_lambda_align() const {
  switch (ablation) {
    case Ablation::no_align:
    case Ablation::no_llm:
    case Ablation::no_id:
    case Ablation::cat:
      return 0.0;
    default:
      return lambda_align;
  }
}

double TrainConfig::effective_transe_lr() const {
  return transe_learning_rate > 0 ? transe_learning_rate : learning_rate;
}

void TrainConfig::validate() const {
  if (dim == 0) throw ConfigError("dim must be positive");
  if (kg_layers < 0 || cf_layers < 0) throw ConfigError("layer counts must be non-negative");
  if (learning_rate < 0 || transe_learning_rate < 0) throw ConfigError("learning rates must be >= 0");
  if (lambda_aug < 0 || lambda_align < 0 || lambda_gate < 0 || lambda_reg < 0)
    throw ConfigError("loss weights must be >= 0");
  if (rho < 0 || rho > 1) throw ConfigError("rho must be in [0, 1]");
  if (!(mu > 0 && mu <= 1)) throw ConfigError("mu must be in (0, 1]");
  if (!(tau > 0)) throw ConfigError("tau must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be positive");
  if (negatives == 0) throw ConfigError("negatives must be positive");
  if (early_stop_k == 0) throw ConfigError("early_stop_k must be positive");
  if (!(adam_beta1 >= 0 && adam_beta1 < 1 && adam_beta2 >= 0 && adam_beta2 < 1 && adam_epsilon > 0))
    throw ConfigError("adam moments must be in [0, 1) and epsilon > 0");
}

void TrainConfig::set(std::string_view key, std::string_view value) {
  const auto k = normalize_key(key);
  if (k == "threads") {
    threads = parse_number<std::size_t>("threads", value);
    return;
  }
  for (const auto& [name, field] : fields()) {
    if (name == k) {
      field.set(*this, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

std::string TrainConfig::to_text() const {
  std::string out;
  for (const auto& [name, field] : fields()) out += name + "=" + field.get(*this) + "\n";
  return out;
}

TrainConfig TrainConfig::from_text(std::string_view text) {
  TrainConfig c;
  std::size_t lineno = 0;
  while (!text.empty()) {
    auto nl = text.find('\n');
    auto line = trim(text.substr(0, nl));
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++lineno;
    if (line.empty() || line.front() == '#') continue;
    auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    c.set(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  c.validate();
  return c;
}

Sha256 TrainConfig::hash() const { return sha256(to_text()); }

std::vector<std::string> TrainConfig::keys() {
  std::vector<std::string> k;
  for (const auto& [name, field] : fields()) k.push_back(name);
  k.push_back("threads");
  return k;
}

}  // namespace dcgl::train
