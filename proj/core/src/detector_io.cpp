#include <fstream>
#include <sstream>

#include <json.hpp>

#include "loglens/detectors.hpp"
#include "loglens/errors.hpp"
#include "models.hpp"

namespace loglens {

namespace {

using json = nlohmann::ordered_json;

std::string_view optimizer_name(OptimizerKind kind) { return kind == OptimizerKind::sgd ? "sgd" : "adam"; }

json config_object(const DetectorConfig& c) {
  json j;
  j["family"] = std::string(family_name(c.family));
  j["semantics"] = c.semantics;
  j["k"] = c.k;
  j["window_size"] = c.window.window_size;
  j["step_size"] = c.window.step_size;
  j["hidden"] = c.hidden;
  j["layers"] = c.layers;
  j["heads"] = c.heads;
  j["embed_dim"] = c.effective_embed_dim();
  j["max_len"] = c.max_len;
  j["epochs"] = c.epochs;
  j["batch_size"] = c.batch_size;
  j["lr"] = c.lr;
  j["optimizer"] = std::string(optimizer_name(c.optimizer));
  j["clip_norm"] = c.clip_norm;
  j["seed"] = c.seed;
  j["threshold_quantile"] = c.threshold_quantile;
  j["validation_fraction"] = c.validation_fraction;
  j["tfidf"] = c.tfidf;
  return j;
}

template <typename T>
T field(const json& value, const std::string& pointer, const char* expected) {
  try {
    if constexpr (std::is_same_v<T, bool>) {
      if (!value.is_boolean()) throw ConfigError("");
    } else if constexpr (std::is_same_v<T, std::string>) {
      if (!value.is_string()) throw ConfigError("");
    } else if constexpr (std::is_floating_point_v<T>) {
      if (!value.is_number()) throw ConfigError("");
    } else {
      if (!value.is_number_unsigned() && !(value.is_number_integer() && value.get<long long>() >= 0)) {
        throw ConfigError("");
      }
    }
    return value.get<T>();
  } catch (const std::exception&) {
    throw ConfigError(pointer + ": expected " + expected);
  }
}

DetectorConfig config_from_object(const json& j, const std::string& pointer) {
  if (!j.is_object()) throw ConfigError((pointer.empty() ? "/" : pointer) + ": expected an object");
  DetectorConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& key = it.key();
    const json& v = it.value();
    const std::string p = pointer + "/" + key;
    if (key == "family") {
      try {
        c.family = parse_family(field<std::string>(v, p, "a string"));
      } catch (const ConfigError& e) {
        throw ConfigError(p + ": " + e.what());
      }
    } else if (key == "semantics") {
      c.semantics = field<bool>(v, p, "a boolean");
    } else if (key == "k") {
      c.k = field<std::size_t>(v, p, "a nonnegative integer");
    } else if (key == "window_size") {
      c.window.window_size = field<std::size_t>(v, p, "a nonnegative integer");
    } else if (key == "step_size") {
      c.window.step_size = field<std::size_t>(v, p, "a nonnegative integer");
    } else if (key == "hidden") {
      c.hidden = field<std::size_t>(v, p, "a nonnegative integer");
    } else if (key == "layers") {
      c.layers = field<std::size_t>(v, p, "a nonnegative integer");
    } else if (key == "heads") {
      c.heads = field<std::size_t>(v, p, "a nonnegative integer");
    } else if (key == "embed_dim") {
      c.embed_dim = field<std::size_t>(v, p, "a nonnegative integer");
    } else if (key == "max_len") {
      c.max_len = field<std::size_t>(v, p, "a nonnegative integer");
    } else if (key == "epochs") {
      c.epochs = field<std::size_t>(v, p, "a nonnegative integer");
    } else if (key == "batch_size") {
      c.batch_size = field<std::size_t>(v, p, "a nonnegative integer");
    } else if (key == "lr") {
      c.lr = field<double>(v, p, "a number");
    } else if (key == "optimizer") {
      const auto name = field<std::string>(v, p, "a string");
      if (name == "adam") {
        c.optimizer = OptimizerKind::adam;
      } else if (name == "sgd") {
        c.optimizer = OptimizerKind::sgd;
      } else {
        throw ConfigError(p + ": unknown optimizer '" + name + "'");
      }
    } else if (key == "clip_norm") {
      c.clip_norm = field<double>(v, p, "a number");
    } else if (key == "seed") {
      c.seed = field<std::uint64_t>(v, p, "a nonnegative integer");
    } else if (key == "threshold_quantile") {
      c.threshold_quantile = field<double>(v, p, "a number");
    } else if (key == "validation_fraction") {
      c.validation_fraction = field<double>(v, p, "a number");
    } else if (key == "tfidf") {
      c.tfidf = field<bool>(v, p, "a boolean");
    } else {
      throw ConfigError(p + ": unknown key");
    }
  }
  try {
    c.validate();
  } catch (const ConfigError& e) {
    throw ConfigError((pointer.empty() ? "/" : pointer) + ": " + e.what());
  }
  return c;
}

}  // namespace

std::string config_to_json(const DetectorConfig& config) { return config_object(config).dump(); }

DetectorConfig config_from_json(std::string_view json_text, const std::string& pointer) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("detector config: ") + e.what());
  }
  return config_from_object(j, pointer);
}

void TrainedDetector::save(const std::filesystem::path& path) const {
  const auto& m = model();
  m.params.save_file(path);
  json side;
  side["config"] = config_object(m.config);
  side["vocab_size"] = m.vocab_size;
  side["threshold"] = m.threshold ? json(*m.threshold) : json(nullptr);
  side["training_seconds"] = m.training_seconds;
  side["epoch_losses"] = m.epoch_losses;
  side["vocabulary"] = m.training_vocabulary.templates();
  std::ofstream out(path.string() + ".json");
  if (!out) throw IoError("cannot write " + path.string() + ".json");
  out << side.dump(2) << '\n';
}

TrainedDetector TrainedDetector::load(const std::filesystem::path& path) {
  const std::string side_path = path.string() + ".json";
  std::ifstream in(side_path);
  if (!in) throw IoError("cannot read model sidecar " + side_path);
  json side;
  try {
    side = json::parse(in);
  } catch (const json::exception& e) {
    throw FormatError(side_path + ": " + e.what());
  }
  if (!side.is_object() || !side.contains("config") || !side.contains("vocabulary")) {
    throw FormatError(side_path + ": missing config or vocabulary");
  }
  const DetectorConfig config = config_from_object(side["config"], "/config");
  std::vector<std::string> templates;
  try {
    templates = side["vocabulary"].get<std::vector<std::string>>();
  } catch (const json::exception& e) {
    throw FormatError(side_path + ": bad vocabulary: " + e.what());
  }
  const EventVocabulary vocabulary(templates);
  if (side.contains("vocab_size") && side["vocab_size"] != vocabulary.size()) {
    throw FormatError(side_path + ": vocab_size disagrees with the stored vocabulary");
  }

  auto model = detail::Model::create(config, vocabulary);
  const ParamSet stored = ParamSet::load_file(path);
  auto& fresh = model->params.entries();
  if (stored.size() != fresh.size()) {
    throw ConfigError("model " + path.string() + " holds " + std::to_string(stored.size()) +
                      " parameters, a " + std::string(family_name(config.family)) + " detector needs " +
                      std::to_string(fresh.size()));
  }
  for (std::size_t i = 0; i < fresh.size(); ++i) {
    const auto& [name, stored_tensor] = stored.entries()[i];
    auto& [fresh_name, fresh_tensor] = fresh[i];
    if (name != fresh_name || stored_tensor.shape() != fresh_tensor.shape()) {
      throw ConfigError("model parameter '" + name + "' " + shape_string(stored_tensor.shape()) +
                        " does not fit the configured architecture (expected '" + fresh_name + "' " +
                        shape_string(fresh_tensor.shape()) + ")");
    }
    std::copy(stored_tensor.data().begin(), stored_tensor.data().end(), fresh_tensor.mutable_data().begin());
  }
  if (side.contains("threshold") && side["threshold"].is_number()) model->threshold = side["threshold"].get<double>();
  if (side.contains("training_seconds")) model->training_seconds = side["training_seconds"].get<double>();
  if (side.contains("epoch_losses")) model->epoch_losses = side["epoch_losses"].get<std::vector<double>>();
  return TrainedDetector(std::move(model));
}

}  // namespace loglens
