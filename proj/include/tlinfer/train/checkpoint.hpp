#pragma once

#include <cstddef>
#include <fstream>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include <json.hpp>

#include "tlinfer/fernn/model.hpp"
#include "tlinfer/train/adam.hpp"
#include "tlinfer/train/fit.hpp"

namespace tlinfer::train {

using Json = nlohmann::json;

inline constexpr const char* kModelFormat = "tlinfer-model";
inline constexpr int kModelVersion = 1;

struct Checkpoint {
  fernn::Model model;
  std::optional<AdamState> optimizer;
  friend bool operator==(const Checkpoint&, const Checkpoint&) = default;
};

namespace detail {

inline const char* role_name(fernn::ParamRole r) {
  switch (r) {
    case fernn::ParamRole::AtomWeight: return "atom_weight";
    case fernn::ParamRole::AtomBias: return "atom_bias";
    case fernn::ParamRole::ChoiceWeight: return "choice_weight";
    case fernn::ParamRole::IntervalWeight: return "interval_weight";
  }
  return "?";
}

inline fernn::ParamRole role_from(const std::string& s) {
  if (s == "atom_weight") return fernn::ParamRole::AtomWeight;
  if (s == "atom_bias") return fernn::ParamRole::AtomBias;
  if (s == "choice_weight") return fernn::ParamRole::ChoiceWeight;
  if (s == "interval_weight") return fernn::ParamRole::IntervalWeight;
  throw std::invalid_argument("checkpoint: unknown parameter role '" + s + "'");
}

inline Json cell_to_json(const fernn::Cell& c) {
  return std::visit(
      [](const auto& cell) -> Json {
        using K = std::decay_t<decltype(cell)>;
        if constexpr (std::is_same_v<K, fernn::AtomCell>) {
          return {{"type", "atom"}, {"features", cell.features}, {"weight_slot", cell.weight_slot},
                  {"bias_slot", cell.bias_slot}};
        } else if constexpr (std::is_same_v<K, fernn::NotCell>) {
          return {{"type", "not"}, {"in", cell.in}};
        } else if constexpr (std::is_same_v<K, fernn::AndCell>) {
          return {{"type", "and"}, {"left", cell.left}, {"right", cell.right}};
        } else if constexpr (std::is_same_v<K, fernn::OrCell>) {
          return {{"type", "or"}, {"left", cell.left}, {"right", cell.right}};
        } else if constexpr (std::is_same_v<K, fernn::OnceCell>) {
          return {{"type", "once"}, {"in", cell.in}};
        } else if constexpr (std::is_same_v<K, fernn::HistCell>) {
          return {{"type", "hist"}, {"in", cell.in}};
        } else if constexpr (std::is_same_v<K, fernn::SinceCell>) {
          return {{"type", "since"}, {"left", cell.left}, {"right", cell.right}};
        } else if constexpr (std::is_same_v<K, fernn::ChoiceBlock>) {
          return {{"type", "choice"}, {"inputs", cell.inputs}, {"weight_slot", cell.weight_slot}};
        } else {
          return {{"type", "interval"},
                  {"kind", cell.kind == fernn::IntervalKind::Once ? "once" : "hist"},
                  {"in", cell.in},
                  {"window", cell.window},
                  {"weight_slot", cell.weight_slot},
                  {"drop_magnitude", cell.drop_magnitude}};
        }
      },
      c);
}

inline fernn::Cell cell_from_json(const Json& j) {
  const auto type = j.at("type").get<std::string>();
  if (type == "atom") {
    return fernn::AtomCell{j.at("features").get<std::vector<std::size_t>>(),
                           j.at("weight_slot").get<std::size_t>(), j.at("bias_slot").get<std::size_t>()};
  }
  if (type == "not") return fernn::NotCell{j.at("in").get<std::size_t>()};
  if (type == "and") return fernn::AndCell{j.at("left").get<std::size_t>(), j.at("right").get<std::size_t>()};
  if (type == "or") return fernn::OrCell{j.at("left").get<std::size_t>(), j.at("right").get<std::size_t>()};
  if (type == "once") return fernn::OnceCell{j.at("in").get<std::size_t>()};
  if (type == "hist") return fernn::HistCell{j.at("in").get<std::size_t>()};
  if (type == "since") {
    return fernn::SinceCell{j.at("left").get<std::size_t>(), j.at("right").get<std::size_t>()};
  }
  if (type == "choice") {
    return fernn::ChoiceBlock{j.at("inputs").get<std::vector<std::size_t>>(),
                              j.at("weight_slot").get<std::size_t>()};
  }
  if (type == "interval") {
    const auto kind = j.at("kind").get<std::string>();
    if (kind != "once" && kind != "hist") throw std::invalid_argument("checkpoint: bad interval kind");
    return fernn::IntervalCell{kind == "once" ? fernn::IntervalKind::Once : fernn::IntervalKind::Hist,
                               j.at("in").get<std::size_t>(), j.at("window").get<std::size_t>(),
                               j.at("weight_slot").get<std::size_t>(),
                               j.at("drop_magnitude").get<double>()};
  }
  throw std::invalid_argument("checkpoint: unknown cell type '" + type + "'");
}

// Slots and cell references must stay inside the model.
inline void check_model(const fernn::Model& m) {
  const std::size_t P = m.params.size();
  if (m.roles.size() != P) throw std::invalid_argument("checkpoint: roles/params length mismatch");
  if (m.output >= m.cells.size()) throw std::invalid_argument("checkpoint: output cell out of range");
  auto ref = [&](std::size_t in, std::size_t self) {
    if (in >= self) throw std::invalid_argument("checkpoint: cell input must precede the cell");
  };
  auto slots = [&](std::size_t first, std::size_t count) {
    if (first + count > P) throw std::invalid_argument("checkpoint: parameter slot out of range");
  };
  for (std::size_t i = 0; i < m.cells.size(); ++i) {
    std::visit(
        [&](const auto& c) {
          using K = std::decay_t<decltype(c)>;
          if constexpr (std::is_same_v<K, fernn::AtomCell>) {
            slots(c.weight_slot, c.features.size());
            slots(c.bias_slot, 1);
            for (auto k : c.features) {
              if (k >= m.dim) throw std::invalid_argument("checkpoint: atom feature out of range");
            }
          } else if constexpr (std::is_same_v<K, fernn::AndCell> || std::is_same_v<K, fernn::OrCell> ||
                               std::is_same_v<K, fernn::SinceCell>) {
            ref(c.left, i);
            ref(c.right, i);
          } else if constexpr (std::is_same_v<K, fernn::ChoiceBlock>) {
            if (c.inputs.empty()) throw std::invalid_argument("checkpoint: empty choice block");
            for (auto in : c.inputs) ref(in, i);
            slots(c.weight_slot, c.inputs.size());
          } else if constexpr (std::is_same_v<K, fernn::IntervalCell>) {
            ref(c.in, i);
            slots(c.weight_slot, c.window + 1);
          } else {
            ref(c.in, i);
          }
        },
        m.cells[i]);
  }
}

}  // namespace detail

inline Json to_json(const fernn::Model& m) {
  Json cells = Json::array();
  for (const auto& c : m.cells) cells.push_back(detail::cell_to_json(c));
  Json roles = Json::array();
  for (auto r : m.roles) roles.push_back(detail::role_name(r));
  Json norm = nullptr;
  if (m.normalization) norm = {{"min", m.normalization->min}, {"max", m.normalization->max}};
  return {{"dim", m.dim},
          {"head", m.head == fernn::Head::Tanh ? "tanh" : "identity"},
          {"horizon", m.horizon},
          {"quantized", m.quantized},
          {"output", m.output},
          {"normalization", norm},
          {"params", m.params},
          {"roles", roles},
          {"cells", cells}};
}

inline fernn::Model model_from_json(const Json& j) {
  fernn::Model m;
  m.dim = j.at("dim").get<std::size_t>();
  const auto head = j.at("head").get<std::string>();
  if (head != "tanh" && head != "identity") throw std::invalid_argument("checkpoint: bad head '" + head + "'");
  m.head = head == "tanh" ? fernn::Head::Tanh : fernn::Head::Identity;
  m.horizon = j.at("horizon").get<double>();
  m.quantized = j.at("quantized").get<bool>();
  m.output = j.at("output").get<std::size_t>();
  if (!j.at("normalization").is_null()) {
    m.normalization = fernn::Normalization{j["normalization"].at("min").get<std::vector<double>>(),
                                           j["normalization"].at("max").get<std::vector<double>>()};
    if (m.normalization->min.size() != m.dim || m.normalization->max.size() != m.dim) {
      throw std::invalid_argument("checkpoint: normalization length differs from dim");
    }
  }
  m.params = j.at("params").get<std::vector<double>>();
  for (const auto& r : j.at("roles")) m.roles.push_back(detail::role_from(r.get<std::string>()));
  for (const auto& c : j.at("cells")) m.cells.push_back(detail::cell_from_json(c));
  detail::check_model(m);
  return m;
}

inline Json to_json(const Checkpoint& c) {
  Json j = {{"format", kModelFormat}, {"version", kModelVersion}, {"model", to_json(c.model)}};
  if (c.optimizer) {
    j["optimizer"] = {{"m", c.optimizer->m},
                      {"v", c.optimizer->v},
                      {"step", c.optimizer->step},
                      {"skipped", c.optimizer->skipped}};
  } else {
    j["optimizer"] = nullptr;
  }
  return j;
}

inline Checkpoint checkpoint_from_json(const Json& j) {
  if (j.value("format", std::string{}) != kModelFormat) {
    throw std::invalid_argument("not a model checkpoint (missing format header)");
  }
  if (j.at("version").get<int>() != kModelVersion) {
    throw std::invalid_argument("unsupported checkpoint version " + j.at("version").dump());
  }
  Checkpoint c{model_from_json(j.at("model")), std::nullopt};
  if (j.contains("optimizer") && !j["optimizer"].is_null()) {
    const auto& o = j["optimizer"];
    AdamState s;
    s.m = o.at("m").get<std::vector<double>>();
    s.v = o.at("v").get<std::vector<double>>();
    s.step = o.at("step").get<std::uint64_t>();
    s.skipped = o.at("skipped").get<std::uint64_t>();
    if (s.m.size() != c.model.params.size() || s.v.size() != c.model.params.size()) {
      throw std::invalid_argument("checkpoint: optimizer state length differs from params");
    }
    c.optimizer = std::move(s);
  }
  return c;
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << to_json(c).dump(2) << '\n';
  if (!out) throw std::runtime_error("write failed for '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read '" + path + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::parse_error& e) {
    throw std::invalid_argument("checkpoint '" + path + "' is not valid JSON: " + e.what());
  }
  return checkpoint_from_json(j);
}

/// Report document. `wall_seconds` is the only field that varies between
/// runs with identical inputs.
inline Json to_json(const TrainReport& r) {
  const auto& c = r.config;
  Json j = {{"formula", r.formula_text},
            {"formula_length", r.formula_length},
            {"train_mcr", r.train_mcr},
            {"test_mcr", r.test_mcr},
            {"epochs", r.epochs},
            {"best_epoch", r.best_epoch},
            {"best_loss", r.best_loss},
            {"lr_reductions", r.lr_reductions},
            {"final_lr", r.final_lr},
            {"skipped_gradients", r.skipped_gradients},
            {"label_scale", r.label_scale},
            {"train_size", r.train_size},
            {"test_size", r.test_size},
            {"embedded_structures", r.embedded_structures},
            {"losses", r.losses},
            {"wall_seconds", r.wall_seconds},
            {"config",
             {{"lr", c.lr},
              {"max_epochs", c.max_epochs},
              {"patience", c.patience},
              {"early_stop", c.early_stop},
              {"plateau_schedule", c.plateau_schedule},
              {"plateau_reductions", c.plateau_reductions},
              {"plateau_factor", c.plateau_factor},
              {"train_fraction", c.train_fraction},
              {"seed", c.seed},
              {"batch_size", c.batch_size},
              {"normalize", c.normalize},
              {"reverse_traces", c.reverse_traces},
              {"scale_continuous_labels", c.scale_continuous_labels},
              {"compare_unquantized", c.compare_unquantized}}}};
  j["unquantized_train_mcr"] = r.unquantized_train_mcr ? Json(*r.unquantized_train_mcr) : Json(nullptr);
  j["unquantized_test_mcr"] = r.unquantized_test_mcr ? Json(*r.unquantized_test_mcr) : Json(nullptr);
  return j;
}

}  // namespace tlinfer::train
