#pragma once

// Command-line front end. run_cli() is the whole program minus process
// plumbing, so tests can drive it in-process.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tlinfer/data/csv.hpp"
#include "tlinfer/data/dataset.hpp"
#include "tlinfer/data/generators.hpp"
#include "tlinfer/enumerate/enumerate.hpp"
#include "tlinfer/fernn/architectures.hpp"
#include "tlinfer/fernn/extract.hpp"
#include "tlinfer/stl/monitor.hpp"
#include "tlinfer/stl/text.hpp"
#include "tlinfer/train/checkpoint.hpp"
#include "tlinfer/train/fit.hpp"

namespace tlinfer::cli {

using Json = nlohmann::json;

struct GenOptions {
  std::string kind;
  std::size_t n = 100;
  std::optional<std::size_t> length;
  std::optional<std::uint64_t> seed;
  double positive_level = 1.0, negative_level = -0.8, noise = 0.1;
  std::string out;
};

struct TrainOptions {
  std::string data;
  std::optional<std::size_t> length, up_to_length, interval_window;
  std::string interval_kind = "hist";
  std::optional<std::uint64_t> seed;
  std::optional<double> lr;
  std::size_t max_epochs = 5000;
  std::size_t patience = 50;
  bool early_stop = true;
  bool no_since = false;
  std::string continuous_labels;
  std::string head = "auto";
  bool reverse = false;
  bool compare_unquantized = false;
  std::size_t batch_size = 0;
  double split = 0.8;
  bool no_normalize = false;
  std::string out, model_out;
  bool json = false;
};

struct EnumOptions {
  std::string data;
  std::size_t length = 2;
  std::size_t grid = 25;
  bool early_exit = true;
  double target = 0.2;
  std::size_t cap = 50'000;
  bool no_since = false;
  bool reverse = false;
  std::string out;
  bool json = false;
};

struct EvalOptions {
  std::string formula, data;
  bool reverse = false;
  bool json = false;
};

struct InspectOptions {
  std::string model;
  bool json = false;
};

namespace detail {

inline void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw std::runtime_error("cannot write '" + path + "'");
  f << text;
  if (!f) throw std::runtime_error("write failed for '" + path + "'");
}

inline stl::Formula parse_for(const std::string& text, const data::Dataset& ds) {
  stl::ParseOptions po;
  po.feature_names = ds.feature_names;
  po.dim = ds.dim();
  return stl::parse(text, po);
}

inline stl::FormatOptions format_for(const data::Dataset& ds) {
  stl::FormatOptions fo;
  fo.feature_names = ds.feature_names;
  return fo;
}

inline std::string fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace detail

inline int cmd_gen_data(const GenOptions& o, std::ostream& out) {
  if (!o.seed) throw std::invalid_argument("--seed is required");
  data::Dataset ds;
  if (o.kind == "step-threshold") {
    data::StepThresholdParams p;
    p.n = o.n;
    p.length = o.length.value_or(20);
    p.positive_level = o.positive_level;
    p.negative_level = o.negative_level;
    p.noise = o.noise;
    ds = data::gen_step_threshold(p, *o.seed);
  } else if (o.kind == "cct") {
    ds = data::gen_cct({o.n, o.length.value_or(100)}, *o.seed);
  } else if (o.kind == "interval") {
    if (o.length && *o.length != data::kIntervalTraceLength) {
      throw std::invalid_argument("interval traces always have 7 steps");
    }
    ds = data::gen_interval(o.n, *o.seed);
  } else {
    throw std::invalid_argument("unknown dataset kind '" + o.kind + "'");
  }
  if (o.out.empty()) {
    data::write_csv(out, ds);
  } else {
    data::save_csv(ds, o.out);
    out << "wrote " << ds.size() << " traces to " << o.out << '\n';
  }
  return 0;
}

inline fernn::Model build_model(const TrainOptions& o, std::size_t dim, fernn::Head head, bool use_since) {
  fernn::ArchitectureOptions ao;
  ao.seed = *o.seed;
  ao.head = head;
  ao.use_since = use_since;
  if (o.length) return fernn::build_fixed_length(*o.length, dim, ao);
  if (o.up_to_length) return fernn::build_up_to_length(*o.up_to_length, dim, ao);
  if (o.interval_kind != "hist" && o.interval_kind != "once") {
    throw std::invalid_argument("--interval-kind must be hist or once");
  }
  return fernn::build_interval_model(
      o.interval_kind == "hist" ? fernn::IntervalKind::Hist : fernn::IntervalKind::Once, *o.interval_window,
      dim, ao);
}

inline int cmd_train(const TrainOptions& o, std::ostream& out) {
  if (!o.seed) throw std::invalid_argument("--seed is required");
  const int modes = (o.length ? 1 : 0) + (o.up_to_length ? 1 : 0) + (o.interval_window ? 1 : 0);
  if (modes != 1) throw std::invalid_argument("give exactly one of --length, --up-to-length, --interval-window");
  data::Dataset ds = data::load_csv(o.data);
  if (!o.continuous_labels.empty()) ds = data::label_continuous(ds, detail::parse_for(o.continuous_labels, ds));
  const bool binary = ds.label_kind == data::LabelKind::Binary;
  fernn::Head head = binary ? fernn::Head::Tanh : fernn::Head::Identity;
  if (o.head == "tanh" || o.head == "identity") {
    const fernn::Head forced = o.head == "tanh" ? fernn::Head::Tanh : fernn::Head::Identity;
    if (forced != head) {
      throw std::invalid_argument(std::string("--head ") + o.head + " conflicts with " +
                                  (binary ? "binary" : "continuous") + " labels");
    }
  } else if (o.head != "auto") {
    throw std::invalid_argument("--head must be auto, tanh or identity");
  }

  train::TrainConfig cfg;
  cfg.seed = *o.seed;
  cfg.lr = o.lr.value_or(o.up_to_length ? 0.001 : 0.003);
  cfg.plateau_schedule = o.up_to_length.has_value();
  cfg.max_epochs = o.max_epochs;
  cfg.patience = o.patience;
  cfg.early_stop = o.early_stop;
  cfg.reverse_traces = o.reverse;
  cfg.compare_unquantized = o.compare_unquantized;
  cfg.batch_size = o.batch_size;
  cfg.train_fraction = o.split;
  cfg.normalize = !o.no_normalize;

  fernn::Model m = build_model(o, ds.dim(), head, !o.no_since);
  const auto rep = train::fit(m, ds, cfg);
  Json j = train::to_json(rep);
  j["data"] = o.data;
  j["architecture"] = o.length         ? "fixed-length " + std::to_string(*o.length)
                      : o.up_to_length ? "up-to-length " + std::to_string(*o.up_to_length)
                                       : o.interval_kind + "-interval " + std::to_string(*o.interval_window);
  j["use_since"] = !o.no_since;
  j["label_kind"] = data::to_string(ds.label_kind);
  if (o.no_since && !o.interval_window) {
    // Paired run with the Since layers for the runtime comparison.
    fernn::Model with = build_model(o, ds.dim(), head, true);
    const auto paired = train::fit(with, ds, cfg);
    j["paired_since_run"] = {{"formula", paired.formula_text},
                             {"test_mcr", paired.test_mcr},
                             {"epochs", paired.epochs},
                             {"wall_seconds", paired.wall_seconds}};
    j["runtime_ratio_vs_since"] = paired.wall_seconds > 0.0 ? rep.wall_seconds / paired.wall_seconds : 0.0;
  }
  if (!o.model_out.empty()) train::save_checkpoint({m, std::nullopt}, o.model_out);
  if (!o.out.empty()) detail::write_text(o.out, j.dump(2) + "\n");
  if (o.json) {
    out << j.dump(2) << '\n';
  } else {
    out << rep.formula_text << '\n';
    out << "train_mcr " << detail::fixed(rep.train_mcr) << "  test_mcr " << detail::fixed(rep.test_mcr)
        << "  epochs " << rep.epochs << '\n';
    if (rep.unquantized_test_mcr) {
      out << "unquantized test_mcr " << detail::fixed(*rep.unquantized_test_mcr) << '\n';
    }
    if (j.contains("runtime_ratio_vs_since")) {
      out << "runtime without Since / with Since: " << detail::fixed(j["runtime_ratio_vs_since"].get<double>(), 3)
          << '\n';
    }
  }
  return 0;
}

inline Json enum_report_json(const enumerate::EnumReport& r) {
  return {{"formula", r.formula_text},
          {"mcr", r.mcr},
          {"structures_total", r.structures_total},
          {"structures_tried", r.structures_tried},
          {"structures_skipped", r.structures_skipped},
          {"truncated", r.truncated},
          {"early_exit", r.early_exit},
          {"wall_seconds", r.wall_seconds},
          {"config",
           {{"max_length", r.config.max_length},
            {"grid_points", r.config.grid_points},
            {"early_exit", r.config.early_exit},
            {"target_mcr", r.config.target_mcr},
            {"structure_cap", r.config.structure_cap},
            {"since", r.config.ops.since}}}};
}

inline int cmd_enumerate(const EnumOptions& o, std::ostream& out) {
  data::Dataset ds = data::load_csv(o.data);
  if (o.reverse) ds = data::reverse(ds);
  enumerate::EnumConfig cfg;
  cfg.max_length = o.length;
  cfg.grid_points = o.grid;
  cfg.early_exit = o.early_exit;
  cfg.target_mcr = o.target;
  cfg.structure_cap = o.cap;
  if (o.no_since) cfg.ops.since = false;
  const auto rep = enumerate::run(ds, cfg);
  Json j = enum_report_json(rep);
  j["data"] = o.data;
  if (!o.out.empty()) detail::write_text(o.out, j.dump(2) + "\n");
  if (o.json) {
    out << j.dump(2) << '\n';
  } else {
    out << rep.formula_text << '\n';
    out << "mcr " << detail::fixed(rep.mcr) << "  structures " << rep.structures_tried << '\n';
  }
  return 0;
}

inline int cmd_monitor(const EvalOptions& o, std::ostream& out) {
  data::Dataset ds = data::load_csv(o.data);
  if (o.reverse) ds = data::reverse(ds);
  const auto f = detail::parse_for(o.formula, ds);
  Json rows = Json::array();
  if (!o.json) out << "trace_id,robustness,sign\n";
  for (const auto& tr : ds.traces) {
    const double rho = stl::final_robustness(f, tr);
    const int sign = stl::sign_of(rho);
    if (o.json) {
      rows.push_back({{"trace_id", tr.id()}, {"robustness", rho}, {"sign", sign}});
    } else {
      out << tr.id() << ',' << stl::format_number(rho) << ',' << (sign > 0 ? "+1" : "-1") << '\n';
    }
  }
  if (o.json) out << Json{{"formula", stl::format(f, detail::format_for(ds))}, {"traces", rows}}.dump(2) << '\n';
  return 0;
}

inline int cmd_eval(const EvalOptions& o, std::ostream& out) {
  data::Dataset ds = data::load_csv(o.data);
  if (o.reverse) ds = data::reverse(ds);
  const auto f = detail::parse_for(o.formula, ds);
  const double mcr = train::evaluate_mcr(f, ds);
  if (o.json) {
    out << Json{{"formula", stl::format(f, detail::format_for(ds))}, {"mcr", mcr}, {"traces", ds.size()}}.dump(2)
        << '\n';
  } else {
    out << stl::format_number(mcr) << '\n';
  }
  return 0;
}

inline int cmd_inspect(const InspectOptions& o, std::ostream& out) {
  const auto ck = train::load_checkpoint(o.model);
  const auto& m = ck.model;
  const auto raw = fernn::extract_formula(m);
  const auto pushed = stl::push_negations(raw);
  std::size_t cells[9] = {};
  for (const auto& c : m.cells) ++cells[c.index()];
  if (o.json) {
    out << Json{{"formula", stl::format(raw)},
                {"normalized_formula", stl::format(pushed)},
                {"formula_length", stl::formula_length(pushed)},
                {"cells", m.cells.size()},
                {"choice_blocks", m.choice_count()},
                {"embedded_structures", m.embedded_structures()},
                {"parameters", m.params.size()},
                {"head", m.head == fernn::Head::Tanh ? "tanh" : "identity"},
                {"normalized_inputs", m.normalization.has_value()}}
               .dump(2)
        << '\n';
  } else {
    out << stl::format(raw) << '\n';
    out << "negations pushed: " << stl::format(pushed) << "  (length " << stl::formula_length(pushed) << ")\n";
    out << "cells " << m.cells.size() << " (atoms " << cells[0] << ", choice blocks " << cells[7]
        << ", interval cells " << cells[8] << "), parameters " << m.params.size() << ", embedded structures "
        << m.embedded_structures() << '\n';
  }
  return 0;
}

/// Parses argv and runs one subcommand. Usage and runtime errors print a
/// single "error: ..." line to `err` and return nonzero.
inline int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Infer past-time signal temporal logic formulas from labeled traces"};
  app.require_subcommand(1);

  GenOptions gen;
  auto* g = app.add_subcommand("gen-data", "Generate a synthetic dataset as CSV");
  g->add_option("kind", gen.kind, "step-threshold | cct | interval")->required();
  g->add_option("--n", gen.n, "number of traces (even)");
  g->add_option("--T,--length", gen.length, "steps per trace");
  g->add_option("--seed", gen.seed, "random seed")->required();
  g->add_option("--positive-level", gen.positive_level, "step-threshold: positive level");
  g->add_option("--negative-level", gen.negative_level, "step-threshold: negative level");
  g->add_option("--noise", gen.noise, "step-threshold: noise half-width");
  g->add_option("--out", gen.out, "output CSV (default: standard output)");

  TrainOptions tr;
  auto* t = app.add_subcommand("train", "Train a model and extract a formula");
  t->add_option("--data", tr.data, "CSV dataset")->required();
  t->add_option("--length", tr.length, "fixed formula length (2..6)");
  t->add_option("--up-to-length", tr.up_to_length, "maximum formula length (2..6)");
  t->add_option("--interval-window", tr.interval_window, "learn a bounded interval over offsets 0..W");
  t->add_option("--interval-kind", tr.interval_kind, "hist | once");
  t->add_option("--seed", tr.seed, "random seed")->required();
  t->add_option("--lr", tr.lr, "learning rate");
  t->add_option("--max-epochs", tr.max_epochs, "epoch cap");
  t->add_option("--patience", tr.patience, "early stopping patience");
  t->add_flag("--early-stop,!--no-early-stop", tr.early_stop, "stop when the loss stagnates");
  t->add_flag("--no-since", tr.no_since, "omit Since layers (also runs a paired model with them)");
  t->add_option("--continuous-labels", tr.continuous_labels, "relabel with this formula's robustness");
  t->add_option("--head", tr.head, "auto | tanh | identity");
  t->add_flag("--reverse", tr.reverse, "reverse traces (future-time formulas)");
  t->add_flag("--compare-unquantized", tr.compare_unquantized, "also train with real-valued choice weights");
  t->add_option("--batch-size", tr.batch_size, "mini-batch size (0 = full batch)");
  t->add_option("--split", tr.split, "train fraction");
  t->add_flag("--no-normalize", tr.no_normalize, "skip [0,1] feature normalization");
  t->add_option("--out", tr.out, "write the JSON report here");
  t->add_option("--model-out", tr.model_out, "write the trained model checkpoint here");
  t->add_flag("--json", tr.json, "print the JSON report");

  EnumOptions en;
  auto* e = app.add_subcommand("enumerate", "Enumerative baseline: best grid-fitted formula");
  e->add_option("--data", en.data, "CSV dataset")->required();
  e->add_option("--length", en.length, "maximum formula length");
  e->add_option("--grid", en.grid, "thresholds per feature");
  e->add_flag("--early-exit,!--no-early-exit", en.early_exit, "stop at the first formula below --target");
  e->add_option("--target", en.target, "early-exit MCR target");
  e->add_option("--cap", en.cap, "structure cap");
  e->add_flag("--no-since", en.no_since, "omit Since");
  e->add_flag("--reverse", en.reverse, "reverse traces");
  e->add_option("--out", en.out, "write the JSON report here");
  e->add_flag("--json", en.json, "print the JSON report");

  EvalOptions mon;
  auto* mo = app.add_subcommand("monitor", "Final-step robustness of a formula on every trace");
  mo->add_option("formula", mon.formula, "formula text")->required();
  mo->add_option("data", mon.data, "CSV dataset")->required();
  mo->add_flag("--reverse", mon.reverse, "reverse traces");
  mo->add_flag("--json", mon.json, "JSON output");

  EvalOptions ev;
  auto* va = app.add_subcommand("eval", "Misclassification rate of a formula");
  va->add_option("formula", ev.formula, "formula text")->required();
  va->add_option("data", ev.data, "CSV dataset")->required();
  va->add_flag("--reverse", ev.reverse, "reverse traces");
  va->add_flag("--json", ev.json, "JSON output");

  InspectOptions in;
  auto* i = app.add_subcommand("inspect", "Describe a saved model checkpoint");
  i->add_option("model", in.model, "checkpoint file")->required();
  i->add_flag("--json", in.json, "JSON output");

  try {
    std::vector<std::string> args;
    for (int k = argc - 1; k > 0; --k) args.emplace_back(argv[k]);
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return 0;
  } catch (const CLI::ParseError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  }

  try {
    if (g->parsed()) return cmd_gen_data(gen, out);
    if (t->parsed()) return cmd_train(tr, out);
    if (e->parsed()) return cmd_enumerate(en, out);
    if (mo->parsed()) return cmd_monitor(mon, out);
    if (va->parsed()) return cmd_eval(ev, out);
    if (i->parsed()) return cmd_inspect(in, out);
  } catch (const std::exception& ex) {
    std::string msg = ex.what();
    for (auto& c : msg) {
      if (c == '\n') c = ' ';
    }
    err << "error: " << msg << '\n';
    return 1;
  }
  return 1;
}

}  // namespace tlinfer::cli
