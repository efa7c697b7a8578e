// nsc: generate data, train, evaluate, serve and consult from one binary.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime error.
// NSC_LOG sets the log level (trace, debug, info, warn, error, off).

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "nsc/nsc.hpp"
#include "nsc/service/service.hpp"

namespace {

/// Wrong flags or values; reported with exit code 1.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::vector<std::size_t> parse_k_list(const std::string& text) {
  std::vector<std::size_t> ks;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      throw UsageError("invalid k list '" + text + "'");
    }
    if (pos != item.size() || v < 1) throw UsageError("invalid k list '" + text + "'");
    ks.push_back(static_cast<std::size_t>(v));
  }
  if (ks.empty()) throw UsageError("invalid k list '" + text + "'");
  return ks;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw nsc::Error("cannot write " + path.string());
  out << text;
}

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

// ---- generate ------------------------------------------------------------

struct GenerateArgs {
  std::size_t diseases = 20, symptoms = 60, train = 20000, val = 2000, test = 2000;
  std::uint64_t seed = 0;
  std::string out;
};

int run_generate(const GenerateArgs& a) {
  auto profiles = nsc::generate_profiles(a.diseases, a.symptoms, a.seed);
  auto split = nsc::generate_dataset(profiles, a.train, a.val, a.test, a.seed);
  nsc::write_dataset(a.out, profiles, split);
  std::cout << nsc::format_statistics(nsc::dataset_statistics(split));
  spdlog::info("wrote dataset to {}", a.out);
  return 0;
}

// ---- train ---------------------------------------------------------------

struct TrainArgs {
  std::string data, config, mode, out;
  std::optional<std::size_t> fixed_iters, epochs;
  std::optional<std::uint64_t> seed;
};

nsc::TrainConfig resolve_config(const TrainArgs& a) {
  nsc::TrainConfig cfg;
  if (!a.config.empty()) cfg = nsc::load_train_config(a.config);
  if (!a.mode.empty()) cfg.mode = nsc::train_mode_from_string(a.mode);
  if (a.fixed_iters) cfg.fixed_iters = *a.fixed_iters;
  if (a.epochs) cfg.epochs = *a.epochs;
  if (a.seed) cfg.seed = *a.seed;
  cfg.validate();
  return cfg;
}

int run_train(const TrainArgs& a) {
  const auto cfg = resolve_config(a);
  const auto split = nsc::load_cases(a.data);
  spdlog::info("training {} on {} cases ({} symptoms, {} diseases)", nsc::to_string(cfg.mode), split.train.size(),
               split.vocab.num_symptoms(), split.vocab.num_diseases());
  auto res = nsc::train_model(split, cfg, std::filesystem::path(a.out), [&](const nsc::EpochReport& e) {
    spdlog::info("epoch {}/{}  loss {:.4f} (symptom {:.4f}, diagnosis {:.4f})  iters {:.2f}  val acc@1 {}  {:.1f}s",
                 e.epoch, cfg.epochs, e.joint_loss, e.symptom_loss, e.diagnosis_loss, e.mean_iterations,
                 e.val_acc1 ? fmt(*e.val_acc1) : std::string("n/a"), e.seconds);
  });

  nlohmann::json report = {{"config", nsc::train_config_to_json(cfg)},
                           {"best_epoch", res.report.best_epoch},
                           {"checkpoint", res.report.checkpoint_path}};
  auto epochs = nlohmann::json::array();
  for (const auto& e : res.report.epochs)
    epochs.push_back({{"epoch", e.epoch},
                      {"joint_loss", e.joint_loss},
                      {"symptom_loss", e.symptom_loss},
                      {"diagnosis_loss", e.diagnosis_loss},
                      {"mean_iterations", e.mean_iterations},
                      {"val_acc1", e.val_acc1 ? nlohmann::json(*e.val_acc1) : nlohmann::json()},
                      {"val_symptom_f1", e.val_symptom_f1 ? nlohmann::json(*e.val_symptom_f1) : nlohmann::json()},
                      {"seconds", e.seconds}});
  report["epochs"] = std::move(epochs);
  write_file(a.out + ".report.json", report.dump(2) + "\n");

  const auto& best = res.report.epochs[res.report.best_epoch - 1];
  if (best.val_acc1) std::cout << "final validation acc@1\t" << fmt(*best.val_acc1) << "\n";
  std::cout << "checkpoint\t" << a.out << "\n";
  return 0;
}

// ---- eval / baseline -----------------------------------------------------

struct EvalArgs {
  std::string ckpt, data, k = "1,3,5", split = "test", out, curve;
};

const std::vector<nsc::CaseRecord>& pick_split(const nsc::DatasetSplit& s, const std::string& which) {
  if (which == "test") return s.test;
  if (which == "val") return s.validation;
  if (which == "train") return s.train;
  throw UsageError("unknown split '" + which + "'");
}

int run_eval(const EvalArgs& a) {
  const auto ks = parse_k_list(a.k);
  const auto bundle = nsc::load_checkpoint(a.ckpt);
  const auto split = nsc::load_cases(a.data, bundle.vocab);
  const auto& records = pick_split(split, a.split);
  if (records.empty()) throw nsc::Error("split '" + a.split + "' has no cases");
  const auto cases = nsc::encode_cases(records, bundle.vocab);
  const auto res = nsc::evaluate_model(bundle, cases, ks);
  const auto text = nsc::format_report(res.report);
  std::cout << text;
  write_file(a.out.empty() ? a.ckpt + ".eval.tsv" : a.out, text);
  write_file(a.curve.empty() ? a.ckpt + ".entropy.tsv" : a.curve, nsc::format_entropy_curve(res.report.entropy_curve));
  return 0;
}

struct BaselineArgs {
  std::string data, config, k = "1,3,5";
  bool implicit = false;
};

int run_baseline(const BaselineArgs& a) {
  const auto ks = parse_k_list(a.k);
  nsc::TrainConfig cfg;
  if (!a.config.empty()) cfg = nsc::load_train_config(a.config);
  cfg.validate();
  const auto split = nsc::load_cases(a.data);
  const auto res = nsc::baseline_train_eval(split, cfg, a.implicit, ks);
  std::cout << "metric\tvalue\ncases\t" << res.report.cases << "\n";
  for (auto [k, v] : res.report.accuracy) std::cout << "acc@" << k << "\t" << fmt(v) << "\n";
  return 0;
}

// ---- serve ---------------------------------------------------------------

struct ServeArgs {
  std::string ckpt, host = "127.0.0.1", static_dir, cors = "*";
  int port = 8080;
};

int run_serve(const ServeArgs& a) {
  const auto bytes = nsc::read_file_bytes(a.ckpt);
  auto bundle = std::make_shared<const nsc::ModelBundle>(nsc::deserialize_checkpoint(bytes));
  nsc::service::ConsultationService svc(bundle, nsc::checkpoint_hash(bytes));
  httplib::Server server;
  nsc::service::mount(server, svc, a.cors);
  if (!a.static_dir.empty() && !server.set_mount_point("/", a.static_dir))
    throw nsc::Error("static directory not found: " + a.static_dir);
  spdlog::info("serving {} on http://{}:{}", a.ckpt, a.host, a.port);
  if (!server.listen(a.host, a.port)) throw nsc::Error("cannot listen on " + a.host + ":" + std::to_string(a.port));
  return 0;
}

// ---- consult -------------------------------------------------------------

/// Exact name, or the single vocabulary entry starting with `text`.
std::optional<std::size_t> complete(const nsc::NameIndex& names, const std::string& text,
                                    std::vector<std::string>& candidates) {
  candidates.clear();
  if (auto id = names.find(text)) return id;
  for (const auto& n : names.names())
    if (n.rfind(text, 0) == 0) candidates.push_back(n);
  if (candidates.size() == 1) return names.find(candidates.front());
  return std::nullopt;
}

std::string trim(std::string s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

void show_top(const nsc::ModelBundle& bundle, const std::vector<float>& probs, double u) {
  const auto top = nsc::service::top_diseases(bundle, probs);
  for (const auto& t : top)
    std::cout << "  " << t["disease"].get<std::string>() << "  " << fmt(t["prob"].get<double>()) << "\n";
  std::cout << "  uncertainty " << fmt(u) << "\n";
}

int run_consult(const std::string& ckpt) {
  const auto bundle = nsc::load_checkpoint(ckpt);
  nsc::KnownState state(bundle.num_symptoms());
  std::vector<std::string> candidates;
  std::string line;
  std::cout << "Enter known symptoms, one per line (prefixes are completed); empty line to start.\n";
  while (true) {
    std::cout << "symptom> " << std::flush;
    if (!std::getline(std::cin, line)) {
      std::cout << "\n";
      return 0;
    }
    line = trim(line);
    if (line.empty()) {
      if (state.known_count() > 0) break;
      std::cout << "at least one symptom is needed\n";
      continue;
    }
    if (auto id = complete(bundle.vocab.symptoms, line, candidates)) {
      state.reveal(*id, true);
      std::cout << "  + " << bundle.vocab.symptoms.name(*id) << "\n";
    } else if (candidates.empty()) {
      std::cout << "  unknown symptom '" << line << "'\n";
    } else {
      std::cout << "  ambiguous, did you mean:";
      for (std::size_t i = 0; i < std::min<std::size_t>(candidates.size(), 8); ++i) std::cout << " " << candidates[i];
      std::cout << (candidates.size() > 8 ? " ...\n" : "\n");
    }
  }

  nsc::Consultation c(bundle, state, bundle.stopping);
  show_top(bundle, c.trace().final_diagnosis, c.current_uncertainty());
  while (!c.concluded()) {
    std::cout << "Do you have " << bundle.vocab.symptoms.name(*c.question()) << "? [y/n] " << std::flush;
    if (!std::getline(std::cin, line)) {
      std::cout << "\n";
      return 0;
    }
    line = trim(line);
    if (line == "y" || line == "yes") c.answer(true);
    else if (line == "n" || line == "no") c.answer(false);
    else continue;
    show_top(bundle, c.trace().final_diagnosis, c.current_uncertainty());
  }
  std::cout << "concluded (" << nsc::to_string(c.trace().stop_reason) << ") after " << c.trace().steps.size()
            << " questions\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  if (const char* lvl = std::getenv("NSC_LOG")) spdlog::set_level(spdlog::level::from_str(lvl));
  spdlog::set_pattern("[%H:%M:%S] %^%l%$ %v");

  CLI::App app{"nsc: interactive symptom checking with two jointly trained networks"};
  app.require_subcommand(1);

  GenerateArgs gen;
  auto* g = app.add_subcommand("generate", "write a synthetic dataset");
  g->add_option("--diseases", gen.diseases, "number of diseases")->check(CLI::PositiveNumber);
  g->add_option("--symptoms", gen.symptoms, "symptom pool size")->check(CLI::PositiveNumber);
  g->add_option("--train", gen.train, "training cases")->check(CLI::PositiveNumber);
  g->add_option("--val", gen.val, "validation cases")->check(CLI::PositiveNumber);
  g->add_option("--test", gen.test, "test cases")->check(CLI::PositiveNumber);
  g->add_option("--seed", gen.seed, "master seed");
  g->add_option("--out", gen.out, "output directory")->required();

  TrainArgs tr;
  auto* t = app.add_subcommand("train", "train both submodels jointly");
  t->add_option("--data", tr.data, "dataset directory or record file")->required();
  t->add_option("--config", tr.config, "JSON training config");
  t->add_option("--mode", tr.mode, "full | no-entropy | diag-only");
  t->add_option("--fixed-iters", tr.fixed_iters, "iterations for the non-entropy modes");
  t->add_option("--epochs", tr.epochs, "override the configured epochs");
  t->add_option("--seed", tr.seed, "override the configured seed");
  t->add_option("--out", tr.out, "checkpoint path")->required();

  EvalArgs ev;
  auto* e = app.add_subcommand("eval", "evaluate a checkpoint with gold-answer episodes");
  e->add_option("--ckpt", ev.ckpt, "checkpoint")->required();
  e->add_option("--data", ev.data, "dataset directory or record file")->required();
  e->add_option("--k", ev.k, "comma separated k values for Acc@k");
  e->add_option("--split", ev.split, "test | val | train");
  e->add_option("--out", ev.out, "report file (default <ckpt>.eval.tsv)");
  e->add_option("--curve", ev.curve, "entropy curve file (default <ckpt>.entropy.tsv)");

  BaselineArgs bl;
  auto* b = app.add_subcommand("baseline", "train and evaluate a one-shot classifier");
  b->add_option("--data", bl.data, "dataset directory")->required();
  b->add_option("--config", bl.config, "JSON training config");
  b->add_option("--k", bl.k, "comma separated k values for Acc@k");
  b->add_flag("--implicit", bl.implicit, "also feed the implicit findings");

  ServeArgs sv;
  auto* s = app.add_subcommand("serve", "run the HTTP consultation service");
  s->add_option("--ckpt", sv.ckpt, "checkpoint")->required();
  s->add_option("--host", sv.host, "bind address");
  s->add_option("--port", sv.port, "port")->check(CLI::Range(1, 65535));
  s->add_option("--static", sv.static_dir, "directory served at /");
  s->add_option("--cors", sv.cors, "allowed CORS origin");

  std::string consult_ckpt;
  auto* c = app.add_subcommand("consult", "interactive consultation in the terminal");
  c->add_option("--ckpt", consult_ckpt, "checkpoint")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& ok) {
    return app.exit(ok);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    return 1;
  }

  try {
    if (*g) return run_generate(gen);
    if (*t) return run_train(tr);
    if (*e) return run_eval(ev);
    if (*b) return run_baseline(bl);
    if (*s) return run_serve(sv);
    if (*c) return run_consult(consult_ckpt);
  } catch (const UsageError& err) {
    spdlog::error("{}", err.what());
    return 1;
  } catch (const nsc::ConfigError& err) {
    spdlog::error("{}", err.what());
    return 1;
  } catch (const std::exception& err) {
    spdlog::error("{}", err.what());
    return 2;
  }
  return 1;
}
