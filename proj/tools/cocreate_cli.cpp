// cocreate: run the service, the ablation, and the offline reports.
#include <csignal>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "cocreate/ablation.hpp"
#include "cocreate/error.hpp"
#include "cocreate/http_providers.hpp"
#include "cocreate/metrics.hpp"
#include "cocreate/service.hpp"
#include "cocreate/store.hpp"
#include "cocreate/study.hpp"

namespace fs = std::filesystem;
using namespace cocreate;

namespace {

enum Exit { kOk = 0, kUsage = 1, kData = 2, kProvider = 3 };

std::string read_input(const std::string& path) {
  std::stringstream buf;
  if (path == "-") {
    buf << std::cin.rdbuf();
  } else {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw StorageError("cannot read " + path);
    buf << in.rdbuf();
  }
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw StorageError("cannot write " + path.string());
  out << content;
}

struct ProviderFlags {
  bool mock = false;
  std::uint64_t seed = 7;
};

Providers make_providers(const ProviderFlags& flags) {
  ProviderConfig config = ProviderConfig::from_env();
  if (flags.mock) return gated(mock_providers(flags.seed), config);
  if (config.credential.empty()) {
    throw ProviderError(ProviderErrorKind::Transport, "PROVIDER_KEY is not set (use --mock to run offline)", false);
  }
  auto transport = std::make_shared<HttplibTransport>(config.endpoint, config.timeout_s);
  return gated(http_providers(config, transport), config);
}

Service* g_service = nullptr;

void on_signal(int) {
  if (g_service != nullptr) g_service->stop();
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ProviderError*>(&e) || dynamic_cast<const SchemaError*>(&e) ||
      dynamic_cast<const SketchSynthesisError*>(&e)) {
    return kProvider;
  }
  return kData;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Co-creation service and evaluation tools"};
  app.require_subcommand(1);

  ProviderFlags flags;
  auto add_provider_flags = [&](CLI::App* cmd) {
    cmd->add_flag("--mock", flags.mock, "Use the deterministic offline providers");
    cmd->add_option("--seed", flags.seed, "Seed for the offline providers");
  };

  std::string root = "./cocreate-data";
  std::string host = "127.0.0.1";
  int port = 8080;
  int wait_ms = 2000;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--root", root, "Data directory");
  serve->add_option("--host", host);
  serve->add_option("--port", port);
  serve->add_option("--wait-ms", wait_ms, "How long a generation may hold the request before answering 202");
  add_provider_flags(serve);

  std::string prompts_file, out_dir = "ablation-out";
  AblationOptions ablation;
  auto* ablate = app.add_subcommand("ablate", "Associative vs plain ideation diversity");
  ablate->add_option("--prompts", prompts_file, "One task prompt per line")->required();
  ablate->add_option("--runs", ablation.runs)->check(CLI::PositiveNumber);
  ablate->add_option("--count", ablation.count)->check(CLI::Range(2, 64));
  ablate->add_option("--threads", ablation.threads)->check(CLI::PositiveNumber);
  ablate->add_option("--out", out_dir, "Output directory");
  add_provider_flags(ablate);

  std::string log_file, session_id;
  bool as_json = false;
  auto* metrics = app.add_subcommand("metrics", "Behavioral metrics of a session log as CSV");
  auto* log_opt = metrics->add_option("--log", log_file, "Event log (JSON Lines), '-' for stdin");
  auto* session_opt = metrics->add_option("--session", session_id, "Session in the store under --root");
  log_opt->excludes(session_opt);
  metrics->add_option("--root", root, "Data directory");
  metrics->add_flag("--json", as_json, "Emit JSON instead of CSV");

  auto* exporter = app.add_subcommand("export", "Print a session's event log as JSON Lines");
  exporter->add_option("--session", session_id)->required();
  exporter->add_option("--root", root, "Data directory");

  auto* importer = app.add_subcommand("import", "Load an exported event log into the store");
  importer->add_option("--log", log_file, "Event log (JSON Lines), '-' for stdin")->required();
  importer->add_option("--root", root, "Data directory");

  std::string scores_file, ratings_file;
  auto* survey = app.add_subcommand("survey", "Compare the two systems on survey scores");
  survey->add_option("--scores", scores_file, "Per-participant score CSV")->required();
  survey->add_option("--ratings", ratings_file, "Optional evaluator ratings CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  auto warn = [](const std::string& msg) { std::cerr << "warning: " << msg << "\n"; };

  try {
    if (*serve) {
      SessionStore store(root, warn);
      ServiceOptions options;
      options.wait_window = std::chrono::milliseconds(wait_ms);
      Service service(store, make_providers(flags), options);
      g_service = &service;
      std::signal(SIGINT, on_signal);
      std::signal(SIGTERM, on_signal);
      std::thread announce([&] {
        for (int i = 0; i < 100 && service.bound_port() == 0; ++i) {
          std::this_thread::sleep_for(std::chrono::milliseconds(20));
        }
        if (service.bound_port() > 0) {
          std::cerr << "listening on " << host << ":" << service.bound_port() << "\n";
        }
      });
      const bool ok = service.serve(host, port);
      announce.join();
      g_service = nullptr;
      if (!ok && service.bound_port() == 0) {
        std::cerr << "error: cannot bind " << host << ":" << port << "\n";
        return kData;
      }
      return kOk;
    }
    if (*ablate) {
      const auto prompts = read_prompt_lines(read_input(prompts_file));
      if (prompts.empty()) throw RangeError("no prompts in " + prompts_file);
      auto providers = make_providers(flags);
      const auto report = run_ablation(prompts, *providers.text, *providers.embed, ablation);
      fs::create_directories(out_dir);
      write_file(fs::path(out_dir) / "cells.csv", ablation_cells_csv(report));
      write_file(fs::path(out_dir) / "summary.csv", ablation_summary_csv(report));
      const auto text = ablation_summary_text(report);
      write_file(fs::path(out_dir) / "summary.txt", text);
      std::cout << text;
      return kOk;
    }
    if (*metrics) {
      std::vector<Event> log;
      if (!session_id.empty()) {
        SessionStore store(root, warn);
        log = store.get(session_id)->events();
      } else if (!log_file.empty()) {
        log = parse_jsonl(read_input(log_file));
      } else {
        std::cerr << "metrics: give --log FILE or --session ID\n";
        return kUsage;
      }
      const auto m = behavioral_metrics(log);
      if (as_json) {
        std::cout << metrics_to_json(m).dump(2) << "\n";
      } else {
        std::cout << metrics_csv_header() << "\n" << metrics_csv_row(m) << "\n";
      }
      return kOk;
    }
    if (*exporter) {
      SessionStore store(root, warn);
      std::cout << store.export_jsonl(session_id);
      return kOk;
    }
    if (*importer) {
      SessionStore store(root, warn);
      auto handle = store.import_jsonl(read_input(log_file));
      std::cout << handle->id() << "\n";
      return kOk;
    }
    if (*survey) {
      const auto scores = study::scores_from_csv(read_input(scores_file));
      std::cout << study::comparisons_to_csv(study::compare_systems(scores));
      if (!ratings_file.empty()) {
        const auto ratings = study::participant_ratings(study::ratings_from_csv(read_input(ratings_file)));
        std::cout << "\nparticipant_id,system,novelty,usefulness,images\n";
        for (const auto& r : ratings) {
          std::cout << study::csv_field(r.participant_id) << ',' << study::to_string(r.condition) << ','
                    << r.novelty << ',' << r.usefulness << ',' << r.images << "\n";
        }
      }
      return kOk;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return kUsage;
}
