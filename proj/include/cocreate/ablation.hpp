#pragma once

#include <optional>
#include <string>
#include <vector>

#include "cocreate/providers.hpp"
#include "cocreate/stats.hpp"

namespace cocreate {

struct AblationOptions {
  std::size_t runs = 3;
  std::size_t count = 9;
  std::size_t threads = 4;
};

struct AblationCell {
  std::size_t prompt_index = 0;
  IdeationMode mode = IdeationMode::Associative;
  std::size_t run = 0;
  std::optional<double> diversity;  // absent when the cell failed twice
  std::vector<std::string> titles;
  std::string error;
};

struct AblationPromptSummary {
  std::string prompt;
  std::optional<double> associative;  // mean over the completed runs
  std::optional<double> plain;
  std::size_t associative_runs = 0;
  std::size_t plain_runs = 0;
};

struct AblationReport {
  std::vector<AblationCell> cells;  // prompt-major, then mode, then run
  std::vector<AblationPromptSummary> prompts;
  std::optional<stats::WilcoxonResult> test;  // associative vs plain, paired by prompt
  std::string test_error;

  std::size_t aggregate_count() const;  // non-missing per-prompt means
};

// Every (prompt, mode, run) cell generates `count` ideas, embeds their
// titles and scores diversity. A failing cell is retried once and then
// recorded as missing.
AblationReport run_ablation(const std::vector<std::string>& prompts, TextProvider& text,
                            EmbeddingProvider& embed, const AblationOptions& options = {});

std::string ablation_cells_csv(const AblationReport& report);
std::string ablation_summary_csv(const AblationReport& report);
std::string ablation_summary_text(const AblationReport& report);

// One prompt per non-empty line; '#' starts a comment line.
std::vector<std::string> read_prompt_lines(std::string_view text);

}  // namespace cocreate
