#include "cocreate/ablation.hpp"

#include <atomic>
#include <sstream>
#include <thread>

#include "cocreate/ideation.hpp"
#include "cocreate/study.hpp"

namespace cocreate {

std::size_t AblationReport::aggregate_count() const {
  std::size_t n = 0;
  for (const auto& p : prompts) n += static_cast<std::size_t>(p.associative.has_value()) +
                                     static_cast<std::size_t>(p.plain.has_value());
  return n;
}

namespace {

void run_cell(AblationCell& cell, const std::string& prompt, TextProvider& text,
              EmbeddingProvider& embed, std::size_t count) {
  for (int attempt = 0; attempt < 2; ++attempt) {
    try {
      ideation::IdeationRequest req;
      req.user_prompt = prompt;
      req.count = count;
      req.mode = cell.mode;
      const auto ideas = ideation::request_ideas(text, req);
      std::vector<std::string> titles;
      for (const auto& idea : ideas) titles.push_back(idea.title);
      const auto vectors = embed.embed_texts(titles);
      cell.diversity = stats::diversity(vectors).score;
      cell.titles = titles;
      cell.error.clear();
      return;
    } catch (const std::exception& e) {
      cell.error = e.what();
    }
  }
}

}  // namespace

AblationReport run_ablation(const std::vector<std::string>& prompts, TextProvider& text,
                            EmbeddingProvider& embed, const AblationOptions& options) {
  if (prompts.empty()) throw RangeError("ablation needs at least one prompt");
  if (options.runs == 0 || options.count < 2) throw RangeError("ablation needs runs >= 1 and count >= 2");

  AblationReport report;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    for (auto mode : {IdeationMode::Associative, IdeationMode::Plain}) {
      for (std::size_t r = 0; r < options.runs; ++r) {
        report.cells.push_back(AblationCell{p, mode, r, std::nullopt, {}, {}});
      }
    }
  }

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < report.cells.size(); i = next++) {
      auto& cell = report.cells[i];
      run_cell(cell, prompts[cell.prompt_index], text, embed, options.count);
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(options.threads, report.cells.size()));
  std::vector<std::jthread> pool;
  for (std::size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  pool.clear();

  std::vector<double> assoc_pairs, plain_pairs;
  for (std::size_t p = 0; p < prompts.size(); ++p) {
    AblationPromptSummary s{prompts[p], std::nullopt, std::nullopt, 0, 0};
    double sum_a = 0, sum_p = 0;
    for (const auto& cell : report.cells) {
      if (cell.prompt_index != p || !cell.diversity) continue;
      if (cell.mode == IdeationMode::Associative) {
        sum_a += *cell.diversity;
        ++s.associative_runs;
      } else {
        sum_p += *cell.diversity;
        ++s.plain_runs;
      }
    }
    if (s.associative_runs > 0) s.associative = sum_a / static_cast<double>(s.associative_runs);
    if (s.plain_runs > 0) s.plain = sum_p / static_cast<double>(s.plain_runs);
    if (s.associative && s.plain) {
      assoc_pairs.push_back(*s.associative);
      plain_pairs.push_back(*s.plain);
    }
    report.prompts.push_back(std::move(s));
  }

  if (assoc_pairs.empty()) {
    report.test_error = "no prompt has both conditions complete";
  } else {
    try {
      report.test = stats::wilcoxon_signed_rank(assoc_pairs, plain_pairs);
    } catch (const Error& e) {
      report.test_error = e.what();
    }
  }
  return report;
}

namespace {

std::string fmt(const std::optional<double>& v) {
  if (!v) return "";
  std::ostringstream os;
  os.precision(6);
  os << std::fixed << *v;
  return os.str();
}

}  // namespace

std::string ablation_cells_csv(const AblationReport& report) {
  std::ostringstream os;
  os << "prompt_index,mode,run,diversity,error\n";
  for (const auto& c : report.cells) {
    os << c.prompt_index << ',' << to_string(c.mode) << ',' << c.run << ',' << fmt(c.diversity) << ','
       << study::csv_field(c.error) << '\n';
  }
  return os.str();
}

std::string ablation_summary_csv(const AblationReport& report) {
  std::ostringstream os;
  os << "prompt,associative_mean,plain_mean,associative_runs,plain_runs\n";
  for (const auto& p : report.prompts) {
    os << study::csv_field(p.prompt) << ',' << fmt(p.associative) << ',' << fmt(p.plain) << ','
       << p.associative_runs << ',' << p.plain_runs << '\n';
  }
  return os.str();
}

std::string ablation_summary_text(const AblationReport& report) {
  std::vector<double> a, p;
  for (const auto& s : report.prompts) {
    if (s.associative) a.push_back(*s.associative);
    if (s.plain) p.push_back(*s.plain);
  }
  std::ostringstream os;
  os.precision(4);
  os << std::fixed;
  os << "prompts: " << report.prompts.size() << ", cells: " << report.cells.size()
     << ", aggregates: " << report.aggregate_count() << "\n";
  if (!a.empty()) os << "associative: M=" << stats::mean(a) << " SD=" << stats::sample_sd(a) << "\n";
  if (!p.empty()) os << "plain:       M=" << stats::mean(p) << " SD=" << stats::sample_sd(p) << "\n";
  if (report.test) {
    os << "wilcoxon: n=" << report.test->n_nonzero << " W+=" << report.test->w_plus
       << " p=" << report.test->p_two_sided << " (" << stats::to_string(report.test->method) << ")\n";
  } else {
    os << "wilcoxon: unavailable (" << report.test_error << ")\n";
  }
  return os.str();
}

std::vector<std::string> read_prompt_lines(std::string_view text) {
  std::vector<std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == ' ' || line.back() == '\t')) line.pop_back();
    const auto start = line.find_first_not_of(" \t");
    if (start == std::string::npos || line[start] == '#') continue;
    out.push_back(line.substr(start));
  }
  return out;
}

}  // namespace cocreate
