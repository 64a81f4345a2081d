#pragma once
// Shared fixtures for the test binaries: random sketch generation, an
// independent renderer, a brute-force signed-rank enumerator and a
// scripted text provider.

#include <cmath>
#include <deque>
#include <functional>
#include <mutex>
#include <random>
#include <regex>
#include <string>
#include <vector>

#include "cocreate/providers.hpp"
#include "cocreate/sketch.hpp"

namespace testkit {

using cocreate::sketch::Custom;
using cocreate::sketch::OptionIndex;
using cocreate::sketch::Parameter;
using cocreate::sketch::Selections;
using cocreate::sketch::Sketch;

inline std::string random_name(std::mt19937_64& rng, std::size_t salt) {
  static const std::string first = "abcdefghijklmnopqrstuvwxyz";
  static const std::string rest = "abcdefghijklmnopqrstuvwxyz0123456789_";
  std::string name(1, first[rng() % first.size()]);
  const auto len = rng() % 8;
  for (std::size_t i = 0; i < len; ++i) name.push_back(rest[rng() % rest.size()]);
  return name + "_" + std::to_string(salt);
}

// Literal text with braces, multi-byte characters and the occasional
// quote or backslash.
inline std::string random_literal(std::mt19937_64& rng, std::size_t max_len = 12) {
  static const std::vector<std::string> pieces = {
      "a", "b", " ", "the ", "{", "}", "é", "漢", "🎨", "\"", "\\", "\n", ",", "x", "-", "ß"};
  std::string out;
  const auto len = rng() % (max_len + 1);
  for (std::size_t i = 0; i < len; ++i) out += pieces[rng() % pieces.size()];
  return out;
}

inline std::string random_option(std::mt19937_64& rng) {
  std::string out = random_literal(rng, 6);
  if (out.empty()) out = "opt";
  return out + std::to_string(rng() % 100);
}

// Valid by construction: every parameter used at least once, defaults at 0.
inline Sketch random_sketch(std::mt19937_64& rng) {
  Sketch s;
  const auto n_params = 1 + rng() % 6;
  for (std::size_t i = 0; i < n_params; ++i) {
    Parameter p;
    p.name = random_name(rng, i);
    p.label = random_literal(rng, 5);
    const auto n_opts = 1 + rng() % 5;
    for (std::size_t k = 0; k < n_opts; ++k) p.options.push_back(random_option(rng));
    s.parameters.push_back(std::move(p));
  }
  std::vector<std::string> slots;
  for (const auto& p : s.parameters) slots.push_back(p.name);
  const auto extra = rng() % 3;
  for (std::size_t i = 0; i < extra; ++i) slots.push_back(s.parameters[rng() % n_params].name);
  std::shuffle(slots.begin(), slots.end(), rng);
  std::string tpl;
  for (const auto& name : slots) {
    tpl += cocreate::sketch::escape_literal(random_literal(rng));
    tpl += "{" + name + "}";
  }
  tpl += cocreate::sketch::escape_literal(random_literal(rng));
  s.template_text = tpl;
  return s;
}

inline Selections random_selections(const Sketch& s, std::mt19937_64& rng) {
  Selections sel;
  for (const auto& p : s.parameters) {
    if (rng() % 4 == 0) {
      sel.emplace(p.name, Custom{random_literal(rng, 5) + "custom"});
    } else {
      sel.emplace(p.name, OptionIndex{static_cast<std::size_t>(rng() % p.options.size())});
    }
  }
  return sel;
}

struct OracleRender {
  std::string text;
  std::vector<std::tuple<std::string, std::size_t, std::size_t>> spans;
};

// Regex-driven renderer, written separately from the library's tokenizer.
inline OracleRender oracle_render(const Sketch& s, const Selections& sel) {
  static const std::regex token(R"(\{\{|\}\}|\{([a-z][a-z0-9_]*)\})");
  OracleRender out;
  const std::string& tpl = s.template_text;
  auto begin = std::sregex_iterator(tpl.begin(), tpl.end(), token);
  std::size_t last = 0;
  for (auto it = begin; it != std::sregex_iterator(); ++it) {
    const auto& m = *it;
    out.text += tpl.substr(last, static_cast<std::size_t>(m.position()) - last);
    last = static_cast<std::size_t>(m.position() + m.length());
    const std::string tok = m.str();
    if (tok == "{{") {
      out.text += "{";
    } else if (tok == "}}") {
      out.text += "}";
    } else {
      const std::string name = m[1].str();
      const auto& choice = sel.at(name);
      std::string value;
      if (const auto* idx = std::get_if<OptionIndex>(&choice)) {
        for (const auto& p : s.parameters) {
          if (p.name == name) value = p.options.at(idx->index);
        }
      } else {
        value = std::get<Custom>(choice).text;
      }
      const auto start = out.text.size();
      out.text += value;
      out.spans.emplace_back(name, start, out.text.size());
    }
  }
  out.text += tpl.substr(last);
  return out;
}

// Rebuilds a template from rendered text by putting slots back where the
// spans are and re-escaping everything else.
inline std::string unrender(const std::string& text,
                            const std::vector<cocreate::sketch::Span>& spans) {
  std::string tpl;
  std::size_t pos = 0;
  for (const auto& sp : spans) {
    tpl += cocreate::sketch::escape_literal(text.substr(pos, sp.byte_start - pos));
    tpl += "{" + sp.param_name + "}";
    pos = sp.byte_end;
  }
  tpl += cocreate::sketch::escape_literal(text.substr(pos));
  return tpl;
}

// Two-sided p by enumerating all 2^n sign assignments with O(n^2) midranks.
inline double brute_force_wilcoxon_p(const std::vector<double>& a, const std::vector<double>& b,
                                     double* w_plus_out = nullptr) {
  std::vector<double> d;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] - b[i] != 0.0) d.push_back(a[i] - b[i]);
  }
  const std::size_t n = d.size();
  std::vector<double> rank(n);
  for (std::size_t i = 0; i < n; ++i) {
    double below = 0, equal = 0;
    for (std::size_t j = 0; j < n; ++j) {
      if (std::fabs(d[j]) < std::fabs(d[i])) below += 1;
      if (std::fabs(d[j]) == std::fabs(d[i])) equal += 1;
    }
    rank[i] = below + (equal + 1) / 2.0;
  }
  double w = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (d[i] > 0) w += rank[i];
  }
  if (w_plus_out) *w_plus_out = w;
  const double centre = static_cast<double>(n * (n + 1)) / 4.0;
  const double observed = std::fabs(w - centre);
  std::size_t extreme = 0;
  const std::size_t total = std::size_t{1} << n;
  for (std::size_t mask = 0; mask < total; ++mask) {
    double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask & (std::size_t{1} << i)) s += rank[i];
    }
    if (std::fabs(s - centre) >= observed - 1e-9) ++extreme;
  }
  return static_cast<double>(extreme) / static_cast<double>(total);
}

// Answers text requests from a queue of canned replies or exceptions.
class ScriptedText final : public cocreate::TextProvider {
 public:
  using Step = std::function<std::string(const cocreate::TextRequest&)>;

  void push(std::string reply) {
    steps_.push_back([r = std::move(reply)](const cocreate::TextRequest&) { return r; });
  }
  void push(Step step) { steps_.push_back(std::move(step)); }

  std::string generate(const cocreate::TextRequest& req) override {
    std::lock_guard lock(mu_);
    requests.push_back(req);
    if (steps_.empty()) throw cocreate::ProviderError(cocreate::ProviderErrorKind::Refusal, "script exhausted");
    auto step = std::move(steps_.front());
    steps_.pop_front();
    return step(req);
  }
  bool supports_image_input() const override { return accepts_images; }

  std::vector<cocreate::TextRequest> requests;
  bool accepts_images = false;

 private:
  std::mutex mu_;
  std::deque<Step> steps_;
};

}  // namespace testkit
