#include "turncredit/matching.hpp"

#include <algorithm>
#include <cctype>

namespace turncredit {

namespace {

bool equal_content(const std::string& a, const std::string& b, bool case_sensitive) {
  if (case_sensitive) return a == b;
  return std::ranges::equal(a, b, [](unsigned char x, unsigned char y) {
    return std::tolower(x) == std::tolower(y);
  });
}

}  // namespace

double tool_name_score(const ToolCall& pred, const ToolCall& gold) {
  return pred.tool_name == gold.tool_name ? 1.0 : 0.0;
}

double param_name_jaccard(const ToolCall& pred, const ToolCall& gold) {
  if (pred.parameters.empty() && gold.parameters.empty()) return 1.0;
  // both maps are key-ordered, so a merge walk counts the intersection
  std::size_t common = 0;
  auto p = pred.parameters.begin();
  auto g = gold.parameters.begin();
  while (p != pred.parameters.end() && g != gold.parameters.end()) {
    if (p->first < g->first) ++p;
    else if (g->first < p->first) ++g;
    else { ++common; ++p; ++g; }
  }
  const std::size_t united = pred.parameters.size() + gold.parameters.size() - common;
  return static_cast<double>(common) / static_cast<double>(united);
}

std::size_t param_content_score(const ToolCall& pred, const ToolCall& gold, const MatchOptions& options) {
  std::size_t hits = 0;
  for (const auto& [name, content] : gold.parameters) {
    auto it = pred.parameters.find(name);
    if (it != pred.parameters.end() && equal_content(it->second, content, options.case_sensitive_content)) ++hits;
  }
  return hits;
}

double pair_similarity(const ToolCall& pred, const ToolCall& gold, const MatchOptions& options) {
  const double tn = tool_name_score(pred, gold);
  if (tn == 0.0) return 0.0;
  const double pn = param_name_jaccard(pred, gold);
  const double pc = static_cast<double>(param_content_score(pred, gold, options));
  return tn * (tn + pn + pc) / (2.0 + static_cast<double>(gold.parameters.size()));
}

}  // namespace turncredit
