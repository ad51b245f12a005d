#include "relmh/citation_text.hpp"

#include <algorithm>
#include <cctype>
#include <numeric>
#include <set>

namespace relmh {

std::vector<std::string> citation_tokens(const std::string& text) {
  std::vector<std::string> out;
  std::string cur;
  for (unsigned char c : text) {
    if (std::isalnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

double token_jaccard(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::set<std::string> sa(a.begin(), a.end()), sb(b.begin(), b.end());
  if (sa.empty() && sb.empty()) return 0.0;
  size_t both = 0;
  for (const std::string& t : sa) both += sb.count(t);
  return static_cast<double>(both) / static_cast<double>(sa.size() + sb.size() - both);
}

namespace {

// Union-find over citation indices; path halving keeps it near-linear.
struct UnionFind {
  std::vector<size_t> parent;
  explicit UnionFind(size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  size_t find(size_t x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  }
  void unite(size_t a, size_t b) { parent[find(a)] = find(b); }
};

}  // namespace

std::vector<std::vector<size_t>> canopy_groups(const std::vector<std::string>& texts,
                                               double theta) {
  const size_t n = texts.size();
  std::vector<std::vector<std::string>> toks(n);
  for (size_t i = 0; i < n; ++i) toks[i] = citation_tokens(texts[i]);

  UnionFind relaxed(n);
  std::vector<bool> linked(n, false);
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = i + 1; j < n; ++j) {
      double jac = token_jaccard(toks[i], toks[j]);
      if (jac >= theta / 2.0) relaxed.unite(i, j);
      if (jac >= theta) linked[i] = linked[j] = true;
    }
  }

  std::vector<std::vector<size_t>> groups;
  std::vector<size_t> group_of_root(n, SIZE_MAX);
  for (size_t i = 0; i < n; ++i) {
    if (!linked[i]) {
      groups.push_back({i});
      continue;
    }
    size_t root = relaxed.find(i);
    if (group_of_root[root] == SIZE_MAX) {
      group_of_root[root] = groups.size();
      groups.emplace_back();
    }
    groups[group_of_root[root]].push_back(i);
  }
  return groups;
}

namespace {

std::string trim(const std::string& s) {
  size_t b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  size_t e = s.find_last_not_of(" \t");
  return s.substr(b, e - b + 1);
}

}  // namespace

SegmentedCitation segment_citation(const std::string& text, const std::string& separator) {
  SegmentedCitation seg;
  if (separator.empty()) return seg;
  size_t pos = text.find(separator);
  if (pos == std::string::npos) return seg;
  std::string head = trim(text.substr(0, pos));
  std::string tail = trim(text.substr(pos + separator.size()));
  if (head.empty() || tail.empty()) return seg;

  seg.title = std::move(tail);
  size_t start = 0;
  while (true) {
    size_t comma = head.find(',', start);
    std::string name = trim(head.substr(start, comma - start));
    if (!name.empty()) seg.authors.push_back(std::move(name));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  if (seg.authors.empty()) return seg;
  seg.ok = true;
  return seg;
}

}  // namespace relmh
