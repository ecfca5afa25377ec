#include "amenpois/group.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <sstream>

#include "amenpois/errors.hpp"

namespace amenpois {

namespace {

constexpr int kMaxSymmetricDegree = 8;

std::int64_t factorial(int n) {
  std::int64_t f = 1;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

std::int64_t floor_radius(double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw DomainError("ball radius must be finite and >= 0");
  return static_cast<std::int64_t>(std::floor(t));
}

}  // namespace

std::int64_t ShellTable::ball(int i) const {
  if (i < 0 || i > r_max) throw DomainError("shell table queried beyond r_max");
  return ball_sizes[static_cast<std::size_t>(i)];
}

std::int64_t ShellTable::shell(int i) const {
  if (i < 0 || i >= r_max) throw DomainError("shell table queried beyond r_max");
  return shell_sizes[static_cast<std::size_t>(i)];
}

FolnerWindow::FolnerWindow(int index, std::vector<GroupElement> elements)
    : index_(index), elements_(std::move(elements)) {
  members_.reserve(elements_.size());
  for (const auto& g : elements_) members_.insert(g);
  if (members_.size() != elements_.size()) throw DomainError("Folner window has duplicate elements");
}

MetricGroup MetricGroup::grid(int rank) {
  if (rank < 1) throw DomainError("grid rank must be >= 1");
  MetricGroup g;
  g.kind_ = GroupKind::grid;
  g.metric_ = MetricKind::sup;
  g.rank_ = rank;
  return g;
}

MetricGroup MetricGroup::finitely_generated(std::vector<std::vector<int>> generators,
                                            std::vector<std::string> names,
                                            std::size_t node_budget) {
  if (generators.empty()) throw DomainError("fin_gen group needs at least one generator");
  const std::size_t r = generators.front().size();
  if (r == 0) throw DomainError("generators must have positive dimension");
  if (!names.empty() && names.size() != generators.size())
    throw DomainError("generator names must match generator count");
  MetricGroup g;
  g.kind_ = GroupKind::fin_gen;
  g.metric_ = MetricKind::word;
  g.rank_ = static_cast<int>(r);
  g.node_budget_ = node_budget;
  ElementSet seen;
  for (std::size_t i = 0; i < generators.size(); ++i) {
    if (generators[i].size() != r) throw DomainError("generators have inconsistent dimensions");
    if (std::all_of(generators[i].begin(), generators[i].end(), [](int c) { return c == 0; }))
      throw DomainError("generating set must exclude the identity");
    GroupElement s{generators[i]};
    GroupElement inv = s;
    for (int& c : inv.coords) c = -c;
    const std::string name = names.empty() ? "e" + std::to_string(i + 1) : names[i];
    if (!seen.insert(s).second) throw DomainError("duplicate generator " + name);
    g.generators_.push_back(s);
    g.generator_names_.push_back(name);
    if (seen.insert(inv).second) {
      g.generators_.push_back(inv);
      g.generator_names_.push_back(name + "^-1");
    }
  }
  return g;
}

MetricGroup MetricGroup::symmetric(int n_max) {
  if (n_max < 1 || n_max > kMaxSymmetricDegree)
    throw ResourceError("symmetric group family supported for 1 <= n_max <= 8");
  MetricGroup g;
  g.kind_ = GroupKind::sym;
  g.metric_ = MetricKind::inverse_prefix;
  g.rank_ = n_max;
  return g;
}

GroupElement MetricGroup::identity() const {
  GroupElement e{std::vector<int>(static_cast<std::size_t>(rank_), 0)};
  if (kind_ == GroupKind::sym) std::iota(e.coords.begin(), e.coords.end(), 1);
  return e;
}

bool MetricGroup::contains(const GroupElement& g) const {
  if (static_cast<int>(g.coords.size()) != rank_) return false;
  if (kind_ != GroupKind::sym) return true;
  std::vector<bool> hit(static_cast<std::size_t>(rank_) + 1, false);
  for (int c : g.coords) {
    if (c < 1 || c > rank_ || hit[static_cast<std::size_t>(c)]) return false;
    hit[static_cast<std::size_t>(c)] = true;
  }
  return true;
}

void MetricGroup::require_member(const GroupElement& g) const {
  if (!contains(g)) throw DomainError("element is not a member of this group");
}

GroupElement MetricGroup::compose(const GroupElement& g, const GroupElement& h) const {
  require_member(g);
  require_member(h);
  GroupElement out{std::vector<int>(static_cast<std::size_t>(rank_))};
  if (kind_ == GroupKind::sym) {
    for (int i = 0; i < rank_; ++i)
      out.coords[static_cast<std::size_t>(i)] = g.coords[static_cast<std::size_t>(h.coords[static_cast<std::size_t>(i)] - 1)];
  } else {
    for (int i = 0; i < rank_; ++i)
      out.coords[static_cast<std::size_t>(i)] = g.coords[static_cast<std::size_t>(i)] + h.coords[static_cast<std::size_t>(i)];
  }
  return out;
}

GroupElement MetricGroup::inverse(const GroupElement& g) const {
  require_member(g);
  GroupElement out{std::vector<int>(static_cast<std::size_t>(rank_))};
  if (kind_ == GroupKind::sym) {
    for (int i = 0; i < rank_; ++i)
      out.coords[static_cast<std::size_t>(g.coords[static_cast<std::size_t>(i)] - 1)] = i + 1;
  } else {
    for (int i = 0; i < rank_; ++i) out.coords[static_cast<std::size_t>(i)] = -g.coords[static_cast<std::size_t>(i)];
  }
  return out;
}

GroupElement MetricGroup::from_word(std::string_view word) const {
  if (kind_ != GroupKind::fin_gen) throw DomainError("words are only defined for fin_gen groups");
  std::istringstream in{std::string(word)};
  std::string tok;
  GroupElement acc = identity();
  while (in >> tok) {
    bool inverted = false;
    for (std::string_view suffix : {std::string_view("^-1"), std::string_view("⁻¹")}) {
      if (tok.size() > suffix.size() && tok.compare(tok.size() - suffix.size(), suffix.size(), suffix) == 0) {
        tok.resize(tok.size() - suffix.size());
        inverted = true;
        break;
      }
    }
    const auto it = std::find(generator_names_.begin(), generator_names_.end(), tok);
    if (it == generator_names_.end()) throw DomainError("unknown generator '" + tok + "'");
    GroupElement s = generators_[static_cast<std::size_t>(it - generator_names_.begin())];
    acc = compose(acc, inverted ? inverse(s) : s);
  }
  return acc;
}

std::int64_t MetricGroup::norm(const GroupElement& g) const {
  require_member(g);
  switch (kind_) {
    case GroupKind::grid: {
      std::int64_t m = 0;
      for (int c : g.coords) m = std::max<std::int64_t>(m, std::abs(c));
      return m;
    }
    case GroupKind::sym: {
      for (int i = rank_; i >= 1; --i)
        if (g.coords[static_cast<std::size_t>(i - 1)] != i) return i;
      return 0;
    }
    case GroupKind::fin_gen: {
      const GroupElement e = identity();
      if (g == e) return 0;
      ElementSet seen{e};
      std::vector<GroupElement> frontier{e};
      for (std::int64_t depth = 1;; ++depth) {
        std::vector<GroupElement> next;
        for (const auto& u : frontier) {
          for (const auto& s : generators_) {
            GroupElement v = compose(u, s);
            if (v == g) return depth;
            if (seen.insert(v).second) next.push_back(std::move(v));
          }
        }
        if (seen.size() > node_budget_)
          throw ResourceError("word-metric BFS exceeded node budget (element unreachable or too far)");
        frontier = std::move(next);
      }
    }
  }
  return 0;
}

double MetricGroup::distance(const GroupElement& g, const GroupElement& h) const {
  return static_cast<double>(norm(compose(inverse(g), h)));
}

std::vector<GroupElement> MetricGroup::word_ball(std::int64_t radius) const {
  const GroupElement e = identity();
  ElementSet seen{e};
  std::vector<GroupElement> out{e};
  std::vector<GroupElement> frontier{e};
  for (std::int64_t depth = 1; depth <= radius; ++depth) {
    std::vector<GroupElement> next;
    for (const auto& u : frontier) {
      for (const auto& s : generators_) {
        GroupElement v = compose(u, s);
        if (seen.insert(v).second) {
          next.push_back(v);
          out.push_back(std::move(v));
        }
      }
    }
    if (out.size() > node_budget_) throw ResourceError("word-metric ball exceeds node budget");
    frontier = std::move(next);
    if (frontier.empty()) break;
  }
  return out;
}

std::vector<GroupElement> MetricGroup::ball(const GroupElement& center, double t) const {
  require_member(center);
  const std::int64_t r = floor_radius(t);
  std::vector<GroupElement> around_e;
  switch (kind_) {
    case GroupKind::grid: {
      const double count = std::pow(2.0 * static_cast<double>(r) + 1.0, rank_);
      if (count > static_cast<double>(node_budget_)) throw ResourceError("grid ball exceeds enumeration budget");
      const int side = static_cast<int>(2 * r + 1);
      std::vector<int> idx(static_cast<std::size_t>(rank_), 0);
      for (;;) {
        GroupElement g{std::vector<int>(static_cast<std::size_t>(rank_))};
        for (int i = 0; i < rank_; ++i) g.coords[static_cast<std::size_t>(i)] = idx[static_cast<std::size_t>(i)] - static_cast<int>(r);
        around_e.push_back(std::move(g));
        int i = rank_ - 1;
        while (i >= 0 && ++idx[static_cast<std::size_t>(i)] == side) idx[static_cast<std::size_t>(i--)] = 0;
        if (i < 0) break;
      }
      break;
    }
    case GroupKind::fin_gen:
      around_e = word_ball(r);
      break;
    case GroupKind::sym: {
      const int k = static_cast<int>(std::min<std::int64_t>(r, rank_));
      GroupElement g = identity();
      do {
        around_e.push_back(g);
      } while (std::next_permutation(g.coords.begin(), g.coords.begin() + k));
      break;
    }
  }
  if (center == identity()) return around_e;
  std::vector<GroupElement> out;
  out.reserve(around_e.size());
  for (const auto& g : around_e) out.push_back(compose(center, g));
  return out;
}

std::vector<std::int64_t> MetricGroup::word_ball_sizes(int r_max) const {
  const GroupElement e = identity();
  ElementSet seen{e};
  std::vector<GroupElement> frontier{e};
  std::vector<std::int64_t> sizes{1};
  for (int depth = 1; depth <= r_max; ++depth) {
    std::vector<GroupElement> next;
    for (const auto& u : frontier)
      for (const auto& s : generators_) {
        GroupElement v = compose(u, s);
        if (seen.insert(v).second) next.push_back(std::move(v));
      }
    if (seen.size() > node_budget_) throw ResourceError("shell table exceeds node budget");
    sizes.push_back(static_cast<std::int64_t>(seen.size()));
    frontier = std::move(next);
  }
  return sizes;
}

ShellTable MetricGroup::shell_table(int r_max) const {
  if (r_max < 1) throw DomainError("shell table needs r_max >= 1");
  ShellTable t;
  t.r_max = r_max;
  switch (kind_) {
    case GroupKind::grid:
      for (int i = 0; i <= r_max; ++i) {
        const double v = std::pow(2.0 * i + 1.0, rank_);
        if (v > 9.0e18) throw ResourceError("grid ball size overflows");
        t.ball_sizes.push_back(static_cast<std::int64_t>(std::llround(v)));
      }
      break;
    case GroupKind::fin_gen:
      t.ball_sizes = word_ball_sizes(r_max);
      break;
    case GroupKind::sym:
      for (int i = 0; i <= r_max; ++i) t.ball_sizes.push_back(factorial(std::min(i, rank_)));
      break;
  }
  for (int i = 0; i < r_max; ++i)
    t.shell_sizes.push_back(t.ball_sizes[static_cast<std::size_t>(i) + 1] - t.ball_sizes[static_cast<std::size_t>(i)]);
  return t;
}

FolnerWindow MetricGroup::folner_set(int n) const {
  if (n < 1) throw DomainError("Folner index must be >= 1");
  if (kind_ == GroupKind::sym && n > rank_)
    throw ResourceError("symmetric Folner set S_n needs n <= n_max");
  return FolnerWindow(n, ball(identity(), n));
}

double MetricGroup::boundary_defect(int n, int b) const {
  if (b < 0) throw DomainError("boundary defect needs b >= 0");
  const FolnerWindow window = folner_set(n);
  if (b == 0) return 0.0;
  const auto bb = ball(identity(), b);
  std::int64_t outside = 0;
  ElementSet seen;
  for (const auto& a : window.elements())
    for (const auto& g : bb) {
      GroupElement ag = compose(a, g);
      if (!window.contains(ag) && seen.insert(ag).second) ++outside;
    }
  return static_cast<double>(outside) / static_cast<double>(window.size());
}

}  // namespace amenpois
