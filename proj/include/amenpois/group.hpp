#pragma once

#include <compare>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace amenpois {

/// Canonical form of a group element: an integer vector for Z^r based groups,
/// the image list (p(1), ..., p(n_max)) for permutations.
struct GroupElement {
  std::vector<int> coords;

  friend bool operator==(const GroupElement&, const GroupElement&) = default;
  friend auto operator<=>(const GroupElement&, const GroupElement&) = default;
};

struct GroupElementHash {
  std::size_t operator()(const GroupElement& g) const noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (int c : g.coords) {
      h ^= static_cast<std::uint32_t>(c);
      h *= 0x100000001b3ULL;
    }
    return static_cast<std::size_t>(h);
  }
};

using ElementSet = std::unordered_set<GroupElement, GroupElementHash>;

enum class GroupKind { grid, fin_gen, sym };
enum class MetricKind { sup, word, inverse_prefix };

/// Ball and shell cardinalities |B_i|, |B_{i+1} \ B_i| for i up to r_max.
struct ShellTable {
  int r_max = 0;
  std::vector<std::int64_t> ball_sizes;   // size r_max + 1
  std::vector<std::int64_t> shell_sizes;  // size r_max

  std::int64_t ball(int i) const;
  std::int64_t shell(int i) const;
};

/// One set A_n of a Folner sequence. Always contains the identity.
class FolnerWindow {
 public:
  FolnerWindow(int index, std::vector<GroupElement> elements);

  int index() const noexcept { return index_; }
  const std::vector<GroupElement>& elements() const noexcept { return elements_; }
  std::int64_t size() const noexcept { return static_cast<std::int64_t>(elements_.size()); }
  bool contains(const GroupElement& g) const { return members_.contains(g); }

 private:
  int index_;
  std::vector<GroupElement> elements_;
  ElementSet members_;
};

/// A discrete group with a left-invariant metric.
///
///   grid(r)      Z^r with the sup metric; balls are {-n..n}^r.
///   fin_gen      a subgroup of Z^r given by generators, with the word metric
///                of the symmetric closure of the generators (BFS on the Cayley graph).
///   sym(n_max)   permutations of {1..n_max} (a truncation of S_infinity), with
///                d(p, q) = max{i : p(i) != q(i)}, the left-invariant mirror of the
///                inverse-prefix metric. Balls around e are the subgroups S_t.
///
/// Instances are immutable after construction.
class MetricGroup {
 public:
  static constexpr std::size_t kDefaultNodeBudget = 1'000'000;

  static MetricGroup grid(int rank);
  /// `generators` are vectors in Z^r; inverses are added, duplicates and the
  /// identity are rejected. Names default to e1, e2, ... for the given generators.
  static MetricGroup finitely_generated(std::vector<std::vector<int>> generators,
                                        std::vector<std::string> names = {},
                                        std::size_t node_budget = kDefaultNodeBudget);
  static MetricGroup symmetric(int n_max);

  GroupKind kind() const noexcept { return kind_; }
  MetricKind metric() const noexcept { return metric_; }
  /// Coordinate count of the canonical form (r, or n_max for sym).
  int rank() const noexcept { return rank_; }
  /// Symmetric generating set (fin_gen only).
  const std::vector<GroupElement>& generators() const noexcept { return generators_; }
  std::size_t node_budget() const noexcept { return node_budget_; }

  GroupElement identity() const;
  bool contains(const GroupElement& g) const;
  GroupElement compose(const GroupElement& g, const GroupElement& h) const;
  GroupElement inverse(const GroupElement& g) const;
  /// Evaluates a word such as "e1 e2 e1^-1" over the named generators.
  GroupElement from_word(std::string_view word) const;

  double distance(const GroupElement& g, const GroupElement& h) const;
  /// d(e, g), integral for every implemented metric.
  std::int64_t norm(const GroupElement& g) const;

  std::vector<GroupElement> ball(const GroupElement& center, double t) const;
  ShellTable shell_table(int r_max) const;
  FolnerWindow folner_set(int n) const;
  /// |A_n B_b triangle A_n| / |A_n| by set enumeration.
  double boundary_defect(int n, int b) const;

 private:
  MetricGroup() = default;
  void require_member(const GroupElement& g) const;
  std::vector<GroupElement> word_ball(std::int64_t radius) const;
  std::vector<std::int64_t> word_ball_sizes(int r_max) const;

  GroupKind kind_ = GroupKind::grid;
  MetricKind metric_ = MetricKind::sup;
  int rank_ = 0;
  std::vector<GroupElement> generators_;
  std::vector<std::string> generator_names_;
  std::size_t node_budget_ = kDefaultNodeBudget;
};

}  // namespace amenpois
