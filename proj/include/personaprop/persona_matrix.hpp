#pragma once

#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "personaprop/graph.hpp"

namespace personaprop {

// Binary user-persona assignment matrix plus the bookkeeping of who was
// labeled directly. Prototypes are labeler-annotated users with at least one
// persona; users the labeler marked as fitting nothing land in the
// unrepresentable set. The two sets are disjoint.
class PersonaMatrix {
 public:
  PersonaMatrix() = default;
  PersonaMatrix(NodeId user_count, std::uint32_t persona_count);

  NodeId user_count() const { return user_count_; }
  std::uint32_t persona_count() const { return persona_count_; }

  // Records a labeler answer for `u`. An empty persona set marks the user
  // unrepresentable. Re-labeling a user replaces its row.
  void set_labeled_row(NodeId u, std::span<const std::uint32_t> personas);

  // Propagated assignment; does not touch the prototype bookkeeping.
  void set_propagated_row(NodeId u, std::span<const std::uint32_t> personas);

  bool is_prototype(NodeId u) const { return status_[u] == Status::Prototype; }
  bool is_unrepresentable(NodeId u) const { return status_[u] == Status::Unrepresentable; }
  bool is_labeled(NodeId u) const {
    return status_[u] == Status::Prototype || status_[u] == Status::Unrepresentable;
  }

  std::uint8_t at(NodeId u, std::uint32_t m) const { return rows_[std::size_t(u) * persona_count_ + m]; }
  std::vector<std::uint32_t> personas_of(NodeId u) const;
  std::uint32_t row_sum(NodeId u) const;

  // Sorted prototype user set (>=1 persona from the labeler).
  std::vector<NodeId> prototypes() const;
  std::vector<NodeId> unrepresentables() const;
  std::size_t prototype_count() const { return prototype_count_; }

 private:
  enum class Status : std::uint8_t { Unlabeled, Prototype, Unrepresentable, Propagated };

  NodeId user_count_ = 0;
  std::uint32_t persona_count_ = 0;
  std::vector<std::uint8_t> rows_;
  std::vector<Status> status_;
  std::size_t prototype_count_ = 0;

  void clear_row(NodeId u);
};

// Persona label distribution over the prototype set: column sums of the
// prototype rows, normalized. Throws DistributionError when no label exists.
std::vector<double> persona_distribution(const PersonaMatrix& pa);

// Per-prototype persona weights with frequency de-biasing. Row u holds
// c_m * Pa[u,m] / rowsum(Pa[u]); c_m = (min positive Q / Q_m)^beta, and 1 for
// personas never observed among prototypes.
struct LabelMatrix {
  std::vector<NodeId> users;       // sorted prototypes contributing rows
  std::vector<double> values;      // users.size() x persona_count, row-major
  std::vector<double> coefficients;  // c_m
  double beta = 0.0;
  std::uint32_t persona_count = 0;

  bool empty() const { return users.empty(); }

  double at(std::size_t row, std::uint32_t m) const { return values[row * persona_count + m]; }

  // Sparse column: (user, weight) pairs with nonzero weight, user-sorted.
  std::vector<std::pair<NodeId, double>> sparse_column(std::uint32_t m) const;

  // Dense column over all users (zeros elsewhere).
  std::vector<double> dense_column(std::uint32_t m, NodeId user_count) const;
};

LabelMatrix build_label_matrix(const PersonaMatrix& pa, double beta);

}  // namespace personaprop
