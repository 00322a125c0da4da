#include "personaprop/persona_matrix.hpp"

#include <cmath>

#include "personaprop/errors.hpp"

namespace personaprop {

PersonaMatrix::PersonaMatrix(NodeId user_count, std::uint32_t persona_count)
    : user_count_(user_count),
      persona_count_(persona_count),
      rows_(std::size_t(user_count) * persona_count, 0),
      status_(user_count, Status::Unlabeled) {}

void PersonaMatrix::clear_row(NodeId u) {
  auto* row = rows_.data() + std::size_t(u) * persona_count_;
  std::fill(row, row + persona_count_, std::uint8_t{0});
}

void PersonaMatrix::set_labeled_row(NodeId u, std::span<const std::uint32_t> personas) {
  if (status_[u] == Status::Prototype) --prototype_count_;
  clear_row(u);
  for (std::uint32_t m : personas) rows_[std::size_t(u) * persona_count_ + m] = 1;
  if (personas.empty()) {
    status_[u] = Status::Unrepresentable;
  } else {
    status_[u] = Status::Prototype;
    ++prototype_count_;
  }
}

void PersonaMatrix::set_propagated_row(NodeId u, std::span<const std::uint32_t> personas) {
  if (is_prototype(u)) return;  // labeler answers take precedence
  clear_row(u);
  for (std::uint32_t m : personas) rows_[std::size_t(u) * persona_count_ + m] = 1;
  // Unrepresentable users keep their status for reporting; they are outside
  // the prototype set and may still receive propagated personas.
  if (status_[u] == Status::Unlabeled) status_[u] = Status::Propagated;
}

std::vector<std::uint32_t> PersonaMatrix::personas_of(NodeId u) const {
  std::vector<std::uint32_t> out;
  for (std::uint32_t m = 0; m < persona_count_; ++m) {
    if (at(u, m)) out.push_back(m);
  }
  return out;
}

std::uint32_t PersonaMatrix::row_sum(NodeId u) const {
  std::uint32_t s = 0;
  for (std::uint32_t m = 0; m < persona_count_; ++m) s += at(u, m);
  return s;
}

std::vector<NodeId> PersonaMatrix::prototypes() const {
  std::vector<NodeId> out;
  out.reserve(prototype_count_);
  for (NodeId u = 0; u < user_count_; ++u) {
    if (status_[u] == Status::Prototype) out.push_back(u);
  }
  return out;
}

std::vector<NodeId> PersonaMatrix::unrepresentables() const {
  std::vector<NodeId> out;
  for (NodeId u = 0; u < user_count_; ++u) {
    if (status_[u] == Status::Unrepresentable) out.push_back(u);
  }
  return out;
}

std::vector<double> persona_distribution(const PersonaMatrix& pa) {
  std::vector<double> q(pa.persona_count(), 0.0);
  double total = 0.0;
  for (NodeId u = 0; u < pa.user_count(); ++u) {
    if (!pa.is_prototype(u)) continue;
    for (std::uint32_t m = 0; m < pa.persona_count(); ++m) {
      if (pa.at(u, m)) {
        q[m] += 1.0;
        total += 1.0;
      }
    }
  }
  if (total == 0.0) {
    throw DistributionError("persona distribution undefined: no labels collected yet");
  }
  for (double& v : q) v /= total;
  return q;
}

LabelMatrix build_label_matrix(const PersonaMatrix& pa, double beta) {
  LabelMatrix label;
  label.beta = beta;
  label.persona_count = pa.persona_count();
  label.users = pa.prototypes();
  label.coefficients.assign(pa.persona_count(), 1.0);
  if (label.users.empty()) return label;

  const std::vector<double> q = persona_distribution(pa);
  double min_positive = 1.0;
  for (double v : q) {
    if (v > 0.0) min_positive = std::min(min_positive, v);
  }
  // Personas never observed among prototypes keep c = 1; the min runs over
  // positive entries only.
  for (std::uint32_t m = 0; m < pa.persona_count(); ++m) {
    if (q[m] > 0.0) label.coefficients[m] = std::pow(min_positive / q[m], beta);
  }

  label.values.assign(label.users.size() * label.persona_count, 0.0);
  for (std::size_t r = 0; r < label.users.size(); ++r) {
    const NodeId u = label.users[r];
    const double row_sum = static_cast<double>(pa.row_sum(u));
    for (std::uint32_t m = 0; m < label.persona_count; ++m) {
      if (pa.at(u, m)) {
        label.values[r * label.persona_count + m] = label.coefficients[m] / row_sum;
      }
    }
  }
  return label;
}

std::vector<std::pair<NodeId, double>> LabelMatrix::sparse_column(std::uint32_t m) const {
  std::vector<std::pair<NodeId, double>> col;
  for (std::size_t r = 0; r < users.size(); ++r) {
    const double v = values[r * persona_count + m];
    if (v != 0.0) col.emplace_back(users[r], v);
  }
  return col;
}

std::vector<double> LabelMatrix::dense_column(std::uint32_t m, NodeId user_count) const {
  std::vector<double> col(user_count, 0.0);
  for (std::size_t r = 0; r < users.size(); ++r) {
    col[users[r]] = values[r * persona_count + m];
  }
  return col;
}

}  // namespace personaprop
