#ifndef SISC_MATRIX_HPP
#define SISC_MATRIX_HPP

#include <cassert>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "sisc/errors.hpp"

/**
 * \file
 * \brief Row-major containers for trajectories, knowledge masks and exact observations.
 *
 * Rows are time indices and columns are state coordinates. Row `i` (0-based)
 * holds the state at time `i + 1`; a matrix with `t` rows describes the
 * history up to time `t`.
 */

namespace sisc {

/// Dense row-major matrix that grows one time row at a time.
template <class T>
class Matrix {
 public:
  using value_type = T;

  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{}) : rows_{rows}, cols_{cols}, data_(rows * cols, fill) {}

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  bool empty() const noexcept { return rows_ == 0; }

  T& operator()(std::size_t i, std::size_t m) {
    assert(i < rows_ && m < cols_);
    return data_[i * cols_ + m];
  }
  const T& operator()(std::size_t i, std::size_t m) const {
    assert(i < rows_ && m < cols_);
    return data_[i * cols_ + m];
  }

  std::span<T> row(std::size_t i) { return {data_.data() + i * cols_, cols_}; }
  std::span<const T> row(std::size_t i) const { return {data_.data() + i * cols_, cols_}; }

  /// Appends a row. The first row fixes the column count.
  void append_row(std::span<const T> values) {
    if (rows_ == 0 && data_.empty()) {
      cols_ = values.size();
    }
    assert(values.size() == cols_);
    data_.insert(data_.end(), values.begin(), values.end());
    ++rows_;
  }

  void append_row(const std::vector<T>& values) { append_row(std::span<const T>{values}); }

  std::span<const T> data() const noexcept { return data_; }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

template <class T>
using TrajectoryMatrix = Matrix<T>;

/// One observation cell: a known value or MISSING (`std::nullopt`).
template <class T>
using Observed = std::optional<T>;

/// Exact observation matrix z^t: known coordinate values, MISSING elsewhere.
template <class T>
using ObservationMatrix = Matrix<Observed<T>>;

/// Binary mask of coordinates known by the current time.
using KnowledgeMatrix = Matrix<std::uint8_t>;

/// Knowledge mask implied by an observation matrix (bit set exactly where a value is known).
template <class T>
KnowledgeMatrix knowledge_of(const ObservationMatrix<T>& observations) {
  KnowledgeMatrix mask(observations.rows(), observations.cols(), 0);
  for (std::size_t i = 0; i < observations.rows(); ++i) {
    for (std::size_t m = 0; m < observations.cols(); ++m) {
      mask(i, m) = observations(i, m).has_value() ? 1 : 0;
    }
  }
  return mask;
}

/// Reads a trajectory through a knowledge mask (the observation function sigma).
template <class T>
ObservationMatrix<T> observe(const TrajectoryMatrix<T>& trajectory, const KnowledgeMatrix& knowledge) {
  assert(trajectory.rows() == knowledge.rows() && trajectory.cols() == knowledge.cols());
  ObservationMatrix<T> result(trajectory.rows(), trajectory.cols());
  for (std::size_t i = 0; i < trajectory.rows(); ++i) {
    for (std::size_t m = 0; m < trajectory.cols(); ++m) {
      if (knowledge(i, m) != 0) {
        result(i, m) = trajectory(i, m);
      }
    }
  }
  return result;
}

/// A (row, column) position in a trajectory.
struct Cell {
  std::size_t row;
  std::size_t col;
  friend bool operator==(const Cell&, const Cell&) = default;
};

/// First cell at which a later observation matrix forgets or changes an earlier one.
struct RevelationViolation {
  std::size_t time;  ///< 1-based time of the offending observation matrix.
  Cell cell;
  std::string what;
};

/**
 * Checks that `next` (with one more row than `prev`) keeps every cell known in
 * `prev` known and unchanged. Returns the first violation, if any.
 */
template <class T>
std::optional<RevelationViolation> check_revelation(const ObservationMatrix<T>& prev, const ObservationMatrix<T>& next) {
  const std::size_t time = next.rows();
  if (next.rows() != prev.rows() + 1 || (prev.rows() > 0 && next.cols() != prev.cols())) {
    return RevelationViolation{time, {0, 0}, "shape mismatch"};
  }
  for (std::size_t i = 0; i < prev.rows(); ++i) {
    for (std::size_t m = 0; m < prev.cols(); ++m) {
      if (!prev(i, m).has_value()) {
        continue;
      }
      if (!next(i, m).has_value()) {
        return RevelationViolation{time, {i, m}, "known cell became unknown"};
      }
      if (*next(i, m) != *prev(i, m)) {
        return RevelationViolation{time, {i, m}, "known cell changed value"};
      }
    }
  }
  return std::nullopt;
}

/**
 * The observation feed z^1, ..., z^t received so far, with derived knowledge
 * masks. Enforces monotone revelation on every push.
 */
template <class T>
class ObservationHistory {
 public:
  ObservationHistory() = default;

  /// Appends z^{t+1}. Throws InputError on a shape or monotonicity violation.
  void push(ObservationMatrix<T> next) {
    const ObservationMatrix<T> empty;
    const auto& prev = observations_.empty() ? empty : observations_.back();
    if (!observations_.empty() && next.cols() != prev.cols()) {
      throw InputError{"observation at time " + std::to_string(next.rows()) + " has " + std::to_string(next.cols()) +
                       " columns, expected " + std::to_string(prev.cols())};
    }
    if (auto violation = check_revelation(prev, next)) {
      throw InputError{"observation feed violates monotone revelation at (t=" + std::to_string(violation->time) +
                       ", i=" + std::to_string(violation->cell.row + 1) + ", m=" + std::to_string(violation->cell.col + 1) +
                       "): " + violation->what};
    }
    knowledge_.push_back(knowledge_of(next));
    observations_.push_back(std::move(next));
  }

  /// Number of time steps observed.
  std::size_t size() const noexcept { return observations_.size(); }
  std::size_t cols() const noexcept { return observations_.empty() ? 0 : observations_.front().cols(); }

  /// z^t for 1-based t.
  const ObservationMatrix<T>& at(std::size_t t) const { return observations_.at(t - 1); }
  /// Knowledge mask b^t implied by z^t, for 1-based t.
  const KnowledgeMatrix& knowledge(std::size_t t) const { return knowledge_.at(t - 1); }

  /// Cells known in z^t but not in z^{t-1}; every known cell of the newest row counts as new.
  std::vector<Cell> newly_observed(std::size_t t) const {
    std::vector<Cell> cells;
    const auto& now = knowledge(t);
    for (std::size_t i = 0; i < now.rows(); ++i) {
      for (std::size_t m = 0; m < now.cols(); ++m) {
        const bool was_known = t > 1 && i + 1 < t && knowledge(t - 1)(i, m) != 0;
        if (now(i, m) != 0 && !was_known) {
          cells.push_back({i, m});
        }
      }
    }
    return cells;
  }

 private:
  std::vector<ObservationMatrix<T>> observations_;
  std::vector<KnowledgeMatrix> knowledge_;
};

}  // namespace sisc

#endif
