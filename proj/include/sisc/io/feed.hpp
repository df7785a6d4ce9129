#ifndef SISC_IO_FEED_HPP
#define SISC_IO_FEED_HPP

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "sisc/errors.hpp"
#include "sisc/matrix.hpp"

/**
 * \file
 * \brief Text format for observation feeds.
 *
 * The first line is `T M`. Each of the next T lines describes z^t with tokens
 * that are either a number or `-` (missing), in one of two layouts:
 *
 *  - t*M tokens: the full matrix z^t, row by row;
 *  - M tokens: only the newest row, with earlier rows copied from z^{t-1}.
 *
 * Lines starting with `#` and blank lines are ignored.
 */

namespace sisc {

/// Prints a double with 17 significant digits (round-trip exact).
inline std::string format_number(double value) {
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

struct Feed {
  std::size_t cols = 0;
  std::vector<ObservationMatrix<double>> matrices;  ///< z^1, ..., z^T
};

enum class FeedLayout {
  kFull,        ///< every line carries the whole matrix
  kNewestRow,   ///< every line carries the newest row only
};

namespace detail {

inline std::optional<double> parse_number(std::string_view token) {
  double value = 0.0;
  const auto [end, error] = std::from_chars(token.data(), token.data() + token.size(), value);
  if (error != std::errc{} || end != token.data() + token.size()) {
    return std::nullopt;
  }
  return value;
}

inline bool next_content_line(std::istream& in, std::string& line, std::size_t& line_number) {
  while (std::getline(in, line)) {
    ++line_number;
    const auto first = line.find_first_not_of(" \t\r");
    if (first != std::string::npos && line[first] != '#') {
      return true;
    }
  }
  return false;
}

inline std::string at_line(std::size_t line_number) { return "feed line " + std::to_string(line_number) + ": "; }

}  // namespace detail

/// Parses a feed. Throws InputError on malformed content; revelation rules are checked by validate_feed.
inline Feed read_feed(std::istream& in) {
  std::string line;
  std::size_t line_number = 0;
  if (!detail::next_content_line(in, line, line_number)) {
    throw InputError{"feed is empty"};
  }
  std::istringstream header{line};
  long long steps = -1;
  long long cols = -1;
  std::string extra;
  if (!(header >> steps >> cols) || (header >> extra) || steps < 0 || cols <= 0) {
    throw InputError{detail::at_line(line_number) + "header must be `T M` with T >= 0 and M >= 1"};
  }
  Feed feed;
  feed.cols = static_cast<std::size_t>(cols);
  for (std::size_t t = 1; t <= static_cast<std::size_t>(steps); ++t) {
    if (!detail::next_content_line(in, line, line_number)) {
      throw InputError{"feed ends after " + std::to_string(t - 1) + " of " + std::to_string(steps) + " time steps"};
    }
    std::istringstream tokens{line};
    std::vector<std::optional<double>> cells;
    for (std::string token; tokens >> token;) {
      if (token == "-") {
        cells.emplace_back();
      } else if (auto value = detail::parse_number(token)) {
        cells.emplace_back(*value);
      } else {
        throw InputError{detail::at_line(line_number) + "token `" + token + "` is neither a number nor `-`"};
      }
    }
    ObservationMatrix<double> z(t, feed.cols);
    if (cells.size() == t * feed.cols) {
      for (std::size_t k = 0; k < cells.size(); ++k) {
        z(k / feed.cols, k % feed.cols) = cells[k];
      }
    } else if (cells.size() == feed.cols) {
      for (std::size_t i = 0; i + 1 < t; ++i) {
        for (std::size_t m = 0; m < feed.cols; ++m) {
          z(i, m) = feed.matrices.back()(i, m);
        }
      }
      for (std::size_t m = 0; m < feed.cols; ++m) {
        z(t - 1, m) = cells[m];
      }
    } else {
      throw InputError{detail::at_line(line_number) + "expected " + std::to_string(feed.cols) + " or " +
                       std::to_string(t * feed.cols) + " tokens for time " + std::to_string(t) + ", got " +
                       std::to_string(cells.size())};
    }
    feed.matrices.push_back(std::move(z));
  }
  if (detail::next_content_line(in, line, line_number)) {
    throw InputError{detail::at_line(line_number) + "content after the last declared time step"};
  }
  return feed;
}

inline Feed read_feed_file(const std::string& path) {
  std::ifstream in{path};
  if (!in) {
    throw IoError{"cannot open feed file " + path};
  }
  return read_feed(in);
}

template <class T>
void write_feed(std::ostream& out, std::size_t cols, const std::vector<ObservationMatrix<T>>& matrices,
                FeedLayout layout) {
  out << matrices.size() << ' ' << cols << '\n';
  for (const auto& z : matrices) {
    const std::size_t first_row = layout == FeedLayout::kFull ? 0 : z.rows() - 1;
    bool first = true;
    for (std::size_t i = first_row; i < z.rows(); ++i) {
      for (std::size_t m = 0; m < cols; ++m) {
        out << (first ? "" : " ");
        first = false;
        const auto& cell = z(i, m);
        out << (cell ? format_number(static_cast<double>(*cell)) : std::string{"-"});
      }
    }
    out << '\n';
  }
}

template <class T>
void write_feed_file(const std::string& path, std::size_t cols, const std::vector<ObservationMatrix<T>>& matrices,
                     FeedLayout layout) {
  std::ofstream out{path, std::ios::binary};
  if (!out) {
    throw IoError{"cannot write feed file " + path};
  }
  write_feed(out, cols, matrices, layout);
  if (!out) {
    throw IoError{"failed writing feed file " + path};
  }
}

/// Extra rules for presence-only invasion feeds.
struct FeedRules {
  bool presence_only = false;    ///< every known value equals 1
  bool newest_row_only = false;  ///< z^t reveals nothing new about earlier rows
  bool contiguous = false;       ///< known cells of each row form one interval
  std::optional<std::size_t> origin;  ///< 0-based cell that must be the only one known at t = 1
};

/// First problem found in a feed, if any. Times, rows and cells are 1-based.
struct FeedReport {
  bool ok = true;
  std::string rule;
  std::size_t time = 0;
  std::size_t row = 0;
  std::size_t cell = 0;
  std::string message;

  std::string describe() const {
    if (ok) {
      return "ok";
    }
    return rule + " violation at (t=" + std::to_string(time) + ", i=" + std::to_string(row) +
           ", m=" + std::to_string(cell) + "): " + message;
  }
};

inline FeedReport validate_feed(const Feed& feed, const FeedRules& rules = {}) {
  auto fail = [](std::string rule, std::size_t t, std::size_t i, std::size_t m, std::string message) {
    return FeedReport{false, std::move(rule), t, i + 1, m + 1, std::move(message)};
  };
  const ObservationMatrix<double> empty;
  for (std::size_t t = 1; t <= feed.matrices.size(); ++t) {
    const auto& z = feed.matrices[t - 1];
    const auto& prev = t == 1 ? empty : feed.matrices[t - 2];
    if (z.rows() != t || z.cols() != feed.cols) {
      return FeedReport{false, "shape", t, 0, 0, "matrix is not " + std::to_string(t) + " x " +
                                                      std::to_string(feed.cols)};
    }
    if (auto violation = check_revelation(prev, z)) {
      return fail("monotone revelation", t, violation->cell.row, violation->cell.col, violation->what);
    }
    for (std::size_t i = 0; i < t; ++i) {
      std::optional<std::size_t> last_known;
      bool gap = false;
      for (std::size_t m = 0; m < feed.cols; ++m) {
        const auto& cell = z(i, m);
        if (!cell) {
          if (last_known) {
            gap = true;
          }
          continue;
        }
        if (rules.presence_only && *cell != 1.0) {
          return fail("presence-only", t, i, m, "observed value " + format_number(*cell) + " is not 1");
        }
        if (rules.newest_row_only && i + 1 < t && !prev(i, m)) {
          return fail("newest-row-only", t, i, m, "an earlier time row gained an observation");
        }
        if (rules.contiguous && gap) {
          return fail("contiguity", t, i, m, "known cells do not form one interval");
        }
        if (rules.origin && t == 1 && m != *rules.origin) {
          return fail("origin", t, i, m, "only the origin may be known at t = 1");
        }
        last_known = m;
      }
      if (rules.origin && t == 1 && !z(0, *rules.origin)) {
        return fail("origin", t, 0, *rules.origin, "the origin must be known at t = 1");
      }
    }
  }
  return {};
}

/// Converts a validated presence-only feed to binary observations.
inline std::vector<ObservationMatrix<std::uint8_t>> to_presence_feed(const Feed& feed) {
  std::vector<ObservationMatrix<std::uint8_t>> result;
  result.reserve(feed.matrices.size());
  for (const auto& z : feed.matrices) {
    ObservationMatrix<std::uint8_t> binary(z.rows(), z.cols());
    for (std::size_t i = 0; i < z.rows(); ++i) {
      for (std::size_t m = 0; m < z.cols(); ++m) {
        if (z(i, m)) {
          binary(i, m) = static_cast<std::uint8_t>(*z(i, m) != 0.0);
        }
      }
    }
    result.push_back(std::move(binary));
  }
  return result;
}

}  // namespace sisc

#endif
