#ifndef SISC_ERRORS_HPP
#define SISC_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace sisc {

/// Malformed configuration, observation feed or arguments.
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model broke its contract (sampler produced a value its own density rejects, ...).
class ModelError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Every particle received zero weight at some time step.
class ParticleCollapse : public std::runtime_error {
 public:
  ParticleCollapse(std::size_t time, const std::string& reason)
      : std::runtime_error{"particle collapse at time " + std::to_string(time) + ": " + reason}, time_{time} {}

  std::size_t time() const noexcept { return time_; }

 private:
  std::size_t time_;
};

/// File system failures.
class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace sisc

#endif
