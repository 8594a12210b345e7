#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace adplan {

class error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raised by parse_targeting; carries the byte offset of the failure and the
// tokens that would have been accepted there.
class syntax_error : public error {
 public:
  syntax_error(std::size_t offset, std::vector<std::string> expected, const std::string& what)
      : error(what), offset_(offset), expected_(std::move(expected)) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

class validation_error : public error {
 public:
  validation_error(std::vector<std::string> violations, const std::string& what)
      : error(what), violations_(std::move(violations)) {}

  const std::vector<std::string>& violations() const noexcept { return violations_; }

 private:
  std::vector<std::string> violations_;
};

class convergence_error : public error {
 public:
  convergence_error(std::string contract_id, double violation, const std::string& what)
      : error(what), contract_id_(std::move(contract_id)), violation_(violation) {}

  const std::string& contract_id() const noexcept { return contract_id_; }
  double violation() const noexcept { return violation_; }

 private:
  std::string contract_id_;
  double violation_;
};

// Input file problems; the message carries file:line.
class format_error : public error {
 public:
  using error::error;
};

}  // namespace adplan
