#pragma once

#include <stdexcept>
#include <string>

namespace harq {

// Error classes map one-to-one onto CLI exit codes (see tools/harqir.cpp).
enum class ErrorKind { parameter, domain, conditioning, consistency, infeasible };

class Error : public std::runtime_error {
public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

private:
  ErrorKind kind_;
};

/// Precondition violated by the caller (bad order, negative argument, index out of range).
class ParameterError : public Error {
public:
  explicit ParameterError(const std::string& what) : Error(ErrorKind::parameter, what) {}
};

/// Arguments valid in principle but outside the range where the numerical method is trusted.
class DomainError : public Error {
public:
  explicit DomainError(const std::string& what) : Error(ErrorKind::domain, what) {}
};

class ConditioningError : public Error {
public:
  explicit ConditioningError(const std::string& what) : Error(ErrorKind::conditioning, what) {}
};

class ConsistencyError : public Error {
public:
  explicit ConsistencyError(const std::string& what) : Error(ErrorKind::consistency, what) {}
};

class InfeasibleError : public Error {
public:
  InfeasibleError(const std::string& what, double min_outage)
      : Error(ErrorKind::infeasible, what), min_outage_(min_outage) {}
  /// Smallest outage reachable on the search interval.
  double min_outage() const noexcept { return min_outage_; }

private:
  double min_outage_;
};

namespace detail {

inline void require(bool ok, const std::string& msg) {
  if (!ok) throw ParameterError(msg);
}

}  // namespace detail
}  // namespace harq
