#ifndef NOSM_ERROR_HPP
#define NOSM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace nosm {

enum class ErrorKind {
  argument,
  shape,
  parse,
  io,
  contract,
  numeric,
  version,
  empty_corpus,
};

// Single exception type for the whole library; the C API maps kind() onto
// status codes.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(message), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
  throw Error(kind, message);
}

}  // namespace nosm

#endif  // NOSM_ERROR_HPP
