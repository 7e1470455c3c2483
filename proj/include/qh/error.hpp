#ifndef QH_ERROR_HPP_
#define QH_ERROR_HPP_

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qh {

// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed input: bad letters, wrong ranks, failed preconditions.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// An element was passed to a group (or map) it does not belong to.
class GroupMismatch : public Error {
 public:
  using Error::Error;
};

// Fixed-width integer arithmetic left the representable range.
class OverflowError : public Error {
 public:
  using Error::Error;
};

// A configured resource cap (group order, pair count, Aut size) was hit.
class CapExceeded : public Error {
 public:
  using Error::Error;
};

// Invalid input document (JSON schema or semantic problem).
class SpecError : public Error {
 public:
  SpecError(std::string pointer, std::string message)
      : Error(pointer.empty() ? message : pointer + ": " + message),
        pointer_(std::move(pointer)),
        message_(std::move(message)) {}

  const std::string& pointer() const noexcept { return pointer_; }
  const std::string& message() const noexcept { return message_; }

 private:
  std::string pointer_;
  std::string message_;
};

namespace checked {

inline std::int64_t add(std::int64_t x, std::int64_t y) {
  std::int64_t r;
  if (__builtin_add_overflow(x, y, &r)) {
    throw OverflowError("integer overflow in addition");
  }
  return r;
}

inline std::int64_t sub(std::int64_t x, std::int64_t y) {
  std::int64_t r;
  if (__builtin_sub_overflow(x, y, &r)) {
    throw OverflowError("integer overflow in subtraction");
  }
  return r;
}

inline std::int64_t mul(std::int64_t x, std::int64_t y) {
  std::int64_t r;
  if (__builtin_mul_overflow(x, y, &r)) {
    throw OverflowError("integer overflow in multiplication");
  }
  return r;
}

inline std::int64_t neg(std::int64_t x) { return sub(0, x); }

// Least non-negative residue; modulus 0 means no reduction (a copy of Z).
inline std::int64_t reduce_mod(std::int64_t x, std::int64_t modulus) {
  if (modulus == 0) {
    return x;
  }
  std::int64_t r = x % modulus;
  return r < 0 ? r + modulus : r;
}

}  // namespace checked

}  // namespace qh

#endif  // QH_ERROR_HPP_
