#pragma once

#include <cassert>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <variant>

namespace tickets {

// Every failure in the system maps to exactly one of these. The string form
// (error_name) is what travels on the wire and what the CLI prints.
enum class ErrorCode {
  kInvalidArgument,
  kInternal,
  kResourceExhausted,
  // TPM
  kInvalidHandle,
  kNotActivated,
  kWrongPlatform,
  kAlreadyActivated,
  kForeignBlob,
  kMalformedBlob,
  kForbiddenAikSigning,
  kForbiddenKeyRole,
  // PCA
  kDuplicateEk,
  kUnregisteredPlatform,
  kUnknownGroup,
  kBlacklisted,
  kAlreadyIssued,
  kHandshakeFailed,
  kForbidden,
  kNotFound,
  kCpDeclined,
  // CP
  kUnknownAccount,
  kLimitExceeded,
  kInvalidShares,
  // RS
  kInvalidChain,
  kWrongRs,
  kDoubleSpend,
  kBadPayload,
  kTicketRevoked,
  // wire
  kProtocolError,
  kUnknownEndpoint,
  kTransportError,
  kConfigError,
};

std::string_view error_name(ErrorCode code);
std::optional<ErrorCode> error_from_name(std::string_view name);

struct Error {
  ErrorCode code;
  std::string detail;

  std::string to_string() const;
  friend bool operator==(const Error&, const Error&) = default;
};

inline Error make_error(ErrorCode code, std::string detail = {}) {
  return Error{code, std::move(detail)};
}

// Value-or-error return type used across service boundaries.
template <typename T>
class [[nodiscard]] Result {
 public:
  Result(T value) : data_(std::move(value)) {}
  Result(Error error) : data_(std::move(error)) {}

  bool ok() const { return data_.index() == 0; }
  explicit operator bool() const { return ok(); }

  T& value() & {
    assert(ok());
    return std::get<0>(data_);
  }
  const T& value() const& {
    assert(ok());
    return std::get<0>(data_);
  }
  T&& value() && {
    assert(ok());
    return std::get<0>(std::move(data_));
  }
  T* operator->() { return &value(); }
  const T* operator->() const { return &value(); }
  T& operator*() & { return value(); }
  const T& operator*() const& { return value(); }

  const Error& error() const {
    assert(!ok());
    return std::get<1>(data_);
  }
  ErrorCode code() const { return error().code; }

 private:
  std::variant<T, Error> data_;
};

template <>
class [[nodiscard]] Result<void> {
 public:
  Result() = default;
  Result(Error error) : error_(std::move(error)) {}

  bool ok() const { return !error_.has_value(); }
  explicit operator bool() const { return ok(); }
  const Error& error() const {
    assert(!ok());
    return *error_;
  }
  ErrorCode code() const { return error().code; }

 private:
  std::optional<Error> error_;
};

using Status = Result<void>;

}  // namespace tickets
