#pragma once

#include <string>
#include <string_view>
#include <type_traits>
#include <utility>
#include <variant>

namespace tiermem {

enum class Errc {
    BudgetExceeded,
    MessageTooLarge,
    QueueFull,
    SummaryTooLarge,
    EmptyFragment,
    CapacityExceeded,
    NotFound,
    OutOfOrder,
    IdCollision,
    EmptyQuery,
    InvalidRange,
    EmptyText,
    DuplicateName,
    ParseError,
    ValidationError,
    ProcessorUnavailable,
    CorruptSnapshot,
    InvalidEvent,
    InvalidConfig,
    TooFewFragments,
    CycleDetected,
    KeyNotFound,
    Io,
};

std::string_view to_string(Errc code);

struct Error {
    Errc code;
    std::string message;

    std::string what() const;
};

inline Error make_error(Errc code, std::string message = {}) {
    return Error{code, std::move(message)};
}

// Value-or-error. Errors that the processor must see (parse failures,
// capacity errors) travel as data through this type instead of exceptions.
template <typename T>
class [[nodiscard]] Result {
public:
    Result(T value) : v_(std::in_place_index<0>, std::move(value)) {}
    Result(Error error) : v_(std::in_place_index<1>, std::move(error)) {}

    bool ok() const { return v_.index() == 0; }
    explicit operator bool() const { return ok(); }

    T& value() & { return std::get<0>(v_); }
    const T& value() const& { return std::get<0>(v_); }
    T&& value() && { return std::get<0>(std::move(v_)); }

    T& operator*() & { return value(); }
    const T& operator*() const& { return value(); }
    T* operator->() { return &value(); }
    const T* operator->() const { return &value(); }

    const Error& error() const { return std::get<1>(v_); }

private:
    std::variant<T, Error> v_;
};

template <>
class [[nodiscard]] Result<void> {
public:
    Result() = default;
    Result(Error error) : error_(std::move(error)), ok_(false) {}

    bool ok() const { return ok_; }
    explicit operator bool() const { return ok_; }
    const Error& error() const { return error_; }

private:
    Error error_{Errc::Io, {}};
    bool ok_ = true;
};

}  // namespace tiermem
