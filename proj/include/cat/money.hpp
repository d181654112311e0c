#pragma once

#include <cstdint>
#include <string>
#include <string_view>

#include "cat/errors.hpp"

namespace cat {

class MoneyParseError : public Error {
public:
    using Error::Error;
};

// Exact decimal money with six fractional digits, stored as integer
// micro-dollars. Ledgers sum these exactly; binary floating point never
// touches a price.
class Money {
public:
    constexpr Money() = default;

    static constexpr Money from_micros(std::int64_t micros) {
        Money m;
        m.micros_ = micros;
        return m;
    }

    // Accepts "3", "0.34", "-1.250000"; more than six fractional digits
    // is an error, not a silent rounding.
    static Money parse(std::string_view text);

    constexpr std::int64_t micros() const { return micros_; }
    constexpr bool is_zero() const { return micros_ == 0; }

    // "0.006000" — always six fractional digits.
    std::string str() const;

    friend constexpr Money operator+(Money a, Money b) {
        return from_micros(a.micros_ + b.micros_);
    }
    friend constexpr Money operator-(Money a, Money b) {
        return from_micros(a.micros_ - b.micros_);
    }
    Money& operator+=(Money other) {
        micros_ += other.micros_;
        return *this;
    }
    friend constexpr bool operator==(Money a, Money b) { return a.micros_ == b.micros_; }
    friend constexpr bool operator!=(Money a, Money b) { return a.micros_ != b.micros_; }
    friend constexpr bool operator<(Money a, Money b) { return a.micros_ < b.micros_; }
    friend constexpr bool operator<=(Money a, Money b) { return a.micros_ <= b.micros_; }
    friend constexpr bool operator>(Money a, Money b) { return a.micros_ > b.micros_; }
    friend constexpr bool operator>=(Money a, Money b) { return a.micros_ >= b.micros_; }

private:
    std::int64_t micros_ = 0;
};

// n / d with ties-to-even, exact integer arithmetic. d > 0.
std::int64_t div_round_half_even(__int128 n, std::int64_t d);

}  // namespace cat
