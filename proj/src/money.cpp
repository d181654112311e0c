#include "cat/money.hpp"

#include <cctype>
#include <cstdlib>

namespace cat {

Money Money::parse(std::string_view text) {
    std::string_view s = text;
    if (!s.empty() && s.front() == '$') s.remove_prefix(1);
    if (s.empty()) throw MoneyParseError("empty money literal");

    bool negative = false;
    if (s.front() == '-' || s.front() == '+') {
        negative = s.front() == '-';
        s.remove_prefix(1);
    }
    if (s.empty()) throw MoneyParseError("money literal has no digits: '" + std::string(text) + "'");

    std::int64_t whole = 0;
    std::size_t i = 0;
    if (i >= s.size() || !std::isdigit(static_cast<unsigned char>(s[i])))
        throw MoneyParseError("money literal has no digits: '" + std::string(text) + "'");
    for (; i < s.size() && std::isdigit(static_cast<unsigned char>(s[i])); ++i) {
        whole = whole * 10 + (s[i] - '0');
        if (whole > 9'000'000'000'000)
            throw MoneyParseError("money literal out of range: '" + std::string(text) + "'");
    }

    std::int64_t frac = 0;
    int frac_digits = 0;
    if (i < s.size()) {
        if (s[i] != '.') throw MoneyParseError("bad money literal: '" + std::string(text) + "'");
        ++i;
        for (; i < s.size(); ++i, ++frac_digits) {
            if (!std::isdigit(static_cast<unsigned char>(s[i])))
                throw MoneyParseError("bad money literal: '" + std::string(text) + "'");
            if (frac_digits >= 6)
                throw MoneyParseError("money supports at most 6 fractional digits: '" +
                                      std::string(text) + "'");
            frac = frac * 10 + (s[i] - '0');
        }
    }
    for (; frac_digits < 6; ++frac_digits) frac *= 10;

    std::int64_t micros = whole * 1000000 + frac;
    return from_micros(negative ? -micros : micros);
}

std::string Money::str() const {
    std::int64_t v = micros_;
    bool negative = v < 0;
    if (negative) v = -v;
    std::string frac = std::to_string(v % 1000000);
    frac.insert(0, 6 - frac.size(), '0');
    std::string out = negative ? "-" : "";
    out += std::to_string(v / 1000000);
    out += '.';
    out += frac;
    return out;
}

std::int64_t div_round_half_even(__int128 n, std::int64_t d) {
    bool negative = n < 0;
    if (negative) n = -n;
    __int128 q = n / d;
    __int128 r = n % d;
    if (2 * r > d || (2 * r == d && (q & 1) != 0)) ++q;
    return static_cast<std::int64_t>(negative ? -q : q);
}

}  // namespace cat
