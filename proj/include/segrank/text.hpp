#pragma once

#include <cctype>
#include <string>
#include <string_view>
#include <vector>

namespace segrank {

inline bool is_ws(unsigned char c) {
    return std::isspace(c) != 0;
}

inline std::string to_lower(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    for (unsigned char c : s) {
        out.push_back(static_cast<char>(std::tolower(c)));
    }
    return out;
}

/// Splits on whitespace runs; never yields empty tokens.
inline std::vector<std::string> split_ws(std::string_view s) {
    std::vector<std::string> out;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && is_ws(static_cast<unsigned char>(s[i]))) ++i;
        std::size_t j = i;
        while (j < s.size() && !is_ws(static_cast<unsigned char>(s[j]))) ++j;
        if (j > i) out.emplace_back(s.substr(i, j - i));
        i = j;
    }
    return out;
}

inline std::string join(const std::string* first, std::size_t count, std::string_view sep = " ") {
    std::string out;
    for (std::size_t i = 0; i < count; ++i) {
        if (i > 0) out.append(sep);
        out.append(first[i]);
    }
    return out;
}

inline std::string join(const std::vector<std::string>& tokens, std::string_view sep = " ") {
    return join(tokens.data(), tokens.size(), sep);
}

/// Lowercases and collapses whitespace runs to single spaces, trimming the ends.
/// Applied identically to n-gram table keys at load time and at lookup time.
inline std::string normalize(std::string_view s) {
    std::string out;
    out.reserve(s.size());
    bool pending_sep = false;
    for (unsigned char c : s) {
        if (is_ws(c)) {
            if (!out.empty()) pending_sep = true;
        } else {
            if (pending_sep) {
                out.push_back(' ');
                pending_sep = false;
            }
            out.push_back(static_cast<char>(std::tolower(c)));
        }
    }
    return out;
}

/// Number of tokens in an already-normalized (single-spaced) string.
inline int token_count(std::string_view normalized) {
    if (normalized.empty()) return 0;
    int n = 1;
    for (char c : normalized) {
        if (c == ' ') ++n;
    }
    return n;
}

}  // namespace segrank
