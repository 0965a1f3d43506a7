#ifndef ODCL_TEXTIO_HPP
#define ODCL_TEXTIO_HPP

#include <cstdio>
#include <istream>
#include <sstream>
#include <string>
#include <vector>

#include "odcl/errors.hpp"

namespace odcl {

// 9 significant digits: exact decimal round-trip for 32-bit floats.
inline std::string format_float(float v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.9g", static_cast<double>(v));
    return buf;
}

// 17 significant digits: exact decimal round-trip for 64-bit floats.
inline std::string format_float(double v) {
    char buf[48];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::vector<std::string> split_whitespace(const std::string& line) {
    std::vector<std::string> out;
    std::istringstream ss(line);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
}

inline std::vector<std::string> split_on(const std::string& s, char sep) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : s) {
        if (c == sep) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

// Line-oriented reader that tracks position for parse-error loci.
class LineReader {
public:
    LineReader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

    // Next non-empty line, trimmed. Returns false at EOF.
    bool next(std::string& out) {
        std::string raw;
        while (std::getline(in_, raw)) {
            ++line_no_;
            out = trim(raw);
            if (!out.empty()) return true;
        }
        return false;
    }

    std::string locus() const { return name_ + ":" + std::to_string(line_no_); }

    [[noreturn]] void fail(const std::string& msg) const {
        throw ParseError(locus() + ": " + msg);
    }

    std::string require(const std::string& expected_head) {
        std::string line;
        if (!next(line)) fail("unexpected end of file, expected '" + expected_head + "'");
        if (line.rfind(expected_head, 0) != 0)
            fail("expected '" + expected_head + "', got '" + line + "'");
        return line;
    }

private:
    std::istream& in_;
    std::string name_;
    int line_no_ = 0;
};

inline long parse_long(const std::string& tok, const LineReader& rd, const char* what) {
    try {
        std::size_t pos = 0;
        long v = std::stol(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(rd.locus() + ": bad integer for " + what + ": '" + tok + "'");
    }
}

inline unsigned long long parse_u64(const std::string& tok, const LineReader& rd,
                                    const char* what) {
    try {
        std::size_t pos = 0;
        unsigned long long v = std::stoull(tok, &pos);
        if (pos != tok.size() || tok[0] == '-') throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(rd.locus() + ": bad unsigned integer for " + what + ": '" + tok + "'");
    }
}

inline double parse_double(const std::string& tok, const LineReader& rd, const char* what) {
    try {
        std::size_t pos = 0;
        double v = std::stod(tok, &pos);
        if (pos != tok.size()) throw std::invalid_argument(tok);
        return v;
    } catch (const std::exception&) {
        throw ParseError(rd.locus() + ": bad number for " + what + ": '" + tok + "'");
    }
}

} // namespace odcl

#endif
