#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <ostream>
#include <string>
#include <vector>

namespace tnbp {

inline constexpr const char* kEngineVersion = "0.1.0";

// Shortest text that reads back to the same double.
inline std::string fmt(double x) {
    char buf[40];
    for (int prec = 15; prec <= 17; ++prec) {
        std::snprintf(buf, sizeof buf, "%.*g", prec, x);
        if (std::strtod(buf, nullptr) == x) break;
    }
    return buf;
}

// FNV-1a, printed as 16 hex digits.
inline std::string fingerprint(const std::string& text) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : text) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    void comment(const std::string& text) { os_ << "# " << text << '\n'; }

    void header(const std::vector<std::string>& cols) { row(cols); }

    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) {
            if (i) os_ << ',';
            os_ << escape(cells[i]);
        }
        os_ << '\n';
    }

private:
    static std::string escape(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string out = "\"";
        for (char c : s) {
            if (c == '"') out += '"';
            out += c;
        }
        return out + "\"";
    }

    std::ostream& os_;
};

}  // namespace tnbp
