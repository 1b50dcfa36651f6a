#pragma once

#include <cstdint>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace stangen {

struct SourceSpan {
    uint32_t line = 0;      // 1-based; 0 means "no location"
    uint32_t column = 0;    // 1-based
    uint32_t end_line = 0;
    uint32_t end_column = 0;
};

enum class Severity { Error, Warning };

struct Diagnostic {
    Severity severity = Severity::Error;
    std::string code;       // stable machine-readable id, e.g. "missing-model-block"
    std::string message;
    SourceSpan span;
};

// Sink for diagnostics produced by the front end passes. Formatting follows
// `file:line:col: severity[code]: message`, one line per diagnostic.
class Diagnostics {
public:
    void error(std::string code, std::string message, SourceSpan span = {}) {
        items_.push_back({Severity::Error, std::move(code), std::move(message), span});
        ++error_count_;
    }

    void warning(std::string code, std::string message, SourceSpan span = {}) {
        items_.push_back({Severity::Warning, std::move(code), std::move(message), span});
    }

    bool has_errors() const { return error_count_ > 0; }
    size_t error_count() const { return error_count_; }
    bool empty() const { return items_.empty(); }
    const std::vector<Diagnostic>& items() const { return items_; }

    void print(std::ostream& os, const std::string& file) const {
        for (const auto& d : items_) {
            os << file << ':' << d.span.line << ':' << d.span.column << ": "
               << (d.severity == Severity::Error ? "error" : "warning") << '[' << d.code
               << "]: " << d.message << '\n';
        }
    }

    std::string to_string(const std::string& file = "<input>") const {
        std::ostringstream os;
        print(os, file);
        return os.str();
    }

    bool has_code(const std::string& code) const {
        for (const auto& d : items_)
            if (d.code == code) return true;
        return false;
    }

private:
    std::vector<Diagnostic> items_;
    size_t error_count_ = 0;
};

}  // namespace stangen
