#include "json_lines.hpp"

#include <cctype>

namespace freetraj::detail {

namespace {

class Scanner {
public:
    Scanner(std::string_view text, std::map<std::string, std::size_t>& out) : text_(text), out_(out) {}

    void run() { value(""); }

private:
    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) {
            if (text_[pos_] == '\n') ++line_;
            ++pos_;
        }
    }

    std::string string_token() {
        std::string s;
        ++pos_;  // opening quote
        while (pos_ < text_.size() && text_[pos_] != '"') {
            if (text_[pos_] == '\\' && pos_ + 1 < text_.size()) {
                ++pos_;
                if (text_[pos_] == 'u') {
                    s += "\\u";  // keys with unicode escapes keep their spelling
                    ++pos_;
                    continue;
                }
            }
            s += text_[pos_++];
        }
        ++pos_;  // closing quote
        return s;
    }

    static std::string escape(const std::string& key) {
        std::string out;
        for (char c : key) {
            if (c == '~') out += "~0";
            else if (c == '/') out += "~1";
            else out += c;
        }
        return out;
    }

    void value(const std::string& ptr) {
        skip_ws();
        if (pos_ >= text_.size()) return;
        out_.emplace(ptr, line_);
        const char c = text_[pos_];
        if (c == '{') {
            ++pos_;
            for (;;) {
                skip_ws();
                if (pos_ >= text_.size()) return;
                if (text_[pos_] == '}') {
                    ++pos_;
                    return;
                }
                if (text_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                const std::string key = string_token();
                skip_ws();
                ++pos_;  // colon
                value(ptr + "/" + escape(key));
            }
        } else if (c == '[') {
            ++pos_;
            std::size_t index = 0;
            for (;;) {
                skip_ws();
                if (pos_ >= text_.size()) return;
                if (text_[pos_] == ']') {
                    ++pos_;
                    return;
                }
                if (text_[pos_] == ',') {
                    ++pos_;
                    continue;
                }
                value(ptr + "/" + std::to_string(index++));
            }
        } else if (c == '"') {
            (void)string_token();
        } else {
            while (pos_ < text_.size() && text_[pos_] != ',' && text_[pos_] != '}' && text_[pos_] != ']' &&
                   !std::isspace(static_cast<unsigned char>(text_[pos_]))) {
                ++pos_;
            }
        }
    }

    std::string_view text_;
    std::map<std::string, std::size_t>& out_;
    std::size_t pos_ = 0;
    std::size_t line_ = 1;
};

}  // namespace

JsonLineIndex::JsonLineIndex(std::string_view text) { Scanner(text, lines_).run(); }

std::size_t JsonLineIndex::line(const std::string& pointer) const {
    std::string p = pointer;
    for (;;) {
        if (auto it = lines_.find(p); it != lines_.end()) return it->second;
        if (p.empty()) return 1;
        const auto slash = p.rfind('/');
        p = slash == std::string::npos ? std::string() : p.substr(0, slash);
    }
}

}  // namespace freetraj::detail
