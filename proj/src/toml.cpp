#include "qoct/toml.hpp"

#include "qoct/error.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <sstream>

namespace qoct::toml {

namespace {

class Parser {
public:
    Parser(const std::string& text, std::string origin) : s_(text), origin_(std::move(origin)) {}

    Table run() {
        Table root;
        root.line = 1;
        Table* cur = &root;
        while (true) {
            skip_ws_comments_newlines();
            if (eof()) break;
            if (peek() == '[') {
                cur = &header(root);
            } else {
                keyvalue(*cur);
            }
        }
        return root;
    }

private:
    const std::string& s_;
    std::string origin_;
    std::size_t i_ = 0;
    int line_ = 1;

    [[noreturn]] void fail(const std::string& msg) const {
        throw ConfigError(origin_ + ":" + std::to_string(line_) + ": " + msg);
    }
    bool eof() const { return i_ >= s_.size(); }
    char peek() const { return eof() ? '\0' : s_[i_]; }
    char get() {
        const char c = s_[i_++];
        if (c == '\n') ++line_;
        return c;
    }

    void skip_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) get();
    }
    void skip_comment() {
        if (peek() == '#')
            while (!eof() && peek() != '\n') get();
    }
    void skip_ws_comments_newlines() {
        while (!eof()) {
            skip_ws();
            skip_comment();
            if (peek() == '\n') {
                get();
                continue;
            }
            break;
        }
    }
    void end_of_line() {
        skip_ws();
        skip_comment();
        if (!eof() && peek() != '\n') fail("unexpected trailing characters");
    }

    std::string bare_key() {
        std::string k;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-')) k += get();
        if (k.empty()) fail("expected a key");
        return k;
    }

    Table& header(Table& root) {
        get();  // [
        if (peek() == '[') fail("arrays of tables are not supported");
        Table* t = &root;
        while (true) {
            skip_ws();
            const std::string k = bare_key();
            skip_ws();
            auto [it, inserted] = t->tables.try_emplace(k);
            if (inserted) it->second.line = line_;
            t = &it->second;
            if (peek() == '.') {
                get();
                continue;
            }
            if (peek() != ']') fail("expected ']' in table header");
            get();
            break;
        }
        end_of_line();
        return *t;
    }

    void keyvalue(Table& t) {
        const int line = line_;
        const std::string k = bare_key();
        skip_ws();
        if (peek() == '.') fail("dotted keys are not supported; use a [table] header");
        if (peek() != '=') fail("expected '=' after key '" + k + "'");
        get();
        skip_ws();
        Value v = value();
        v.line = line;
        if (t.values.count(k) || t.tables.count(k)) {
            line_ = line;
            fail("duplicate key '" + k + "'");
        }
        t.values.emplace(k, std::move(v));
        end_of_line();
    }

    Value value() {
        Value v;
        v.line = line_;
        const char c = peek();
        if (c == '"') {
            v.data = string();
        } else if (c == '[') {
            v.data = array();
        } else if (s_.compare(i_, 4, "true") == 0) {
            i_ += 4;
            v.data = true;
        } else if (s_.compare(i_, 5, "false") == 0) {
            i_ += 5;
            v.data = false;
        } else {
            number(v);
        }
        return v;
    }

    std::string string() {
        get();  // "
        std::string out;
        while (true) {
            if (eof() || peek() == '\n') fail("unterminated string");
            const char c = get();
            if (c == '"') break;
            if (c == '\\') {
                if (eof()) fail("unterminated escape");
                const char e = get();
                switch (e) {
                    case 'n': out += '\n'; break;
                    case 't': out += '\t'; break;
                    case '"': out += '"'; break;
                    case '\\': out += '\\'; break;
                    default: fail(std::string("unsupported escape '\\") + e + "'");
                }
            } else {
                out += c;
            }
        }
        return out;
    }

    Array array() {
        get();  // [
        Array out;
        while (true) {
            skip_ws_comments_newlines();
            if (eof()) fail("unterminated array");
            if (peek() == ']') {
                get();
                break;
            }
            out.push_back(value());
            skip_ws_comments_newlines();
            if (peek() == ',') {
                get();
                continue;
            }
            if (peek() != ']') fail("expected ',' or ']' in array");
        }
        return out;
    }

    void number(Value& v) {
        std::string tok;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_'))
            tok += get();
        if (tok.empty()) fail("expected a value");
        std::string clean;
        for (char c : tok)
            if (c != '_') clean += c;
        double d = 0.0;
        const char* b = clean.data() + (clean[0] == '+' ? 1 : 0);
        const char* e = clean.data() + clean.size();
        auto [p, ec] = std::from_chars(b, e, d);
        if (ec != std::errc() || p != e) fail("invalid value '" + tok + "'");
        v.data = d;
        v.integer = clean.find_first_of(".eE") == std::string::npos;
    }
};

}  // namespace

Table parse(const std::string& text, const std::string& origin) { return Parser(text, origin).run(); }

Table parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return parse(ss.str(), path);
}

}  // namespace qoct::toml
