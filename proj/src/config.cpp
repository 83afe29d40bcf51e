#include "qcd/config.hpp"

#include <cctype>
#include <charconv>
#include <fstream>
#include <limits>
#include <sstream>

namespace qcd::config {

namespace {

struct Parser {
    const std::string& text;
    std::size_t pos = 0;
    int line = 1;

    [[noreturn]] void fail(const std::string& what) const {
        throw ConfigError("config parse error at line " + std::to_string(line) + ": " + what);
    }

    bool eof() const { return pos >= text.size(); }
    char peek() const { return text[pos]; }

    char advance() {
        const char c = text[pos++];
        if (c == '\n') ++line;
        return c;
    }

    void skip_inline_ws() {
        while (!eof() && (peek() == ' ' || peek() == '\t' || peek() == '\r')) ++pos;
    }

    // Whitespace, newlines, comments.
    void skip_ws_and_comments() {
        for (;;) {
            skip_inline_ws();
            if (eof()) return;
            if (peek() == '#') {
                while (!eof() && peek() != '\n') ++pos;
                continue;
            }
            if (peek() == '\n') {
                advance();
                continue;
            }
            return;
        }
    }

    std::string parse_bare_key() {
        const std::size_t start = pos;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' || peek() == '-' ||
                          peek() == '.'))
            ++pos;
        if (pos == start) fail("expected a key");
        return text.substr(start, pos - start);
    }

    std::string parse_string() {
        if (advance() != '"') fail("expected '\"'");
        std::string out;
        while (!eof()) {
            const char c = advance();
            if (c == '"') return out;
            if (c == '\n') fail("unterminated string");
            if (c == '\\') {
                if (eof()) fail("unterminated escape");
                const char e = advance();
                switch (e) {
                    case '"': out.push_back('"'); break;
                    case '\\': out.push_back('\\'); break;
                    case 'n': out.push_back('\n'); break;
                    case 't': out.push_back('\t'); break;
                    default: fail(std::string("unsupported escape '\\") + e + "'");
                }
            } else {
                out.push_back(c);
            }
        }
        fail("unterminated string");
    }

    nlohmann::json parse_number_or_symbol() {
        const std::size_t start = pos;
        while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '+' || peek() == '-' ||
                          peek() == '.' || peek() == '_'))
            ++pos;
        const std::string tok = text.substr(start, pos - start);
        if (tok.empty()) fail("expected a value");
        if (tok == "true") return true;
        if (tok == "false") return false;
        if (tok == "inf") return "inf";    // JSON carries infinities as strings
        if (tok == "-inf") return "-inf";
        // Integer first so 42 stays an integer in the canonical form.
        {
            std::int64_t v{};
            auto [p, ec] = std::from_chars(tok.data(), tok.data() + tok.size(), v);
            if (ec == std::errc() && p == tok.data() + tok.size()) return v;
        }
        try {
            std::size_t used = 0;
            const double v = std::stod(tok, &used);
            if (used == tok.size()) return v;
        } catch (...) {
        }
        fail("invalid value '" + tok + "'");
    }

    nlohmann::json parse_value() {
        skip_inline_ws();
        if (eof()) fail("expected a value");
        const char c = peek();
        if (c == '"') return parse_string();
        if (c == '[') return parse_array();
        if (c == '{') return parse_inline_table();
        return parse_number_or_symbol();
    }

    nlohmann::json parse_array() {
        advance();  // '['
        nlohmann::json arr = nlohmann::json::array();
        for (;;) {
            skip_ws_and_comments();
            if (eof()) fail("unterminated array");
            if (peek() == ']') {
                advance();
                return arr;
            }
            arr.push_back(parse_value());
            skip_ws_and_comments();
            if (!eof() && peek() == ',') {
                advance();
                continue;
            }
            if (!eof() && peek() == ']') {
                advance();
                return arr;
            }
            fail("expected ',' or ']' in array");
        }
    }

    nlohmann::json parse_inline_table() {
        advance();  // '{'
        nlohmann::json obj = nlohmann::json::object();
        skip_inline_ws();
        if (!eof() && peek() == '}') {
            advance();
            return obj;
        }
        for (;;) {
            skip_inline_ws();
            const std::string key = parse_bare_key();
            skip_inline_ws();
            if (eof() || advance() != '=') fail("expected '=' in inline table");
            obj[key] = parse_value();
            skip_inline_ws();
            if (!eof() && peek() == ',') {
                advance();
                continue;
            }
            if (!eof() && peek() == '}') {
                advance();
                return obj;
            }
            fail("expected ',' or '}' in inline table");
        }
    }
};

nlohmann::json* descend(nlohmann::json& root, const std::string& dotted, Parser& p) {
    nlohmann::json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const std::size_t dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot == std::string::npos ? dot : dot - start);
        if (part.empty()) p.fail("empty component in key '" + dotted + "'");
        if (!node->is_object()) p.fail("'" + dotted + "' indexes into a non-table value");
        node = &(*node)[part];
        if (dot == std::string::npos) return node;
        start = dot + 1;
    }
}

}  // namespace

nlohmann::json parse_kv(const std::string& text) {
    Parser p{text};
    nlohmann::json root = nlohmann::json::object();
    nlohmann::json* table = &root;
    for (;;) {
        p.skip_ws_and_comments();
        if (p.eof()) return root;
        if (p.peek() == '[') {
            p.advance();
            p.skip_inline_ws();
            const std::string name = p.parse_bare_key();
            p.skip_inline_ws();
            if (p.eof() || p.advance() != ']') p.fail("expected ']' after table name");
            table = descend(root, name, p);
            if (!table->is_object()) {
                if (table->is_null())
                    *table = nlohmann::json::object();
                else
                    p.fail("table '" + name + "' conflicts with an existing value");
            }
            continue;
        }
        const std::string key = p.parse_bare_key();
        p.skip_inline_ws();
        if (p.eof() || p.advance() != '=') p.fail("expected '=' after key '" + key + "'");
        nlohmann::json* slot = descend(*table, key, p);
        *slot = p.parse_value();
        p.skip_inline_ws();
        if (!p.eof() && p.peek() != '\n' && p.peek() != '#') p.fail("trailing characters after value");
    }
}

nlohmann::json load_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    const std::string text = buffer.str();
    if (path.size() >= 5 && path.compare(path.size() - 5, 5, ".json") == 0) {
        const auto j = nlohmann::json::parse(text, nullptr, false);
        if (j.is_discarded()) throw ConfigError("invalid JSON in config file: " + path);
        return j;
    }
    return parse_kv(text);
}

std::string config_hash(const nlohmann::json& j) {
    const std::string canon = j.dump();
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : canon) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Cursor::Cursor(const nlohmann::json& j, std::string path) : j_(&j), path_(std::move(path)) {}

void Cursor::fail(const std::string& what) const {
    throw ConfigError("config error at '" + (path_.empty() ? "<root>" : path_) + "': " + what);
}

Cursor Cursor::at(const std::string& key) const {
    auto child = maybe(key);
    if (!child) fail("missing required field '" + key + "'");
    return *child;
}

std::optional<Cursor> Cursor::maybe(const std::string& key) const {
    if (!j_->is_object()) fail("expected a table");
    const auto it = j_->find(key);
    if (it == j_->end()) return std::nullopt;
    return Cursor(*it, path_.empty() ? key : path_ + "." + key);
}

bool Cursor::has(const std::string& key) const { return maybe(key).has_value(); }

double Cursor::number() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
}

std::int64_t Cursor::integer() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    return j_->get<std::int64_t>();
}

std::string Cursor::str() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
}

bool Cursor::boolean() const {
    if (!j_->is_boolean()) fail("expected a boolean");
    return j_->get<bool>();
}

double Cursor::number_or_inf() const {
    if (j_->is_string()) {
        const auto s = j_->get<std::string>();
        if (s == "inf") return std::numeric_limits<double>::infinity();
        if (s == "-inf") return -std::numeric_limits<double>::infinity();
        fail("expected a number or \"inf\"");
    }
    return number();
}

std::size_t Cursor::size() const {
    if (!j_->is_array()) fail("expected an array");
    return j_->size();
}

Cursor Cursor::index(std::size_t i) const {
    if (!j_->is_array() || i >= j_->size()) fail("array index " + std::to_string(i) + " out of range");
    return Cursor((*j_)[i], path_ + "[" + std::to_string(i) + "]");
}

std::vector<double> Cursor::number_array() const {
    std::vector<double> out;
    out.reserve(size());
    for (std::size_t i = 0; i < size(); ++i) out.push_back(index(i).number());
    return out;
}

}  // namespace qcd::config
