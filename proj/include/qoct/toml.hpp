#pragma once

#include <map>
#include <string>
#include <variant>
#include <vector>

namespace qoct::toml {

struct Value;
using Array = std::vector<Value>;

struct Value {
    std::variant<double, bool, std::string, Array> data;
    bool integer = false;  // number written without fraction/exponent
    int line = 0;

    bool is_number() const { return std::holds_alternative<double>(data); }
    bool is_bool() const { return std::holds_alternative<bool>(data); }
    bool is_string() const { return std::holds_alternative<std::string>(data); }
    bool is_array() const { return std::holds_alternative<Array>(data); }
};

struct Table {
    std::map<std::string, Value> values;
    std::map<std::string, Table> tables;
    int line = 0;
};

// Subset: [table] and [a.b] headers, bare keys, numbers, booleans, basic
// strings, (multi-line) arrays, comments. Errors are std::runtime_error
// with "origin:line: message".
Table parse(const std::string& text, const std::string& origin = "<string>");
Table parse_file(const std::string& path);

}  // namespace qoct::toml
