#pragma once

#include <algorithm>
#include <initializer_list>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "qkdcoex/error.hpp"

namespace qkdcoex::detail {

// Config objects are strict: a misspelt key is an error, not a silent default.
inline void reject_unknown(const nlohmann::json& j, std::initializer_list<std::string_view> keys,
                           std::string_view where) {
    if (!j.is_object()) throw ConfigError(std::string(where) + ": expected an object");
    for (const auto& [k, v] : j.items()) {
        if (std::find(keys.begin(), keys.end(), k) == keys.end()) {
            throw ConfigError(std::string(where) + ": unknown key '" + k + "'");
        }
    }
}

template <typename T>
void read(const nlohmann::json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace qkdcoex::detail
