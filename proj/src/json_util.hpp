#pragma once

#include <string>

#include <nlohmann/json.hpp>

#include "sud/error.hpp"

namespace sud::detail {

/// Rejects keys of `j` absent from `defaults` and values whose JSON kind differs
/// from the default's (unsigned fields must be non-negative integers).
inline void check_schema(const nlohmann::json& j, const nlohmann::json& defaults,
                         const std::string& section) {
    if (!j.is_object()) throw ConfigError(section + ": expected a JSON object");
    for (const auto& [key, value] : j.items()) {
        if (!defaults.contains(key)) throw ConfigError(section + ": unknown key '" + key + "'");
        const auto& def = defaults.at(key);
        bool ok = true;
        if (def.is_number_unsigned())
            ok = value.is_number_unsigned();
        else if (def.is_number_integer())
            ok = value.is_number_integer();
        else if (def.is_number())
            ok = value.is_number();
        else if (def.is_string())
            ok = value.is_string();
        else if (def.is_boolean())
            ok = value.is_boolean();
        if (!ok)
            throw ConfigError(section + ": key '" + key + "' has the wrong type (expected " +
                              def.type_name() + ")");
    }
}

}  // namespace sud::detail
