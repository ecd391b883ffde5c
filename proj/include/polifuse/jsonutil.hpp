#pragma once
// Strict JSON object readers: every consumer of a config or record document
// rejects unknown keys so typos fail loudly instead of silently defaulting.

#include <initializer_list>
#include <string>

#include <json.hpp>

#include "common.hpp"

namespace polifuse {
namespace detail {

inline void expect_object(const nlohmann::json& j, const std::string& where) {
  if (!j.is_object()) throw ValidationError(where + " must be a JSON object");
}

inline void expect_keys(const nlohmann::json& j, const std::string& where,
                        std::initializer_list<const char*> keys) {
  expect_object(j, where);
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (const char* k : keys) known = known || it.key() == k;
    if (!known) throw ValidationError("unknown key '" + it.key() + "' in " + where);
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace detail
}  // namespace polifuse
