#pragma once

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "gmclab/error.hpp"

namespace gmclab {

using json = nlohmann::json;

// Validator for the JSON Schema subset used by the published schemas:
// type, const, enum, required, properties, additionalProperties, items, minItems, maxItems,
// minLength, minimum, maximum, exclusiveMinimum, exclusiveMaximum, allOf, if/then, local $ref.
class SchemaValidator {
 public:
  explicit SchemaValidator(json schema) : root_(std::move(schema)) {}

  std::vector<std::string> errors(const json& doc) const {
    std::vector<std::string> out;
    check(root_, doc, "$", out);
    return out;
  }

  void validate(const json& doc) const {
    const auto errs = errors(doc);
    if (errs.empty()) return;
    std::string msg = errs.front();
    if (errs.size() > 1) msg += " (+" + std::to_string(errs.size() - 1) + " more)";
    throw Error(Errc::schema_invalid, msg);
  }

 private:
  const json& resolve(const json& s) const {
    if (!s.is_object() || !s.contains("$ref")) return s;
    const std::string ref = s["$ref"].get<std::string>();
    if (ref.rfind("#/", 0) != 0) throw Error(Errc::schema_invalid, "only local $ref supported: " + ref);
    return root_.at(json::json_pointer(ref.substr(1)));
  }

  static bool type_matches(const std::string& t, const json& v) {
    if (t == "object") return v.is_object();
    if (t == "array") return v.is_array();
    if (t == "string") return v.is_string();
    if (t == "boolean") return v.is_boolean();
    if (t == "integer") return v.is_number_integer() || (v.is_number_float() && v.get<double>() == std::floor(v.get<double>()));
    if (t == "number") return v.is_number();
    if (t == "null") return v.is_null();
    return false;
  }

  static bool json_equal(const json& a, const json& b) {
    if (a.is_number() && b.is_number()) return a.get<double>() == b.get<double>();
    return a == b;
  }

  void check(const json& schema_in, const json& v, const std::string& path, std::vector<std::string>& out) const {
    const json& s = resolve(schema_in);
    if (s.is_boolean()) {
      if (!s.get<bool>()) out.push_back(path + ": not allowed");
      return;
    }
    if (s.contains("type")) {
      const json& t = s["type"];
      bool ok = false;
      if (t.is_string()) ok = type_matches(t.get<std::string>(), v);
      else
        for (const auto& x : t) ok = ok || type_matches(x.get<std::string>(), v);
      if (!ok) {
        out.push_back(path + ": expected type " + t.dump());
        return;
      }
    }
    if (s.contains("const") && !json_equal(s["const"], v)) out.push_back(path + ": must equal " + s["const"].dump());
    if (s.contains("enum")) {
      bool ok = false;
      for (const auto& e : s["enum"]) ok = ok || json_equal(e, v);
      if (!ok) out.push_back(path + ": must be one of " + s["enum"].dump());
    }
    if (v.is_number()) {
      const double x = v.get<double>();
      if (s.contains("minimum") && !(x >= s["minimum"].get<double>())) out.push_back(path + ": below minimum");
      if (s.contains("maximum") && !(x <= s["maximum"].get<double>())) out.push_back(path + ": above maximum");
      if (s.contains("exclusiveMinimum") && !(x > s["exclusiveMinimum"].get<double>()))
        out.push_back(path + ": not above exclusiveMinimum");
      if (s.contains("exclusiveMaximum") && !(x < s["exclusiveMaximum"].get<double>()))
        out.push_back(path + ": not below exclusiveMaximum");
    }
    if (v.is_string() && s.contains("minLength") && v.get<std::string>().size() < s["minLength"].get<std::size_t>())
      out.push_back(path + ": string too short");
    if (v.is_array()) {
      if (s.contains("minItems") && v.size() < s["minItems"].get<std::size_t>()) out.push_back(path + ": too few items");
      if (s.contains("maxItems") && v.size() > s["maxItems"].get<std::size_t>()) out.push_back(path + ": too many items");
      if (s.contains("items"))
        for (std::size_t i = 0; i < v.size(); ++i) check(s["items"], v[i], path + "[" + std::to_string(i) + "]", out);
    }
    if (v.is_object()) {
      if (s.contains("required"))
        for (const auto& r : s["required"])
          if (!v.contains(r.get<std::string>())) out.push_back(path + ": missing '" + r.get<std::string>() + "'");
      const bool closed = s.contains("additionalProperties") && s["additionalProperties"].is_boolean() &&
                          !s["additionalProperties"].get<bool>();
      for (const auto& [key, val] : v.items()) {
        const bool known = s.contains("properties") && s["properties"].contains(key);
        if (known) check(s["properties"][key], val, path + "." + key, out);
        else if (closed) out.push_back(path + ": unexpected property '" + key + "'");
      }
    }
    if (s.contains("allOf"))
      for (const auto& sub : s["allOf"]) check(sub, v, path, out);
    if (s.contains("if")) {
      std::vector<std::string> probe;
      check(s["if"], v, path, probe);
      if (probe.empty() && s.contains("then")) check(s["then"], v, path, out);
      if (!probe.empty() && s.contains("else")) check(s["else"], v, path, out);
    }
  }

  json root_;
};

}  // namespace gmclab
