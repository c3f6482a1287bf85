#pragma once

// Deterministic JSON emission for reports: object keys sorted, floating
// point values printed with 17 significant digits, non-finite values as null.

#include <cmath>
#include <cstdio>
#include <string>

#include <json.hpp>

namespace agc::report {

using Json = nlohmann::json;

namespace detail {

inline void indent_to(std::string& out, int indent, int depth) {
  if (indent < 0) return;
  out += '\n';
  out.append(static_cast<std::size_t>(indent * depth), ' ');
}

inline void emit(const Json& j, std::string& out, int indent, int depth) {
  switch (j.type()) {
    case Json::value_t::object: {
      if (j.empty()) {
        out += "{}";
        return;
      }
      out += '{';
      bool first = true;
      // nlohmann's default object type is an ordered std::map.
      for (auto it = j.begin(); it != j.end(); ++it) {
        if (!first) out += ',';
        first = false;
        indent_to(out, indent, depth + 1);
        out += Json(it.key()).dump();
        out += indent < 0 ? ":" : ": ";
        emit(it.value(), out, indent, depth + 1);
      }
      indent_to(out, indent, depth);
      out += '}';
      return;
    }
    case Json::value_t::array: {
      if (j.empty()) {
        out += "[]";
        return;
      }
      out += '[';
      bool first = true;
      for (const auto& v : j) {
        if (!first) out += ',';
        first = false;
        indent_to(out, indent, depth + 1);
        emit(v, out, indent, depth + 1);
      }
      indent_to(out, indent, depth);
      out += ']';
      return;
    }
    case Json::value_t::number_float: {
      const double v = j.get<double>();
      if (!std::isfinite(v)) {
        out += "null";
        return;
      }
      char buf[40];
      std::snprintf(buf, sizeof buf, "%.17g", v);
      out += buf;
      return;
    }
    default:
      out += j.dump();
      return;
  }
}

}  // namespace detail

inline std::string dump(const Json& j, int indent = 2) {
  std::string out;
  detail::emit(j, out, indent, 0);
  out += '\n';
  return out;
}

}  // namespace agc::report
