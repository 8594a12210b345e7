#pragma once

#include <compare>
#include <functional>
#include <map>
#include <string>

namespace adplan {

// Attribute name -> value. An attribute that is absent is unknown.
using AttributeMap = std::map<std::string, std::string, std::less<>>;

struct EdgeRef {
  std::string node_id;
  std::string contract_id;

  auto operator<=>(const EdgeRef&) const = default;
};

}  // namespace adplan
