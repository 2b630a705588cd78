#include "wfctl/core/message.hpp"

#include <algorithm>

namespace wfctl::core {

bool Arity::accepts(std::size_t n) const {
  if (variable()) return n > 0 && n % multiple_of == 0;
  return std::find(counts.begin(), counts.end(), n) != counts.end();
}

std::string Arity::describe() const {
  if (variable()) return "k*" + std::to_string(multiple_of);
  std::string out;
  for (std::size_t i = 0; i < counts.size(); ++i) {
    if (i) out += "|";
    out += std::to_string(counts[i]);
  }
  return out.empty() ? "none" : out;
}

bool is_standard_count(std::size_t n) { return n == 0 || n == 3 || n == 6 || n == 7; }

}  // namespace wfctl::core
