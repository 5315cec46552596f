#include "patvcm/fsq.hpp"

#include <string>

namespace patvcm {

FsqSpec::FsqSpec(std::vector<int> levels) : levels_(std::move(levels)) {
  if (levels_.empty()) throw std::domain_error("fsq: at least one dimension required");
  for (int l : levels_) {
    if (l < 2) throw std::domain_error("fsq: level counts must be >= 2");
    size_ *= static_cast<std::uint64_t>(l);
  }
}

void validate_code(const FsqCode& code, const FsqSpec& spec) {
  if (code.size() != spec.dims()) throw std::domain_error("fsq: code dimension does not match levels");
  for (int i = 0; i < spec.dims(); ++i) {
    if (code[i] < 0 || code[i] >= spec.level(i)) {
      throw std::domain_error("fsq: code component " + std::to_string(i) + " out of range");
    }
  }
}

std::uint64_t index_of(const FsqCode& code, const FsqSpec& spec) {
  validate_code(code, spec);
  std::uint64_t index = 0;
  std::uint64_t radix = 1;
  for (int i = 0; i < spec.dims(); ++i) {
    index += static_cast<std::uint64_t>(code[i]) * radix;
    radix *= static_cast<std::uint64_t>(spec.level(i));
  }
  return index;
}

FsqCode code_of(std::uint64_t index, const FsqSpec& spec) {
  if (index >= spec.codebook_size()) throw std::domain_error("fsq: index out of range");
  FsqCode code(spec.dims());
  for (int i = 0; i < spec.dims(); ++i) {
    const auto l = static_cast<std::uint64_t>(spec.level(i));
    code[i] = static_cast<int>(index % l);
    index /= l;
  }
  return code;
}

}  // namespace patvcm
