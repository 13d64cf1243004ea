#include "tmm/instance.hpp"

#include "tmm/errors.hpp"

namespace tmm {

MaskedInstance MaskedInstance::complete(std::size_t n, std::size_t s, std::vector<double> values) {
  if (values.size() != n * s) throw ShapeError("instance values do not match N*s");
  MaskedInstance x;
  x.positions = n;
  x.dim = s;
  x.values = std::move(values);
  x.observed.assign(n * s, 1);
  return x;
}

double MaskedInstance::observed_fraction() const {
  if (observed.empty()) return 0.0;
  std::size_t count = 0;
  for (auto m : observed) count += m != 0;
  return static_cast<double>(count) / static_cast<double>(observed.size());
}

void MaskedInstance::validate() const {
  if (values.size() != positions * dim || observed.size() != positions * dim) {
    throw ShapeError("masked instance buffers do not match N*s");
  }
}

}  // namespace tmm
