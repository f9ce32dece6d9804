#include "finemotion/text/positional.hpp"

#include <cmath>

#include "finemotion/text/token_encoder.hpp"

namespace finemotion::text {
namespace {

void fill_row(nn::Matrix& m, Eigen::Index row, double position) {
  const auto d = m.cols();
  for (Eigen::Index i = 0; 2 * i < d; ++i) {
    const double freq = std::pow(10000.0, static_cast<double>(2 * i) / static_cast<double>(d));
    m(row, 2 * i) = std::sin(position / freq);
    m(row, 2 * i + 1) = std::cos(position / freq);
  }
}

void require_even(int d) {
  if (d <= 0 || d % 2 != 0)
    throw TextError(TextErrc::OddDimension, "positional encoding needs an even positive width, got " + std::to_string(d));
}

}  // namespace

nn::Matrix positional_encoding(int n, int d) {
  require_even(d);
  nn::Matrix pe(n, d);
  for (int p = 0; p < n; ++p) fill_row(pe, p, p);
  return pe;
}

nn::Matrix segment_positional_encoding(const nn::Segments& segs, int d) {
  require_even(d);
  nn::Matrix pe(segs.total(), d);
  for (int s = 0; s < segs.count(); ++s)
    for (int p = 0; p < segs.size(s); ++p) fill_row(pe, segs.begin(s) + p, p);
  return pe;
}

nn::Matrix timestep_encoding(const std::vector<int>& timesteps, int d) {
  require_even(d);
  nn::Matrix pe(static_cast<Eigen::Index>(timesteps.size()), d);
  for (std::size_t r = 0; r < timesteps.size(); ++r) fill_row(pe, static_cast<Eigen::Index>(r), timesteps[r]);
  return pe;
}

}  // namespace finemotion::text
