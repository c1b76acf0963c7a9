#include "vdfc/pdf_grid.hpp"

namespace vdfc {

PdfGrid PdfGrid::normalized(const GridSpec& spec, Mat raw) {
  if (!spec.valid()) throw std::invalid_argument("invalid grid spec");
  if (raw.rows() != spec.n_bins || raw.cols() != spec.n_bins)
    throw std::invalid_argument("pdf grid shape does not match spec");
  if ((raw.array() < 0.0).any())
    throw std::invalid_argument("pdf grid values must be non-negative");
  const double total = raw.sum() * spec.bin_area();
  if (!(total > 0.0) || !std::isfinite(total))
    throw std::invalid_argument("degenerate pdf grid: total mass is zero or non-finite");
  PdfGrid out;
  out.spec = spec;
  out.values = std::move(raw);
  out.values /= total;
  return out;
}

}  // namespace vdfc
