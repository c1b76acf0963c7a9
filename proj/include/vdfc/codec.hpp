#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json_fwd.hpp>

#include "vdfc/histogram.hpp"
#include "vdfc/wgmm.hpp"

namespace vdfc {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

/// Header metadata carried next to the component payload. Byte layout is
/// documented in FORMATS.md.
struct ModelMeta {
  std::string species_label;
  std::optional<Plane> plane;
  std::int64_t cycle = 0;
  std::vector<AxisRange> axis_ranges;  // one per model dimension
};

struct DecodedModel {
  GmmModel model;
  ModelMeta meta;
};

/// Size in bytes of the component payload: M * (1 + d + d(d+1)/2) * 8.
std::size_t model_payload_bytes(int components, int dimension);

namespace io {
/// Little-endian IEEE double, independent of host endianness.
void put_f64_le(Bytes& out, double v);
double get_f64_le(const std::uint8_t* p);
}  // namespace io

/// Binary .gmmc encoding: CRC-protected header plus little-endian doubles
/// (weight, mean, upper-triangular covariance per component). Models with a
/// non-identity normalization map are denormalized first, so decode returns
/// the canonical form bit-for-bit.
Bytes encode_model(const GmmModel& model, const ModelMeta& meta);

DecodedModel decode_model(ByteView bytes);

/// JSON rendering with the same information content; doubles round-trip
/// exactly through their shortest decimal form.
nlohmann::json model_to_json(const GmmModel& model, const ModelMeta& meta);

DecodedModel model_from_json(const nlohmann::json& j);

/// .h2d payload: n_bins^2 little-endian doubles, row-major with the x bin as
/// the row index. All metadata lives in the JSON sidecar.
Bytes encode_histogram(const Histogram2D& hist);

nlohmann::json histogram_sidecar(const Histogram2D& hist);

Histogram2D decode_histogram(ByteView payload, const nlohmann::json& sidecar);

/// A registered compression backend for the ratio benchmark.
struct BaselineCodec {
  std::string name;
  bool lossy = false;
  std::map<std::string, std::string> params;
  std::function<Bytes(ByteView, const std::map<std::string, std::string>&)> compress;
  std::function<Bytes(ByteView, const std::map<std::string, std::string>&)> decompress;
};

struct BaselineResult {
  Bytes data;
  double seconds = 0.0;
};

/// Name-indexed codec registry. The built-in registry ships "raw" (identity)
/// and "deflate" (zlib). Intended use: register everything at startup, then
/// only run codecs, which is safe concurrently.
class BaselineRegistry {
 public:
  void register_codec(BaselineCodec codec);
  const BaselineCodec& get(const std::string& name) const;
  std::vector<std::string> names() const;

  BaselineResult run(const std::string& name, ByteView input,
                     const std::map<std::string, std::string>& params = {}) const;
  BaselineResult run_decompress(const std::string& name, ByteView input,
                                const std::map<std::string, std::string>& params = {}) const;

  static BaselineRegistry with_builtins();

 private:
  std::map<std::string, BaselineCodec> codecs_;
};

}  // namespace vdfc
