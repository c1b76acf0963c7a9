#include "vdfc/codec.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <sstream>

#include <nlohmann/json.hpp>

#include "vdfc/gaussian.hpp"

namespace vdfc {

namespace {

constexpr std::uint8_t kMagic[4] = {'G', 'M', 'M', 'C'};
constexpr std::uint8_t kVersion = 1;
constexpr std::uint8_t kNoPlane = 255;

void put_u8(Bytes& b, std::uint8_t v) { b.push_back(v); }

void put_u16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v & 0xff));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(Bytes& b, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_u64(Bytes& b, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) b.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(Bytes& b, double v) { put_u64(b, std::bit_cast<std::uint64_t>(v)); }

class Reader {
 public:
  explicit Reader(ByteView b) : data_(b) {}

  std::uint8_t u8() { return take(1)[0]; }
  std::uint16_t u16() {
    auto s = take(2);
    return static_cast<std::uint16_t>(s[0] | (s[1] << 8));
  }
  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(s[i]) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(s[i]) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str(std::size_t n) {
    auto s = take(n);
    return std::string(reinterpret_cast<const char*>(s.data()), n);
  }
  std::size_t pos() const { return pos_; }
  std::size_t remaining() const { return data_.size() - pos_; }

 private:
  ByteView take(std::size_t n) {
    if (pos_ + n > data_.size())
      throw CodecError(CodecErrc::truncated, "truncated payload");
    ByteView s = data_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  ByteView data_;
  std::size_t pos_ = 0;
};

std::uint32_t crc32_of(ByteView b) {
  return static_cast<std::uint32_t>(
      ::crc32(0L, reinterpret_cast<const Bytef*>(b.data()), static_cast<uInt>(b.size())));
}

}  // namespace

std::size_t model_payload_bytes(int components, int dimension) {
  return static_cast<std::size_t>(components) *
         (1 + dimension + dimension * (dimension + 1) / 2) * 8;
}

namespace io {

void put_f64_le(Bytes& out, double v) { put_f64(out, v); }

double get_f64_le(const std::uint8_t* p) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
  return std::bit_cast<double>(v);
}

}  // namespace io

Bytes encode_model(const GmmModel& model, const ModelMeta& meta) {
  model.validate();
  const GmmModel canonical =
      model.normalization.is_identity() ? model : denormalize_model(model);
  const int d = canonical.dimension;
  if (meta.axis_ranges.size() != static_cast<std::size_t>(d))
    throw std::invalid_argument("model meta must carry one axis range per dimension");
  if (meta.species_label.size() > 0xffff)
    throw std::invalid_argument("species label too long");

  Bytes out;
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  put_u8(out, kVersion);
  put_u8(out, static_cast<std::uint8_t>(d));
  put_u8(out, meta.plane ? static_cast<std::uint8_t>(*meta.plane) : kNoPlane);
  put_u8(out, 0);  // reserved
  put_u32(out, static_cast<std::uint32_t>(canonical.size()));
  put_u64(out, std::bit_cast<std::uint64_t>(meta.cycle));
  for (const auto& r : meta.axis_ranges) {
    put_f64(out, r.lo);
    put_f64(out, r.hi);
  }
  put_u16(out, static_cast<std::uint16_t>(meta.species_label.size()));
  out.insert(out.end(), meta.species_label.begin(), meta.species_label.end());
  put_u32(out, crc32_of(out));

  for (const auto& c : canonical.components) {
    put_f64(out, c.weight);
    for (int a = 0; a < d; ++a) put_f64(out, c.mean(a));
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) put_f64(out, c.covariance(i, j));
  }
  return out;
}

DecodedModel decode_model(ByteView bytes) {
  Reader r(bytes);
  if (r.str(4) != std::string(reinterpret_cast<const char*>(kMagic), 4))
    throw CodecError(CodecErrc::bad_magic, "bad magic: not a gmmc model");
  const std::uint8_t version = r.u8();
  if (version != kVersion)
    throw CodecError(CodecErrc::unsupported_version,
                     "unsupported version " + std::to_string(version));
  const int d = r.u8();
  if (d < 1 || d > 8) throw CodecError(CodecErrc::truncated, "implausible dimension");
  const std::uint8_t plane_id = r.u8();
  r.u8();  // reserved
  const std::uint32_t m = r.u32();
  DecodedModel out;
  out.meta.cycle = std::bit_cast<std::int64_t>(r.u64());
  out.meta.axis_ranges.resize(d);
  for (int a = 0; a < d; ++a) {
    out.meta.axis_ranges[a].lo = r.f64();
    out.meta.axis_ranges[a].hi = r.f64();
  }
  const std::uint16_t label_len = r.u16();
  out.meta.species_label = r.str(label_len);
  const std::size_t header_len = r.pos();
  const std::uint32_t stored_crc = r.u32();
  if (stored_crc != crc32_of(bytes.subspan(0, header_len)))
    throw CodecError(CodecErrc::bad_crc, "header CRC mismatch");
  if (plane_id != kNoPlane) {
    if (plane_id > 2) throw CodecError(CodecErrc::bad_crc, "invalid plane id");
    out.meta.plane = static_cast<Plane>(plane_id);
  }

  const std::size_t expected = model_payload_bytes(static_cast<int>(m), d);
  if (r.remaining() < expected)
    throw CodecError(CodecErrc::truncated, "truncated payload");
  if (r.remaining() > expected)
    throw CodecError(CodecErrc::size_mismatch, "payload size mismatch vs header");

  out.model.dimension = d;
  out.model.normalization = AffineMap::identity(d);
  out.model.components.resize(m);
  for (auto& c : out.model.components) {
    c.weight = r.f64();
    c.mean.resize(d);
    for (int a = 0; a < d; ++a) c.mean(a) = r.f64();
    Mat cov(d, d);
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) cov(i, j) = r.f64();
    c.set_covariance(std::move(cov));
    Eigen::LLT<Mat> llt(c.covariance);
    if (!llt_ok(llt))
      throw CodecError(CodecErrc::non_spd_covariance,
                       "decoded covariance is not symmetric positive definite");
  }
  return out;
}

nlohmann::json model_to_json(const GmmModel& model, const ModelMeta& meta) {
  model.validate();
  const GmmModel canonical =
      model.normalization.is_identity() ? model : denormalize_model(model);
  const int d = canonical.dimension;
  if (meta.axis_ranges.size() != static_cast<std::size_t>(d))
    throw std::invalid_argument("model meta must carry one axis range per dimension");

  nlohmann::json comps = nlohmann::json::array();
  for (const auto& c : canonical.components) {
    std::vector<double> mean(c.mean.data(), c.mean.data() + d);
    std::vector<double> upper;
    for (int i = 0; i < d; ++i)
      for (int j = i; j < d; ++j) upper.push_back(c.covariance(i, j));
    comps.push_back({{"weight", c.weight}, {"mean", mean}, {"covariance_upper", upper}});
  }
  nlohmann::json ranges = nlohmann::json::array();
  for (const auto& r : meta.axis_ranges) ranges.push_back({r.lo, r.hi});
  return nlohmann::json{{"format", "gmm-model"},
                        {"version", 1},
                        {"dimension", d},
                        {"components", comps},
                        {"plane", meta.plane ? nlohmann::json(to_string(*meta.plane))
                                             : nlohmann::json(nullptr)},
                        {"species", meta.species_label},
                        {"cycle", meta.cycle},
                        {"axis_ranges", ranges}};
}

DecodedModel model_from_json(const nlohmann::json& j) {
  if (j.value("format", "") != "gmm-model")
    throw CodecError(CodecErrc::bad_magic, "not a gmm-model JSON document");
  if (j.at("version").get<int>() != 1)
    throw CodecError(CodecErrc::unsupported_version, "unsupported gmm-model JSON version");
  DecodedModel out;
  const int d = j.at("dimension").get<int>();
  out.model.dimension = d;
  out.model.normalization = AffineMap::identity(d);
  for (const auto& jc : j.at("components")) {
    GaussianComponent c;
    c.weight = jc.at("weight").get<double>();
    const auto mean = jc.at("mean").get<std::vector<double>>();
    const auto upper = jc.at("covariance_upper").get<std::vector<double>>();
    if (mean.size() != static_cast<std::size_t>(d) ||
        upper.size() != static_cast<std::size_t>(d * (d + 1) / 2))
      throw CodecError(CodecErrc::size_mismatch, "component shape mismatch");
    c.mean = Eigen::Map<const Vec>(mean.data(), d);
    Mat cov(d, d);
    std::size_t k = 0;
    for (int i = 0; i < d; ++i)
      for (int jj = i; jj < d; ++jj) cov(i, jj) = upper[k++];
    c.set_covariance(std::move(cov));
    Eigen::LLT<Mat> llt(c.covariance);
    if (!llt_ok(llt))
      throw CodecError(CodecErrc::non_spd_covariance,
                       "decoded covariance is not symmetric positive definite");
    out.model.components.push_back(std::move(c));
  }
  if (!j.at("plane").is_null()) out.meta.plane = plane_from_string(j.at("plane").get<std::string>());
  out.meta.species_label = j.at("species").get<std::string>();
  out.meta.cycle = j.at("cycle").get<std::int64_t>();
  for (const auto& jr : j.at("axis_ranges"))
    out.meta.axis_ranges.push_back({jr.at(0).get<double>(), jr.at(1).get<double>()});
  return out;
}

Bytes encode_histogram(const Histogram2D& hist) {
  const int n = hist.n_bins;
  Bytes out;
  out.reserve(static_cast<std::size_t>(n) * n * 8);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) put_f64(out, hist.counts(i, j));
  return out;
}

nlohmann::json histogram_sidecar(const Histogram2D& hist) {
  return nlohmann::json{{"format", "h2d"},
                        {"version", 1},
                        {"n_bins", hist.n_bins},
                        {"plane", to_string(hist.plane)},
                        {"range_x", {hist.range_x.lo, hist.range_x.hi}},
                        {"range_y", {hist.range_y.lo, hist.range_y.hi}},
                        {"out_of_range_count", hist.out_of_range_count},
                        {"species", hist.species_label}};
}

Histogram2D decode_histogram(ByteView payload, const nlohmann::json& sidecar) {
  if (sidecar.value("format", "") != "h2d")
    throw CodecError(CodecErrc::bad_magic, "not an h2d sidecar");
  if (sidecar.at("version").get<int>() != 1)
    throw CodecError(CodecErrc::unsupported_version, "unsupported h2d version");
  Histogram2D h;
  h.n_bins = sidecar.at("n_bins").get<int>();
  if (h.n_bins < 1) throw CodecError(CodecErrc::size_mismatch, "invalid n_bins");
  const std::size_t expected = static_cast<std::size_t>(h.n_bins) * h.n_bins * 8;
  if (payload.size() != expected) {
    std::ostringstream msg;
    msg << "histogram payload is " << payload.size() << " bytes, header implies " << expected;
    throw CodecError(payload.size() < expected ? CodecErrc::truncated : CodecErrc::size_mismatch,
                     msg.str());
  }
  h.plane = plane_from_string(sidecar.at("plane").get<std::string>());
  h.range_x = {sidecar.at("range_x").at(0).get<double>(), sidecar.at("range_x").at(1).get<double>()};
  h.range_y = {sidecar.at("range_y").at(0).get<double>(), sidecar.at("range_y").at(1).get<double>()};
  h.out_of_range_count = sidecar.at("out_of_range_count").get<double>();
  h.species_label = sidecar.value("species", "");

  Reader r(payload);
  h.counts.resize(h.n_bins, h.n_bins);
  for (int i = 0; i < h.n_bins; ++i)
    for (int j = 0; j < h.n_bins; ++j) h.counts(i, j) = r.f64();
  return h;
}

}  // namespace vdfc
