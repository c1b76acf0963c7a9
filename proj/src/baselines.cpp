#include <zlib.h>

#include <chrono>
#include <sstream>

#include "vdfc/codec.hpp"

namespace vdfc {

namespace {

Bytes zlib_compress(ByteView input, const std::map<std::string, std::string>& params) {
  int level = Z_DEFAULT_COMPRESSION;
  if (auto it = params.find("level"); it != params.end()) level = std::stoi(it->second);

  uLongf bound = compressBound(static_cast<uLong>(input.size()));
  Bytes out(bound);
  const int rc = compress2(out.data(), &bound, reinterpret_cast<const Bytef*>(input.data()),
                           static_cast<uLong>(input.size()), level);
  if (rc != Z_OK) throw std::runtime_error("deflate compression failed");
  out.resize(bound);
  return out;
}

Bytes zlib_decompress(ByteView input, const std::map<std::string, std::string>& params) {
  std::size_t capacity = 4 * input.size() + 1024;
  if (auto it = params.find("expected_bytes"); it != params.end())
    capacity = std::stoull(it->second);
  for (;;) {
    Bytes out(capacity);
    uLongf len = static_cast<uLongf>(out.size());
    const int rc = uncompress(out.data(), &len, reinterpret_cast<const Bytef*>(input.data()),
                              static_cast<uLong>(input.size()));
    if (rc == Z_OK) {
      out.resize(len);
      return out;
    }
    if (rc == Z_BUF_ERROR) {
      capacity *= 2;
      continue;
    }
    throw std::runtime_error("deflate decompression failed");
  }
}

}  // namespace

void BaselineRegistry::register_codec(BaselineCodec codec) {
  if (codec.name.empty()) throw std::invalid_argument("baseline codec needs a name");
  if (codecs_.count(codec.name))
    throw std::invalid_argument("baseline codec '" + codec.name + "' already registered");
  codecs_.emplace(codec.name, std::move(codec));
}

const BaselineCodec& BaselineRegistry::get(const std::string& name) const {
  auto it = codecs_.find(name);
  if (it == codecs_.end()) {
    std::ostringstream msg;
    msg << "unknown codec '" << name << "'; registered:";
    for (const auto& [n, _] : codecs_) msg << " " << n;
    throw CodecError(CodecErrc::unknown_codec, msg.str());
  }
  return it->second;
}

std::vector<std::string> BaselineRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(codecs_.size());
  for (const auto& [n, _] : codecs_) out.push_back(n);
  return out;
}

BaselineResult BaselineRegistry::run(const std::string& name, ByteView input,
                                     const std::map<std::string, std::string>& params) const {
  const BaselineCodec& codec = get(name);
  const auto t0 = std::chrono::steady_clock::now();
  Bytes data = codec.compress(input, params.empty() ? codec.params : params);
  const auto t1 = std::chrono::steady_clock::now();
  return {std::move(data), std::chrono::duration<double>(t1 - t0).count()};
}

BaselineResult BaselineRegistry::run_decompress(
    const std::string& name, ByteView input,
    const std::map<std::string, std::string>& params) const {
  const BaselineCodec& codec = get(name);
  const auto t0 = std::chrono::steady_clock::now();
  Bytes data = codec.decompress(input, params.empty() ? codec.params : params);
  const auto t1 = std::chrono::steady_clock::now();
  return {std::move(data), std::chrono::duration<double>(t1 - t0).count()};
}

BaselineRegistry BaselineRegistry::with_builtins() {
  BaselineRegistry reg;
  reg.register_codec(BaselineCodec{
      "raw",
      /*lossy=*/false,
      {},
      [](ByteView in, const auto&) { return Bytes(in.begin(), in.end()); },
      [](ByteView in, const auto&) { return Bytes(in.begin(), in.end()); },
  });
  reg.register_codec(BaselineCodec{
      "deflate",
      /*lossy=*/false,
      {{"level", "6"}},
      zlib_compress,
      zlib_decompress,
  });
  return reg;
}

}  // namespace vdfc
