#include "vdfc/types.hpp"

namespace vdfc {

std::string to_string(Plane p) {
  switch (p) {
    case Plane::uv: return "uv";
    case Plane::vw: return "vw";
    case Plane::uw: return "uw";
  }
  return "uv";
}

Plane plane_from_string(const std::string& s) {
  if (s == "uv") return Plane::uv;
  if (s == "vw") return Plane::vw;
  if (s == "uw") return Plane::uw;
  throw std::invalid_argument("unknown plane '" + s + "' (expected uv, vw or uw)");
}

}  // namespace vdfc
