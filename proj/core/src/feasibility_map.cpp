#include "palletize/feasibility_map.hpp"

#include <algorithm>
#include <fstream>

namespace palletize {

namespace {
constexpr std::uint32_t kBitmapMagic = 0x50414d46;  // "FMAP"
constexpr std::uint32_t kBitmapVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

std::uint32_t get_u32(const std::vector<std::uint8_t>& in, std::size_t at) {
  return static_cast<std::uint32_t>(in[at]) |
         (static_cast<std::uint32_t>(in[at + 1]) << 8) |
         (static_cast<std::uint32_t>(in[at + 2]) << 16) |
         (static_cast<std::uint32_t>(in[at + 3]) << 24);
}
}  // namespace

FeasibilityMap::FeasibilityMap(int length_cells, int width_cells, bool value)
    : length_(length_cells), width_(width_cells) {
  if (length_ < 1 || width_ < 1) {
    throw ConfigError("feasibility map dimensions must be positive");
  }
  cells_.assign(static_cast<std::size_t>(length_) * width_, value ? 1 : 0);
}

std::size_t FeasibilityMap::feasible_count() const {
  return static_cast<std::size_t>(
      std::count(cells_.begin(), cells_.end(), std::uint8_t{1}));
}

std::vector<std::pair<int, int>> FeasibilityMap::feasible_cells() const {
  std::vector<std::pair<int, int>> out;
  for (int x = 0; x < length_; ++x) {
    for (int y = 0; y < width_; ++y) {
      if (at(x, y)) out.emplace_back(x, y);
    }
  }
  return out;
}

std::pair<int, int> FeasibilityMap::nearest_feasible(int x, int y, Rng& rng) const {
  long best = -1;
  std::vector<std::pair<int, int>> ties;
  for (int cx = 0; cx < length_; ++cx) {
    for (int cy = 0; cy < width_; ++cy) {
      if (!at(cx, cy)) continue;
      const long dx = cx - x, dy = cy - y;
      const long d2 = dx * dx + dy * dy;
      if (best < 0 || d2 < best) {
        best = d2;
        ties.clear();
        ties.emplace_back(cx, cy);
      } else if (d2 == best) {
        ties.emplace_back(cx, cy);
      }
    }
  }
  if (ties.empty()) {
    throw Error("nearest_feasible called on an empty mask");
  }
  if (ties.size() == 1) return ties.front();
  return ties[static_cast<std::size_t>(rng.uniform_int(ties.size()))];
}

std::vector<std::uint8_t> FeasibilityMap::to_bitmap() const {
  std::vector<std::uint8_t> out;
  out.reserve(16 + cells_.size() / 8 + 1);
  put_u32(out, kBitmapMagic);
  put_u32(out, kBitmapVersion);
  put_u32(out, static_cast<std::uint32_t>(length_));
  put_u32(out, static_cast<std::uint32_t>(width_));
  std::uint8_t acc = 0;
  int nbits = 0;
  for (std::uint8_t c : cells_) {
    acc |= static_cast<std::uint8_t>((c & 1) << nbits);
    if (++nbits == 8) {
      out.push_back(acc);
      acc = 0;
      nbits = 0;
    }
  }
  if (nbits > 0) out.push_back(acc);
  return out;
}

FeasibilityMap FeasibilityMap::from_bitmap(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 16) throw CorruptLogError("feasibility bitmap truncated");
  if (get_u32(bytes, 0) != kBitmapMagic) {
    throw VersionMismatchError("not a feasibility bitmap");
  }
  if (get_u32(bytes, 4) != kBitmapVersion) {
    throw VersionMismatchError("unsupported feasibility bitmap version");
  }
  const int length = static_cast<int>(get_u32(bytes, 8));
  const int width = static_cast<int>(get_u32(bytes, 12));
  FeasibilityMap map(length, width);
  const std::size_t nbits = map.cells_.size();
  if (bytes.size() < 16 + (nbits + 7) / 8) {
    throw CorruptLogError("feasibility bitmap truncated");
  }
  for (std::size_t i = 0; i < nbits; ++i) {
    map.cells_[i] = (bytes[16 + i / 8] >> (i % 8)) & 1;
  }
  return map;
}

void FeasibilityMap::save_bitmap(const std::string& path) const {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path + " for writing");
  const auto bytes = to_bitmap();
  f.write(reinterpret_cast<const char*>(bytes.data()),
          static_cast<std::streamsize>(bytes.size()));
}

FeasibilityMap FeasibilityMap::load_bitmap(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return from_bitmap(bytes);
}

void FeasibilityMap::save_pgm(const std::string& path) const {
  std::ofstream f(path);
  if (!f) throw Error("cannot open " + path + " for writing");
  f << "P2\n" << width_ << " " << length_ << "\n255\n";
  for (int x = 0; x < length_; ++x) {
    for (int y = 0; y < width_; ++y) {
      f << (at(x, y) ? 255 : 0) << (y + 1 == width_ ? '\n' : ' ');
    }
  }
}

}  // namespace palletize
