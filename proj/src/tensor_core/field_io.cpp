#include "l2flow/field_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>

namespace l2flow {
namespace {

constexpr char kMagic[8] = {'L', '2', 'F', 'F', 'I', 'E', 'L', 'D'};
constexpr std::uint32_t kVersion = 1;

template <class T>
void put(std::ostream& os, T v) {
  static_assert(sizeof(T) == 4 || sizeof(T) == 8);
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  U u = std::bit_cast<U>(v);
  unsigned char b[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) b[i] = static_cast<unsigned char>((u >> (8 * i)) & 0xff);
  os.write(reinterpret_cast<const char*>(b), sizeof(T));
}

template <class T>
T get(std::istream& is) {
  using U = std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>;
  unsigned char b[sizeof(T)];
  if (!is.read(reinterpret_cast<char*>(b), sizeof(T))) throw Error(ErrorKind::Io, "truncated field file");
  U u = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) u |= static_cast<U>(b[i]) << (8 * i);
  return std::bit_cast<T>(u);
}

}  // namespace

void write_field_binary(const Field& f, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  os.write(kMagic, sizeof(kMagic));
  put<std::uint32_t>(os, kVersion);
  put<std::int32_t>(os, f.grid().n());
  for (int a = 0; a < 4; ++a) put<double>(os, f.grid().period(a));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.name().size()));
  os.write(f.name().data(), static_cast<std::streamsize>(f.name().size()));
  put<std::uint32_t>(os, static_cast<std::uint32_t>(f.components()));
  for (double v : f.data()) put<double>(os, v);
  if (!os) throw Error(ErrorKind::Io, "write failed for " + path);
}

Field read_field_binary(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw Error(ErrorKind::Io, "cannot open " + path);
  char magic[8];
  if (!is.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) throw Error(ErrorKind::Io, path + " is not a field snapshot");
  if (get<std::uint32_t>(is) != kVersion) throw Error(ErrorKind::Io, path + ": unsupported snapshot version");
  const int n = get<std::int32_t>(is);
  std::array<double, 4> periods{};
  for (double& l : periods) l = get<double>(is);
  const auto name_len = get<std::uint32_t>(is);
  std::string name(name_len, '\0');
  if (!is.read(name.data(), name_len)) throw Error(ErrorKind::Io, "truncated field file");
  const auto comps = get<std::uint32_t>(is);
  Field f(TorusGrid(n, periods), static_cast<int>(comps), name);
  for (double& v : f.data()) v = get<double>(is);
  return f;
}

void write_field_csv(const Field& f, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw Error(ErrorKind::Io, "cannot open " + path + " for writing");
  os << "i0,i1,i2,i3";
  for (int c = 0; c < f.components(); ++c) os << ",c" << c;
  os << "\n" << std::setprecision(17);
  for (std::size_t p = 0; p < f.points(); ++p) {
    const auto ix = f.grid().coords(p);
    os << ix[0] << ',' << ix[1] << ',' << ix[2] << ',' << ix[3];
    for (int c = 0; c < f.components(); ++c) os << ',' << f(p, c);
    os << '\n';
  }
}

}  // namespace l2flow
