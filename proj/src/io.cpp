#include "pwdft/io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace pwdft {

namespace {

template <typename T>
void writeScalar(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little,
                "on-disk format is little-endian; big-endian hosts are unsupported");
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T readScalar(std::istream& in) {
  T value;
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw std::runtime_error("field file: truncated input");
  return value;
}

void writeMagic(std::ostream& out, const char* magic) { out.write(magic, 4); }

void expectMagic(std::istream& in, const char* magic) {
  char buf[4];
  in.read(buf, 4);
  if (!in || std::memcmp(buf, magic, 4) != 0)
    throw std::runtime_error(std::string("field file: bad magic, expected ") + magic);
}

std::ofstream openOut(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  return out;
}

std::ifstream openIn(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open for reading: " + path);
  return in;
}

}  // namespace

void writeField(std::ostream& out, const FourierField& f) {
  const PlanewaveBasis& basis = f.basis();
  writeMagic(out, "PWF1");
  const bool ball = basis.kind() == PlanewaveBasis::Kind::Ball;
  writeScalar<std::uint32_t>(out, ball ? static_cast<std::uint32_t>(basis.cutoffIndex()) : 0u);
  writeScalar<std::uint32_t>(out, ball ? 0u : static_cast<std::uint32_t>(basis.gridSize()));
  writeScalar<double>(out, basis.cell().length);
  writeScalar<std::uint64_t>(out, static_cast<std::uint64_t>(basis.size()));
  for (int i = 0; i < basis.size(); ++i) {
    writeScalar<double>(out, f.coeffs()[i].real());
    writeScalar<double>(out, f.coeffs()[i].imag());
  }
  if (!out) throw std::runtime_error("field file: write failure");
}

void writeField(const std::string& path, const FourierField& f) {
  auto out = openOut(path);
  writeField(out, f);
}

FourierField readField(std::istream& in) {
  expectMagic(in, "PWF1");
  const auto nc = readScalar<std::uint32_t>(in);
  const auto ng = readScalar<std::uint32_t>(in);
  const double length = readScalar<double>(in);
  const auto count = readScalar<std::uint64_t>(in);
  if ((nc == 0) == (ng == 0))
    throw std::runtime_error("field file: exactly one of Nc and Ng must be set");
  if (!(length > 0.0)) throw std::runtime_error("field file: cell length must be positive");
  const CellSpec cell(length);
  BasisPtr basis = ng == 0 ? PlanewaveBasis::ball(cell, static_cast<int>(nc))
                           : PlanewaveBasis::box(cell, static_cast<int>(ng));
  if (count != static_cast<std::uint64_t>(basis->size()))
    throw std::runtime_error("field file: coefficient count does not match the basis");
  FourierField f(basis);
  for (int i = 0; i < basis->size(); ++i) {
    const double re = readScalar<double>(in);
    const double im = readScalar<double>(in);
    f.coeffs()[i] = Complex(re, im);
  }
  return f;
}

FourierField readField(const std::string& path) {
  auto in = openIn(path);
  return readField(in);
}

void writeGrid(std::ostream& out, const GridField& g) {
  writeMagic(out, "PWG1");
  writeScalar<std::uint32_t>(out, 0u);
  writeScalar<std::uint32_t>(out, static_cast<std::uint32_t>(g.gridSize()));
  writeScalar<double>(out, g.cell().length);
  writeScalar<std::uint64_t>(out, static_cast<std::uint64_t>(g.pointCount()));
  for (long i = 0; i < g.pointCount(); ++i) writeScalar<double>(out, g.values()[i]);
  if (!out) throw std::runtime_error("grid file: write failure");
}

void writeGrid(const std::string& path, const GridField& g) {
  auto out = openOut(path);
  writeGrid(out, g);
}

GridField readGrid(std::istream& in) {
  expectMagic(in, "PWG1");
  readScalar<std::uint32_t>(in);  // reserved cutoff column
  const auto ng = readScalar<std::uint32_t>(in);
  const double length = readScalar<double>(in);
  const auto count = readScalar<std::uint64_t>(in);
  if (!(length > 0.0)) throw std::runtime_error("grid file: cell length must be positive");
  GridField g(CellSpec(length), static_cast<int>(ng));
  if (count != static_cast<std::uint64_t>(g.pointCount()))
    throw std::runtime_error("grid file: value count does not match the grid");
  for (long i = 0; i < g.pointCount(); ++i) g.values()[i] = readScalar<double>(in);
  return g;
}

GridField readGrid(const std::string& path) {
  auto in = openIn(path);
  return readGrid(in);
}

}  // namespace pwdft
