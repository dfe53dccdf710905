#ifndef PWDFT_IO_HPP
#define PWDFT_IO_HPP

#include <iosfwd>
#include <string>

#include "pwdft/field.hpp"

namespace pwdft {

/// Binary dump of a FourierField ("PWF1"): 4-byte magic, little-endian
/// u32 cutoff index (0 for a box basis), u32 grid size (0 for a ball basis),
/// f64 cell length, u64 coefficient count, then (f64 re, f64 im) pairs in the
/// basis' lexicographic mode order.
void writeField(std::ostream& out, const FourierField& f);
void writeField(const std::string& path, const FourierField& f);
FourierField readField(std::istream& in);
FourierField readField(const std::string& path);

/// Binary dump of a GridField ("PWG1"): same header shape with a zero cutoff
/// column, then raw f64 grid values in the stored (z fastest) order.
void writeGrid(std::ostream& out, const GridField& g);
void writeGrid(const std::string& path, const GridField& g);
GridField readGrid(std::istream& in);
GridField readGrid(const std::string& path);

}  // namespace pwdft

#endif
